//! Gradient flow over the continuation parameter s.
//!
//! The flow integrates ∂E/∂s = ±δJ/δE with an embedded Dormand–Prince
//! 5(4) pair and per-step error control, records every accepted field,
//! and lands exactly on the requested objective level by bisecting the
//! final step in step size. The trajectory linearity ratio
//! R = d_PL / d_EL is computed from chord sums over the recorded samples.

use rand::Rng;

use crate::dynamics::{fluence, ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::landscape::Functional;
use crate::system::Direction;

/// Flow orientation on the landscape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    Ascend,
    Descend,
}

impl FlowDirection {
    /// The orientation that climbs toward an objective's optimum.
    pub fn natural(direction: Direction) -> Self {
        match direction {
            Direction::Maximize => FlowDirection::Ascend,
            Direction::Minimize => FlowDirection::Descend,
        }
    }

    fn sign(self) -> f64 {
        match self {
            FlowDirection::Ascend => 1.0,
            FlowDirection::Descend => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowConfig {
    pub direction: FlowDirection,
    /// J^I sits this fraction of the landscape range above the start side.
    pub j_start_fraction: f64,
    /// J^F sits this fraction of the landscape range short of the far side.
    pub j_end_fraction: f64,
    /// Relative local error target per integrator step.
    pub rel_step_tolerance: f64,
    /// Absolute landing tolerance on J; None derives 1e-6 × range.
    pub level_tolerance: Option<f64>,
    pub max_s_steps: usize,
    pub record_every_step: bool,
}

impl FlowConfig {
    pub fn new(direction: FlowDirection) -> Self {
        FlowConfig {
            direction,
            j_start_fraction: 0.01,
            j_end_fraction: 0.01,
            rel_step_tolerance: 3e-5,
            level_tolerance: None,
            max_s_steps: 100_000,
            record_every_step: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j_start_fraction", self.j_start_fraction),
            ("j_end_fraction", self.j_end_fraction),
        ] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::Config(format!(
                    "{name} must lie in (0, 0.5), got {v}"
                )));
            }
        }
        if !(self.rel_step_tolerance > 0.0) {
            return Err(Error::Config("rel_step_tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Landing tolerance for a landscape of the given range.
    pub fn level_tol(&self, j_range: (f64, f64)) -> f64 {
        self.level_tolerance
            .unwrap_or(1e-6 * (j_range.1 - j_range.0).abs())
    }

    /// (J^I, J^F) for this direction over the given range.
    pub fn levels(&self, j_range: (f64, f64)) -> (f64, f64) {
        let (lo, hi) = j_range;
        let width = hi - lo;
        match self.direction {
            FlowDirection::Ascend => (
                lo + self.j_start_fraction * width,
                hi - self.j_end_fraction * width,
            ),
            FlowDirection::Descend => (
                hi - self.j_start_fraction * width,
                lo + self.j_end_fraction * width,
            ),
        }
    }
}

/// Record of one flow: fields, objective values, and gradient norms at
/// every accepted value of s.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub s_values: Vec<f64>,
    pub fields: Vec<ControlField>,
    pub j_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Path length accumulated through the integrator's dense interpolant
    /// (sub-chords inside every accepted step). Plain chord sums between
    /// accepted samples under-resolve curved paths badly enough to fail
    /// the step-doubling convergence guard, so flows record this refined
    /// measure; hand-built trajectories leave it unset.
    pub dense_path_length: Option<f64>,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    pub fn initial_field(&self) -> &ControlField {
        self.fields.first().expect("non-empty trajectory")
    }

    pub fn final_field(&self) -> &ControlField {
        self.fields.last().expect("non-empty trajectory")
    }
}

/// Random field from the windowed multimode ansatz
/// E(t) = (1/F)·exp[−0.3(t−T/2)²]·Σ_{n=1..M} a_n sin(n t + φ_n),
/// with a_n ~ U[0,1], φ_n ~ U[0,2π] and F fixed so the fluence is 1.
pub fn generate_random_field<R: Rng>(
    grid: TimeGrid,
    modes: usize,
    rng: &mut R,
) -> Result<ControlField> {
    assert!(modes >= 1, "at least one mode");
    for _attempt in 0..16 {
        let mut amps = Vec::with_capacity(modes);
        let mut phases = Vec::with_capacity(modes);
        for _ in 0..modes {
            amps.push(rng.gen::<f64>());
            phases.push(rng.gen::<f64>() * std::f64::consts::TAU);
        }
        let field = eq_field_from_params(grid, &amps, &phases);
        let raw_fluence = fluence(&field);
        if raw_fluence > 1e-30 {
            let scale = raw_fluence.sqrt();
            let values = field.values.iter().map(|v| v / scale).collect();
            return ControlField::new(grid, values);
        }
    }
    Err(Error::DegenerateField)
}

/// The deterministic part of the random-field ansatz, un-normalized.
pub fn eq_field_from_params(grid: TimeGrid, amps: &[f64], phases: &[f64]) -> ControlField {
    debug_assert_eq!(amps.len(), phases.len());
    let t_half = grid.horizon / 2.0;
    let values = (0..grid.n_points)
        .map(|k| {
            let t = grid.time(k);
            let envelope = (-0.3 * (t - t_half) * (t - t_half)).exp();
            let sum: f64 = amps
                .iter()
                .zip(phases)
                .enumerate()
                .map(|(n, (a, p))| a * ((n + 1) as f64 * t + p).sin())
                .sum();
            envelope * sum
        })
        .collect();
    ControlField { grid, values }
}

/// Normalizes a raw ansatz field to unit fluence.
pub fn normalize_fluence(field: &ControlField) -> Result<ControlField> {
    let raw = fluence(field);
    if raw <= 1e-30 {
        return Err(Error::DegenerateField);
    }
    let scale = raw.sqrt();
    ControlField::new(field.grid, field.values.iter().map(|v| v / scale).collect())
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights (row 6 of A is also B) and error weights B − B*.
const ERR: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];
// Continuous-output weights for the quartic interpolant.
const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Number of interpolant sub-chords accumulated per accepted step.
const DENSE_SUBDIVISIONS: usize = 8;

/// Path length of one accepted step through the dense interpolant
/// y(θ) = r1 + θ(r2 + (1−θ)(r3 + θ(r4 + (1−θ) r5))).
fn dense_step_length(grid: TimeGrid, y0: &[f64], y1: &[f64], stages: &[Vec<f64>], h: f64) -> f64 {
    let n = y0.len();
    let mut r5 = vec![0.0; n];
    for (j, kj) in stages.iter().enumerate() {
        let d = DENSE[j];
        if d != 0.0 {
            for i in 0..n {
                r5[i] += d * kj[i];
            }
        }
    }
    let k1 = &stages[0];
    let k7 = &stages[6];
    let mut prev: Vec<f64> = y0.to_vec();
    let mut cur = vec![0.0; n];
    let mut acc = 0.0;
    let mut diff = vec![0.0; n];
    for step in 1..=DENSE_SUBDIVISIONS {
        if step == DENSE_SUBDIVISIONS {
            cur.copy_from_slice(y1);
        } else {
            let th = step as f64 / DENSE_SUBDIVISIONS as f64;
            let th1 = 1.0 - th;
            for i in 0..n {
                let ydiff = y1[i] - y0[i];
                let r3 = h * k1[i] - ydiff;
                let r4 = ydiff - h * k7[i] - r3;
                cur[i] = y0[i] + th * (ydiff + th1 * (r3 + th * (r4 + th1 * h * r5[i])));
            }
        }
        for i in 0..n {
            diff[i] = cur[i] - prev[i];
        }
        acc += grid.tnorm(&diff);
        std::mem::swap(&mut prev, &mut cur);
    }
    acc
}

struct FlowEngine<'a, F: Functional + ?Sized> {
    f: &'a mut F,
    sign: f64,
    grid: TimeGrid,
    evals: usize,
}

impl<'a, F: Functional + ?Sized> FlowEngine<'a, F> {
    /// (J, sign·g, ‖g‖_T) at the given field samples.
    fn deriv(&mut self, values: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        self.evals += 1;
        let field = ControlField {
            grid: self.grid,
            values: values.to_vec(),
        };
        let (j, g) = self.f.value_and_gradient(&field)?;
        let norm = g.tnorm();
        let mut d = g.values;
        if self.sign < 0.0 {
            for v in d.iter_mut() {
                *v = -*v;
            }
        }
        Ok((j, d, norm))
    }

    fn value(&mut self, values: &[f64]) -> Result<f64> {
        self.evals += 1;
        let field = ControlField {
            grid: self.grid,
            values: values.to_vec(),
        };
        self.f.value(&field)
    }

    /// One 5th-order step of size h from y with derivative k1; returns
    /// (y5, stages k1..k6). The 7th (FSAL) stage is the derivative at y5
    /// and is evaluated by the caller, which also needs J there.
    fn rk_stages(&mut self, y: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = y.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(6);
        k.push(k1.to_vec());
        let mut stage = vec![0.0; n];
        for row in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    let a = A[row][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                stage[i] = y[i] + h * acc;
            }
            if row < 5 {
                let (_, d, _) = self.deriv(&stage)?;
                k.push(d);
            }
        }
        // the last tableau row holds the 5th-order weights, so the final
        // stage vector is the solution itself
        let y5 = stage;
        Ok((y5, k))
    }
}

fn err_norm(grid: TimeGrid, k: &[Vec<f64>], y5_minus_stage_err: &mut [f64], h: f64) -> f64 {
    let n = y5_minus_stage_err.len();
    for item in y5_minus_stage_err.iter_mut() {
        *item = 0.0;
    }
    for (j, kj) in k.iter().enumerate() {
        let e = ERR[j];
        if e != 0.0 {
            for i in 0..n {
                y5_minus_stage_err[i] += e * kj[i];
            }
        }
    }
    for item in y5_minus_stage_err.iter_mut() {
        *item *= h;
    }
    grid.tnorm(y5_minus_stage_err)
}

struct FlowOutcome {
    trajectory: FlowTrajectory,
    #[allow(dead_code)]
    evals: usize,
}

/// Core driver: integrate sign·g until J crosses `target_j`, bisecting the
/// final step in h so the last sample lands within `level_tol` of the target.
fn run_flow<F: Functional + ?Sized>(
    f: &mut F,
    start: &ControlField,
    target_j: f64,
    sign: f64,
    cfg: &FlowConfig,
    level_tol: f64,
) -> Result<FlowOutcome> {
    let grid = start.grid;
    let mut eng = FlowEngine {
        f,
        sign,
        grid,
        evals: 0,
    };
    let (j0, k1_init, gn0) = eng.deriv(&start.values)?;

    let mut traj = FlowTrajectory {
        s_values: vec![0.0],
        fields: vec![start.clone()],
        j_values: vec![j0],
        grad_norms: vec![gn0],
        dense_path_length: Some(0.0),
    };
    let mut dense_acc = 0.0f64;
    if (j0 - target_j).abs() <= level_tol {
        return Ok(FlowOutcome {
            trajectory: traj,
            evals: eng.evals,
        });
    }
    let stall_floor = 1e-12 * gn0;

    let mut y = start.values.clone();
    let mut k1 = k1_init;
    let mut j_prev = j0;
    let mut s = 0.0;
    let field_scale = grid.tnorm(&y).max(1.0);
    let mut h = 1e-3 * field_scale / gn0.max(1e-12);
    let mut err_buf = vec![0.0; y.len()];
    let mut accepted = 0usize;
    let mut consecutive_rejects = 0usize;

    loop {
        if accepted >= cfg.max_s_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: cfg.max_s_steps,
                j: j_prev,
                target: target_j,
            });
        }
        let (y5, k) = eng.rk_stages(&y, &k1, h)?;
        let (j_new, d_new, gn_new) = eng.deriv(&y5)?;
        let mut stages = k;
        stages.push(d_new.clone());
        let err = err_norm(grid, &stages, &mut err_buf, h);
        let tol = cfg.rel_step_tolerance * grid.tnorm(&y).max(1.0);
        if err <= tol {
            consecutive_rejects = 0;
            let crossed = (j_new - target_j) * (j_prev - target_j) < 0.0;
            let landed = (j_new - target_j).abs() <= level_tol;
            if crossed && !landed {
                // bisect the step size to land on the target level
                let mut lo = 0.0f64;
                let mut hi = h;
                let mut y_land = y5;
                let mut j_land = j_new;
                let mut k_land = stages[..6].to_vec();
                let mut h_land = h;
                for _ in 0..80 {
                    if (j_land - target_j).abs() <= level_tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let (y_mid, k_mid) = eng.rk_stages(&y, &k1, mid)?;
                    let j_mid = eng.value(&y_mid)?;
                    if (j_mid - target_j) * (j_prev - target_j) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    y_land = y_mid;
                    j_land = j_mid;
                    k_land = k_mid;
                    h_land = mid;
                }
                s += h_land;
                let (_, d_land, gn_land) = eng.deriv(&y_land)?;
                k_land.push(d_land);
                dense_acc += dense_step_length(grid, &y, &y_land, &k_land, h_land);
                traj.s_values.push(s);
                traj.fields.push(ControlField {
                    grid,
                    values: y_land,
                });
                traj.j_values.push(j_land);
                traj.grad_norms.push(gn_land);
                traj.dense_path_length = Some(dense_acc);
                return Ok(FlowOutcome {
                    trajectory: traj,
                    evals: eng.evals,
                });
            }
            dense_acc += dense_step_length(grid, &y, &y5, &stages, h);
            s += h;
            accepted += 1;
            y = y5;
            k1 = d_new; // FSAL
            j_prev = j_new;
            let field = ControlField {
                grid,
                values: y.clone(),
            };
            if cfg.record_every_step || landed {
                traj.s_values.push(s);
                traj.fields.push(field);
                traj.j_values.push(j_new);
                traj.grad_norms.push(gn_new);
            }
            if landed {
                traj.dense_path_length = Some(dense_acc);
                return Ok(FlowOutcome {
                    trajectory: traj,
                    evals: eng.evals,
                });
            }
            if gn_new < stall_floor {
                return Err(Error::GradientStall {
                    norm: gn_new,
                    j: j_new,
                    target: target_j,
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            consecutive_rejects += 1;
            if consecutive_rejects > 60 {
                return Err(Error::StepSizeUnderflow { h });
            }
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.9);
            if h < 1e-300 {
                return Err(Error::StepSizeUnderflow { h });
            }
        }
    }
}

/// Flows a field to the requested objective level, ascending or descending
/// as needed; the returned field sits within the landing tolerance.
pub fn adjust_to_level<F: Functional + ?Sized>(
    f: &mut F,
    field: &ControlField,
    target_j: f64,
    cfg: &FlowConfig,
) -> Result<ControlField> {
    cfg.validate()?;
    let (lo, hi) = f.j_range();
    if !(target_j > lo && target_j < hi) {
        return Err(Error::LevelOutOfRange {
            target: target_j,
            lo,
            hi,
        });
    }
    let level_tol = cfg.level_tol((lo, hi));
    let j0 = f.value(field)?;
    if (j0 - target_j).abs() <= level_tol {
        return Ok(field.clone());
    }
    let sign = if j0 < target_j { 1.0 } else { -1.0 };
    let outcome = run_flow(f, field, target_j, sign, cfg, level_tol)?;
    Ok(outcome.trajectory.fields.last().expect("non-empty").clone())
}

/// Full climb from J^I to J^F with per-step recording.
///
/// The initial field must already sit at J^I (see [`adjust_to_level`]).
pub fn dmorph_flow<F: Functional + ?Sized>(
    f: &mut F,
    initial_field: &ControlField,
    cfg: &FlowConfig,
) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let range = f.j_range();
    let level_tol = cfg.level_tol(range);
    let (j_i, j_f) = cfg.levels(range);
    let j0 = f.value(initial_field)?;
    if (j0 - j_i).abs() > level_tol.max(1e-12) {
        return Err(Error::NotAtLevel {
            j: j0,
            level: j_i,
            tol: level_tol,
        });
    }
    let outcome = run_flow(f, initial_field, j_f, cfg.direction.sign(), cfg, level_tol)?;
    Ok(outcome.trajectory)
}

/// [(1/T)∫ (b−a)² dt]^(1/2): control-space distance between two fields.
pub fn euclidean_distance(a: &ControlField, b: &ControlField) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| y - x).collect();
    Ok(a.grid.tnorm(&diff))
}

/// Control trajectory path length: the integrator's dense accumulation
/// when present, otherwise the chord sum over recorded samples.
pub fn path_length(traj: &FlowTrajectory) -> f64 {
    if let Some(dense) = traj.dense_path_length {
        return dense;
    }
    let mut acc = 0.0;
    for w in traj.fields.windows(2) {
        acc += euclidean_distance(&w[0], &w[1]).expect("trajectory shares one grid");
    }
    acc
}

/// R = d_PL / d_EL ≥ 1; the trajectory linearity measure.
pub fn ratio_r(traj: &FlowTrajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::ZeroDisplacement);
    }
    let d_el = euclidean_distance(traj.initial_field(), traj.final_field())?;
    if d_el <= 1e-300 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(path_length(traj) / d_el)
}

/// Climbs along the fixed initial-gradient direction until the objective
/// turns over, then refines the best point on the ray.
///
/// Returns the best field found and its objective value; if the start is
/// already a maximum along the ray, the initial field comes back.
pub fn straight_march<F: Functional + ?Sized>(
    f: &mut F,
    initial_field: &ControlField,
) -> Result<(ControlField, f64)> {
    let grid = initial_field.grid;
    let improve = match f.direction() {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let (j0, g) = f.value_and_gradient(initial_field)?;
    let gn = g.tnorm();
    if gn <= 1e-300 {
        return Ok((initial_field.clone(), j0));
    }
    // unit direction in the (1/T)∫·² metric so λ is control-space distance
    let dir: Vec<f64> = g.values.iter().map(|v| improve * v / gn).collect();
    let at = |field: &ControlField, lambda: f64| -> ControlField {
        let values = field
            .values
            .iter()
            .zip(&dir)
            .map(|(e, d)| e + lambda * d)
            .collect();
        ControlField { grid, values }
    };
    let score = |j: f64| improve * j;

    let mut lambdas = vec![0.0];
    let mut scores = vec![score(j0)];
    let mut lambda = 0.01 * (1.0 + grid.tnorm(&initial_field.values));
    let mut best_idx = 0;
    for _ in 0..200 {
        let j = f.value(&at(initial_field, lambda))?;
        lambdas.push(lambda);
        scores.push(score(j));
        let i = scores.len() - 1;
        if scores[i] > scores[best_idx] {
            best_idx = i;
        } else if i >= best_idx + 2 {
            break; // past the local maximum along the ray
        }
        lambda *= 1.6;
    }
    // golden-section refinement around the best sample
    let mut lo = if best_idx == 0 {
        0.0
    } else {
        lambdas[best_idx - 1]
    };
    let mut hi = *lambdas.get(best_idx + 1).unwrap_or(lambdas.last().unwrap());
    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
    let mut x1 = lo + phi * (hi - lo);
    let mut x2 = hi - phi * (hi - lo);
    let mut f1 = score(f.value(&at(initial_field, x1))?);
    let mut f2 = score(f.value(&at(initial_field, x2))?);
    for _ in 0..40 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - phi * (hi - lo);
            f2 = score(f.value(&at(initial_field, x2))?);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + phi * (hi - lo);
            f1 = score(f.value(&at(initial_field, x1))?);
        }
    }
    let (lambda_best, score_best) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if score_best <= score(j0) {
        return Ok((initial_field.clone(), j0));
    }
    Ok((at(initial_field, lambda_best), improve * score_best))
}
