//! Statistical post-processing of flow batches, the Hessian-gradient
//! eigen-relation scan, and the straight-shot search.

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::es::{DerandomizedEs, EsParams};
use crate::flow::{
    adjust_to_level, dmorph_flow, eq_field_from_params, normalize_fluence, ratio_r, FlowConfig,
    FlowTrajectory,
};
use crate::landscape::{hessian, Functional, HessianMethod, LandscapeEvaluator};
use crate::rng::substream;
use crate::system::{LandscapeObjective, QuantumSystem};

/// Summary of one completed landscape climb.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    pub r_value: f64,
    pub d_pl: f64,
    pub d_el: f64,
    pub j_start: f64,
    pub j_end: f64,
    pub n_steps: usize,
    pub initial_field: ControlField,
    pub final_field: ControlField,
}

/// Which distances to draw from two field collections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    WithinA,
    WithinB,
    /// All a×b pairs, or index-matched pairs only.
    Cross {
        matched: bool,
    },
}

/// Euclidean control-space distances between field pairs.
pub fn pairwise_distances(
    fields_a: &[ControlField],
    fields_b: &[ControlField],
    mode: PairMode,
) -> Result<Vec<f64>> {
    let within = |list: &[ControlField]| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(list.len() * list.len().saturating_sub(1) / 2);
        for i in 0..list.len() {
            for j in (i + 1)..list.len() {
                out.push(crate::flow::euclidean_distance(&list[i], &list[j])?);
            }
        }
        Ok(out)
    };
    match mode {
        PairMode::WithinA => within(fields_a),
        PairMode::WithinB => within(fields_b),
        PairMode::Cross { matched: true } => {
            if fields_a.len() != fields_b.len() {
                return Err(Error::Config(
                    "matched cross distances need equally long lists".into(),
                ));
            }
            fields_a
                .iter()
                .zip(fields_b)
                .map(|(a, b)| crate::flow::euclidean_distance(a, b))
                .collect()
        }
        PairMode::Cross { matched: false } => {
            let mut out = Vec::with_capacity(fields_a.len() * fields_b.len());
            for a in fields_a {
                for b in fields_b {
                    out.push(crate::flow::euclidean_distance(a, b)?);
                }
            }
            Ok(out)
        }
    }
}

/// Bottom-k and top-k records by R (stable: ties break on run_id).
pub fn split_by_r(records: &[RunRecord], k: usize) -> Result<(Vec<RunRecord>, Vec<RunRecord>)> {
    if 2 * k > records.len() {
        return Err(Error::Config(format!(
            "split k = {k} exceeds half of {} records",
            records.len()
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[a]
            .r_value
            .total_cmp(&records[b].r_value)
            .then(records[a].run_id.cmp(&records[b].run_id))
    });
    let lowest = order[..k].iter().map(|&i| records[i].clone()).collect();
    let highest = order[records.len() - k..]
        .iter()
        .map(|&i| records[i].clone())
        .collect();
    Ok((lowest, highest))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Fixed-width binning from `origin` to the sample maximum.
pub fn histogram_from(origin: f64, bin_width: f64, values: &[f64]) -> Vec<HistBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    if values.is_empty() {
        return Vec::new();
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_bins = ((((max - origin) / bin_width).floor() as isize + 1).max(1)) as usize;
    let mut bins: Vec<HistBin> = (0..n_bins)
        .map(|i| HistBin {
            lo: origin + i as f64 * bin_width,
            hi: origin + (i + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &v in values {
        let idx = (((v - origin) / bin_width).floor() as isize).clamp(0, n_bins as isize - 1);
        bins[idx as usize].count += 1;
    }
    bins
}

#[derive(Debug, Clone)]
pub struct RHistogram {
    pub bins: Vec<HistBin>,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

/// Histogram of R values binned from 1.0, with summary statistics.
pub fn r_histogram(records: &[RunRecord], bin_width: f64) -> RHistogram {
    let values: Vec<f64> = records.iter().map(|r| r.r_value).collect();
    let bins = histogram_from(1.0, bin_width, &values);
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.is_empty() {
        f64::NAN
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let max = sorted.last().copied().unwrap_or(f64::NAN);
    RHistogram {
        bins,
        mean,
        median,
        max,
    }
}

/// One scanned point of the eigen-relation test.
#[derive(Debug, Clone)]
pub struct EigenRelationSample {
    pub s: f64,
    /// ĝ·𝓗·ĝ under the trapezoidal inner product.
    pub rayleigh: f64,
    /// Spectrum of the quadrature-weighted Hessian operator, ascending.
    pub hessian_spectrum: Vec<f64>,
    pub nearest_eig_gap: f64,
    /// Masked average of g(s,t)/ΔE(t).
    pub rho_prime: f64,
    /// ρ''(s)/ρ'(s) from differencing rho_prime over s.
    pub rho_ratio: f64,
}

/// Spectrum of W^(1/2)·H·W^(1/2), the symmetric form of the Hessian acting
/// through the trapezoidal inner product.
pub fn weighted_hessian_spectrum(h: &crate::landscape::HessianMatrix) -> Result<Vec<f64>> {
    let n = h.grid.n_points;
    let mut m = ndarray::Array2::<f64>::zeros((n, n));
    let sqrt_w: Vec<f64> = (0..n).map(|k| h.grid.weight(k).sqrt()).collect();
    for k in 0..n {
        for l in 0..n {
            m[[k, l]] = sqrt_w[k] * h.values[[k, l]] * sqrt_w[l];
        }
    }
    crate::linalg::eigvalsh_real(&m)
}

/// Fraction of max|ΔE| below which time points are excluded from the
/// ρ'(s) average.
const DELTA_MASK_FRACTION: f64 = 1e-3;

/// Tests the Hessian-gradient eigen-relation along a recorded trajectory.
///
/// Every `stride`-th sample gets a Hessian build (2·n_points gradient
/// evaluations), its weighted spectrum, the Rayleigh quotient ĝ·𝓗·ĝ, and
/// the masked ρ'(s) average; ρ''(s) follows by centered differencing over
/// the scanned s values.
pub fn eigen_relation_scan(
    system: &QuantumSystem,
    objective: &LandscapeObjective,
    traj: &FlowTrajectory,
    stride: usize,
) -> Result<Vec<EigenRelationSample>> {
    assert!(stride >= 1);
    if traj.len() < 2 {
        return Err(Error::Config("trajectory too short to scan".into()));
    }
    let grid = traj.initial_field().grid;
    let delta: Vec<f64> = traj
        .final_field()
        .values
        .iter()
        .zip(&traj.initial_field().values)
        .map(|(f, i)| f - i)
        .collect();
    let delta_max = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mask: Vec<bool> = delta
        .iter()
        .map(|d| d.abs() >= DELTA_MASK_FRACTION * delta_max)
        .collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyDeltaMask);
    }
    let indices: Vec<usize> = (0..traj.len()).step_by(stride).collect();

    struct Point {
        s: f64,
        rayleigh: f64,
        spectrum: Vec<f64>,
        gap: f64,
        rho_prime: f64,
    }
    let points: Vec<Point> = indices
        .par_iter()
        .map(|&i| -> Result<Point> {
            let mut ev = LandscapeEvaluator::new(system, objective)?;
            let field = &traj.fields[i];
            let (_, g) = ev.value_and_gradient(field)?;
            let dot = grid.dot(&g.values, &g.values);
            let gnorm = dot.sqrt();
            let ghat: Vec<f64> = g.values.iter().map(|v| v / gnorm).collect();
            let h = hessian(&mut ev, field, HessianMethod::FdOfGradient)?;
            let n = grid.n_points;
            let mut rayleigh = 0.0;
            for k in 0..n {
                let mut inner = 0.0;
                for l in 0..n {
                    inner += h.values[[k, l]] * grid.weight(l) * ghat[l];
                }
                rayleigh += grid.weight(k) * ghat[k] * inner;
            }
            let spectrum = weighted_hessian_spectrum(&h)?;
            let gap = spectrum
                .iter()
                .map(|e| (rayleigh - e).abs())
                .fold(f64::INFINITY, f64::min);
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..n {
                if mask[k] {
                    num += grid.weight(k) * g.values[k] / delta[k];
                    den += grid.weight(k);
                }
            }
            Ok(Point {
                s: traj.s_values[i],
                rayleigh,
                spectrum,
                gap,
                rho_prime: num / den,
            })
        })
        .collect::<Result<_>>()?;

    let m = points.len();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let rho_second = if m < 2 {
            0.0
        } else if i == 0 {
            (points[1].rho_prime - points[0].rho_prime) / (points[1].s - points[0].s)
        } else if i + 1 == m {
            (points[i].rho_prime - points[i - 1].rho_prime) / (points[i].s - points[i - 1].s)
        } else {
            let h1 = points[i].s - points[i - 1].s;
            let h2 = points[i + 1].s - points[i].s;
            -h2 / (h1 * (h1 + h2)) * points[i - 1].rho_prime
                + (h2 - h1) / (h1 * h2) * points[i].rho_prime
                + h1 / (h2 * (h1 + h2)) * points[i + 1].rho_prime
        };
        let p = &points[i];
        out.push(EigenRelationSample {
            s: p.s,
            rayleigh: p.rayleigh,
            hessian_spectrum: p.spectrum.clone(),
            nearest_eig_gap: p.gap,
            rho_prime: p.rho_prime,
            rho_ratio: rho_second / p.rho_prime,
        });
    }
    Ok(out)
}

/// Inputs for the straight-shot search.
#[derive(Debug, Clone)]
pub struct SearchSettings {
    pub grid: TimeGrid,
    /// Number of ansatz modes M; the search space is the 2M amplitudes
    /// and phases.
    pub modes: usize,
    /// Candidate evaluations (full flows) to spend.
    pub budget: usize,
    pub seed: u64,
    /// Full-accuracy flow configuration; the search itself runs 10×
    /// looser and the reported best is re-verified at full tolerance.
    pub flow: FlowConfig,
    /// Stop early once the search-tolerance R reaches this.
    pub target_r: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Unit-fluence ansatz field of the best candidate.
    pub best_field: ControlField,
    /// R of the best candidate at full tolerance.
    pub best_r: f64,
    /// R of the best candidate as seen by the search.
    pub best_r_search: f64,
    pub evaluations: usize,
}

fn r_for_params(
    system: &QuantumSystem,
    objective: &LandscapeObjective,
    grid: TimeGrid,
    params: &[f64],
    cfg: &FlowConfig,
) -> f64 {
    let modes = params.len() / 2;
    let raw = eq_field_from_params(grid, &params[..modes], &params[modes..]);
    let Ok(field) = normalize_fluence(&raw) else {
        return f64::INFINITY;
    };
    let Ok(mut ev) = LandscapeEvaluator::new(system, objective) else {
        return f64::INFINITY;
    };
    let (j_i, _) = cfg.levels(ev.j_range());
    let Ok(start) = adjust_to_level(&mut ev, &field, j_i, cfg) else {
        return f64::INFINITY;
    };
    let Ok(traj) = dmorph_flow(&mut ev, &start, cfg) else {
        return f64::INFINITY;
    };
    ratio_r(&traj).unwrap_or(f64::INFINITY)
}

/// Searches the 2M ansatz parameters for an initial field whose full
/// climb is as straight as possible (minimal R).
///
/// Runs whole generations, so the spend may exceed `budget` by at most
/// one population. Budget exhaustion returns the best found so far.
pub fn straight_shot_search(
    system: &QuantumSystem,
    objective: &LandscapeObjective,
    settings: &SearchSettings,
) -> Result<SearchOutcome> {
    let dim = 2 * settings.modes;
    let params = EsParams::standard(dim);
    assert!(
        settings.budget >= params.population,
        "budget below one population"
    );
    let mut init_rng = substream(settings.seed, 0, "es-init");
    let mut mean0 = Vec::with_capacity(dim);
    for _ in 0..settings.modes {
        mean0.push(init_rng.gen::<f64>());
    }
    for _ in 0..settings.modes {
        mean0.push(init_rng.gen::<f64>() * std::f64::consts::TAU);
    }
    let mut scales = vec![0.5; settings.modes];
    scales.extend(vec![2.0; settings.modes]);
    let mut es = DerandomizedEs::new(params, mean0, 0.3, &scales);

    let mut search_cfg = settings.flow;
    search_cfg.rel_step_tolerance = settings.flow.rel_step_tolerance * 10.0;

    let mut evaluations = 0usize;
    let mut generation = 0u64;
    while evaluations < settings.budget {
        let mut gen_rng = substream(settings.seed, generation + 1, "es-gen");
        let candidates = es.ask(&mut gen_rng);
        let fitness: Vec<f64> = candidates
            .par_iter()
            .map(|c| r_for_params(system, objective, settings.grid, &c.x, &search_cfg))
            .collect();
        evaluations += fitness.len();
        es.tell(&candidates, &fitness);
        generation += 1;
        if let Some(target) = settings.target_r {
            if es.best().1 <= target {
                break;
            }
        }
    }
    let (best_x, best_r_search) = es.best();
    let modes = settings.modes;
    let raw = eq_field_from_params(settings.grid, &best_x[..modes], &best_x[modes..]);
    let best_field = normalize_fluence(&raw)?;
    let best_r = r_for_params(system, objective, settings.grid, best_x, &settings.flow);
    Ok(SearchOutcome {
        best_field,
        best_r,
        best_r_search,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{generate_random_field, FlowDirection};
    use crate::system::{build_preset, PresetTag};

    fn toy_record(run_id: u64, r: f64, grid: TimeGrid) -> RunRecord {
        RunRecord {
            run_id,
            seed: run_id,
            r_value: r,
            d_pl: r,
            d_el: 1.0,
            j_start: 0.01,
            j_end: 0.99,
            n_steps: 10,
            initial_field: ControlField::zeros(grid),
            final_field: ControlField::zeros(grid),
        }
    }

    #[test]
    fn pairwise_counts_match_combinatorics() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let fields: Vec<ControlField> = (0..250)
            .map(|i| ControlField::new(grid, vec![i as f64, 0.0, 0.0]).unwrap())
            .collect();
        let d = pairwise_distances(&fields, &[], PairMode::WithinA).unwrap();
        assert_eq!(d.len(), 250 * 249 / 2);
        let identical: Vec<ControlField> = (0..5).map(|_| ControlField::zeros(grid)).collect();
        let z = pairwise_distances(&identical, &[], PairMode::WithinA).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let cross_ab = pairwise_distances(
            &fields[..4],
            &fields[..7],
            PairMode::Cross { matched: false },
        )
        .unwrap();
        let cross_ba = pairwise_distances(
            &fields[..7],
            &fields[..4],
            PairMode::Cross { matched: false },
        )
        .unwrap();
        assert_eq!(cross_ab.len(), 28);
        let mut a = cross_ab.clone();
        let mut b = cross_ba.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        let matched = pairwise_distances(
            &fields[..4],
            &fields[..4],
            PairMode::Cross { matched: true },
        )
        .unwrap();
        assert_eq!(matched.len(), 4);
    }

    #[test]
    fn split_by_r_is_deterministic_and_disjoint() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let records: Vec<RunRecord> = (0..10)
            .map(|i| toy_record(i, 1.0 + (i % 5) as f64 * 0.1, grid))
            .collect();
        let (lo, hi) = split_by_r(&records, 3).unwrap();
        assert_eq!(lo.len(), 3);
        assert_eq!(hi.len(), 3);
        let lo_ids: Vec<u64> = lo.iter().map(|r| r.run_id).collect();
        let hi_ids: Vec<u64> = hi.iter().map(|r| r.run_id).collect();
        for id in &lo_ids {
            assert!(!hi_ids.contains(id));
        }
        // ties broken by run_id: records 0 and 5 share the lowest R
        assert_eq!(lo_ids, vec![0, 5, 1]);
        let all_equal: Vec<RunRecord> = (0..6).map(|i| toy_record(i, 1.5, grid)).collect();
        let (lo2, hi2) = split_by_r(&all_equal, 3).unwrap();
        assert_eq!(
            lo2.iter().map(|r| r.run_id).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(
            hi2.iter().map(|r| r.run_id).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert!(split_by_r(&all_equal, 4).is_err());
    }

    #[test]
    fn r_histogram_counts_and_stats() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let records: Vec<RunRecord> = [1.05, 1.15, 1.15, 1.32, 1.9]
            .iter()
            .enumerate()
            .map(|(i, &r)| toy_record(i as u64, r, grid))
            .collect();
        let h = r_histogram(&records, 0.1);
        assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), 5);
        assert!((h.mean - 1.314).abs() < 1e-12);
        assert_eq!(h.median, 1.15);
        assert_eq!(h.max, 1.9);
        let single = r_histogram(&records[..1], 0.1);
        assert_eq!(single.bins.iter().filter(|b| b.count > 0).count(), 1);
    }

    #[test]
    fn eigen_relation_scan_on_short_climb() {
        // small grid keeps the Hessian builds cheap
        let (sys, obj) = build_preset(PresetTag::Statetransfer3, 1);
        let mut ev = LandscapeEvaluator::new(&sys, &obj).unwrap();
        let grid = TimeGrid::new(10.0, 61).unwrap();
        let mut rng = substream(3, 0, "field");
        let field = generate_random_field(grid, 20, &mut rng).unwrap();
        let cfg = FlowConfig::new(FlowDirection::Ascend);
        let (j_i, _) = cfg.levels(ev.j_range());
        let start = adjust_to_level(&mut ev, &field, j_i, &cfg).unwrap();
        let traj = dmorph_flow(&mut ev, &start, &cfg).unwrap();
        let stride = (traj.len() / 6).max(1);
        let samples = eigen_relation_scan(&sys, &obj, &traj, stride).unwrap();
        assert_eq!(samples.len(), traj.len().div_ceil(stride));
        for sm in &samples {
            let lo = sm.hessian_spectrum.first().unwrap();
            let hi = sm.hessian_spectrum.last().unwrap();
            assert!(sm.rayleigh >= lo - 1e-9 && sm.rayleigh <= hi + 1e-9);
            assert!(sm.nearest_eig_gap.is_finite());
        }
        // leaving the bottom the Hessian curves upward along g; arriving
        // at the top it curves downward
        assert!(samples.first().unwrap().rayleigh > 0.0);
        assert!(samples.last().unwrap().rayleigh < 0.0);
    }

    #[test]
    fn stride_subsets_scanned_points() {
        let (sys, obj) = build_preset(PresetTag::Statetransfer3, 1);
        let mut ev = LandscapeEvaluator::new(&sys, &obj).unwrap();
        let grid = TimeGrid::new(10.0, 41).unwrap();
        let mut rng = substream(8, 0, "field");
        let field = generate_random_field(grid, 20, &mut rng).unwrap();
        let cfg = FlowConfig::new(FlowDirection::Ascend);
        let (j_i, _) = cfg.levels(ev.j_range());
        let start = adjust_to_level(&mut ev, &field, j_i, &cfg).unwrap();
        let traj = dmorph_flow(&mut ev, &start, &cfg).unwrap();
        let s1 = eigen_relation_scan(&sys, &obj, &traj, 1).unwrap();
        let s2 = eigen_relation_scan(&sys, &obj, &traj, 2).unwrap();
        let s1_s: Vec<f64> = s1.iter().map(|p| p.s).collect();
        for p in &s2 {
            assert!(s1_s.contains(&p.s));
        }
    }
}
