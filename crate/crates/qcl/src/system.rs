//! Quantum systems, control objectives, and the built-in presets.
//!
//! A system is a diagonal field-free Hamiltonian H₀ plus a real symmetric
//! dipole μ; the controlled Hamiltonian is H(t) = H₀ − μ E(t) with ħ = 1
//! and dimensionless units throughout. Objectives are either an ensemble
//! pair (ρ(0), O) scored by J_O = tr(ρ(T)O), or a target gate W scored by
//! J_W = ‖W − U(T,0)‖²_F.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::substream;

/// Hermiticity / trace / unitarity tolerance for structural validation.
pub const VALIDATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QuantumSystem {
    pub n_levels: usize,
    /// Diagonal of the field-free Hamiltonian.
    pub h0: Vec<f64>,
    /// Real symmetric dipole operator.
    pub dipole: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct EnsembleObjective {
    pub rho0: Array2<C64>,
    pub observable: Array2<C64>,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub struct UnitaryTarget {
    pub w: Array2<C64>,
}

/// Either landscape; carries everything the flow needs to score a field.
#[derive(Debug, Clone)]
pub enum LandscapeObjective {
    Ensemble(EnsembleObjective),
    Unitary(UnitaryTarget),
}

impl LandscapeObjective {
    /// Natural optimization direction: stated for ensembles, always
    /// minimization for the gate-distance landscape.
    pub fn direction(&self) -> Direction {
        match self {
            LandscapeObjective::Ensemble(o) => o.direction,
            LandscapeObjective::Unitary(_) => Direction::Minimize,
        }
    }

    /// Attainable landscape range (J_min, J_max).
    ///
    /// For J_O these are the von Neumann trace bounds over unitary orbits:
    /// the sorted-descending eigenvalues of ρ and O paired directly (max)
    /// or oppositely (min). For J_W the range is [0, 4N].
    pub fn j_range(&self) -> Result<(f64, f64)> {
        match self {
            LandscapeObjective::Ensemble(o) => {
                let (rho_desc, _) = linalg::eigh_desc(&o.rho0)?;
                let (obs_desc, _) = linalg::eigh_desc(&o.observable)?;
                let n = rho_desc.len();
                let jmax: f64 = (0..n).map(|i| rho_desc[i] * obs_desc[i]).sum();
                let jmin: f64 = (0..n).map(|i| rho_desc[n - 1 - i] * obs_desc[i]).sum();
                Ok((jmin, jmax))
            }
            LandscapeObjective::Unitary(t) => {
                let n = t.w.nrows() as f64;
                Ok((0.0, 4.0 * n))
            }
        }
    }
}

/// The systems exercised in the reference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetTag {
    Ensemble8R1O1,
    Ensemble8R1O2,
    Ensemble8R2O1,
    Ensemble8R2O2,
    Ensemble8R3O3,
    Unitary4,
    Statetransfer3,
    TwolevelP12,
    TwolevelUnitary,
}

impl PresetTag {
    pub const ALL: [PresetTag; 9] = [
        PresetTag::Ensemble8R1O1,
        PresetTag::Ensemble8R1O2,
        PresetTag::Ensemble8R2O1,
        PresetTag::Ensemble8R2O2,
        PresetTag::Ensemble8R3O3,
        PresetTag::Unitary4,
        PresetTag::Statetransfer3,
        PresetTag::TwolevelP12,
        PresetTag::TwolevelUnitary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PresetTag::Ensemble8R1O1 => "ensemble8_r1o1",
            PresetTag::Ensemble8R1O2 => "ensemble8_r1o2",
            PresetTag::Ensemble8R2O1 => "ensemble8_r2o1",
            PresetTag::Ensemble8R2O2 => "ensemble8_r2o2",
            PresetTag::Ensemble8R3O3 => "ensemble8_r3o3",
            PresetTag::Unitary4 => "unitary4",
            PresetTag::Statetransfer3 => "statetransfer3",
            PresetTag::TwolevelP12 => "twolevel_p12",
            PresetTag::TwolevelUnitary => "twolevel_unitary",
        }
    }

    /// Number of sinusoidal modes used for random initial fields: 60 for
    /// the eight-level systems, 20 otherwise.
    pub fn default_modes(&self) -> usize {
        match self {
            PresetTag::Ensemble8R1O1
            | PresetTag::Ensemble8R1O2
            | PresetTag::Ensemble8R2O1
            | PresetTag::Ensemble8R2O2
            | PresetTag::Ensemble8R3O3 => 60,
            _ => 20,
        }
    }

    pub fn n_levels(&self) -> usize {
        match self {
            PresetTag::Ensemble8R1O1
            | PresetTag::Ensemble8R1O2
            | PresetTag::Ensemble8R2O1
            | PresetTag::Ensemble8R2O2
            | PresetTag::Ensemble8R3O3 => 8,
            PresetTag::Unitary4 => 4,
            PresetTag::Statetransfer3 => 3,
            PresetTag::TwolevelP12 | PresetTag::TwolevelUnitary => 2,
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            PresetTag::Ensemble8R1O1 => "8-level ensemble, pure rho1 with O1",
            PresetTag::Ensemble8R1O2 => "8-level ensemble, pure rho1 with O2",
            PresetTag::Ensemble8R2O1 => "8-level ensemble, mixed rho2 with O1",
            PresetTag::Ensemble8R2O2 => "8-level ensemble, mixed rho2 with O2",
            PresetTag::Ensemble8R3O3 => "8-level ensemble, nondegenerate rho3 with O3",
            PresetTag::Unitary4 => "4-level unitary gate target",
            PresetTag::Statetransfer3 => "3-level 1->3 transition probability",
            PresetTag::TwolevelP12 => "2-level 1->2 transition probability",
            PresetTag::TwolevelUnitary => "2-level unitary gate target",
        }
    }
}

impl FromStr for PresetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetTag::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for PresetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn diag_c(values: &[f64]) -> Array2<C64> {
    let n = values.len();
    let mut m = Array2::<C64>::zeros((n, n));
    for (i, &v) in values.iter().enumerate() {
        m[[i, i]] = C64::new(v, 0.0);
    }
    m
}

/// Dipole with off-diagonal magnitudes 0.5^(|i-j|-1) and signs drawn as
/// fair coins for the strict upper triangle from a ChaCha8 substream of
/// `sign_seed`, mirrored below the diagonal.
fn patterned_dipole(n: usize, sign_seed: u64) -> Array2<f64> {
    let mut rng = substream(sign_seed, 0, "dipole-signs");
    let mut mu = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mag = 0.5_f64.powi((j - i) as i32 - 1);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            mu[[i, j]] = sign * mag;
            mu[[j, i]] = sign * mag;
        }
    }
    mu
}

/// Expands a preset tag into its system and objective.
///
/// The eight- and four-level dipoles have randomized signs fixed by
/// `dipole_sign_seed`; the two- and three-level dipoles are fixed.
pub fn build_preset(tag: PresetTag, dipole_sign_seed: u64) -> (QuantumSystem, LandscapeObjective) {
    match tag {
        PresetTag::Ensemble8R1O1
        | PresetTag::Ensemble8R1O2
        | PresetTag::Ensemble8R2O1
        | PresetTag::Ensemble8R2O2
        | PresetTag::Ensemble8R3O3 => {
            let h0 = vec![-10.0, -8.0, -4.0, 2.0, 10.0, 20.0, 32.0, 46.0];
            let system = QuantumSystem {
                n_levels: 8,
                h0,
                dipole: patterned_dipole(8, dipole_sign_seed),
            };
            let rho1 = diag_c(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            let rho2 = diag_c(&[0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]);
            let rho3 = diag_c(&[
                7.0 / 28.0,
                6.0 / 28.0,
                5.0 / 28.0,
                4.0 / 28.0,
                3.0 / 28.0,
                2.0 / 28.0,
                1.0 / 28.0,
                0.0,
            ]);
            let o1 = diag_c(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0 / 9.0, 5.0 / 9.0]);
            let o2 = diag_c(&[
                0.0,
                0.0,
                0.0,
                0.0,
                4.0 / 17.0,
                4.0 / 17.0,
                4.0 / 17.0,
                5.0 / 17.0,
            ]);
            let o3 = diag_c(&[
                0.0,
                1.0 / 28.0,
                2.0 / 28.0,
                3.0 / 28.0,
                4.0 / 28.0,
                5.0 / 28.0,
                6.0 / 28.0,
                7.0 / 28.0,
            ]);
            let (rho0, observable) = match tag {
                PresetTag::Ensemble8R1O1 => (rho1, o1),
                PresetTag::Ensemble8R1O2 => (rho1, o2),
                PresetTag::Ensemble8R2O1 => (rho2, o1),
                PresetTag::Ensemble8R2O2 => (rho2, o2),
                _ => (rho3, o3),
            };
            let objective = LandscapeObjective::Ensemble(EnsembleObjective {
                rho0,
                observable,
                direction: Direction::Maximize,
            });
            (system, objective)
        }
        PresetTag::Unitary4 => {
            let system = QuantumSystem {
                n_levels: 4,
                h0: vec![-10.0, -7.0, -1.0, 8.0],
                dipole: patterned_dipole(4, dipole_sign_seed),
            };
            let mut w = Array2::<C64>::zeros((4, 4));
            w[[0, 0]] = C64::new(1.0, 0.0);
            w[[1, 2]] = C64::new(1.0, 0.0);
            w[[2, 1]] = C64::new(-1.0, 0.0);
            w[[3, 3]] = C64::new(1.0, 0.0);
            (system, LandscapeObjective::Unitary(UnitaryTarget { w }))
        }
        PresetTag::Statetransfer3 => {
            let mut dipole = Array2::<f64>::zeros((3, 3));
            for (i, j, v) in [(0, 1, -1.0), (0, 2, -0.5), (1, 2, 1.0)] {
                dipole[[i, j]] = v;
                dipole[[j, i]] = v;
            }
            let system = QuantumSystem {
                n_levels: 3,
                h0: vec![-10.0, -5.0, 5.0],
                dipole,
            };
            let objective = LandscapeObjective::Ensemble(EnsembleObjective {
                rho0: diag_c(&[1.0, 0.0, 0.0]),
                observable: diag_c(&[0.0, 0.0, 1.0]),
                direction: Direction::Maximize,
            });
            (system, objective)
        }
        PresetTag::TwolevelP12 | PresetTag::TwolevelUnitary => {
            // Traceless H0 keeps the fixed propagator determinant at 1, so
            // the det-1 gate target and the full [0, 4N] window stay
            // reachable: with tr μ = 0, det U(T) = exp(−i tr(H0) T) is a
            // field-independent invariant of the dynamics.
            let mut dipole = Array2::<f64>::zeros((2, 2));
            dipole[[0, 1]] = 1.0;
            dipole[[1, 0]] = 1.0;
            let system = QuantumSystem {
                n_levels: 2,
                h0: vec![-5.0, 5.0],
                dipole,
            };
            let objective = if matches!(tag, PresetTag::TwolevelP12) {
                LandscapeObjective::Ensemble(EnsembleObjective {
                    rho0: diag_c(&[1.0, 0.0]),
                    observable: diag_c(&[0.0, 1.0]),
                    direction: Direction::Maximize,
                })
            } else {
                let mut w = Array2::<C64>::zeros((2, 2));
                w[[0, 1]] = C64::new(1.0, 0.0);
                w[[1, 0]] = C64::new(-1.0, 0.0);
                LandscapeObjective::Unitary(UnitaryTarget { w })
            };
            (system, objective)
        }
    }
}

/// One structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DipoleNotSymmetric {
        i: usize,
        j: usize,
    },
    NonFinite {
        what: &'static str,
    },
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    RhoTrace {
        trace: f64,
    },
    RhoNotHermitian {
        deviation: f64,
    },
    RhoNotPsd {
        min_eigenvalue: f64,
    },
    ObservableNotHermitian {
        deviation: f64,
    },
    TargetNotUnitary {
        defect: f64,
    },
}

impl Violation {
    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::DipoleNotSymmetric { .. } => "symmetry",
            Violation::NonFinite { .. } => "finite",
            Violation::ShapeMismatch { .. } => "shape",
            Violation::RhoTrace { .. } => "trace",
            Violation::RhoNotHermitian { .. } | Violation::ObservableNotHermitian { .. } => {
                "hermitian"
            }
            Violation::RhoNotPsd { .. } => "psd",
            Violation::TargetNotUnitary { .. } => "unitary",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DipoleNotSymmetric { i, j } => {
                write!(f, "dipole symmetry violated at ({i},{j})")
            }
            Violation::NonFinite { what } => write!(f, "{what} contains non-finite entries"),
            Violation::ShapeMismatch {
                what,
                expected,
                got,
            } => {
                write!(f, "{what} has dimension {got}, expected {expected}")
            }
            Violation::RhoTrace { trace } => write!(f, "rho0 trace is {trace}, expected 1"),
            Violation::RhoNotHermitian { deviation } => {
                write!(f, "rho0 deviates from hermitian by {deviation:.3e}")
            }
            Violation::RhoNotPsd { min_eigenvalue } => {
                write!(f, "rho0 is not psd (min eigenvalue {min_eigenvalue:.3e})")
            }
            Violation::ObservableNotHermitian { deviation } => {
                write!(f, "observable deviates from hermitian by {deviation:.3e}")
            }
            Violation::TargetNotUnitary { defect } => {
                write!(f, "target is not unitary (defect {defect:.3e})")
            }
        }
    }
}

fn hermitian_deviation(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Checks every structural invariant and returns all violations found.
pub fn validate(system: &QuantumSystem, objective: &LandscapeObjective) -> Vec<Violation> {
    let n = system.n_levels;
    let mut out = Vec::new();
    if system.h0.len() != n {
        out.push(Violation::ShapeMismatch {
            what: "h0",
            expected: n,
            got: system.h0.len(),
        });
    }
    if system.dipole.nrows() != n || system.dipole.ncols() != n {
        out.push(Violation::ShapeMismatch {
            what: "dipole",
            expected: n,
            got: system.dipole.nrows(),
        });
    }
    if system.h0.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite { what: "h0" });
    }
    if system.dipole.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite { what: "dipole" });
    } else if system.dipole.nrows() == n && system.dipole.ncols() == n {
        for i in 0..n {
            for j in (i + 1)..n {
                if system.dipole[[i, j]] != system.dipole[[j, i]] {
                    out.push(Violation::DipoleNotSymmetric { i, j });
                }
            }
        }
    }
    match objective {
        LandscapeObjective::Ensemble(o) => {
            if o.rho0.nrows() != n {
                out.push(Violation::ShapeMismatch {
                    what: "rho0",
                    expected: n,
                    got: o.rho0.nrows(),
                });
                return out;
            }
            if o.observable.nrows() != n {
                out.push(Violation::ShapeMismatch {
                    what: "observable",
                    expected: n,
                    got: o.observable.nrows(),
                });
                return out;
            }
            let rho_dev = hermitian_deviation(&o.rho0);
            if rho_dev > VALIDATION_TOL {
                out.push(Violation::RhoNotHermitian { deviation: rho_dev });
            }
            let trace: C64 = (0..n).map(|i| o.rho0[[i, i]]).sum();
            if (trace.re - 1.0).abs() > VALIDATION_TOL || trace.im.abs() > VALIDATION_TOL {
                out.push(Violation::RhoTrace { trace: trace.re });
            }
            if rho_dev <= 1e-6 {
                if let Ok(eigs) = linalg::eigvalsh_hermitian(&o.rho0) {
                    let min = eigs.first().copied().unwrap_or(0.0);
                    if min < -VALIDATION_TOL {
                        out.push(Violation::RhoNotPsd {
                            min_eigenvalue: min,
                        });
                    }
                }
            }
            let obs_dev = hermitian_deviation(&o.observable);
            if obs_dev > VALIDATION_TOL {
                out.push(Violation::ObservableNotHermitian { deviation: obs_dev });
            }
        }
        LandscapeObjective::Unitary(t) => {
            if t.w.nrows() != n {
                out.push(Violation::ShapeMismatch {
                    what: "w",
                    expected: n,
                    got: t.w.nrows(),
                });
                return out;
            }
            let flat: Vec<C64> = t.w.iter().copied().collect();
            let defect = linalg::unitarity_defect(n, &flat);
            if defect > VALIDATION_TOL {
                out.push(Violation::TargetNotUnitary { defect });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Custom systems from JSON.

/// A real number or an [re, im] pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Real(f64),
    Complex([f64; 2]),
}

impl From<JsonScalar> for C64 {
    fn from(s: JsonScalar) -> C64 {
        match s {
            JsonScalar::Real(x) => C64::new(x, 0.0),
            JsonScalar::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// On-disk description of a custom system, mirroring the preset contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub h0: Vec<f64>,
    pub dipole: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<Vec<Vec<JsonScalar>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<Vec<Vec<JsonScalar>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<JsonScalar>>>,
}

fn complex_matrix(rows: &[Vec<JsonScalar>], n: usize, what: &str) -> Result<Array2<C64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what} must be a {n}x{n} matrix")));
    }
    let mut m = Array2::<C64>::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v.into();
        }
    }
    Ok(m)
}

impl SystemFile {
    pub fn build(&self) -> Result<(QuantumSystem, LandscapeObjective)> {
        let n = self.h0.len();
        if n == 0 {
            return Err(Error::Config("h0 must be non-empty".into()));
        }
        if self.dipole.len() != n || self.dipole.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("dipole must be a {n}x{n} matrix")));
        }
        let mut dipole = Array2::<f64>::zeros((n, n));
        for (i, row) in self.dipole.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                dipole[[i, j]] = v;
            }
        }
        let system = QuantumSystem {
            n_levels: n,
            h0: self.h0.clone(),
            dipole,
        };
        let objective = match (&self.rho0, &self.observable, &self.w) {
            (Some(r), Some(o), None) => LandscapeObjective::Ensemble(EnsembleObjective {
                rho0: complex_matrix(r, n, "rho0")?,
                observable: complex_matrix(o, n, "observable")?,
                direction: self.direction.unwrap_or(Direction::Maximize),
            }),
            (None, None, Some(w)) => LandscapeObjective::Unitary(UnitaryTarget {
                w: complex_matrix(w, n, "w")?,
            }),
            _ => {
                return Err(Error::Config(
                    "provide either rho0 + observable or w, not both".into(),
                ))
            }
        };
        let violations = validate(&system, &objective);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Config(format!(
                "invalid system: {}",
                list.join("; ")
            )));
        }
        Ok((system, objective))
    }
}

/// Loads a custom system + objective from a JSON file.
pub fn load_system_file(path: &Path) -> Result<(QuantumSystem, LandscapeObjective)> {
    let text = std::fs::read_to_string(path)?;
    let file: SystemFile = serde_json::from_str(&text)?;
    file.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_r2o1_spectra() {
        let (_, obj) = build_preset(PresetTag::Ensemble8R2O1, 1);
        let LandscapeObjective::Ensemble(o) = &obj else {
            panic!()
        };
        let (rho, _) = linalg::eigh_desc(&o.rho0).unwrap();
        assert_eq!(&rho[..4], &[0.25; 4]);
        assert_eq!(&rho[4..], &[0.0; 4]);
        let (obs, _) = linalg::eigh_desc(&o.observable).unwrap();
        assert_eq!(obs[0], 5.0 / 9.0);
        assert_eq!(obs[1], 4.0 / 9.0);
        assert_eq!(&obs[2..], &[0.0; 6]);
        // printed value survives at full double precision
        assert_eq!(o.observable[[7, 7]], C64::new(5.0 / 9.0, 0.0));
    }

    #[test]
    fn preset_unitary4_h0() {
        let (sys, obj) = build_preset(PresetTag::Unitary4, 123);
        assert_eq!(sys.h0, vec![-10.0, -7.0, -1.0, 8.0]);
        assert!(matches!(obj, LandscapeObjective::Unitary(_)));
        let (jmin, jmax) = obj.j_range().unwrap();
        assert_eq!((jmin, jmax), (0.0, 16.0));
    }

    #[test]
    fn dipole_signs_deterministic_and_symmetric() {
        for seed in [0u64, 1, 42, u64::MAX] {
            let (a, _) = build_preset(PresetTag::Ensemble8R1O1, seed);
            let (b, _) = build_preset(PresetTag::Ensemble8R1O1, seed);
            assert_eq!(a.dipole, b.dipole);
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(a.dipole[[i, j]], a.dipole[[j, i]]);
                    if i != j {
                        let mag = 0.5f64.powi((i as i32 - j as i32).abs() - 1);
                        assert_eq!(a.dipole[[i, j]].abs(), mag);
                    }
                }
            }
        }
        let (a, _) = build_preset(PresetTag::Unitary4, 1);
        let (b, _) = build_preset(PresetTag::Unitary4, 2);
        assert_ne!(a.dipole, b.dipole);
    }

    #[test]
    fn three_level_dipole_is_fixed() {
        let (a, _) = build_preset(PresetTag::Statetransfer3, 1);
        let (b, _) = build_preset(PresetTag::Statetransfer3, 999);
        assert_eq!(a.dipole, b.dipole);
        assert_eq!(a.dipole[[0, 1]], -1.0);
        assert_eq!(a.dipole[[0, 2]], -0.5);
        assert_eq!(a.dipole[[1, 2]], 1.0);
    }

    #[test]
    fn validate_accepts_presets() {
        for tag in PresetTag::ALL {
            let (sys, obj) = build_preset(tag, 7);
            assert!(validate(&sys, &obj).is_empty(), "{tag}");
        }
    }

    #[test]
    fn validate_reports_trace_violation() {
        let (sys, obj) = build_preset(PresetTag::Statetransfer3, 7);
        let LandscapeObjective::Ensemble(mut o) = obj else {
            panic!()
        };
        o.rho0[[0, 0]] = C64::new(0.9, 0.0);
        let violations = validate(&sys, &LandscapeObjective::Ensemble(o));
        assert!(violations.iter().any(|v| v.kind() == "trace"));
    }

    #[test]
    fn validate_reports_symmetry_violation() {
        let (mut sys, obj) = build_preset(PresetTag::Statetransfer3, 7);
        sys.dipole[[0, 1]] = 0.25;
        let violations = validate(&sys, &obj);
        assert!(violations.iter().any(|v| v.kind() == "symmetry"));
    }

    #[test]
    fn validate_collects_multiple_violations() {
        let (mut sys, obj) = build_preset(PresetTag::Statetransfer3, 7);
        sys.dipole[[0, 1]] = 0.25;
        let LandscapeObjective::Ensemble(mut o) = obj else {
            panic!()
        };
        o.rho0[[0, 0]] = C64::new(0.5, 0.0);
        let violations = validate(&sys, &LandscapeObjective::Ensemble(o));
        assert!(violations.len() >= 2);
    }

    #[test]
    fn ensemble_range_matches_trace_bounds() {
        let (_, obj) = build_preset(PresetTag::Ensemble8R2O1, 7);
        let (jmin, jmax) = obj.j_range().unwrap();
        assert!((jmax - 0.25).abs() < 1e-15);
        assert!(jmin.abs() < 1e-15);
    }

    #[test]
    fn custom_system_json_round_trip() {
        let text = r#"{
            "h0": [-10.0, -5.0, 5.0],
            "dipole": [[0.0, -1.0, -0.5], [-1.0, 0.0, 1.0], [-0.5, 1.0, 0.0]],
            "rho0": [[1.0, 0, 0], [0, 0, 0], [0, 0, 0]],
            "observable": [[0, 0, 0], [0, 0, 0], [0, 0, 1.0]],
            "direction": "maximize"
        }"#;
        let file: SystemFile = serde_json::from_str(text).unwrap();
        let (sys, obj) = file.build().unwrap();
        assert_eq!(sys.n_levels, 3);
        assert!(matches!(obj, LandscapeObjective::Ensemble(_)));
    }

    #[test]
    fn custom_system_with_complex_entries() {
        let text = r#"{
            "h0": [0.0, 1.0],
            "dipole": [[0.0, 1.0], [1.0, 0.0]],
            "w": [[[0.0, 1.0], 0.0], [0.0, [0.0, -1.0]]]
        }"#;
        let file: SystemFile = serde_json::from_str(text).unwrap();
        let (_, obj) = file.build().unwrap();
        let LandscapeObjective::Unitary(t) = obj else {
            panic!()
        };
        assert_eq!(t.w[[0, 0]], C64::new(0.0, 1.0));
        assert_eq!(t.w[[1, 1]], C64::new(0.0, -1.0));
    }

    #[test]
    fn unknown_tag_is_an_error() {
        assert!(matches!(
            "ensemble9_bogus".parse::<PresetTag>(),
            Err(Error::UnknownPreset(_))
        ));
    }
}
