//! Critical submanifolds of both landscapes and distances to them.
//!
//! Ensemble critical points commute ρ(T) with O, so each submanifold is a
//! contingency table pairing the degenerate eigenvalue blocks of O (rows)
//! with those of ρ (columns), both sorted descending. Gate-landscape
//! critical points have W†U with eigenvalues ±1, indexed by the count α
//! of −1 entries. Distances follow the blockwise singular-value metric
//! (ensemble) and the eigenvalue-phase metric (gate), normalized to [0,1].

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::propagate;
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::linalg;
use crate::system::{EnsembleObjective, LandscapeObjective, QuantumSystem};

/// Relative tolerance used to group nearly equal eigenvalues into one
/// degenerate block.
const DEGENERACY_TOL: f64 = 1e-9;

/// Singular values below this are treated as exact zeros before sorting.
const SINGULAR_CLAMP: f64 = 1e-12;

/// Non-negative integer matrix with fixed margins: rows sum to the O
/// degeneracies, columns to the ρ degeneracies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub entries: Vec<Vec<u32>>,
    pub row_margins: Vec<u32>,
    pub col_margins: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubmanifoldKind {
    Ensemble(ContingencyTable),
    Unitary { alpha: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Min,
    Max,
    Saddle,
}

/// One critical level of the landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSubmanifold {
    pub kind: SubmanifoldKind,
    pub j_value: f64,
    pub topology: Topology,
}

/// Distinct eigenvalues (descending) with degeneracies and the
/// correspondingly ordered eigenvector frame.
struct GroupedSpectrum {
    values: Vec<f64>,
    degeneracies: Vec<usize>,
    frame: Array2<C64>,
}

fn grouped_spectrum(m: &Array2<C64>) -> Result<GroupedSpectrum> {
    let (vals, frame) = linalg::eigh_desc(m)?;
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut values = Vec::new();
    let mut degeneracies = Vec::new();
    for &v in &vals {
        match values.last() {
            Some(&prev) if (prev - v) as f64 <= DEGENERACY_TOL * scale => {
                *degeneracies.last_mut().unwrap() += 1;
            }
            _ => {
                values.push(v);
                degeneracies.push(1);
            }
        }
    }
    Ok(GroupedSpectrum {
        values,
        degeneracies,
        frame,
    })
}

fn enumerate_tables(row_margins: &[u32], col_margins: &[u32]) -> Vec<Vec<Vec<u32>>> {
    let rows = row_margins.len();
    let cols = col_margins.len();
    let mut out = Vec::new();
    let mut table = vec![vec![0u32; cols]; rows];
    let mut remaining: Vec<u32> = col_margins.to_vec();

    fn fill_row(
        row: usize,
        col: usize,
        left: u32,
        rows: usize,
        cols: usize,
        row_margins: &[u32],
        table: &mut Vec<Vec<u32>>,
        remaining: &mut Vec<u32>,
        out: &mut Vec<Vec<Vec<u32>>>,
    ) {
        if col == cols {
            if left != 0 {
                return;
            }
            if row + 1 == rows {
                if remaining.iter().all(|&r| r == 0) {
                    out.push(table.clone());
                }
            } else {
                fill_row(
                    row + 1,
                    0,
                    row_margins[row + 1],
                    rows,
                    cols,
                    row_margins,
                    table,
                    remaining,
                    out,
                );
            }
            return;
        }
        // entries left of the last column are free up to budget; the last
        // column must absorb the remainder
        let max_here = left.min(remaining[col]);
        for v in 0..=max_here {
            table[row][col] = v;
            remaining[col] -= v;
            fill_row(
                row,
                col + 1,
                left - v,
                rows,
                cols,
                row_margins,
                table,
                remaining,
                out,
            );
            remaining[col] += v;
            table[row][col] = 0;
        }
    }

    if rows == 0 || cols == 0 {
        return out;
    }
    fill_row(
        0,
        0,
        row_margins[0],
        rows,
        cols,
        row_margins,
        &mut table,
        &mut remaining,
        &mut out,
    );
    out
}

fn label_topologies(subs: &mut [CriticalSubmanifold]) {
    if subs.is_empty() {
        return;
    }
    let jmin = subs.iter().map(|c| c.j_value).fold(f64::INFINITY, f64::min);
    let jmax = subs
        .iter()
        .map(|c| c.j_value)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = jmax.abs().max(jmin.abs()).max(1e-300);
    for c in subs.iter_mut() {
        c.topology = if (c.j_value - jmax).abs() <= 1e-12 * scale {
            Topology::Max
        } else if (c.j_value - jmin).abs() <= 1e-12 * scale {
            Topology::Min
        } else {
            Topology::Saddle
        };
    }
}

/// All ensemble-landscape critical submanifolds with their heights.
pub fn enumerate_critical_jo(objective: &EnsembleObjective) -> Result<Vec<CriticalSubmanifold>> {
    let obs = grouped_spectrum(&objective.observable)?;
    let rho = grouped_spectrum(&objective.rho0)?;
    let row_margins: Vec<u32> = obs.degeneracies.iter().map(|&d| d as u32).collect();
    let col_margins: Vec<u32> = rho.degeneracies.iter().map(|&d| d as u32).collect();
    let tables = enumerate_tables(&row_margins, &col_margins);
    let mut subs: Vec<CriticalSubmanifold> = tables
        .into_iter()
        .map(|entries| {
            let mut j = 0.0;
            for (i, row) in entries.iter().enumerate() {
                for (jcol, &c) in row.iter().enumerate() {
                    j += c as f64 * obs.values[i] * rho.values[jcol];
                }
            }
            CriticalSubmanifold {
                kind: SubmanifoldKind::Ensemble(ContingencyTable {
                    entries,
                    row_margins: row_margins.clone(),
                    col_margins: col_margins.clone(),
                }),
                j_value: j,
                topology: Topology::Saddle,
            }
        })
        .collect();
    subs.sort_by(|a, b| a.j_value.partial_cmp(&b.j_value).unwrap());
    label_topologies(&mut subs);
    Ok(subs)
}

/// The N+1 gate-landscape critical submanifolds at J_W = 4α.
pub fn enumerate_critical_jw(n_levels: usize) -> Vec<CriticalSubmanifold> {
    (0..=n_levels)
        .map(|alpha| CriticalSubmanifold {
            kind: SubmanifoldKind::Unitary { alpha },
            j_value: 4.0 * alpha as f64,
            topology: if alpha == 0 {
                Topology::Min
            } else if alpha == n_levels {
                Topology::Max
            } else {
                Topology::Saddle
            },
        })
        .collect()
}

/// Precomputed frames, tables, and normalizers for repeated ensemble
/// distance evaluations.
pub struct EnsembleDistance {
    obs_frame: Array2<C64>,
    rho_frame: Array2<C64>,
    row_groups: Vec<usize>,
    col_groups: Vec<usize>,
    pub submanifolds: Vec<CriticalSubmanifold>,
    normalizers: Vec<f64>,
}

fn vertex_distance(a: &ContingencyTable, b: &ContingencyTable) -> f64 {
    let mut acc = 0.0;
    for (ra, rb) in a.entries.iter().zip(&b.entries) {
        for (&ca, &cb) in ra.iter().zip(rb) {
            acc += (ca as f64 - cb as f64).abs();
        }
    }
    acc
}

impl EnsembleDistance {
    pub fn new(objective: &EnsembleObjective) -> Result<Self> {
        let obs = grouped_spectrum(&objective.observable)?;
        let rho = grouped_spectrum(&objective.rho0)?;
        let submanifolds = enumerate_critical_jo(objective)?;
        let tables: Vec<&ContingencyTable> = submanifolds
            .iter()
            .map(|c| match &c.kind {
                SubmanifoldKind::Ensemble(t) => t,
                _ => unreachable!(),
            })
            .collect();
        // Farthest point from a vertex is another vertex; that pairwise
        // distance normalizes D into [0, 1].
        let normalizers: Vec<f64> = tables
            .iter()
            .map(|a| {
                tables
                    .iter()
                    .map(|b| vertex_distance(a, b))
                    .fold(0.0f64, f64::max)
                    .max(1.0e-300)
            })
            .collect();
        let normalizers = normalizers
            .into_iter()
            .map(|v| if v <= 1e-300 { 1.0 } else { v })
            .collect();
        Ok(EnsembleDistance {
            obs_frame: obs.frame,
            rho_frame: rho.frame,
            row_groups: obs.degeneracies,
            col_groups: rho.degeneracies,
            submanifolds,
            normalizers,
        })
    }

    /// Sorted singular values of every block of U expressed in the sorted
    /// eigenframes, clamped below `SINGULAR_CLAMP`.
    fn block_singulars(&self, u: &Array2<C64>) -> Result<Vec<Vec<f64>>> {
        let q_dag = self.obs_frame.t().mapv(|z| z.conj());
        let u_tilde = q_dag.dot(u).dot(&self.rho_frame);
        let mut blocks = Vec::with_capacity(self.row_groups.len() * self.col_groups.len());
        let mut row0 = 0;
        for &oi in &self.row_groups {
            let mut col0 = 0;
            for &pj in &self.col_groups {
                // explicit copy: owned 1x1 slices carry zero strides, which
                // the LAPACK bindings reject
                let view = u_tilde.slice(s![row0..row0 + oi, col0..col0 + pj]);
                let block = Array2::from_shape_fn((oi, pj), |(r, c)| view[[r, c]]);
                let mut sv = linalg::singular_values_desc(&block)?;
                for v in sv.iter_mut() {
                    if *v < SINGULAR_CLAMP {
                        *v = 0.0;
                    }
                }
                sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
                blocks.push(sv);
                col0 += pj;
            }
            row0 += oi;
        }
        Ok(blocks)
    }

    fn raw_distance_from_blocks(&self, blocks: &[Vec<f64>], table: &ContingencyTable) -> f64 {
        let cols = self.col_groups.len();
        let mut acc = 0.0;
        for (i, row) in table.entries.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let sv = &blocks[i * cols + j];
                for (m, &sigma) in sv.iter().enumerate() {
                    let target = if m < c as usize { 1.0 } else { 0.0 };
                    acc += (target - sigma) * (target - sigma);
                }
            }
        }
        acc
    }

    /// Normalized distance from U to submanifold `idx` (index into
    /// `self.submanifolds`).
    pub fn distance(&self, u: &Array2<C64>, idx: usize) -> Result<f64> {
        let blocks = self.block_singulars(u)?;
        let SubmanifoldKind::Ensemble(table) = &self.submanifolds[idx].kind else {
            unreachable!()
        };
        Ok(self.raw_distance_from_blocks(&blocks, table) / self.normalizers[idx])
    }

    /// Normalized distances from U to every submanifold, in order.
    pub fn all_distances(&self, u: &Array2<C64>) -> Result<Vec<f64>> {
        let blocks = self.block_singulars(u)?;
        Ok(self
            .submanifolds
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let SubmanifoldKind::Ensemble(table) = &c.kind else {
                    unreachable!()
                };
                self.raw_distance_from_blocks(&blocks, table) / self.normalizers[idx]
            })
            .collect())
    }
}

/// Normalized distance D ∈ [0,1] from a propagator to one ensemble
/// critical submanifold.
pub fn distance_jo(
    objective: &EnsembleObjective,
    u: &Array2<C64>,
    target: &CriticalSubmanifold,
) -> Result<f64> {
    let calc = EnsembleDistance::new(objective)?;
    let idx = calc
        .submanifolds
        .iter()
        .position(|c| c.kind == target.kind)
        .ok_or_else(|| {
            Error::Config("target submanifold does not belong to this objective".into())
        })?;
    calc.distance(u, idx)
}

/// Normalized distance D ∈ [0,1] from a propagator to the gate-landscape
/// submanifold with α eigenvalues at −1.
pub fn distance_jw(target_w: &Array2<C64>, u: &Array2<C64>, alpha: usize) -> Result<f64> {
    let n = target_w.nrows();
    assert!(alpha <= n, "alpha out of range");
    let w_dag = target_w.t().mapv(|z| z.conj());
    let m = w_dag.dot(u);
    let mut eigs = linalg::eigvals_general(&m)?;
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut acc = 0.0;
    for (i, lam) in eigs.iter().enumerate() {
        if i < alpha {
            acc += 1.0 + lam.re;
        } else {
            acc += 1.0 - lam.re;
        }
    }
    Ok(acc / (2.0 * n as f64))
}

/// Distance table along a trajectory: one row per recorded sample, one
/// column per critical submanifold.
#[derive(Debug, Clone)]
pub struct SaddleScan {
    /// Landscape heights labelling the distance columns.
    pub submanifold_j_values: Vec<f64>,
    pub topologies: Vec<Topology>,
    pub s_values: Vec<f64>,
    pub j_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// distances[sample][submanifold]
    pub distances: Vec<Vec<f64>>,
}

/// Re-propagates every recorded sample and evaluates D to every critical
/// submanifold of the objective.
pub fn saddle_scan(
    traj: &FlowTrajectory,
    system: &QuantumSystem,
    objective: &LandscapeObjective,
) -> Result<SaddleScan> {
    let (labels, topologies, distances) = match objective {
        LandscapeObjective::Ensemble(o) => {
            let calc = EnsembleDistance::new(o)?;
            let labels: Vec<f64> = calc.submanifolds.iter().map(|c| c.j_value).collect();
            let topologies: Vec<Topology> = calc.submanifolds.iter().map(|c| c.topology).collect();
            let distances: Vec<Vec<f64>> = traj
                .fields
                .par_iter()
                .map(|field| {
                    let res = propagate(system, field, false)?;
                    calc.all_distances(&res.u_final)
                })
                .collect::<Result<_>>()?;
            (labels, topologies, distances)
        }
        LandscapeObjective::Unitary(t) => {
            let subs = enumerate_critical_jw(system.n_levels);
            let labels: Vec<f64> = subs.iter().map(|c| c.j_value).collect();
            let topologies: Vec<Topology> = subs.iter().map(|c| c.topology).collect();
            let distances: Vec<Vec<f64>> = traj
                .fields
                .par_iter()
                .map(|field| {
                    let res = propagate(system, field, false)?;
                    (0..=system.n_levels)
                        .map(|alpha| distance_jw(&t.w, &res.u_final, alpha))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            (labels, topologies, distances)
        }
    };
    Ok(SaddleScan {
        submanifold_j_values: labels,
        topologies,
        s_values: traj.s_values.clone(),
        j_values: traj.j_values.clone(),
        grad_norms: traj.grad_norms.clone(),
        distances,
    })
}

/// Builds a critical permutation propagator realizing a contingency table,
/// in the sorted eigenframes. Used by tests and kept here because it
/// documents the block structure.
pub fn critical_unitary_for_table(
    table: &ContingencyTable,
    objective: &EnsembleObjective,
) -> Result<Array2<C64>> {
    let obs = grouped_spectrum(&objective.observable)?;
    let rho = grouped_spectrum(&objective.rho0)?;
    let n: usize = obs.degeneracies.iter().sum();
    let row_offsets: Vec<usize> = obs
        .degeneracies
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let col_offsets: Vec<usize> = rho
        .degeneracies
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut used_rows = vec![0usize; obs.degeneracies.len()];
    let mut used_cols = vec![0usize; rho.degeneracies.len()];
    let mut perm = Array2::<C64>::zeros((n, n));
    for (i, row) in table.entries.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            for _ in 0..c {
                let r = row_offsets[i] + used_rows[i];
                let cidx = col_offsets[j] + used_cols[j];
                perm[[r, cidx]] = C64::new(1.0, 0.0);
                used_rows[i] += 1;
                used_cols[j] += 1;
            }
        }
    }
    // back to the lab frame: U = Q Ũ R†
    let r_dag = rho.frame.t().mapv(|z| z.conj());
    Ok(obs.frame.dot(&perm).dot(&r_dag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_preset, Direction, PresetTag};
    use ndarray_linalg::QR;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ensemble(tag: PresetTag) -> EnsembleObjective {
        let (_, obj) = build_preset(tag, 1);
        match obj {
            LandscapeObjective::Ensemble(o) => o,
            _ => panic!(),
        }
    }

    /// Independent brute-force enumeration for small margins.
    fn brute_force_tables(rows: &[u32], cols: &[u32]) -> Vec<Vec<Vec<u32>>> {
        let total: u32 = rows.iter().sum();
        assert_eq!(total, cols.iter().sum::<u32>());
        let cap = *rows.iter().chain(cols).max().unwrap();
        let cells = rows.len() * cols.len();
        let mut out = Vec::new();
        let mut idx = vec![0u32; cells];
        loop {
            let table: Vec<Vec<u32>> = (0..rows.len())
                .map(|i| idx[i * cols.len()..(i + 1) * cols.len()].to_vec())
                .collect();
            let rows_ok = table
                .iter()
                .zip(rows)
                .all(|(r, &m)| r.iter().sum::<u32>() == m);
            let cols_ok =
                (0..cols.len()).all(|j| table.iter().map(|r| r[j]).sum::<u32>() == cols[j]);
            if rows_ok && cols_ok {
                out.push(table);
            }
            // odometer
            let mut k = 0;
            loop {
                if k == cells {
                    return out;
                }
                idx[k] += 1;
                if idx[k] <= cap {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn r2o1_has_exactly_four_submanifolds() {
        let obj = ensemble(PresetTag::Ensemble8R2O1);
        let subs = enumerate_critical_jo(&obj).unwrap();
        assert_eq!(subs.len(), 4);
        let expected = [0.0, 1.0 / 9.0, 5.0 / 36.0, 0.25];
        for (c, e) in subs.iter().zip(expected) {
            assert!((c.j_value - e).abs() < 1e-15, "{} vs {e}", c.j_value);
        }
        assert_eq!(subs[0].topology, Topology::Min);
        assert_eq!(subs[1].topology, Topology::Saddle);
        assert_eq!(subs[2].topology, Topology::Saddle);
        assert_eq!(subs[3].topology, Topology::Max);
        // margin checks on every table
        for c in &subs {
            let SubmanifoldKind::Ensemble(t) = &c.kind else {
                panic!()
            };
            for (row, &m) in t.entries.iter().zip(&t.row_margins) {
                assert_eq!(row.iter().sum::<u32>(), m);
            }
            for j in 0..t.col_margins.len() {
                assert_eq!(
                    t.entries.iter().map(|r| r[j]).sum::<u32>(),
                    t.col_margins[j]
                );
            }
        }
        // brute-force oracle over margins (1,1,6) x (4,4)
        let oracle = brute_force_tables(&[1, 1, 6], &[4, 4]);
        assert_eq!(oracle.len(), 4);
    }

    #[test]
    fn r1o1_extremes() {
        let obj = ensemble(PresetTag::Ensemble8R1O1);
        let subs = enumerate_critical_jo(&obj).unwrap();
        assert_eq!(subs.len(), 3);
        assert!(subs[0].j_value.abs() < 1e-15);
        assert!((subs.last().unwrap().j_value - 5.0 / 9.0).abs() < 1e-15);
        // extremes agree with the attainable range
        let (_, obj_full) = build_preset(PresetTag::Ensemble8R1O1, 1);
        let (jmin, jmax) = obj_full.j_range().unwrap();
        assert!((subs[0].j_value - jmin).abs() < 1e-14);
        assert!((subs.last().unwrap().j_value - jmax).abs() < 1e-14);
    }

    #[test]
    fn nondegenerate_case_counts_permutations() {
        // rho3/O3 margins are all ones; tables are 8x8 permutation matrices
        let obj = ensemble(PresetTag::Ensemble8R3O3);
        let subs = enumerate_critical_jo(&obj).unwrap();
        assert_eq!(subs.len(), 40320);
    }

    #[test]
    fn gate_landscape_critical_levels() {
        let subs = enumerate_critical_jw(4);
        assert_eq!(subs.len(), 5);
        let values: Vec<f64> = subs.iter().map(|c| c.j_value).collect();
        assert_eq!(values, vec![0.0, 4.0, 8.0, 12.0, 16.0]);
        assert_eq!(subs[0].topology, Topology::Min);
        assert_eq!(subs[4].topology, Topology::Max);
        let one = enumerate_critical_jw(1);
        assert_eq!(
            one.iter().map(|c| c.j_value).collect::<Vec<_>>(),
            vec![0.0, 4.0]
        );
    }

    #[test]
    fn distance_is_zero_at_member_and_one_at_farthest_vertex() {
        let obj = ensemble(PresetTag::Ensemble8R2O1);
        let calc = EnsembleDistance::new(&obj).unwrap();
        for idx in 0..calc.submanifolds.len() {
            let SubmanifoldKind::Ensemble(table) = &calc.submanifolds[idx].kind else {
                panic!()
            };
            let u = critical_unitary_for_table(table, &obj).unwrap();
            let d = calc.distance(&u, idx).unwrap();
            assert!(d.abs() < 1e-12, "member distance {d}");
            // farthest vertex sits at exactly D = 1
            let (far_idx, _) = calc
                .submanifolds
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let SubmanifoldKind::Ensemble(t) = &c.kind else {
                        panic!()
                    };
                    (k, vertex_distance(table, t))
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let SubmanifoldKind::Ensemble(far_table) = &calc.submanifolds[far_idx].kind else {
                panic!()
            };
            let far_u = critical_unitary_for_table(far_table, &obj).unwrap();
            let d_far = calc.distance(&far_u, idx).unwrap();
            assert!(
                (d_far - 1.0).abs() < 1e-12,
                "farthest vertex distance {d_far}"
            );
        }
    }

    fn random_unitary(n: usize, rng: &mut impl Rng) -> Array2<C64> {
        let g = Array2::from_shape_fn((n, n), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let (q, _r) = g.qr().unwrap();
        q
    }

    #[test]
    fn ensemble_distance_stays_in_unit_interval() {
        let obj = ensemble(PresetTag::Ensemble8R2O1);
        let calc = EnsembleDistance::new(&obj).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let u = random_unitary(8, &mut rng);
            for d in calc.all_distances(&u).unwrap() {
                assert!((-1e-12..=1.0 + 1e-12).contains(&d), "D = {d}");
            }
        }
    }

    #[test]
    fn gate_distance_reference_points() {
        let (_, obj) = build_preset(PresetTag::Unitary4, 1);
        let LandscapeObjective::Unitary(t) = obj else {
            panic!()
        };
        assert!(distance_jw(&t.w, &t.w, 0).unwrap().abs() < 1e-12);
        assert!((distance_jw(&t.w, &t.w, 4).unwrap() - 1.0).abs() < 1e-12);
        let minus = t.w.mapv(|z| -z);
        assert!(distance_jw(&t.w, &minus, 4).unwrap().abs() < 1e-12);
        // mixed signature lands at zero for its own alpha
        let mut d = Array2::<C64>::eye(4);
        d[[0, 0]] = C64::new(-1.0, 0.0);
        d[[1, 1]] = C64::new(-1.0, 0.0);
        let u = t.w.dot(&d);
        assert!(distance_jw(&t.w, &u, 2).unwrap().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..25 {
            let u = random_unitary(4, &mut rng);
            for alpha in 0..=4 {
                let d = distance_jw(&t.w, &u, alpha).unwrap();
                assert!((-1e-12..=1.0 + 1e-12).contains(&d));
            }
        }
    }

    #[test]
    fn saddle_scan_shapes_and_passthrough() {
        use crate::dynamics::{ControlField, TimeGrid};
        let (sys, obj) = build_preset(PresetTag::Ensemble8R2O1, 3);
        let grid = TimeGrid::new(10.0, 51).unwrap();
        let f0 = ControlField::zeros(grid);
        let f1 = ControlField::new(
            grid,
            (0..51).map(|k| (k as f64 * 0.1).sin() * 0.1).collect(),
        )
        .unwrap();
        let traj = FlowTrajectory {
            s_values: vec![0.0, 1.0],
            fields: vec![f0, f1],
            j_values: vec![0.1, 0.2],
            grad_norms: vec![0.5, 0.4],
            dense_path_length: None,
        };
        let scan = saddle_scan(&traj, &sys, &obj).unwrap();
        assert_eq!(scan.submanifold_j_values.len(), 4);
        assert_eq!(scan.distances.len(), 2);
        assert_eq!(scan.grad_norms, traj.grad_norms);
        for row in &scan.distances {
            assert_eq!(row.len(), 4);
            for &d in row {
                assert!((-1e-12..=1.0 + 1e-12).contains(&d));
            }
        }
    }

    #[test]
    fn distance_jo_public_entry_point() {
        let obj = ensemble(PresetTag::Ensemble8R2O1);
        let subs = enumerate_critical_jo(&obj).unwrap();
        let SubmanifoldKind::Ensemble(table) = &subs[3].kind else {
            panic!()
        };
        let u = critical_unitary_for_table(table, &obj).unwrap();
        let d = distance_jo(&obj, &u, &subs[3]).unwrap();
        assert!(d.abs() < 1e-12);
        // foreign submanifold is rejected
        let foreign = CriticalSubmanifold {
            kind: SubmanifoldKind::Ensemble(ContingencyTable {
                entries: vec![vec![9]],
                row_margins: vec![9],
                col_margins: vec![9],
            }),
            j_value: 0.0,
            topology: Topology::Max,
        };
        assert!(distance_jo(&obj, &u, &foreign).is_err());
    }

    #[test]
    fn direction_is_plumbed_through_presets() {
        let obj = ensemble(PresetTag::Ensemble8R2O1);
        assert_eq!(obj.direction, Direction::Maximize);
    }
}
