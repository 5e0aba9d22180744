//! Dense linear-algebra kernels.
//!
//! The propagation hot loop works on tiny matrices (N ≤ 8) where LAPACK
//! call overhead dominates, so the symmetric eigensolver and matrix
//! products used per time step are implemented here on flat row-major
//! slices. Everything cold (SVD, general eigenvalues, large symmetric
//! spectra) goes through `ndarray-linalg`.

use ndarray::Array2;
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

/// Cyclic threshold Jacobi eigendecomposition of a symmetric matrix.
///
/// `a` (row-major, length n*n) is overwritten; on return its diagonal
/// holds the eigenvalues (unsorted). `vt` receives the eigenvectors as
/// rows, so `a_orig = vtᵀ · diag(λ) · vt`.
pub fn jacobi_eigh(n: usize, a: &mut [f64], vt: &mut [f64]) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(vt.len(), n * n);
    for x in vt.iter_mut() {
        *x = 0.0;
    }
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    if n < 2 {
        return;
    }
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(off, f64::max);
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            return;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows p and q; columns follow by symmetry.
                let (head, tail) = a.split_at_mut(q * n);
                let rp = &mut head[p * n..p * n + n];
                let rq = &mut tail[..n];
                for k in 0..n {
                    let x = rp[k];
                    let y = rq[k];
                    rp[k] = c * x - s * y;
                    rq[k] = s * x + c * y;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        a[k * n + p] = a[p * n + k];
                        a[k * n + q] = a[q * n + k];
                    }
                }
                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..p * n + n];
                let vq = &mut tail[..n];
                for k in 0..n {
                    let x = vp[k];
                    let y = vq[k];
                    vp[k] = c * x - s * y;
                    vq[k] = s * x + c * y;
                }
            }
        }
    }
}

/// out = a · b for real square matrices.
pub fn rmul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

/// out = a · bᵀ for real square matrices.
pub fn rmul_nt(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[j * n + k];
            }
            out[i * n + j] = acc;
        }
    }
}

/// out = a · b for complex square matrices.
pub fn cmul(n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                let x = a[i * n + k];
                let y = b[k * n + j];
                re += x.re * y.re - x.im * y.im;
                im += x.re * y.im + x.im * y.re;
            }
            out[i * n + j] = C64::new(re, im);
        }
    }
}

/// out = a · b† for complex square matrices.
pub fn cmul_ct(n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                let x = a[i * n + k];
                let y = b[j * n + k]; // conj(b[j,k])
                re += x.re * y.re + x.im * y.im;
                im += x.im * y.re - x.re * y.im;
            }
            out[i * n + j] = C64::new(re, im);
        }
    }
}

/// out = a† · b for complex square matrices.
pub fn cmul_ct_left(n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                let x = a[k * n + i]; // conj(a[k,i])
                let y = b[k * n + j];
                re += x.re * y.re + x.im * y.im;
                im += x.re * y.im - x.im * y.re;
            }
            out[i * n + j] = C64::new(re, im);
        }
    }
}

/// out = a · b with real b.
pub fn cmul_real_right(n: usize, a: &[C64], b: &[f64], out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                let x = a[i * n + k];
                let y = b[k * n + j];
                re += x.re * y;
                im += x.im * y;
            }
            out[i * n + j] = C64::new(re, im);
        }
    }
}

/// out = aᵀ · b with real a and complex b.
pub fn cmul_realt_left(n: usize, a: &[f64], b: &[C64], out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                let x = a[k * n + i];
                let y = b[k * n + j];
                re += x * y.re;
                im += x * y.im;
            }
            out[i * n + j] = C64::new(re, im);
        }
    }
}

/// tr(a · b).
pub fn trace_mul(n: usize, a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[i * n + j] * b[j * n + i];
        }
    }
    acc
}

/// Reconstructs exp(-i τ A) from the Jacobi output of A = vtᵀ diag(λ) vt.
pub fn unitary_from_eigen(n: usize, vt: &[f64], lam: &[f64], tau: f64, out: &mut [C64]) {
    for z in out.iter_mut() {
        *z = C64::new(0.0, 0.0);
    }
    for e in 0..n {
        let ph = C64::from_polar(1.0, -tau * lam[e]);
        let row = &vt[e * n..e * n + n];
        for i in 0..n {
            let c = ph * row[i];
            let dst = &mut out[i * n..i * n + n];
            for j in 0..n {
                dst[j] += c * row[j];
            }
        }
    }
}

/// ‖a†a − I‖_F, the deviation of a square complex matrix from unitarity.
pub fn unitarity_defect(n: usize, a: &[C64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut dot = C64::new(0.0, 0.0);
            for k in 0..n {
                dot += a[k * n + i].conj() * a[k * n + j];
            }
            if i == j {
                dot -= 1.0;
            }
            acc += dot.norm_sqr();
        }
    }
    acc.sqrt()
}

/// Singular values of a rectangular complex matrix, descending.
pub fn singular_values_desc(m: &Array2<C64>) -> Result<Vec<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    let mut v: Vec<f64> = s.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(v)
}

/// Eigenvalues of a general complex square matrix.
pub fn eigvals_general(m: &Array2<C64>) -> Result<Vec<C64>> {
    let (vals, _) = m.eig()?;
    Ok(vals.to_vec())
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
pub fn eigvalsh_hermitian(m: &Array2<C64>) -> Result<Vec<f64>> {
    let (vals, _) = m.eigh(UPLO::Lower)?;
    Ok(vals.to_vec())
}

/// Eigenvalues of a real symmetric matrix, ascending. Used for the
/// quadrature-weighted Hessian spectrum, where the matrix is large.
pub fn eigvalsh_real(m: &Array2<f64>) -> Result<Vec<f64>> {
    let (vals, _) = m.eigh(UPLO::Lower)?;
    Ok(vals.to_vec())
}

/// Hermitian eigendecomposition with eigenvalues sorted descending;
/// returns (values, vectors as columns).
pub fn eigh_desc(m: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = Array2::<C64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            sorted_vecs[[r, new]] = vecs[[r, old]];
        }
    }
    Ok((sorted_vals, sorted_vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-2.0..2.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn jacobi_matches_lapack() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8 {
            for _ in 0..20 {
                let a = random_symmetric(n, &mut rng);
                let mut work = a.clone();
                let mut vt = vec![0.0; n * n];
                jacobi_eigh(n, &mut work, &mut vt);
                let mut mine: Vec<f64> = (0..n).map(|i| work[i * n + i]).collect();
                mine.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let arr = Array2::from_shape_vec((n, n), a.clone()).unwrap();
                let (lapack, _) = arr.eigh(UPLO::Lower).unwrap();
                for (m, l) in mine.iter().zip(lapack.iter()) {
                    assert!((m - l).abs() < 1e-12, "n={n}: {m} vs {l}");
                }
                // residual A v = λ v
                for e in 0..n {
                    for r in 0..n {
                        let mut av = 0.0;
                        for k in 0..n {
                            av += a[r * n + k] * vt[e * n + k];
                        }
                        assert!((av - work[e * n + e] * vt[e * n + r]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn complex_product_matches_ndarray() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let a: Vec<C64> = (0..n * n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b: Vec<C64> = (0..n * n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        cmul(n, &a, &b, &mut out);
        let aa = Array2::from_shape_vec((n, n), a.clone()).unwrap();
        let bb = Array2::from_shape_vec((n, n), b.clone()).unwrap();
        let cc = aa.dot(&bb);
        for i in 0..n {
            for j in 0..n {
                assert!((out[i * n + j] - cc[[i, j]]).norm() < 1e-12);
            }
        }
        // a·b† against explicit adjoint
        let mut out2 = vec![C64::new(0.0, 0.0); n * n];
        cmul_ct(n, &a, &b, &mut out2);
        let bh = bb.t().mapv(|z| z.conj());
        let c2 = aa.dot(&bh);
        for i in 0..n {
            for j in 0..n {
                assert!((out2[i * n + j] - c2[[i, j]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exponential_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let a = random_symmetric(n, &mut rng);
        let mut work = a.clone();
        let mut vt = vec![0.0; n * n];
        jacobi_eigh(n, &mut work, &mut vt);
        let lam: Vec<f64> = (0..n).map(|i| work[i * n + i]).collect();
        let mut u = vec![C64::new(0.0, 0.0); n * n];
        unitary_from_eigen(n, &vt, &lam, 0.37, &mut u);
        assert!(unitarity_defect(n, &u) < 1e-13);
    }
}
