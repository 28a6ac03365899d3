//! Brute-force singular value decomposition used as a reference.
//!
//! One-sided (Hestenes) Jacobi: plane rotations orthogonalise the columns of
//! the tall orientation of `A`, which diagonalises `AᵀA` implicitly without
//! forming it, so small singular values keep full relative accuracy.

use crate::densela::{dot, DenseMatrix};
use crate::error::{invalid, Result};
use crate::lowrank::factors::{FactorPair, SingularSpectrum};
use crate::scalar::Real;

/// Largest supported `min(m, n)`; the method is `O(min(m,n)² · max(m,n))`
/// per sweep.
pub const ORACLE_MAX_DIM: usize = 512;

const MAX_SWEEPS: usize = 60;

/// Full thin SVD `A = U diag(σ) Vᵀ` with `σ` sorted non-increasing.
pub struct ThinSvd<T> {
    /// `m x r` left singular vectors (zero columns where `σ = 0`).
    pub u: DenseMatrix<T>,
    pub sigma: SingularSpectrum<T>,
    /// `n x r` right singular vectors.
    pub v: DenseMatrix<T>,
}

pub fn jacobi_svd<T: Real>(a: &DenseMatrix<T>) -> Result<ThinSvd<T>> {
    let (m, n) = a.shape();
    if m.min(n) > ORACLE_MAX_DIM {
        return Err(invalid(format!(
            "oracle limited to min(m, n) <= {ORACLE_MAX_DIM}, got {m}x{n}"
        )));
    }
    let transposed = m < n;
    let tall = if transposed { a.transpose() } else { a.clone() };
    let (rows, r) = tall.shape();

    // Column-major working copies.
    let mut cols: Vec<Vec<T>> = (0..r).map(|j| tall.column(j)).collect();
    let mut vecs: Vec<Vec<T>> = (0..r)
        .map(|j| (0..r).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();

    let tol = T::epsilon() * T::of(rows as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..r {
            for q in p + 1..r {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vecs, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (dot(c, c).sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite norms").then(x.1.cmp(&y.1)));

    let sigma: Vec<T> = order.iter().map(|&(s, _)| s).collect();
    let left = DenseMatrix::from_fn(rows, r, |i, k| {
        let (s, j) = order[k];
        if s > T::zero() {
            cols[j][i] / s
        } else {
            T::zero()
        }
    })?;
    let right = DenseMatrix::from_fn(r, r, |i, k| vecs[order[k].1][i])?;
    let sigma = SingularSpectrum::new(sigma)?;

    Ok(if transposed {
        ThinSvd {
            u: right,
            sigma,
            v: left,
        }
    } else {
        ThinSvd {
            u: left,
            sigma,
            v: right,
        }
    })
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (xp, xq) = (&mut lo[p], &mut hi[0]);
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (u, v) = (*a, *b);
        *a = c * u - s * v;
        *b = s * u + c * v;
    }
}

/// Optimal rank-`k` factors and the full singular spectrum.
///
/// Returns `Q = U_k` and `Ut = V_k diag(σ_1..σ_k)`, so the reconstruction is
/// the truncated SVD and `‖A − Q Utᵀ‖_F² = Σ_{i>k} σᵢ²`.
pub fn truncated_svd_oracle<T: Real>(
    a: &DenseMatrix<T>,
    k: usize,
) -> Result<(FactorPair<T>, SingularSpectrum<T>)> {
    let r = a.rows().min(a.cols());
    if k == 0 || k > r {
        return Err(invalid(format!("oracle rank {k} outside [1, {r}]")));
    }
    let svd = jacobi_svd(a)?;
    let sig = svd.sigma.values();
    let q = svd.u.leading_columns(k)?;
    let ut = DenseMatrix::from_fn(a.cols(), k, |i, j| svd.v.get(i, j) * sig[j])?;
    Ok((FactorPair::new(q, ut)?, svd.sigma))
}

pub fn singular_values<T: Real>(a: &DenseMatrix<T>) -> Result<SingularSpectrum<T>> {
    Ok(jacobi_svd(a)?.sigma)
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    Ok(singular_values(a)?.values()[0])
}
