//! Test matrices with prescribed singular spectra.

use crate::densela::{gaussian_matrix, qr_orthonormalize, DenseMatrix, RngStream};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Shape of a synthetic singular spectrum of length `r`.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumProfile {
    /// `σᵢ = ratioⁱ` for `i = 0..r`.
    Geometric { ratio: f64 },
    /// `count` leading values equal to 1, the rest equal to `tail`.
    MultiDominant { count: usize, tail: f64 },
    /// Slow power-law decay `σᵢ = (i + 1)^(−exponent)`; `exponent = 0` is
    /// perfectly flat.
    Flat { exponent: f64 },
    /// A single unit singular value.
    RankOne,
    /// Explicit values, sorted non-increasing by the caller.
    Explicit(Vec<f64>),
}

impl SpectrumProfile {
    pub fn values(&self, r: usize) -> Vec<f64> {
        match self {
            Self::Geometric { ratio } => (0..r).map(|i| ratio.powi(i as i32)).collect(),
            Self::MultiDominant { count, tail } => {
                (0..r).map(|i| if i < *count { 1.0 } else { *tail }).collect()
            }
            Self::Flat { exponent } => (0..r).map(|i| ((i + 1) as f64).powf(-exponent)).collect(),
            Self::RankOne => (0..r).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            Self::Explicit(v) => (0..r).map(|i| v.get(i).copied().unwrap_or(0.0)).collect(),
        }
    }
}

/// Random Haar-like orthonormal `n x r` basis.
pub fn random_orthonormal<T: Real>(n: usize, r: usize, rng: &mut RngStream) -> Result<DenseMatrix<T>> {
    Ok(qr_orthonormalize(&gaussian_matrix(n, r, rng)?)?.0)
}

/// `A = U diag(σ) Vᵀ` with random orthonormal `U`, `V` and `σ` from `profile`.
pub fn matrix_with_spectrum<T: Real>(
    rows: usize,
    cols: usize,
    profile: &SpectrumProfile,
    rng: &mut RngStream,
) -> Result<DenseMatrix<T>> {
    let r = rows.min(cols);
    let sigma = profile.values(r);
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(invalid("spectrum values must be non-negative"));
    }
    let u: DenseMatrix<T> = random_orthonormal(rows, r, rng)?;
    let v: DenseMatrix<T> = random_orthonormal(cols, r, rng)?;
    let mut scaled = u;
    for i in 0..rows {
        for (x, s) in scaled.row_mut(i).iter_mut().zip(&sigma) {
            *x *= T::of(*s);
        }
    }
    scaled.matmul_nt(&v)
}

/// Non-negative `rows x cols` matrix with singular values `sigma`.
///
/// Rows and columns are split into one contiguous group per non-zero value,
/// block `i` is filled with `σᵢ / √(aᵢ bᵢ)` and both index sets are then
/// shuffled. Each block is a scaled all-ones matrix, so its only singular
/// value is `σᵢ`, and the blocks are mutually orthogonal.
pub fn block_matrix_with_spectrum<T: Real>(
    rows: usize,
    cols: usize,
    sigma: &[f64],
    rng: &mut RngStream,
) -> Result<DenseMatrix<T>> {
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(invalid("spectrum values must be non-negative"));
    }
    let values: Vec<f64> = sigma.iter().copied().filter(|&s| s > 0.0).collect();
    let r = values.len();
    if r > rows.min(cols) {
        return Err(invalid(format!("{r} non-zero values do not fit in {rows}x{cols}")));
    }
    let mut out = DenseMatrix::zeros(rows, cols)?;
    if r == 0 {
        return Ok(out);
    }
    let group = |n: usize, i: usize| (i * n / r, (i + 1) * n / r);
    let mut row_perm: Vec<usize> = (0..rows).collect();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    rng.shuffle(&mut row_perm);
    rng.shuffle(&mut col_perm);
    for (i, s) in values.iter().enumerate() {
        let (r0, r1) = group(rows, i);
        let (c0, c1) = group(cols, i);
        let v = T::of(s / (((r1 - r0) * (c1 - c0)) as f64).sqrt());
        for &a in &row_perm[r0..r1] {
            for &b in &col_perm[c0..c1] {
                out.set(a, b, v);
            }
        }
    }
    Ok(out)
}
