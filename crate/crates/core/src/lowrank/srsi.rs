use crate::densela::{gaussian_matrix, qr_orthonormalize, DenseMatrix, RngStream};
use crate::error::{Error, Result};
use crate::lowrank::factors::{FactorPair, SrsiParams, Truncation};
use crate::lowrank::oracle::jacobi_svd;
use crate::scalar::Real;

/// Streamlined randomized subspace iteration.
///
/// Draws an `n x (k+p)` Gaussian start, then `l` times forms `Q ← A U`,
/// orthonormalises `Q` with Householder QR and sets `U ← Aᵀ Q`. The final
/// basis is cut to `k` columns according to `params.truncation`, giving
/// `A ≈ Q Qᵀ A = Q · Utᵀ` with orthonormal `Q`. No singular values are
/// returned.
pub fn srsi<T: Real>(a: &DenseMatrix<T>, params: SrsiParams, rng: &mut RngStream) -> Result<FactorPair<T>> {
    params.validate(a.rows(), a.cols())?;
    if !a.is_finite() {
        return Err(Error::NonFinite("srsi input"));
    }
    let start = gaussian_matrix(a.cols(), params.rank + params.oversample, rng)?;
    subspace_iteration(a, start, params.rank, params.power_iters, params.truncation)
}

/// Runs the iteration from a caller-supplied `n x s` start block and keeps
/// the leading `rank` columns.
pub(crate) fn subspace_iteration<T: Real>(
    a: &DenseMatrix<T>,
    start: DenseMatrix<T>,
    rank: usize,
    power_iters: usize,
    truncation: Truncation,
) -> Result<FactorPair<T>> {
    debug_assert!(rank <= start.cols() && start.cols() <= a.rows().min(a.cols()));
    let mut u = start;
    let mut q = DenseMatrix::zeros(a.rows(), u.cols())?;
    for _ in 0..power_iters {
        let y = a.matmul(&u)?;
        q = qr_orthonormalize(&y)?.0;
        u = a.matmul_tn(&q)?;
    }
    if truncation == Truncation::RayleighRitz && rank < q.cols() {
        // U = AᵀQ, so the right singular vectors of U diagonalise QᵀAAᵀQ.
        let rotation = jacobi_svd(&u)?.v.leading_columns(rank)?;
        return FactorPair::new(q.matmul(&rotation)?, u.matmul(&rotation)?);
    }
    FactorPair::new(q.leading_columns(rank)?, u.leading_columns(rank)?)
}

/// `‖A − Q Utᵀ‖_F / ‖A‖_F`.
///
/// When `A = 0` the rate is 0 if the factor product is also zero, and an
/// error otherwise.
pub fn approx_error_rate<T: Real>(a: &DenseMatrix<T>, factors: &FactorPair<T>) -> Result<T> {
    if factors.target_shape() != a.shape() {
        return Err(Error::ShapeMismatch {
            op: "approx_error_rate",
            left: a.shape(),
            right: factors.target_shape(),
        });
    }
    let residual = a.sub(&factors.reconstruct())?.frobenius_norm();
    let norm = a.frobenius_norm();
    if norm == T::zero() {
        return if residual == T::zero() {
            Ok(T::zero())
        } else {
            Err(Error::InvalidArgument(
                "error rate of nonzero factors against a zero matrix is undefined".into(),
            ))
        };
    }
    Ok(residual / norm)
}
