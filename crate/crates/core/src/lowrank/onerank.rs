use crate::densela::DenseMatrix;
use crate::error::{invalid, Result};
use crate::lowrank::factors::FactorPair;
use crate::scalar::Real;

/// Row-sum / column-sum rank-1 estimator `V̂ = (A 1)(1ᵀ A) / (1ᵀ A 1)`, the
/// factorisation used by Adafactor.
///
/// `A` must be entrywise non-negative with a positive total. The estimate is
/// exact whenever `A` is an outer product of non-negative vectors.
pub fn onerank_factor<T: Real>(a: &DenseMatrix<T>) -> Result<FactorPair<T>> {
    if a.as_slice().iter().any(|&x| x < T::zero()) {
        return Err(invalid("rank-1 estimator needs a non-negative matrix"));
    }
    let rows = a.row_sums();
    let cols = a.col_sums();
    let total: T = rows.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(invalid("rank-1 estimator needs a positive total sum"));
    }
    from_marginals(&rows, &cols, total)
}

/// Factors `r cᵀ / total` from precomputed marginals.
pub(crate) fn from_marginals<T: Real>(rows: &[T], cols: &[T], total: T) -> Result<FactorPair<T>> {
    let q = DenseMatrix::from_vec(rows.len(), 1, rows.to_vec())?;
    let ut = DenseMatrix::from_vec(cols.len(), 1, cols.iter().map(|&c| c / total).collect())?;
    FactorPair::new(q, ut)
}
