use crate::error::{invalid, Result};
use crate::Matrix;

/// A differentiable objective over a list of parameter matrices.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// Shapes of the parameter matrices, in order.
    fn shapes(&self) -> Vec<(usize, usize)>;

    /// Deterministic starting point.
    fn init(&self) -> Vec<Matrix>;

    /// Loss and analytic gradient on the sample indices `batch`, or on the
    /// whole objective when `batch` is `None`.
    fn loss_grad(&self, params: &[Matrix], batch: Option<&[usize]>) -> Result<(f64, Vec<Matrix>)>;

    fn loss(&self, params: &[Matrix], batch: Option<&[usize]>) -> Result<f64> {
        Ok(self.loss_grad(params, batch)?.0)
    }

    /// Number of data samples; zero for deterministic objectives.
    fn n_samples(&self) -> usize {
        0
    }

    /// Mini-batch size, or `None` for full-batch training.
    fn batch_size(&self) -> Option<usize> {
        None
    }
}

pub(crate) fn check_params(name: &str, expected: &[(usize, usize)], params: &[Matrix]) -> Result<()> {
    let got: Vec<_> = params.iter().map(Matrix::shape).collect();
    if got != expected {
        return Err(invalid(format!("{name}: expected parameter shapes {expected:?}, got {got:?}")));
    }
    Ok(())
}

/// Rows of `x` listed in `idx`, or all of `x`.
pub(crate) fn select_rows(x: &Matrix, idx: Option<&[usize]>) -> Result<Matrix> {
    match idx {
        None => Ok(x.clone()),
        Some(idx) => {
            if idx.is_empty() {
                return Err(invalid("empty batch"));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
                return Err(invalid(format!("sample index {bad} out of range")));
            }
            Matrix::from_fn(idx.len(), x.cols(), |i, j| x.get(idx[i], j))
        }
    }
}

/// Adds `bias` (a `1 x n` row) to every row of `z`.
pub(crate) fn add_row(z: &mut Matrix, bias: &Matrix) {
    for i in 0..z.rows() {
        for (x, &b) in z.row_mut(i).iter_mut().zip(bias.as_slice()) {
            *x += b;
        }
    }
}
