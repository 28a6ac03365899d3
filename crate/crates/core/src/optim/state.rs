use crate::densela::{DenseMatrix, RngStream};
use crate::error::{invalid, Result};
use crate::lowrank::FactorPair;
use crate::optim::config::{AdapproxConfig, OptimizerKind};
use crate::scalar::Real;

/// Storage of the second-moment estimate.
#[derive(Clone, Debug, PartialEq)]
pub enum SecondMoment<T> {
    /// Full `m x n` running average.
    Dense(DenseMatrix<T>),
    /// Low-rank factors `V ≈ Q Utᵀ`.
    Factored(FactorPair<T>),
    /// Running averages of the row sums and column sums of `G²`.
    RowCol { rows: Vec<T>, cols: Vec<T> },
}

impl<T: Real> SecondMoment<T> {
    pub fn stored_elements(&self) -> usize {
        match self {
            Self::Dense(v) => v.len(),
            Self::Factored(f) => f.stored_elements(),
            Self::RowCol { rows, cols } => rows.len() + cols.len(),
        }
    }
}

/// Optimizer state of one parameter matrix.
#[derive(Clone, Debug)]
pub struct ParamState<T> {
    pub(crate) id: u64,
    pub(crate) kind: OptimizerKind,
    pub(crate) shape: (usize, usize),
    pub(crate) first_moment: Option<DenseMatrix<T>>,
    pub(crate) second_moment: SecondMoment<T>,
    pub(crate) step: u64,
    pub(crate) rng: RngStream,
}

impl<T: Real> ParamState<T> {
    /// Zero state for a `rows x cols` parameter.
    ///
    /// AdamW always keeps dense `M` and `V`. The factored optimizers keep `M`
    /// only when `β1 > 0` and factor `V` when both dimensions reach
    /// `cfg.factor_min_dim`; Adapprox starts at rank `k_init` with zero
    /// factors.
    pub fn new(
        id: u64,
        kind: OptimizerKind,
        rows: usize,
        cols: usize,
        cfg: &AdapproxConfig,
        rng: RngStream,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("parameter {id} has an empty shape")));
        }
        let dense = || DenseMatrix::zeros(rows, cols);
        let (first_moment, second_moment) = match kind {
            OptimizerKind::AdamW => (Some(dense()?), SecondMoment::Dense(dense()?)),
            _ => {
                let first = if cfg.beta1 > 0.0 { Some(dense()?) } else { None };
                let second = if !cfg.is_factored(rows, cols) {
                    SecondMoment::Dense(dense()?)
                } else if kind == OptimizerKind::Adafactor {
                    SecondMoment::RowCol {
                        rows: vec![T::zero(); rows],
                        cols: vec![T::zero(); cols],
                    }
                } else {
                    let k = cfg.rank_policy.k_start(rows, cols);
                    SecondMoment::Factored(FactorPair::zeros(rows, cols, k)?)
                };
                (first, second)
            }
        };
        Ok(Self {
            id,
            kind,
            shape: (rows, cols),
            first_moment,
            second_moment,
            step: 0,
            rng,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> Option<&DenseMatrix<T>> {
        self.first_moment.as_ref()
    }

    pub fn second_moment(&self) -> &SecondMoment<T> {
        &self.second_moment
    }

    pub fn is_factored(&self) -> bool {
        !matches!(self.second_moment, SecondMoment::Dense(_))
    }

    /// Current rank `k_t` of a factored Adapprox state.
    pub fn current_rank(&self) -> Option<usize> {
        match &self.second_moment {
            SecondMoment::Factored(f) => Some(f.rank()),
            SecondMoment::RowCol { .. } => Some(1),
            SecondMoment::Dense(_) => None,
        }
    }

    /// Elements held by the optimizer for this parameter.
    pub fn stored_elements(&self) -> usize {
        self.first_moment.as_ref().map_or(0, |m| m.len()) + self.second_moment.stored_elements()
    }

    /// Current second-moment estimate as a dense matrix.
    pub fn second_moment_estimate(&self) -> DenseMatrix<T> {
        match &self.second_moment {
            SecondMoment::Dense(v) => v.clone(),
            SecondMoment::Factored(f) => f.reconstruct(),
            SecondMoment::RowCol { rows, cols } => rowcol_estimate(rows, cols, self.shape),
        }
    }

    pub fn rng(&self) -> &RngStream {
        &self.rng
    }

    /// Replaces the first-moment accumulator.
    pub fn set_first_moment(&mut self, m: DenseMatrix<T>) -> Result<()> {
        let Some(current) = self.first_moment.as_mut() else {
            return Err(invalid(format!("parameter {} keeps no first moment", self.id)));
        };
        if m.shape() != self.shape {
            return Err(invalid(format!(
                "first moment of parameter {} must be {}x{}",
                self.id, self.shape.0, self.shape.1
            )));
        }
        *current = m;
        Ok(())
    }

    /// Clipped update `M̃` that the next step would produce for `grad`,
    /// before it enters the first moment. Leaves the state untouched.
    pub fn preview_update(&self, grad: &DenseMatrix<T>, cfg: &AdapproxConfig) -> Result<DenseMatrix<T>> {
        if self.kind == OptimizerKind::AdamW {
            return Err(invalid("AdamW has no separate update before averaging"));
        }
        let mut probe = self.clone();
        let cfg = AdapproxConfig {
            beta1: 0.0,
            weight_decay: 0.0,
            cosine_guidance: false,
            ..*cfg
        };
        let mut w = DenseMatrix::zeros(self.shape.0, self.shape.1)?;
        crate::optim::step::step(&mut probe, &mut w, grad, 1.0, &cfg)?;
        Ok(w.scale(-T::one()))
    }
}

/// `r cᵀ / Σr`, or zeros when no mass has accumulated.
pub(crate) fn rowcol_estimate<T: Real>(rows: &[T], cols: &[T], shape: (usize, usize)) -> DenseMatrix<T> {
    let total: T = rows.iter().copied().sum();
    if !(total > T::zero()) {
        return DenseMatrix::from_fn(shape.0, shape.1, |_, _| T::zero()).expect("non-empty shape");
    }
    DenseMatrix::from_fn(shape.0, shape.1, |i, j| rows[i] * cols[j] / total).expect("non-empty shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(beta1: f64, min_dim: usize) -> AdapproxConfig {
        AdapproxConfig {
            beta1,
            factor_min_dim: min_dim,
            ..Default::default()
        }
    }

    #[test]
    fn layouts() {
        let rng = || RngStream::new(0);
        let s = ParamState::<f64>::new(0, OptimizerKind::Adapprox, 16, 12, &cfg(0.9, 8), rng()).unwrap();
        assert_eq!(s.current_rank(), Some(1));
        assert_eq!(s.stored_elements(), 16 * 12 + 16 + 12);

        let s = ParamState::<f64>::new(0, OptimizerKind::Adapprox, 16, 4, &cfg(0.0, 8), rng()).unwrap();
        assert!(!s.is_factored());
        assert!(s.first_moment().is_none());
        assert_eq!(s.stored_elements(), 64);

        let s = ParamState::<f64>::new(0, OptimizerKind::Adafactor, 16, 12, &cfg(0.0, 8), rng()).unwrap();
        assert_eq!(s.stored_elements(), 28);

        let s = ParamState::<f64>::new(0, OptimizerKind::AdamW, 16, 12, &cfg(0.0, 8), rng()).unwrap();
        assert_eq!(s.stored_elements(), 2 * 16 * 12);
        assert!(ParamState::<f64>::new(0, OptimizerKind::AdamW, 0, 12, &cfg(0.0, 8), rng()).is_err());
    }

    #[test]
    fn rowcol_estimate_matches_onerank() {
        let r = [1.0, 3.0];
        let c = [2.0, 2.0];
        let v = rowcol_estimate(&r, &c, (2, 2));
        assert_eq!(v.as_slice(), &[0.5, 0.5, 1.5, 1.5]);
        assert_eq!(rowcol_estimate(&[0.0, 0.0], &[0.0], (2, 1)).sum(), 0.0);
    }

    #[test]
    fn preview_matches_the_step() {
        let c = AdapproxConfig {
            weight_decay: 0.0,
            ..cfg(0.9, 4)
        };
        let mut s = ParamState::<f64>::new(0, OptimizerKind::Adapprox, 6, 5, &c, RngStream::new(3)).unwrap();
        let g = DenseMatrix::from_fn(6, 5, |i, j| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1).unwrap();
        let u = s.preview_update(&g, &c).unwrap();
        assert_eq!(s.step(), 0);
        let mut w = DenseMatrix::zeros(6, 5).unwrap();
        crate::optim::step::step(&mut s, &mut w, &g, 1.0, &c).unwrap();
        let expect = u.scale(-(1.0 - 0.9));
        assert!(w.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn first_moment_replacement() {
        let rng = || RngStream::new(0);
        let mut s = ParamState::<f64>::new(0, OptimizerKind::Adapprox, 3, 2, &cfg(0.9, 8), rng()).unwrap();
        assert!(s.set_first_moment(DenseMatrix::zeros(2, 3).unwrap()).is_err());
        s.set_first_moment(DenseMatrix::filled(3, 2, 0.5).unwrap()).unwrap();
        assert_eq!(s.first_moment().unwrap().sum(), 3.0);
        let mut s = ParamState::<f64>::new(0, OptimizerKind::Adapprox, 3, 2, &cfg(0.0, 8), rng()).unwrap();
        assert!(s.set_first_moment(DenseMatrix::zeros(3, 2).unwrap()).is_err());
        let a = ParamState::<f64>::new(0, OptimizerKind::AdamW, 3, 2, &cfg(0.9, 8), rng()).unwrap();
        assert!(a.preview_update(&DenseMatrix::zeros(3, 2).unwrap(), &cfg(0.9, 8)).is_err());
    }
}
