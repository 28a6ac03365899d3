use crate::densela::DenseMatrix;
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Low-rank factors `Q` (`m x k`) and `Ut` (`n x k`) with `A ≈ Q · Utᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair<T> {
    q: DenseMatrix<T>,
    ut: DenseMatrix<T>,
}

impl<T: Real> FactorPair<T> {
    pub fn new(q: DenseMatrix<T>, ut: DenseMatrix<T>) -> Result<Self> {
        if q.cols() != ut.cols() {
            return Err(invalid(format!(
                "factor ranks differ: Q has {} columns, Ut has {}",
                q.cols(),
                ut.cols()
            )));
        }
        Ok(Self { q, ut })
    }

    /// All-zero factors of the given rank, the optimizer's initial state.
    pub fn zeros(rows: usize, cols: usize, rank: usize) -> Result<Self> {
        Ok(Self {
            q: DenseMatrix::zeros(rows, rank)?,
            ut: DenseMatrix::zeros(cols, rank)?,
        })
    }

    #[inline]
    pub fn q(&self) -> &DenseMatrix<T> {
        &self.q
    }

    #[inline]
    pub fn ut(&self) -> &DenseMatrix<T> {
        &self.ut
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.q.cols()
    }

    /// Shape `(m, n)` of the approximated matrix.
    #[inline]
    pub fn target_shape(&self) -> (usize, usize) {
        (self.q.rows(), self.ut.rows())
    }

    /// Number of stored scalars, `k (m + n)`.
    pub fn stored_elements(&self) -> usize {
        self.q.len() + self.ut.len()
    }

    /// Dense `Q · Utᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.q
            .matmul_nt(&self.ut)
            .expect("factor ranks agree by construction")
    }

    pub fn into_parts(self) -> (DenseMatrix<T>, DenseMatrix<T>) {
        (self.q, self.ut)
    }
}

/// Singular values sorted non-increasing, all non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum<T>(Vec<T>);

impl<T: Real> SingularSpectrum<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("singular values must be finite and non-negative"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("singular values must be sorted non-increasing"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sqrt(Σ_{i>k} σᵢ²)`, the optimal rank-`k` Frobenius error.
    pub fn tail_norm(&self, k: usize) -> T {
        self.0.iter().skip(k).map(|&s| s * s).sum::<T>().sqrt()
    }

    /// `sqrt(Σ σᵢ²)`, which equals the Frobenius norm of the matrix.
    pub fn total_norm(&self) -> T {
        self.tail_norm(0)
    }
}

/// How the final `k + p` basis is cut down to rank `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Truncation {
    /// Rotate the basis onto its dominant `k`-dimensional subspace
    /// (Rayleigh-Ritz on `QᵀA`) before keeping `k` columns. Oversampled
    /// directions then contribute to the result.
    #[default]
    RayleighRitz,
    /// Keep the leading `k` columns of the QR basis as produced. QR is
    /// column-causal, so these columns never see the `p` extra samples.
    Leading,
}

/// Sampling controls shared by every subspace-iteration call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    /// Number of power iterations `l`.
    pub power_iters: usize,
    /// Oversampling count `p`.
    pub oversample: usize,
    pub truncation: Truncation,
}

impl Sampling {
    pub fn new(power_iters: usize, oversample: usize) -> Self {
        Self {
            power_iters,
            oversample,
            truncation: Truncation::default(),
        }
    }

    pub fn with_truncation(self, truncation: Truncation) -> Self {
        Self { truncation, ..self }
    }
}

impl Default for Sampling {
    /// `l = 5`, `p = 5`.
    fn default() -> Self {
        Self::new(5, 5)
    }
}

/// Inputs of one streamlined subspace-iteration call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SrsiParams {
    /// Target rank `k`.
    pub rank: usize,
    /// Number of power iterations `l`.
    pub power_iters: usize,
    /// Oversampling count `p`.
    pub oversample: usize,
    pub truncation: Truncation,
}

impl SrsiParams {
    pub fn new(rank: usize, power_iters: usize, oversample: usize) -> Self {
        Self {
            rank,
            power_iters,
            oversample,
            truncation: Truncation::default(),
        }
    }

    pub fn at_rank(rank: usize, sampling: Sampling) -> Self {
        Self {
            rank,
            power_iters: sampling.power_iters,
            oversample: sampling.oversample,
            truncation: sampling.truncation,
        }
    }

    pub fn with_truncation(self, truncation: Truncation) -> Self {
        Self { truncation, ..self }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rank == 0 {
            return Err(invalid("target rank must be at least 1"));
        }
        if self.power_iters == 0 {
            return Err(invalid("power iteration count must be at least 1"));
        }
        if self.rank + self.oversample > rows.min(cols) {
            return Err(invalid(format!(
                "rank {} + oversampling {} exceeds min({rows}, {cols})",
                self.rank, self.oversample
            )));
        }
        Ok(())
    }
}

/// How an adaptation loop enlarges the subspace after a growth step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RankExtension {
    /// Fresh subspace iteration at the enlarged rank.
    #[default]
    Resample,
    /// Keep the previous basis and append new Gaussian directions before
    /// iterating again.
    Append,
}

/// Hyperparameters of adaptive rank selection and the growth function
/// `f(ξ) = floor(η / (exp(ω ξ + φ) + τ))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankPolicy {
    pub k_init: usize,
    /// `k_max = max(1, floor(k_max_fraction · min(m, n)))`.
    pub k_max_fraction: f64,
    pub xi_thresh: f64,
    /// Adaptation interval `Δs` in steps.
    pub delta_s: u64,
    pub eta: f64,
    pub omega: f64,
    pub phi: f64,
    pub tau: f64,
    /// Lower bound on the growth returned by [`rank_growth`](super::rank_growth).
    pub min_growth: usize,
    pub extension: RankExtension,
}

impl Default for RankPolicy {
    /// `k_init = 1`, `k_max = ¼ min(m, n)`, `ξ_thresh = 0.01`, `Δs = 10`,
    /// `η = 200`, `ω = −10`, `φ = 2.5`, `τ = 9`.
    ///
    /// With positive `φ` and `τ` the growth is a rising sigmoid in `ξ`
    /// bounded by `η / τ`. See [`RankPolicy::literal`] for the negative-sign
    /// variant.
    fn default() -> Self {
        Self {
            k_init: 1,
            k_max_fraction: 0.25,
            xi_thresh: 0.01,
            delta_s: 10,
            eta: 200.0,
            omega: -10.0,
            phi: 2.5,
            tau: 9.0,
            min_growth: 1,
            extension: RankExtension::Resample,
        }
    }
}

impl RankPolicy {
    /// Defaults with `φ = −2.5`, `τ = −9`. The growth denominator is then
    /// negative for every `ξ > 0`, so the raw growth is always negative and
    /// only the `min_growth` clamp keeps the adaptation loop moving.
    pub fn literal() -> Self {
        Self {
            phi: -2.5,
            tau: -9.0,
            ..Self::default()
        }
    }

    pub fn k_max(&self, rows: usize, cols: usize) -> usize {
        ((self.k_max_fraction * rows.min(cols) as f64).floor() as usize).max(1)
    }

    /// Initial rank, never above `k_max`.
    pub fn k_start(&self, rows: usize, cols: usize) -> usize {
        self.k_init.min(self.k_max(rows, cols))
    }

    /// Whether step `t` (1-based) refreshes the rank.
    pub fn is_adaptation_step(&self, t: u64) -> bool {
        (t - 1) % self.delta_s == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_init == 0 {
            return Err(invalid("k_init must be at least 1"));
        }
        if !(self.k_max_fraction > 0.0 && self.k_max_fraction <= 1.0) {
            return Err(invalid("k_max_fraction must lie in (0, 1]"));
        }
        if !(self.xi_thresh > 0.0) {
            return Err(invalid("xi_thresh must be positive"));
        }
        if self.delta_s == 0 {
            return Err(invalid("delta_s must be at least 1"));
        }
        if !(self.eta > 0.0) {
            return Err(invalid("eta must be positive"));
        }
        if !(self.omega < 0.0) {
            return Err(invalid("omega must be negative"));
        }
        if !self.phi.is_finite() || !self.tau.is_finite() {
            return Err(invalid("phi and tau must be finite"));
        }
        if self.min_growth == 0 {
            return Err(invalid("min_growth must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_validation() {
        assert!(SingularSpectrum::new(vec![3.0, 2.0, 2.0, 0.0]).is_ok());
        assert!(SingularSpectrum::new(vec![1.0, 2.0]).is_err());
        assert!(SingularSpectrum::new(vec![1.0, -0.5]).is_err());
        let s = SingularSpectrum::new(vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.tail_norm(2), 1.0);
        assert!((s.total_norm() - 14f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn k_max_rounding() {
        let p = RankPolicy::default();
        assert_eq!(p.k_max(768, 2304), 192);
        assert_eq!(p.k_max(1030, 900), 225);
        assert_eq!(p.k_max(3, 3), 1);
    }

    #[test]
    fn adaptation_schedule() {
        let p = RankPolicy::default();
        let steps: Vec<u64> = (1..=31).filter(|&t| p.is_adaptation_step(t)).collect();
        assert_eq!(steps, vec![1, 11, 21, 31]);
        let every = RankPolicy {
            delta_s: 1,
            ..p
        };
        assert!((1..5).all(|t| every.is_adaptation_step(t)));
    }

    #[test]
    fn srsi_params_bounds() {
        assert!(SrsiParams::new(3, 5, 2).validate(5, 8).is_ok());
        assert!(SrsiParams::new(3, 5, 3).validate(5, 8).is_err());
        assert!(SrsiParams::new(0, 5, 0).validate(5, 8).is_err());
        assert!(SrsiParams::new(1, 0, 0).validate(5, 8).is_err());
    }

    #[test]
    fn policy_validation() {
        assert!(RankPolicy::default().validate().is_ok());
        assert!(RankPolicy::literal().validate().is_ok());
        assert!(RankPolicy { omega: 1.0, ..Default::default() }.validate().is_err());
        assert!(RankPolicy { delta_s: 0, ..Default::default() }.validate().is_err());
    }
}
