use crate::densela::{gaussian_matrix, DenseMatrix, RngStream};
use crate::error::{invalid, Error, Result};
use crate::lowrank::factors::{FactorPair, RankExtension, RankPolicy, Sampling, SrsiParams};
use crate::lowrank::srsi::{approx_error_rate, srsi, subspace_iteration};
use crate::scalar::Real;

const POLE_TOLERANCE: f64 = 1e-12;

/// Unclamped growth `floor(η / (exp(ω ξ + φ) + τ))`. May be negative.
pub fn raw_growth(xi: f64, policy: &RankPolicy) -> Result<i64> {
    if !(xi > 0.0) {
        return Err(invalid(format!("growth needs xi > 0, got {xi}")));
    }
    let denom = libm::exp(policy.omega * xi + policy.phi) + policy.tau;
    if denom.abs() < POLE_TOLERANCE {
        return Err(Error::GrowthPole(denom));
    }
    Ok((policy.eta / denom).floor() as i64)
}

/// Rank increment for error rate `xi`, at least `policy.min_growth`.
pub fn rank_growth(xi: f64, policy: &RankPolicy) -> Result<usize> {
    let raw = raw_growth(xi, policy)?;
    Ok(raw.max(policy.min_growth as i64) as usize)
}

/// Result of one adaptive factorisation.
#[derive(Clone, Debug)]
pub struct AdaptiveOutcome<T> {
    pub factors: FactorPair<T>,
    pub rank: usize,
    /// Error rate of the returned factors; only measured on adaptation steps.
    pub xi: Option<T>,
    /// Number of subspace-iteration calls made.
    pub attempts: usize,
}

/// Adaptive S-RSI.
///
/// On adaptation steps the rank restarts from `k_init` and grows by
/// [`rank_growth`] until the error rate falls to `xi_thresh` or the rank
/// reaches `k_max`; the oversampling shrinks to `k_max − k` as the rank
/// grows. Other steps reuse `k_prev` with a single S-RSI call.
pub fn as_rsi<T: Real>(
    a: &DenseMatrix<T>,
    k_prev: usize,
    policy: &RankPolicy,
    step: u64,
    sampling: Sampling,
    rng: &mut RngStream,
) -> Result<AdaptiveOutcome<T>> {
    let (m, n) = a.shape();
    let k_max = policy.k_max(m, n);
    let min_dim = m.min(n);
    if step == 0 {
        return Err(invalid("steps are counted from 1"));
    }
    if k_prev == 0 || k_prev > k_max {
        return Err(invalid(format!(
            "previous rank {k_prev} outside [1, {k_max}]"
        )));
    }

    if !policy.is_adaptation_step(step) {
        let p = sampling.oversample.min(min_dim - k_prev);
        let params = SrsiParams::at_rank(k_prev, Sampling { oversample: p, ..sampling });
        let factors = srsi(a, params, rng)?;
        return Ok(AdaptiveOutcome {
            factors,
            rank: k_prev,
            xi: None,
            attempts: 1,
        });
    }

    let thresh = T::of(policy.xi_thresh);
    let mut k = policy.k_start(m, n);
    let mut p = sampling.oversample.min(min_dim - k);
    let mut attempts = 0;
    let mut previous: Option<FactorPair<T>> = None;
    loop {
        let factors = match (policy.extension, previous.take()) {
            (RankExtension::Append, Some(prev)) => {
                let fresh = gaussian_matrix(n, k - prev.rank() + p, rng)?;
                let start = prev.ut().hstack(&fresh)?;
                subspace_iteration(a, start, k, sampling.power_iters, sampling.truncation)?
            }
            _ => srsi(a, SrsiParams::at_rank(k, Sampling { oversample: p, ..sampling }), rng)?,
        };
        attempts += 1;
        let xi = approx_error_rate(a, &factors)?;
        if xi <= thresh || k == k_max {
            return Ok(AdaptiveOutcome {
                factors,
                rank: k,
                xi: Some(xi),
                attempts,
            });
        }
        k = (k + rank_growth(xi.as_f64(), policy)?).min(k_max);
        p = p.min(k_max - k).min(min_dim - k);
        previous = Some(factors);
    }
}
