//! Low-rank approximation: streamlined and adaptive randomized subspace
//! iteration, the rank-1 marginal estimator, the exact SVD reference and the
//! theoretical error bound.

mod adaptive;
mod bound;
mod factors;
mod onerank;
mod oracle;
mod srsi;
pub mod synthetic;

pub use adaptive::{as_rsi, rank_growth, raw_growth, AdaptiveOutcome};
pub use bound::{error_bound, linear_independence_check};
pub use factors::{FactorPair, RankExtension, RankPolicy, Sampling, SingularSpectrum, SrsiParams, Truncation};
pub use onerank::onerank_factor;
pub use oracle::{jacobi_svd, singular_values, spectral_norm, truncated_svd_oracle, ThinSvd, ORACLE_MAX_DIM};
pub use srsi::{approx_error_rate, srsi};

#[allow(unused_imports)]
pub(crate) use onerank::from_marginals;
