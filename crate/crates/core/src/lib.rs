//! Memory-efficient Adam-style optimization through randomized low-rank
//! approximation of the second moment.
//!
//! The numeric core ([`densela`], [`lowrank`], [`optim`]) is generic over the
//! [`Real`] scalar; the aliases below fix it to `f64`, the precision used by
//! the experiment harness in [`bench`].

pub mod bench;
pub mod densela;
pub mod error;
pub mod lowrank;
pub mod optim;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision dense matrix.
pub type Matrix = densela::DenseMatrix<f64>;
/// Single-precision dense matrix.
pub type Matrix32 = densela::DenseMatrix<f32>;
/// Double-precision low-rank factors.
pub type Factors = lowrank::FactorPair<f64>;
/// Double-precision optimizer state of one parameter.
pub type ParamState = optim::ParamState<f64>;
