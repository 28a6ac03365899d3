//! Dense linear algebra: storage, products, norms, Householder QR and seeded
//! Gaussian sampling.

mod matrix;
mod qr;
mod rng;
mod text;

pub use matrix::DenseMatrix;
pub use qr::qr_orthonormalize;
pub use rng::{gaussian_matrix, RngSnapshot, RngStream};
pub use text::{format_matrix, parse_matrix, read_matrix};

pub(crate) use matrix::dot;
