//! Seeded random streams.
//!
//! Uniform bits come from ChaCha8 (`rand_chacha`), whose output is specified
//! bit-for-bit independent of platform. Normal deviates use the polar-free
//! Box-Muller transform evaluated with `libm`, so the same seed yields the same
//! samples on every target.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::densela::matrix::DenseMatrix;
use crate::error::Result;
use crate::scalar::Real;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// A reproducible source of uniform and standard-normal samples.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

/// Everything needed to resume a stream exactly where it stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RngSnapshot {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
    pub spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream `stream` of the generator keyed by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            inner,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Uniform integer in `0..n` (Lemire's nearly-divisionless method).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        loop {
            let x = self.inner.next_u64();
            let m = (x as u128) * (n as u128);
            let low = m as u64;
            if low >= n || low >= n.wrapping_neg() % n {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal deviate.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((self.inner.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53;
        let u2 = (self.inner.next_u64() >> 11) as f64 * TWO_POW_NEG_53;
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    /// Fisher-Yates shuffle of `items`.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn snapshot(&self) -> RngSnapshot {
        RngSnapshot {
            seed: self.seed,
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos(),
            spare: self.spare,
        }
    }

    pub fn restore(snap: &RngSnapshot) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(snap.seed);
        inner.set_stream(snap.stream);
        inner.set_word_pos(snap.word_pos);
        Self {
            seed: snap.seed,
            inner,
            spare: snap.spare,
        }
    }
}

/// `rows x cols` matrix of i.i.d. standard normal entries drawn row by row.
pub fn gaussian_matrix<T: Real>(rows: usize, cols: usize, rng: &mut RngStream) -> Result<DenseMatrix<T>> {
    DenseMatrix::from_fn(rows, cols, |_, _| T::of(rng.gaussian()))
}
