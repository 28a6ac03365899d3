//! AdamW, the Adafactor-style rank-1 baseline and Adapprox, with analytic
//! state accounting and binary state snapshots.

mod config;
mod memory;
mod snapshot;
mod state;
mod step;

pub use config::{AdapproxConfig, OptimizerKind};
pub use memory::{memory_bytes, MemoryReport, ParamShape, RankMode, ShapeManifest};
pub use snapshot::{state_deserialize, state_serialize};
pub use state::{ParamState, SecondMoment};
pub use step::{
    adafactor_step, adamw_step, adapprox_step, cosine, cosine_guidance, guidance_factor, rms, step, StepReport,
};

use crate::densela::{DenseMatrix, RngStream};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// One optimizer instance driving a list of parameter matrices.
///
/// Parameter `i` draws its sketching randomness from stream `i` of the
/// optimizer seed, so states never share a generator.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    config: AdapproxConfig,
    states: Vec<ParamState<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, config: AdapproxConfig, shapes: &[(usize, usize)], seed: u64) -> Result<Self> {
        config.validate()?;
        let states = shapes
            .iter()
            .enumerate()
            .map(|(i, &(m, n))| ParamState::new(i as u64, kind, m, n, &config, RngStream::with_stream(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, config, states })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn config(&self) -> &AdapproxConfig {
        &self.config
    }

    pub fn states(&self) -> &[ParamState<T>] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [ParamState<T>] {
        &mut self.states
    }

    /// Elements of optimizer state currently held.
    pub fn stored_elements(&self) -> usize {
        self.states.iter().map(ParamState::stored_elements).sum()
    }

    /// Applies one update to every parameter.
    pub fn step(&mut self, params: &mut [DenseMatrix<T>], grads: &[DenseMatrix<T>], lr: f64) -> Result<Vec<StepReport>> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(invalid(format!(
                "optimizer holds {} states but got {} parameters and {} gradients",
                self.states.len(),
                params.len(),
                grads.len()
            )));
        }
        self.states
            .iter_mut()
            .zip(params.iter_mut())
            .zip(grads)
            .map(|((s, w), g)| step(s, w, g, lr, &self.config))
            .collect()
    }
}
