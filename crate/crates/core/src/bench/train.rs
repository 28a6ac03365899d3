use std::time::Instant;

use crate::bench::problem::Problem;
use crate::bench::record::{ParamTelemetry, TrainRecord};
use crate::bench::schedule::{lr_at, LrSchedule};
use crate::densela::RngStream;
use crate::error::{invalid, Error, Result};
use crate::optim::{AdapproxConfig, Optimizer, OptimizerKind};
use crate::Matrix;

/// Losses above this count as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Sub-stream of the run seed that drives mini-batch sampling; parameter
/// streams use the low indices.
const BATCH_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainOptions {
    /// Record wall-clock step times. Off by default so that record streams
    /// are reproducible byte for byte.
    pub timings: bool,
}

/// Where and how a run blew up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub step: u64,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub records: Vec<TrainRecord>,
    pub params: Vec<Matrix>,
    /// Full-objective loss at the final weights; infinite after divergence.
    pub final_loss: f64,
    pub diverged: Option<Divergence>,
    /// Optimizer state elements held at the end of the run.
    pub state_elements: usize,
    /// Largest state held after any step.
    pub peak_state_elements: usize,
}

impl TrainRun {
    /// Converts a divergence into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.diverged {
            Some(d) => Err(Error::Diverged { step: d.step, loss: d.loss }),
            None => Ok(self),
        }
    }

    pub fn mean_rank(&self) -> Option<f64> {
        let ranks: Vec<f64> = self
            .records
            .iter()
            .flat_map(|r| r.params.iter().filter_map(|p| p.rank))
            .map(|k| k as f64)
            .collect();
        (!ranks.is_empty()).then(|| ranks.iter().sum::<f64>() / ranks.len() as f64)
    }
}

pub fn run_training(
    problem: &dyn Problem,
    kind: OptimizerKind,
    cfg: &AdapproxConfig,
    schedule: &LrSchedule,
    steps: u64,
    seed: u64,
) -> Result<TrainRun> {
    run_training_with(problem, kind, cfg, schedule, steps, seed, TrainOptions::default())
}

/// Trains `problem` from its deterministic start for `steps` steps.
///
/// Every optimizer parameter stream and the batch sampler derive from `seed`,
/// so equal inputs give bit-identical records. A loss above
/// [`DIVERGENCE_LOSS`], a non-finite loss or a non-finite gradient ends the
/// run early with [`TrainRun::diverged`] set.
pub fn run_training_with(
    problem: &dyn Problem,
    kind: OptimizerKind,
    cfg: &AdapproxConfig,
    schedule: &LrSchedule,
    steps: u64,
    seed: u64,
    options: TrainOptions,
) -> Result<TrainRun> {
    if steps == 0 {
        return Err(invalid("training needs at least one step"));
    }
    schedule.validate()?;
    if schedule.total_steps < steps {
        return Err(invalid(format!(
            "schedule covers {} steps, run asks for {steps}",
            schedule.total_steps
        )));
    }
    let shapes = problem.shapes();
    let mut optimizer = Optimizer::new(kind, *cfg, &shapes, seed)?;
    let mut params = problem.init();
    let mut sampler = RngStream::with_stream(seed, BATCH_STREAM);
    let mut records = Vec::with_capacity(steps as usize);
    let mut diverged = None;
    let mut peak_state_elements = optimizer.stored_elements();

    for t in 1..=steps {
        let clock = options.timings.then(Instant::now);
        let batch: Option<Vec<usize>> = problem
            .batch_size()
            .map(|b| (0..b).map(|_| sampler.below(problem.n_samples())).collect());
        let (loss, grads) = problem.loss_grad(&params, batch.as_deref())?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS || grads.iter().any(|g| !g.is_finite()) {
            diverged = Some(Divergence { step: t, loss });
            break;
        }
        let lr = lr_at(schedule, t)?;
        let reports = optimizer.step(&mut params, &grads, lr)?;
        peak_state_elements = peak_state_elements.max(optimizer.stored_elements());
        if params.iter().any(|p| !p.is_finite()) {
            diverged = Some(Divergence { step: t, loss: f64::INFINITY });
            break;
        }
        let telemetry = reports
            .iter()
            .zip(&grads)
            .zip(&shapes)
            .map(|((r, g), &(m, n))| {
                debug_assert!(r.rank.is_none_or(|k| k >= 1 && k <= cfg.rank_policy.k_max(m, n).max(1)));
                debug_assert!(r.xi.is_none_or(|xi| {
                    xi <= cfg.rank_policy.xi_thresh || r.rank == Some(cfg.rank_policy.k_max(m, n))
                }));
                ParamTelemetry {
                    grad_norm: g.frobenius_norm(),
                    rank: r.rank,
                    xi: r.xi,
                    clipped: r.clipped,
                }
            })
            .collect();
        records.push(TrainRecord {
            step: t,
            loss,
            params: telemetry,
            micros: clock.map_or(0, |c| c.elapsed().as_micros() as u64),
        });
    }

    let final_loss = match diverged {
        Some(_) => f64::INFINITY,
        None => {
            let l = problem.loss(&params, None)?;
            if l.is_finite() {
                l
            } else {
                diverged = Some(Divergence { step: steps, loss: l });
                f64::INFINITY
            }
        }
    };
    Ok(TrainRun {
        records,
        params,
        final_loss,
        diverged,
        state_elements: optimizer.stored_elements(),
        peak_state_elements,
    })
}

/// First step at which the mean of the last `window` recorded losses is at
/// or below `threshold`.
pub fn steps_to_threshold(records: &[TrainRecord], threshold: f64, window: usize) -> Option<u64> {
    let window = window.max(1);
    let mut sum = 0.0;
    for (i, r) in records.iter().enumerate() {
        sum += r.loss;
        if i >= window {
            sum -= records[i - window].loss;
        }
        if i + 1 >= window && sum / window as f64 <= threshold {
            return Some(r.step);
        }
    }
    None
}
