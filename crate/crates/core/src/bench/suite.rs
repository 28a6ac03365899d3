use std::fmt;
use std::str::FromStr;

use crate::bench::logreg::{Logreg, LogregSpec};
use crate::bench::mlp::{Mlp, MlpSpec};
use crate::bench::problem::Problem;
use crate::bench::quadratic::{Curvature, Offset, Quadratic, QuadraticSpec};
use crate::bench::schedule::LrSchedule;
use crate::bench::train::{run_training, TrainRun};
use crate::error::{invalid, Error, Result};
use crate::optim::{AdapproxConfig, OptimizerKind};

/// The bundled benchmark problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Quadratic,
    Logreg,
    Mlp,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [Self::Quadratic, Self::Logreg, Self::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Logreg => "logreg",
            Self::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" | "quad" => Ok(Self::Quadratic),
            "logreg" => Ok(Self::Logreg),
            "mlp" => Ok(Self::Mlp),
            _ => Err(invalid(format!("unknown problem `{s}`"))),
        }
    }
}

/// A fully specified problem; the seed is substituted per run.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Quadratic(QuadraticSpec),
    Logreg(LogregSpec),
    Mlp(MlpSpec),
}

impl ProblemSpec {
    /// Stiff 64x48 quadratic with condition number 1e4 and a unit Gaussian
    /// starting offset.
    pub fn stiff_quadratic() -> Self {
        Self::Quadratic(QuadraticSpec {
            rows: 64,
            cols: 48,
            curvature: Curvature::Stiff { cond: 1e4 },
            offset: Offset::Gaussian(1.0),
            target_scale: 1.0,
            seed: 0,
        })
    }

    /// 16-class Gaussian mixture, 4096 samples of 64 features, batch 64.
    pub fn logreg() -> Self {
        Self::Logreg(LogregSpec {
            batch: Some(64),
            ..LogregSpec::new(4096, 64, 16, 0)
        })
    }

    /// 32-256-16 tanh network on 512 teacher samples, batch 64.
    pub fn mlp() -> Self {
        Self::Mlp(MlpSpec {
            batch: Some(64),
            ..MlpSpec::new(32, 256, 16, 512, 0)
        })
    }

    pub fn default_for(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Quadratic => Self::stiff_quadratic(),
            ProblemKind::Logreg => Self::logreg(),
            ProblemKind::Mlp => Self::mlp(),
        }
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            Self::Quadratic(_) => ProblemKind::Quadratic,
            Self::Logreg(_) => ProblemKind::Logreg,
            Self::Mlp(_) => ProblemKind::Mlp,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Quadratic(s) => s.seed = seed,
            Self::Logreg(s) => s.seed = seed,
            Self::Mlp(s) => s.seed = seed,
        }
        out
    }

    pub fn build(&self) -> Result<Box<dyn Problem>> {
        Ok(match self {
            Self::Quadratic(s) => Box::new(Quadratic::new(s)?),
            Self::Logreg(s) => Box::new(Logreg::new(s)?),
            Self::Mlp(s) => Box::new(Mlp::new(s)?),
        })
    }
}

/// Problem, optimizer hyperparameters and schedule of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Setup {
    pub problem: ProblemSpec,
    pub config: AdapproxConfig,
    pub schedule: LrSchedule,
    pub steps: u64,
}

/// Steps of a default run.
pub fn default_steps(kind: ProblemKind) -> u64 {
    match kind {
        ProblemKind::Quadratic => 500,
        ProblemKind::Logreg => 2000,
        ProblemKind::Mlp => 5000,
    }
}

/// Default peak learning rate. On the quadratic it is the best AdamW rate
/// of the grid {0.001, 0.003, 0.01, 0.03, 0.1, 0.3}.
pub fn default_peak_lr(kind: ProblemKind) -> f64 {
    match kind {
        ProblemKind::Quadratic => 0.3,
        ProblemKind::Logreg | ProblemKind::Mlp => 0.01,
    }
}

/// Warmup over the first 2% of the steps, cosine decay to `peak / 10`.
pub fn default_schedule(peak: f64, steps: u64) -> Result<LrSchedule> {
    LrSchedule::new(peak, peak / 10.0, steps / 50, steps)
}

/// Optimizer defaults with factoring from dimension 16, so that the
/// desk-scale problems exercise the factored path.
pub fn bench_config() -> AdapproxConfig {
    AdapproxConfig {
        factor_min_dim: 16,
        ..AdapproxConfig::default()
    }
}

impl Setup {
    pub fn default_for(kind: ProblemKind) -> Result<Self> {
        let steps = default_steps(kind);
        Ok(Self {
            problem: ProblemSpec::default_for(kind),
            config: bench_config(),
            schedule: default_schedule(default_peak_lr(kind), steps)?,
            steps,
        })
    }

    /// Same setup with the peak and floor learning rates multiplied by `factor`.
    pub fn with_lr_scale(&self, factor: f64) -> Result<Self> {
        let s = self.schedule;
        Ok(Self {
            schedule: LrSchedule::new(s.peak * factor, s.min * factor, s.warmup_steps, s.total_steps)?,
            ..self.clone()
        })
    }

    /// Trains with problem seed and optimizer seed both set to `seed`.
    pub fn run(&self, kind: OptimizerKind, config: &AdapproxConfig, seed: u64) -> Result<TrainRun> {
        let problem = self.problem.with_seed(seed).build()?;
        run_training(problem.as_ref(), kind, config, &self.schedule, self.steps, seed)
    }
}
