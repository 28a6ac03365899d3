use rayon::prelude::*;

use crate::bench::schedule::lr_at;
use crate::bench::suite::Setup;
use crate::bench::train::{steps_to_threshold, DIVERGENCE_LOSS};
use crate::densela::RngStream;
use crate::error::{invalid, Result};
use crate::optim::{AdapproxConfig, Optimizer, OptimizerKind};
use crate::Matrix;

/// Win rate the clipping ablation must reach.
pub const CLIP_WIN_RATE: f64 = 0.8;
/// The loss threshold is this multiple of the final AdamW loss.
pub const THRESHOLD_FACTOR: f64 = 10.0;
/// Trailing window of the steps-to-threshold mean.
pub const THRESHOLD_WINDOW: usize = 10;
/// Allowed relative gap between the Adapprox and AdamW medians.
pub const PARITY_TOLERANCE: f64 = 0.05;
/// Allowed relative deviation between guided and unguided trajectories.
pub const GUIDANCE_TOLERANCE: f64 = 1e-6;

/// Median with the upper-middle and lower-middle average for even counts.
/// Infinite entries sort last.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1] == v[n / 2] {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn par_seeds<R: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<R> + Sync) -> Result<Vec<R>> {
    if seeds.is_empty() {
        return Err(invalid("an experiment needs at least one seed"));
    }
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Adapprox with and without RMS clipping, scored by final full loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipAblation {
    pub seeds: Vec<u64>,
    pub with_clip: Vec<f64>,
    pub without_clip: Vec<f64>,
}

impl ClipAblation {
    /// Fraction of seeds where the clipped run ends strictly lower.
    pub fn win_rate(&self) -> f64 {
        let wins = self.with_clip.iter().zip(&self.without_clip).filter(|(a, b)| a < b).count();
        wins as f64 / self.seeds.len() as f64
    }

    pub fn passed(&self) -> bool {
        self.win_rate() >= CLIP_WIN_RATE
    }
}

pub fn clip_ablation(setup: &Setup, seeds: &[u64]) -> Result<ClipAblation> {
    let on = AdapproxConfig {
        clip_d: Some(setup.config.clip_d.unwrap_or(1.0)),
        ..setup.config
    };
    let off = AdapproxConfig {
        clip_d: None,
        ..setup.config
    };
    let pairs = par_seeds(seeds, |seed| {
        let a = setup.run(OptimizerKind::Adapprox, &on, seed)?;
        let b = setup.run(OptimizerKind::Adapprox, &off, seed)?;
        Ok((a.final_loss, b.final_loss))
    })?;
    Ok(ClipAblation {
        seeds: seeds.to_vec(),
        with_clip: pairs.iter().map(|p| p.0).collect(),
        without_clip: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Adapprox with `β1 = 0.9` against `β1 = 0`, scored by the step at which
/// the trailing mean loss first reaches ten times the final AdamW loss of
/// the same seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Beta1Ablation {
    pub seeds: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub steps_with: Vec<Option<u64>>,
    pub steps_without: Vec<Option<u64>>,
}

fn steps_as_f64(steps: &[Option<u64>]) -> Vec<f64> {
    steps.iter().map(|s| s.map_or(f64::INFINITY, |v| v as f64)).collect()
}

impl Beta1Ablation {
    /// Median steps with the first moment; runs that never cross count as
    /// infinite.
    pub fn median_with(&self) -> f64 {
        median(&steps_as_f64(&self.steps_with))
    }

    pub fn median_without(&self) -> f64 {
        median(&steps_as_f64(&self.steps_without))
    }

    pub fn passed(&self) -> bool {
        self.median_with() < self.median_without()
    }
}

pub fn beta1_ablation(setup: &Setup, seeds: &[u64]) -> Result<Beta1Ablation> {
    let with = AdapproxConfig {
        beta1: 0.9,
        ..setup.config
    };
    let without = AdapproxConfig {
        beta1: 0.0,
        cosine_guidance: false,
        ..setup.config
    };
    let rows = par_seeds(seeds, |seed| {
        let reference = setup.run(OptimizerKind::AdamW, &setup.config, seed)?;
        let threshold = THRESHOLD_FACTOR * reference.final_loss;
        let a = setup.run(OptimizerKind::Adapprox, &with, seed)?;
        let b = setup.run(OptimizerKind::Adapprox, &without, seed)?;
        Ok((
            threshold,
            steps_to_threshold(&a.records, threshold, THRESHOLD_WINDOW),
            steps_to_threshold(&b.records, threshold, THRESHOLD_WINDOW),
        ))
    })?;
    Ok(Beta1Ablation {
        seeds: seeds.to_vec(),
        thresholds: rows.iter().map(|r| r.0).collect(),
        steps_with: rows.iter().map(|r| r.1).collect(),
        steps_without: rows.iter().map(|r| r.2).collect(),
    })
}

/// Final full losses of AdamW, the Adafactor baseline and Adapprox.
#[derive(Clone, Debug, PartialEq)]
pub struct Parity {
    pub seeds: Vec<u64>,
    pub adamw: Vec<f64>,
    pub adafactor: Vec<f64>,
    pub adapprox: Vec<f64>,
}

impl Parity {
    pub fn finals(&self, kind: OptimizerKind) -> &[f64] {
        match kind {
            OptimizerKind::AdamW => &self.adamw,
            OptimizerKind::Adafactor => &self.adafactor,
            OptimizerKind::Adapprox => &self.adapprox,
        }
    }

    pub fn median(&self, kind: OptimizerKind) -> f64 {
        median(self.finals(kind))
    }

    /// `(median Adapprox − median AdamW) / median AdamW`.
    pub fn relative_gap(&self) -> f64 {
        let a = self.median(OptimizerKind::AdamW);
        (self.median(OptimizerKind::Adapprox) - a) / a
    }

    pub fn within_tolerance(&self) -> bool {
        self.relative_gap().abs() <= PARITY_TOLERANCE
    }

    pub fn beats_baseline(&self) -> bool {
        self.median(OptimizerKind::Adapprox) <= self.median(OptimizerKind::Adafactor)
    }

    pub fn passed(&self) -> bool {
        self.within_tolerance() && self.beats_baseline()
    }
}

pub fn parity(setup: &Setup, seeds: &[u64]) -> Result<Parity> {
    let jobs: Vec<(u64, OptimizerKind)> = seeds
        .iter()
        .flat_map(|&s| OptimizerKind::ALL.map(|k| (s, k)))
        .collect();
    if jobs.is_empty() {
        return Err(invalid("an experiment needs at least one seed"));
    }
    let finals: Vec<f64> = jobs
        .par_iter()
        .map(|&(seed, kind)| Ok(setup.run(kind, &setup.config, seed)?.final_loss))
        .collect::<Result<_>>()?;
    let pick = |kind: OptimizerKind| {
        jobs.iter()
            .zip(&finals)
            .filter(|((_, k), _)| *k == kind)
            .map(|(_, &f)| f)
            .collect()
    };
    Ok(Parity {
        seeds: seeds.to_vec(),
        adamw: pick(OptimizerKind::AdamW),
        adafactor: pick(OptimizerKind::Adafactor),
        adapprox: pick(OptimizerKind::Adapprox),
    })
}

/// Guided against unguided Adapprox when every step's running average is
/// made orthogonal to the incoming update.
#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceAblation {
    pub seeds: Vec<u64>,
    /// Largest `|W_on − W_off| / max(1, |W_off|)` over all steps and entries.
    pub deviation: Vec<f64>,
    /// Largest `|θ|` seen by the guided run.
    pub max_theta: Vec<f64>,
}

impl GuidanceAblation {
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= GUIDANCE_TOLERANCE
    }
}

/// Overwrites the first moment of every parameter so that after averaging
/// it equals `β1 P`, where `P` is the part of the gradient orthogonal to
/// the incoming update `U`. The cosine between `U` and the new average is
/// then zero, and the step is a descent step along `P`.
fn orthogonalize_first_moment(
    opt: &mut Optimizer<f64>,
    grads: &[Matrix],
    cfg: &AdapproxConfig,
) -> Result<()> {
    let b1 = cfg.beta1;
    for (state, g) in opt.states_mut().iter_mut().zip(grads) {
        let u = state.preview_update(g, cfg)?;
        let uu = u.squared_norm();
        let mut p = g.clone();
        if uu > 0.0 {
            p.add_scaled_inplace(-g.inner(&u)? / uu, &u)?;
        }
        let mut prev = u.scale(-(1.0 - b1) / b1);
        prev.add_scaled_inplace(1.0, &p)?;
        state.set_first_moment(prev)?;
    }
    Ok(())
}

pub fn guidance_ablation(setup: &Setup, seeds: &[u64]) -> Result<GuidanceAblation> {
    let base = AdapproxConfig {
        beta1: if setup.config.beta1 > 0.0 { setup.config.beta1 } else { 0.9 },
        ..setup.config
    };
    let on = AdapproxConfig {
        cosine_guidance: true,
        ..base
    };
    let off = AdapproxConfig {
        cosine_guidance: false,
        ..base
    };
    let rows = par_seeds(seeds, |seed| {
        let problem = setup.problem.with_seed(seed).build()?;
        let shapes = problem.shapes();
        let mut sampler = RngStream::with_stream(seed, u64::MAX);
        let mut runs = [
            (Optimizer::<f64>::new(OptimizerKind::Adapprox, on, &shapes, seed)?, problem.init(), on),
            (Optimizer::<f64>::new(OptimizerKind::Adapprox, off, &shapes, seed)?, problem.init(), off),
        ];
        let (mut deviation, mut max_theta) = (0.0f64, 0.0f64);
        for t in 1..=setup.steps {
            let batch: Option<Vec<usize>> = problem
                .batch_size()
                .map(|b| (0..b).map(|_| sampler.below(problem.n_samples())).collect());
            let lr = lr_at(&setup.schedule, t)?;
            let mut blown = false;
            for (opt, params, cfg) in runs.iter_mut() {
                let (loss, grads) = problem.loss_grad(params, batch.as_deref())?;
                if !loss.is_finite() || loss > DIVERGENCE_LOSS || grads.iter().any(|g| !g.is_finite()) {
                    blown = true;
                    break;
                }
                orthogonalize_first_moment(opt, &grads, cfg)?;
                let reports = opt.step(params, &grads, lr)?;
                for r in reports {
                    max_theta = max_theta.max(r.theta.map_or(0.0, f64::abs));
                }
            }
            if blown {
                deviation = f64::INFINITY;
                break;
            }
            let [(_, guided, _), (_, plain, _)] = &runs;
            for (a, b) in guided.iter().zip(plain) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    deviation = deviation.max((x - y).abs() / y.abs().max(1.0));
                }
            }
            if !deviation.is_finite() {
                break;
            }
        }
        Ok((deviation, max_theta))
    })?;
    Ok(GuidanceAblation {
        seeds: seeds.to_vec(),
        deviation: rows.iter().map(|r| r.0).collect(),
        max_theta: rows.iter().map(|r| r.1).collect(),
    })
}
