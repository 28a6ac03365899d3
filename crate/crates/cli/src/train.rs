use std::fs::File;
use std::io::BufWriter;

use adapprox::bench::{run_training_with, steps_to_threshold, write_csv, TrainOptions, TrainRun, THRESHOLD_FACTOR, THRESHOLD_WINDOW};
use adapprox::optim::OptimizerKind;
use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Defaults, RunConfig, Settings};
use crate::output::{finite, write_json};
use crate::{Globals, Outcome};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Any config key as `--key value`, e.g. `--problem mlp --opt adamw,adapprox --steps 500`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    pub overrides: Vec<String>,
}

/// Config file first, then command-line keys.
pub fn settings(g: &Globals, overrides: &[String]) -> Result<Settings> {
    let mut s = match &g.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    s.apply_overrides(overrides)?;
    Ok(s)
}

#[derive(Serialize, Debug)]
pub struct RunSummary {
    pub optimizer: String,
    pub seed: u64,
    pub csv: String,
    pub final_loss: Option<f64>,
    pub diverged_at: Option<u64>,
    pub threshold: Option<f64>,
    pub steps_to_threshold: Option<u64>,
    pub mean_rank: Option<f64>,
    pub peak_state_bytes: u64,
}

#[derive(Serialize, Debug)]
pub struct TrainSummary {
    pub command: &'static str,
    pub problem: String,
    pub steps: u64,
    pub runs: Vec<RunSummary>,
}

pub fn csv_name(problem: &str, kind: OptimizerKind, seed: u64) -> String {
    format!("{problem}-{kind}-seed{seed}.csv")
}

pub fn run(g: &Globals, a: &TrainArgs) -> Result<Outcome> {
    let s = settings(g, &a.overrides)?;
    let cfg = RunConfig::resolve(
        &s,
        &Defaults {
            problem: adapprox::bench::ProblemKind::Logreg,
            seeds: vec![g.seed],
            lr_scale: 1.0,
        },
    )?;
    let problem = cfg.setup.problem.kind().name();
    let jobs: Vec<(u64, OptimizerKind)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.optimizers.iter().map(move |&k| (s, k)))
        .collect();
    let options = TrainOptions { timings: cfg.timings };
    let runs: Vec<TrainRun> = jobs
        .par_iter()
        .map(|&(seed, kind)| -> Result<TrainRun> {
            let p = cfg.setup.problem.with_seed(seed).build()?;
            let run = run_training_with(
                p.as_ref(),
                kind,
                &cfg.setup.config,
                &cfg.setup.schedule,
                cfg.setup.steps,
                seed,
                options,
            )?;
            let path = g.out.join(csv_name(problem, kind, seed));
            let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_csv(&run.records, BufWriter::new(file))?;
            Ok(run)
        })
        .collect::<Result<_>>()?;

    let mut summaries = Vec::new();
    let mut failed = false;
    for (&(seed, kind), run) in jobs.iter().zip(&runs) {
        let threshold = cfg.threshold.or_else(|| {
            jobs.iter()
                .zip(&runs)
                .find(|((s, k), _)| *s == seed && *k == OptimizerKind::AdamW)
                .and_then(|(_, r)| finite(r.final_loss))
                .map(|l| THRESHOLD_FACTOR * l)
        });
        failed |= run.diverged.is_some();
        summaries.push(RunSummary {
            optimizer: kind.name().into(),
            seed,
            csv: csv_name(problem, kind, seed),
            final_loss: finite(run.final_loss),
            diverged_at: run.diverged.map(|d| d.step),
            threshold,
            steps_to_threshold: threshold.and_then(|t| steps_to_threshold(&run.records, t, THRESHOLD_WINDOW)),
            mean_rank: run.mean_rank(),
            peak_state_bytes: (run.peak_state_elements * std::mem::size_of::<f64>()) as u64,
        });
        match run.diverged {
            Some(d) => println!("{kind:<10} seed {seed:<4} diverged at step {}", d.step),
            None => println!("{kind:<10} seed {seed:<4} final loss {:.6e}", run.final_loss),
        }
    }
    write_json(
        &g.out,
        "train-summary.json",
        &TrainSummary {
            command: "train",
            problem: problem.into(),
            steps: cfg.setup.steps,
            runs: summaries,
        },
    )?;
    Ok(if failed { Outcome::Failed } else { Outcome::Done })
}
