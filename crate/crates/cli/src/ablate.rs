use adapprox::bench::{
    beta1_ablation, clip_ablation, guidance_ablation, ProblemKind, CLIP_WIN_RATE, GUIDANCE_TOLERANCE,
};
use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::config::{Defaults, RunConfig};
use crate::output::{finite, write_json, write_rows};
use crate::train::settings;
use crate::{Globals, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    /// RMS clipping on and off.
    Clip,
    /// `β1 = 0.9` against `β1 = 0`.
    Beta1,
    /// Cosine guidance on and off with the running average held orthogonal
    /// to every update.
    Guidance,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Self::Clip => "clip",
            Self::Beta1 => "beta1",
            Self::Guidance => "guidance",
        }
    }

    /// Problem, seed count and learning-rate multiplier used by default.
    fn defaults(self, seed: u64) -> Defaults {
        let (problem, count, lr_scale) = match self {
            Self::Clip => (ProblemKind::Quadratic, 20, 10.0),
            Self::Beta1 => (ProblemKind::Logreg, 10, 1.0),
            Self::Guidance => (ProblemKind::Logreg, 5, 1.0),
        };
        Defaults {
            problem,
            seeds: (seed..seed + count).collect(),
            lr_scale,
        }
    }
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(value_enum)]
    pub which: Which,
    /// Any config key as `--key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Serialize)]
struct ClipRow {
    seed: u64,
    with_clip: f64,
    without_clip: f64,
    win: bool,
}

#[derive(Serialize)]
struct Beta1Row {
    seed: u64,
    threshold: f64,
    steps_beta1: Option<u64>,
    steps_no_beta1: Option<u64>,
}

#[derive(Serialize)]
struct GuidanceRow {
    seed: u64,
    deviation: f64,
    max_theta: f64,
}

#[derive(Serialize)]
struct Verdict {
    command: &'static str,
    ablation: &'static str,
    problem: String,
    seeds: Vec<u64>,
    statistic: &'static str,
    value: Option<f64>,
    baseline: Option<f64>,
    criterion: String,
    passed: bool,
}

pub fn run(g: &Globals, a: &AblateArgs) -> Result<Outcome> {
    let s = settings(g, &a.overrides)?;
    let cfg = RunConfig::resolve(&s, &a.which.defaults(g.seed))?;
    let setup = &cfg.setup;
    let seeds = cfg.seeds.clone();
    let name = a.which.name();
    let csv = format!("ablate-{name}.csv");
    let verdict = match a.which {
        Which::Clip => {
            let r = clip_ablation(setup, &seeds)?;
            let rows: Vec<ClipRow> = (0..seeds.len())
                .map(|i| ClipRow {
                    seed: seeds[i],
                    with_clip: r.with_clip[i],
                    without_clip: r.without_clip[i],
                    win: r.with_clip[i] < r.without_clip[i],
                })
                .collect();
            write_rows(&g.out, &csv, &rows)?;
            Verdict {
                command: "ablate",
                ablation: name,
                problem: setup.problem.kind().name().into(),
                seeds,
                statistic: "win_rate",
                value: Some(r.win_rate()),
                baseline: None,
                criterion: format!("win_rate >= {CLIP_WIN_RATE}"),
                passed: r.passed(),
            }
        }
        Which::Beta1 => {
            let r = beta1_ablation(setup, &seeds)?;
            let rows: Vec<Beta1Row> = (0..seeds.len())
                .map(|i| Beta1Row {
                    seed: seeds[i],
                    threshold: r.thresholds[i],
                    steps_beta1: r.steps_with[i],
                    steps_no_beta1: r.steps_without[i],
                })
                .collect();
            write_rows(&g.out, &csv, &rows)?;
            Verdict {
                command: "ablate",
                ablation: name,
                problem: setup.problem.kind().name().into(),
                seeds,
                statistic: "median_steps_to_threshold",
                value: finite(r.median_with()),
                baseline: finite(r.median_without()),
                criterion: "median with beta1 = 0.9 < median with beta1 = 0".into(),
                passed: r.passed(),
            }
        }
        Which::Guidance => {
            let r = guidance_ablation(setup, &seeds)?;
            let rows: Vec<GuidanceRow> = (0..seeds.len())
                .map(|i| GuidanceRow {
                    seed: seeds[i],
                    deviation: r.deviation[i],
                    max_theta: r.max_theta[i],
                })
                .collect();
            write_rows(&g.out, &csv, &rows)?;
            Verdict {
                command: "ablate",
                ablation: name,
                problem: setup.problem.kind().name().into(),
                seeds,
                statistic: "max_deviation",
                value: finite(r.max_deviation()),
                baseline: None,
                criterion: format!("max_deviation <= {GUIDANCE_TOLERANCE:e}"),
                passed: r.passed(),
            }
        }
    };
    println!(
        "{name}: {} = {} ({}) -> {}",
        verdict.statistic,
        verdict.value.map_or("n/a".into(), |v| format!("{v}")),
        verdict.criterion,
        if verdict.passed { "PASS" } else { "FAIL" }
    );
    write_json(&g.out, &format!("ablate-{name}.json"), &verdict)?;
    Ok(if verdict.passed { Outcome::Done } else { Outcome::Failed })
}
