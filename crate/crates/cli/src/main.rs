//! `adapprox`: experiment harness for the low-rank second-moment optimizer.

mod ablate;
mod approx;
mod config;
mod memory;
mod output;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "adapprox", version, about = "Low-rank second-moment optimizer experiments")]
struct Cli {
    /// Base seed; run `i` of a seed list defaults to `seed + i`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Flat `key = value` config file for `train` and `ablate`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent runs; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare S-RSI, the rank-1 estimator and the truncated SVD over a range of ranks.
    Approx(approx::ApproxArgs),
    /// Train a benchmark problem and write per-run telemetry.
    Train(train::TrainArgs),
    /// Optimizer-state memory of a parameter-shape manifest.
    Memory(memory::MemoryArgs),
    /// Paired runs that differ only in one feature, with a verdict.
    Ablate(ablate::AblateArgs),
}

/// What a command reports back to `main`.
pub enum Outcome {
    Done,
    /// A run diverged or a verdict failed.
    Failed,
}

pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let g = Globals {
        seed: cli.seed,
        out: cli.out,
        config: cli.config,
    };
    match cli.command {
        Command::Approx(a) => approx::run(&g, &a),
        Command::Train(a) => train::run(&g, &a),
        Command::Memory(a) => memory::run(&g, &a),
        Command::Ablate(a) => ablate::run(&g, &a),
    }
}

fn parse() -> Cli {
    let keys = config::keys_help();
    let cmd = Cli::command()
        .mut_subcommand("train", |c| c.after_help(keys.clone()))
        .mut_subcommand("ablate", |c| c.after_help(keys.clone()));
    let matches = cmd.get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

fn main() -> ExitCode {
    match run(parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
