use std::path::PathBuf;

use adapprox::optim::{memory_bytes, AdapproxConfig, MemoryReport, OptimizerKind, RankMode, ShapeManifest};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::output::write_json;
use crate::{Globals, Outcome};

pub const GPT2_117M: &str = include_str!("../data/gpt2-117m.json");
pub const GPT2_345M: &str = include_str!("../data/gpt2-345m.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    #[value(name = "gpt2-117m")]
    Gpt2Small,
    #[value(name = "gpt2-345m")]
    Gpt2Medium,
}

#[derive(Args, Debug)]
pub struct MemoryArgs {
    /// JSON shape manifest.
    #[arg(long, conflicts_with = "model")]
    manifest: Option<PathBuf>,
    /// Bundled manifest.
    #[arg(long, value_enum, default_value_t = Model::Gpt2Small)]
    model: Model,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    /// Smallest dimension at which a matrix is factored.
    #[arg(long, default_value_t = 128)]
    factor_min_dim: usize,
    #[arg(long, default_value_t = 0.25)]
    k_max_fraction: f64,
    #[arg(long, default_value_t = 1)]
    k_init: usize,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct MemoryRow {
    pub optimizer: String,
    pub bytes: u64,
    pub mib: f64,
    pub percent_of_adamw: f64,
}

#[derive(Serialize, Debug)]
pub struct MemorySummary {
    pub command: &'static str,
    pub manifest: String,
    pub parameters: usize,
    pub element_bytes: usize,
    pub beta1: f64,
    pub rows: Vec<MemoryRow>,
    pub note: &'static str,
}

const CAME_NOTE: &str = "CAME is not modelled";

pub fn load_manifest(a: &MemoryArgs) -> Result<ShapeManifest> {
    let (text, label) = match &a.manifest {
        Some(p) => (
            std::fs::read_to_string(p).with_context(|| format!("reading manifest {}", p.display()))?,
            p.display().to_string(),
        ),
        None => match a.model {
            Model::Gpt2Small => (GPT2_117M.to_string(), "gpt2-117m".into()),
            Model::Gpt2Medium => (GPT2_345M.to_string(), "gpt2-345m".into()),
        },
    };
    let m: ShapeManifest = serde_json::from_str(&text).with_context(|| format!("malformed manifest {label}"))?;
    m.validate().with_context(|| format!("malformed manifest {label}"))?;
    Ok(m)
}

pub fn reports(manifest: &ShapeManifest, cfg: &AdapproxConfig) -> Result<Vec<MemoryReport>> {
    Ok(vec![
        memory_bytes(manifest, OptimizerKind::AdamW, cfg, RankMode::KInit)?,
        memory_bytes(manifest, OptimizerKind::Adafactor, cfg, RankMode::KInit)?,
        memory_bytes(manifest, OptimizerKind::Adapprox, cfg, RankMode::KInit)?,
        memory_bytes(manifest, OptimizerKind::Adapprox, cfg, RankMode::KMax)?,
    ])
}

pub fn run(g: &Globals, a: &MemoryArgs) -> Result<Outcome> {
    if g.config.is_some() {
        bail!("--config applies to train and ablate only");
    }
    let manifest = load_manifest(a)?;
    let mut cfg = AdapproxConfig {
        beta1: a.beta1,
        factor_min_dim: a.factor_min_dim,
        ..AdapproxConfig::default()
    };
    cfg.rank_policy.k_max_fraction = a.k_max_fraction;
    cfg.rank_policy.k_init = a.k_init;
    cfg.validate()?;
    let rows: Vec<MemoryRow> = reports(&manifest, &cfg)?
        .iter()
        .map(|r| MemoryRow {
            optimizer: r.label(),
            bytes: r.bytes,
            mib: r.mib(),
            percent_of_adamw: r.percent_of_adamw(),
        })
        .collect();
    let name = manifest.name.clone().unwrap_or_else(|| "manifest".into());
    println!("{name}: {} parameters, beta1 = {}", manifest.parameter_count(), a.beta1);
    println!("{:<20} {:>10} {:>8}", "optimizer", "MiB", "%");
    for r in &rows {
        println!("{:<20} {:>10.1} {:>7.1}%", r.optimizer, r.mib, r.percent_of_adamw);
    }
    println!("{:<20} {:>10} {:>8}", "came", "-", "-");
    println!("({CAME_NOTE})");
    let summary = MemorySummary {
        command: "memory",
        manifest: name,
        parameters: manifest.parameter_count(),
        element_bytes: manifest.element_bytes,
        beta1: a.beta1,
        rows,
        note: CAME_NOTE,
    };
    write_json(&g.out, "memory.json", &summary)?;
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_manifests_parse() {
        let small: ShapeManifest = serde_json::from_str(GPT2_117M).unwrap();
        let medium: ShapeManifest = serde_json::from_str(GPT2_345M).unwrap();
        assert_eq!(small.parameter_count(), 124_475_904);
        assert_eq!(medium.parameter_count(), 354_871_296);
        assert_eq!(small.params.len(), 2 + 12 * 12 + 2);
    }
}
