use std::path::PathBuf;
use std::time::Instant;

use adapprox::densela::{read_matrix, RngStream};
use adapprox::lowrank::synthetic::{block_matrix_with_spectrum, matrix_with_spectrum, SpectrumProfile};
use adapprox::lowrank::{approx_error_rate, onerank_factor, srsi, truncated_svd_oracle, SrsiParams};
use adapprox::Matrix;
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::output::write_rows;
use crate::{Globals, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// `σᵢ = ratioⁱ`.
    Geometric,
    /// `count` unit values over a constant tail.
    Dominant,
    /// `σᵢ = (i + 1)^(−exponent)`.
    Flat,
    Rank1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// Non-negative shuffled block matrix, the shape of a second moment.
    Blocks,
    /// Random orthonormal singular vectors; signed entries, so the rank-1
    /// estimator is skipped.
    Rotated,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    /// Whitespace-separated matrix file; replaces the synthetic generator.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Geometric)]
    profile: Profile,
    #[arg(long, value_enum, default_value_t = Layout::Blocks)]
    layout: Layout,
    #[arg(long, default_value_t = 64)]
    rows: usize,
    #[arg(long, default_value_t = 64)]
    cols: usize,
    /// Geometric decay ratio.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Number of dominant values.
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Tail value of the dominant profile.
    #[arg(long, default_value_t = 0.01)]
    tail: f64,
    /// Decay exponent of the flat profile.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 16)]
    k_max: usize,
    #[arg(long, default_value_t = 5)]
    power_iters: usize,
    #[arg(long, default_value_t = 5)]
    oversample: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Record mean wall time; otherwise the `us` column is 0.
    #[arg(long)]
    timings: bool,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct ApproxRow {
    pub method: &'static str,
    pub k: usize,
    pub error: f64,
    pub us: u64,
}

fn profile(a: &ApproxArgs) -> SpectrumProfile {
    match a.profile {
        Profile::Geometric => SpectrumProfile::Geometric { ratio: a.ratio },
        Profile::Dominant => SpectrumProfile::MultiDominant {
            count: a.count,
            tail: a.tail,
        },
        Profile::Flat => SpectrumProfile::Flat { exponent: a.exponent },
        Profile::Rank1 => SpectrumProfile::RankOne,
    }
}

fn matrix_for(a: &ApproxArgs, file: Option<&Matrix>, seed: u64) -> Result<Matrix> {
    if let Some(m) = file {
        return Ok(m.clone());
    }
    let mut rng = RngStream::new(seed);
    let p = profile(a);
    Ok(match a.layout {
        Layout::Blocks => block_matrix_with_spectrum(a.rows, a.cols, &p.values(a.rows.min(a.cols)), &mut rng)?,
        Layout::Rotated => matrix_with_spectrum(a.rows, a.cols, &p, &mut rng)?,
    })
}

fn timed<R>(on: bool, f: impl FnOnce() -> Result<R>) -> Result<(R, u64)> {
    let clock = on.then(Instant::now);
    let r = f()?;
    Ok((r, clock.map_or(0, |c| c.elapsed().as_micros() as u64)))
}

/// Mean error and time of every method at every rank in `k_min..=k_max`.
pub fn sweep(a: &ApproxArgs, file: Option<&Matrix>, base_seed: u64) -> Result<Vec<ApproxRow>> {
    if a.trials == 0 || a.k_min == 0 || a.k_min > a.k_max {
        bail!("need trials >= 1 and 1 <= k_min <= k_max");
    }
    let methods = ["srsi", "onerank", "svd_oracle"];
    let ks: Vec<usize> = (a.k_min..=a.k_max).collect();
    let mut sums = vec![[(0.0f64, 0u64); 3]; ks.len()];
    let mut onerank_ok = true;
    for t in 0..a.trials {
        let seed = base_seed + t as u64;
        let m = matrix_for(a, file, seed)?;
        if a.k_max + a.oversample > m.rows().min(m.cols()) {
            bail!(
                "k_max {} + oversample {} exceeds the smaller dimension {}",
                a.k_max,
                a.oversample,
                m.rows().min(m.cols())
            );
        }
        let one = if m.as_slice().iter().all(|&x| x >= 0.0) {
            Some(timed(a.timings, || Ok(approx_error_rate(&m, &onerank_factor(&m)?)?))?)
        } else {
            onerank_ok = false;
            None
        };
        let mut rng = RngStream::with_stream(seed, 1);
        for (slot, &k) in sums.iter_mut().zip(&ks) {
            let params = SrsiParams::new(k, a.power_iters, a.oversample);
            let (e, us) = timed(a.timings, || Ok(approx_error_rate(&m, &srsi(&m, params, &mut rng)?)?))?;
            slot[0].0 += e;
            slot[0].1 += us;
            if let Some((e, us)) = one {
                slot[1].0 += e;
                slot[1].1 += us;
            }
            let (e, us) = timed(a.timings, || Ok(approx_error_rate(&m, &truncated_svd_oracle(&m, k)?.0)?))?;
            slot[2].0 += e;
            slot[2].1 += us;
        }
    }
    let n = a.trials as f64;
    let mut rows = Vec::new();
    for (slot, &k) in sums.iter().zip(&ks) {
        for (i, method) in methods.iter().enumerate() {
            if i == 1 && !onerank_ok {
                continue;
            }
            rows.push(ApproxRow {
                method,
                k,
                error: slot[i].0 / n,
                us: slot[i].1 / a.trials as u64,
            });
        }
    }
    Ok(rows)
}

pub fn run(g: &Globals, a: &ApproxArgs) -> Result<Outcome> {
    if g.config.is_some() {
        bail!("--config applies to train and ablate only");
    }
    let file = match &a.matrix {
        Some(p) => Some(read_matrix::<f64>(p).with_context(|| format!("reading matrix {}", p.display()))?),
        None => None,
    };
    let rows = sweep(a, file.as_ref(), g.seed)?;
    if !rows.iter().any(|r| r.method == "onerank") {
        eprintln!("note: matrix has negative entries; rank-1 estimator skipped");
    }
    let path = write_rows(&g.out, "approx.csv", &rows)?;
    println!("{:<11} {:>4} {:>12}", "method", "k", "error");
    for r in &rows {
        println!("{:<11} {:>4} {:>12.4e}", r.method, r.k, r.error);
    }
    println!("wrote {}", path.display());
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        a: ApproxArgs,
    }

    fn args(extra: &[&str]) -> ApproxArgs {
        let mut v = vec!["approx"];
        v.extend_from_slice(extra);
        Wrap::parse_from(v).a
    }

    fn errors(rows: &[ApproxRow], method: &str) -> Vec<f64> {
        rows.iter().filter(|r| r.method == method).map(|r| r.error).collect()
    }

    #[test]
    fn rank_one_is_exact_for_all_methods() {
        let rows = sweep(&args(&["--profile", "rank1", "--k-max", "4", "--trials", "3"]), None, 0).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| r.error < 1e-8 && r.us == 0), "{rows:?}");
    }

    #[test]
    fn dominant_profile_separates_methods() {
        let a = args(&["--profile", "dominant", "--k-max", "5", "--trials", "3"]);
        let rows = sweep(&a, None, 0).unwrap();
        let (s, o) = (errors(&rows, "srsi"), errors(&rows, "onerank"));
        assert!((s[0] - o[0]).abs() < 0.02, "{} {}", s[0], o[0]);
        assert!(s[4] < 0.05);
        assert!(o.iter().all(|&e| e == o[0]));
    }

    #[test]
    fn rotated_layout_skips_onerank() {
        let a = args(&["--layout", "rotated", "--k-max", "3", "--trials", "2"]);
        let rows = sweep(&a, None, 0).unwrap();
        assert!(rows.iter().all(|r| r.method != "onerank"));
        assert_eq!(rows.len(), 6);
        assert!(sweep(&args(&["--k-max", "60"]), None, 0).is_err());
    }
}
