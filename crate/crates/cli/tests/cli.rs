use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adapprox"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep\nproblem = logreg\nbeta3 = 0.5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_adapprox"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .arg("train")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("beta3") && msg.contains("line 3"), "{msg}");

    let o = run(dir.path(), &["train", "--beta3", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("beta3"));
}

#[test]
fn bad_values_and_foreign_keys_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["train", "--beta1", "high"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("beta1"));
    let o = run(dir.path(), &["train", "--problem", "logreg", "--hidden", "8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hidden"));
}

#[test]
fn logreg_run_has_one_row_per_step_and_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["train", "--problem", "logreg", "--opt", "adapprox", "--steps", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("logreg-adapprox-seed0.csv")).unwrap();
    assert!(text.starts_with("step,loss,grad_norm,param,rank,xi,clipped,us\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 2000 * 2);

    let summary = json(&dir.path().join("train-summary.json"));
    assert_eq!(summary["schema"], 1);
    assert_eq!(summary["command"], "train");
    let r = &summary["runs"][0];
    assert!(r["final_loss"].as_f64().unwrap() > 0.0);
    assert!(r["mean_rank"].as_f64().unwrap() >= 1.0);
    assert!(r["peak_state_bytes"].as_u64().unwrap() > 0);
}

#[test]
fn optimizers_share_the_starting_loss() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["train", "--problem", "mlp", "--opt", "adamw,adafactor,adapprox", "--steps", "20", "--seeds", "4"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let first: Vec<String> = ["adamw", "adafactor", "adapprox"]
        .iter()
        .map(|k| {
            let text = fs::read_to_string(dir.path().join(format!("mlp-{k}-seed4.csv"))).unwrap();
            text.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string()
        })
        .collect();
    assert_eq!(first[0], first[1]);
    assert_eq!(first[0], first[2]);
    let summary = json(&dir.path().join("train-summary.json"));
    for r in summary["runs"].as_array().unwrap() {
        assert!(r["threshold"].as_f64().is_some());
    }
}

#[test]
fn memory_table_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["memory", "--model", "gpt2-345m", "--beta1", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("came"));
    let m = json(&dir.path().join("memory.json"));
    assert_eq!(m["schema"], 1);
    assert_eq!(m["command"], "memory");
    let rows = m["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let k_max = rows[3]["percent_of_adamw"].as_f64().unwrap();
    assert!((k_max - 16.2).abs() <= 2.0, "{k_max}");

    let manifest = dir.path().join("tiny.json");
    fs::write(&manifest, r#"{"params": [{"name": "w", "dims": [2, 2]}]}"#).unwrap();
    let o = run(dir.path(), &["memory", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&dir.path().join("memory.json"))["rows"][0]["bytes"], 32);

    fs::write(&manifest, r#"{"params": []}"#).unwrap();
    let o = run(dir.path(), &["memory", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("malformed manifest"));
}

#[test]
fn approx_rank_one_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["approx", "--profile", "rank1", "--k-max", "4", "--trials", "3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("approx.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut n = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let err: f64 = r[2].parse().unwrap();
        assert!(err < 1e-8, "{r:?}");
        n += 1;
    }
    assert_eq!(n, 3 * 4);
}

#[test]
fn unreadable_matrix_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["approx", "--matrix", "/nonexistent/a.txt"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn guidance_verdict_passes_and_divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["ablate", "guidance", "--seeds", "2", "--steps", "300"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&dir.path().join("ablate-guidance.json"));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["passed"], true);
    assert!(v["value"].as_f64().unwrap() <= 1e-6);

    let o = run(
        dir.path(),
        &["train", "--problem", "quadratic", "--opt", "adapprox", "--clip", "none", "--lr", "1e9", "--steps", "50"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let s = json(&dir.path().join("train-summary.json"));
    assert!(s["runs"][0]["diverged_at"].as_u64().is_some());
}
