//! End-to-end runs of the `ergodic` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergodic_cli::output::all_finite;
use serde_json::{json, Value};
use tempfile::TempDir;

fn config(builtin: &str, r: f64, numerics: Value) -> Value {
    json!({
        "model": {"builtin": builtin, "params": {"r": r, "kappa": 1, "sigma0": 0.5}},
        "domain": {"a": 0, "b": "inf", "x0": 0.5, "b_cut": if r < 0.5 { 40 } else { 4 }},
        "economics": {"p": 1, "K": 0.05, "gamma": 0.5},
        "numerics": numerics,
    })
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(cfg: &Path, args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ergodic"));
    cmd.arg("--config").arg(cfg).args(args);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn small() -> Value {
    json!({"dt": 1e-3, "horizon": 100, "n_paths": 200, "seed": 3})
}

#[test]
fn solve_reports_interior_optimum() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    let out = run(&cfg, &["solve"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["command"], "solve");
    assert!(v["timestamp_unix"].is_u64());
    let r = &v["result"];
    assert!((r["F_star"].as_f64().unwrap() - 0.376382066086).abs() < 1e-8);
    assert!((r["w_star"].as_f64().unwrap() - 0.493606187812).abs() < 1e-6);
    assert_eq!(r["boundary_case"], "interior");
    assert!(all_finite(&v));
}

#[test]
fn no_timestamp_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    for args in [&["solve", "--no-timestamp"][..], &["simulate", "--w", "0.3", "--y", "0.9", "--no-timestamp"]] {
        let a = run(&cfg, args, Some(1));
        let b = run(&cfg, args, Some(3));
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let v = json_of(&a);
        assert!(v.get("timestamp_unix").is_none());
        assert!(!String::from_utf8_lossy(&a.stdout).contains("elapsed"));
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    let args = ["simulate", "--w", "0.3", "--y", "0.9", "--no-timestamp"];
    let base = run(&cfg, &args, None);
    let same = run(&cfg, &[&args[..], &["--seed", "3"]].concat(), None);
    let other = run(&cfg, &[&args[..], &["--seed", "4"]].concat(), None);
    assert_eq!(base.stdout, same.stdout);
    assert_ne!(base.stdout, other.stdout);
}

#[test]
fn do_nothing_simulation_matches_boundary_reward() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    let out = run(&cfg, &["simulate", "--policy", "nothing", "--no-timestamp"], None);
    assert_eq!(out.status.code(), Some(0));
    let r = &json_of(&out)["result"];
    let target = r["analytic"]["reward_rate"].as_f64().unwrap();
    let est = &r["estimates"]["reward_rate"];
    let z = (est["mean"].as_f64().unwrap() - target) / est["stderr"].as_f64().unwrap();
    assert!(z.abs() < 3.0, "z = {z}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    assert_eq!(run(&good, &["check"], None).status.code(), Some(0));

    let attracting = write(&dir, "attr.json", &config("logistic_geo", 0.1, small()));
    let out = run(&attracting, &["check"], None);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "condition");

    let out = run(&good, &["cell", "--x", "0.3"], None);
    assert_eq!(out.status.code(), Some(1), "cell problem needs an entrance boundary");

    let mut bad = config("logistic_geo", 1.0, small());
    bad["model"]["params"]["rho"] = json!(1.0);
    assert_eq!(run(&write(&dir, "bad.json", &bad), &["solve"], None).status.code(), Some(3));

    let expr = json!({
        "model": {"mu_expr": "x*(1-x", "sigma_expr": "0.5*x", "c_expr": "x/(1+x)"},
        "domain": {"a": 0, "b": "inf", "x0": 0.5},
        "economics": {"p": 1, "K": 0.05, "gamma": 0.5}
    });
    assert_eq!(run(&write(&dir, "expr.json", &expr), &["solve"], None).status.code(), Some(3));
    assert_eq!(run(&good, &["frobnicate"], None).status.code(), Some(3));
    assert_eq!(run(&dir.path().join("missing.json"), &["solve"], None).status.code(), Some(3));
}

#[test]
fn expression_model_matches_builtin() {
    let dir = TempDir::new().unwrap();
    let builtin = write(&dir, "b.json", &config("shifted_logistic_geo", 1.0, small()));
    let expr = json!({
        "model": {"mu_expr": "(x + 0.2)*(1 - x)", "sigma_expr": "0.5*x", "c_expr": "x/(1+x)"},
        "domain": {"a": 0, "b": "inf", "x0": 0.5, "b_cut": 4},
        "economics": {"p": 1, "K": 0.05, "gamma": 0.5},
        "numerics": small(),
    });
    let expr = write(&dir, "e.json", &expr);
    let a = json_of(&run(&builtin, &["cell", "--x", "0.3,0.8"], None));
    let b = json_of(&run(&expr, &["cell", "--x", "0.3,0.8"], None));
    for k in 0..2 {
        let (va, vb) = (a["result"]["V"][k].as_f64().unwrap(), b["result"]["V"][k].as_f64().unwrap());
        assert!((va - vb).abs() < 1e-9, "{va} vs {vb}");
    }
    assert!((a["result"]["V"][0].as_f64().unwrap() + 0.1981136899).abs() < 1e-6);
}

#[test]
fn csv_commands_write_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    let csv = dir.path().join("sweep.csv");
    let out = run(&cfg, &["sweep-k", "--ks", "0.05,0.01", "--out", csv.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("K,w_star,y_star,F_star,gap,penalty_fixed,penalty_structural"));
    assert_eq!(lines.count(), 2);

    let cycles = dir.path().join("cycles.csv");
    let out = run(&cfg, &["simulate", "--cycles-csv", cycles.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&cycles).unwrap().lines().count() > 100);

    let out = run(&cfg, &["table"], None);
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() > 1000);
}

#[test]
fn sensitivity_report_has_no_failures() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "nat.json", &config("logistic_geo", 1.0, small()));
    let v = json_of(&run(&cfg, &["sensitivity", "--no-timestamp"], None));
    assert_eq!(v["result"]["failures"], json!([]));
    assert!(v["result"]["table"].as_str().unwrap().contains("gamma"));
    assert!(all_finite(&v));
}
