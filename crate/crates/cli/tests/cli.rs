use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_reeb-ldp"));
    c.env_remove("REEB_LDP_THREADS");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("reeb-ldp-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn doublewell_graph_export() {
    let d = scratch("graph");
    let cfg = config(&d, "dw.json", r#"{"hamiltonian": {"builtin": "doublewell"}}"#);
    let out = run(&["graph", "--config", cfg.to_str().unwrap(), "export"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["vertices"].as_array().unwrap().len(), 3);
    assert_eq!(v["edges"].as_array().unwrap().len(), 3);
    assert_eq!(v["manifest_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn harmonic_coefficients_csv() {
    let d = scratch("coeffs");
    let cfg = config(&d, "h.json", r#"{"hamiltonian": {"builtin": "harmonic"}}"#);
    let out = run(&["coeffs", "--config", cfg.to_str().unwrap(), "--edge", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1) == Some("h,t,b2"));
    let rows = csv_rows(&text);
    assert!(rows.len() > 40);
    for r in rows {
        assert!((r[2] / r[0] - 2.0).abs() <= 1e-5, "{r:?}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let d = scratch("missing");
    let missing = d.join("absent.json");
    let out = bin().args(["analyze", "--config", missing.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let bad = config(&d, "bad.json", r#"{"hamiltonian": {"poly": [[2,0,1]]}}"#);
    let out = bin().args(["analyze", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["analyze"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let d = scratch("determinism");
    let cfg = config(&d, "h.json", r#"{"hamiltonian": {"builtin": "harmonic"}, "numerics": {"coeff_levels": 16}}"#);
    let cfg = cfg.to_str().unwrap();
    let path = d.join("ramp.csv");
    run(&["action", "minimize", "--config", cfg, "--from", "0:1", "--to", "0:3", "--n-h", "0", "--path-out", path.to_str().unwrap()]);
    let verify = |threads: &str, out: &Path| {
        run(&[
            "ldp", "verify", "--config", cfg, "--threads", threads, "--out", out.to_str().unwrap(), "--path",
            path.to_str().unwrap(), "--delta", "1.0", "--epsilons", "0.16", "--samples", "1000", "--seed", "9",
        ]);
        std::fs::read(out.join("ldp_verify.json")).unwrap()
    };
    let a = verify("1", &d.join("one"));
    let b = verify("3", &d.join("three"));
    assert_eq!(a, b);
    // the manifest digest cited by the output is the one recorded next to it
    let report: Value = serde_json::from_slice(&a).unwrap();
    let manifest: Value = serde_json::from_slice(&std::fs::read(d.join("one/manifest.json")).unwrap()).unwrap();
    assert_eq!(report["manifest_digest"], manifest["digest"]);
    assert!(report["per_epsilon"][0]["hits"].as_u64().unwrap() > 0);
}

#[test]
fn simulate_is_reproducible_and_seeded() {
    let d = scratch("simulate");
    let cfg = config(&d, "h.json", r#"{"hamiltonian": {"builtin": "harmonic"}}"#);
    let args = |seed: &'static str| {
        vec!["simulate", "--config", cfg.to_str().unwrap(), "--epsilon", "0.1", "--x0", "1,0", "--horizon", "0.1", "--seed", seed]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let a = bin().args(args("4")).output().unwrap().stdout;
    let b = bin().args(args("4")).output().unwrap().stdout;
    let c = bin().args(args("5")).output().unwrap().stdout;
    assert_eq!(a, b);
    assert_ne!(csv_rows(std::str::from_utf8(&a).unwrap()), csv_rows(std::str::from_utf8(&c).unwrap()));
}

#[test]
fn every_subcommand_has_help_and_schema() {
    let cmds: [&[&str]; 9] = [
        &["analyze"],
        &["graph", "export"],
        &["coeffs"],
        &["simulate"],
        &["action", "eval"],
        &["action", "minimize"],
        &["ldp", "verify"],
        &["oracle", "brownian"],
        &["oracle", "transit"],
    ];
    for c in cmds {
        let help = run(&[c, &["--help"]].concat());
        let text = String::from_utf8(help.stdout).unwrap();
        for flag in ["--config", "--threads", "--seed", "--schema"] {
            assert!(text.contains(flag), "{c:?} help lacks {flag}");
        }
        let schema = run(&[c, &["--schema"]].concat());
        let v: Value = serde_json::from_slice(&schema.stdout).unwrap();
        assert!(v.get("$schema").is_some(), "{c:?}");
    }
}

#[test]
fn oracle_drift_passes_on_doublewell() {
    let d = scratch("oracle");
    let cfg = config(&d, "dw.json", r#"{"hamiltonian": {"builtin": "doublewell"}}"#);
    let out = run(&["oracle", "drift", "--config", cfg.to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
    let bad = bin().args(["oracle", "drift", "--config", cfg.to_str().unwrap(), "--params", r#"{"nope": 1}"#]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
