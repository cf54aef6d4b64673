//! End-to-end tests for the `aggrolab` binary: each test drives the compiled
//! executable through a temp directory and checks the documented contract
//! (exit codes, manifest hashes, byte-identical reruns, artifact formats).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aggrolab"))
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn assert_exit(out: &Output, code: i32, context: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{context}: expected exit {code}, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

fn sha256_hex(path: &Path) -> String {
    let bytes = fs::read(path).unwrap();
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SMALL_PANEL: &str = r#"{
    "kind": "aggregate",
    "seed": 11,
    "mixing": {"family": "beta_type", "p": 1.0, "q": 1.5},
    "innovation": {"family": "gaussian", "sigma": 1.0},
    "scheme": "finite_variance",
    "n_units": 200,
    "n": 128,
    "replicates": 2
}"#;

#[test]
fn diagnose_reports_regime_and_hashes_its_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "diag.json",
        r#"{"kind": "diagnose", "beta": 0.5, "alpha": 2.0,
            "sigma": 1.0, "alpha0": 1.8, "n_units": 1000, "n": 100}"#,
    );
    let out_dir = tmp.path().join("run");
    let out = run(&[
        "diagnose",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "diagnose");

    let regime: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("regime.json")).unwrap()).unwrap();
    assert_eq!(regime["region"]["region"], "i");
    assert_eq!(regime["region"]["h"], 0.75);
    assert_eq!(regime["memory"]["memory"], "long");

    // Every listed output must carry a hash that matches the bytes on disk.
    let man = manifest(&out_dir);
    let outputs = man["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for rec in outputs {
        let file = rec["file"].as_str().unwrap();
        assert_eq!(
            rec["sha256"].as_str().unwrap(),
            sha256_hex(&out_dir.join(file)),
            "hash mismatch for {file}"
        );
    }
    assert_eq!(man["seed"], 0);
    assert_eq!(man["config"]["kind"], "diagnose");
}

#[test]
fn aggregate_results_are_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "agg.json", SMALL_PANEL);
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    for (dir, workers) in [(&dir_a, "1"), (&dir_b, "8")] {
        let out = run(&[
            "aggregate",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_exit(&out, 0, "aggregate");
    }
    for name in ["aggregate_000.csv", "aggregate_001.csv"] {
        assert_eq!(
            fs::read(dir_a.join(name)).unwrap(),
            fs::read(dir_b.join(name)).unwrap(),
            "{name} differs between worker counts"
        );
    }
}

#[test]
fn invalid_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();

    // Config kind must agree with the command-line kind.
    let cfg = write_cfg(tmp.path(), "mismatch.json", SMALL_PANEL);
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 2, "kind mismatch");

    let cfg = write_cfg(tmp.path(), "broken.json", "{\"kind\": \"simulate\"");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 2, "malformed json");

    let cfg = write_cfg(
        tmp.path(),
        "negative.json",
        r#"{"kind": "simulate",
            "mixing": {"family": "beta_type", "p": -1.0, "q": 1.5},
            "innovation": {"family": "gaussian", "sigma": 1.0},
            "n_units": 10, "n": 10}"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 2, "negative shape parameter");

    let cfg = write_cfg(
        tmp.path(),
        "unknown.json",
        r#"{"kind": "diagnose", "beta": 0.5, "alpha": 2.0, "typo_field": 1}"#,
    );
    let out = run(&["diagnose", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 2, "unknown field");
}

#[test]
fn resource_caps_exit_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "agg.json", SMALL_PANEL);

    // A held lock means another run owns the directory.
    let locked = tmp.path().join("locked");
    fs::create_dir_all(&locked).unwrap();
    fs::write(locked.join(".lock"), b"").unwrap();
    let out = run(&[
        "aggregate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        locked.to_str().unwrap(),
    ]);
    assert_exit(&out, 3, "held lock");
    assert!(
        locked.join(".lock").exists(),
        "foreign lock must be left in place"
    );

    let cfg = write_cfg(
        tmp.path(),
        "huge.json",
        r#"{"kind": "simulate",
            "mixing": {"family": "beta_type", "p": 1.0, "q": 1.5},
            "innovation": {"family": "gaussian", "sigma": 1.0},
            "n_units": 100000000, "n": 100000000}"#,
    );
    let dir = tmp.path().join("huge");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 3, "cell cap");
    // The failed run still writes a manifest recording what went wrong.
    let man = manifest(&dir);
    assert!(man["error"].as_str().unwrap().contains("cap"));
    assert!(
        !dir.join(".lock").exists(),
        "lock must be released on failure"
    );
}

#[test]
fn report_restores_the_summary_and_rejects_tampered_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "agg.json", SMALL_PANEL);
    let dir = tmp.path().join("run");
    let out = run(&[
        "aggregate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "aggregate");

    let original = fs::read(dir.join("summary.txt")).unwrap();
    fs::remove_file(dir.join("summary.txt")).unwrap();
    let rep_cfg = write_cfg(
        tmp.path(),
        "rep.json",
        &format!(
            r#"{{"kind": "report", "run": {:?}}}"#,
            dir.to_str().unwrap()
        ),
    );
    let out = run(&["report", "--config", rep_cfg.to_str().unwrap()]);
    assert_exit(&out, 0, "report");
    assert_eq!(fs::read(dir.join("summary.txt")).unwrap(), original);

    // Corrupt one result file; the report must refuse to vouch for it.
    let mut bytes = fs::read(dir.join("aggregate_000.csv")).unwrap();
    bytes.push(b'x');
    fs::write(dir.join("aggregate_000.csv"), bytes).unwrap();
    let out = run(&["report", "--config", rep_cfg.to_str().unwrap()]);
    assert_exit(&out, 2, "tampered output");
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest hash"));
}

#[test]
fn simulate_writes_panels_that_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "sim.json",
        r#"{"kind": "simulate", "seed": 7,
            "mixing": {"family": "beta_type", "p": 2.0, "q": 3.0},
            "innovation": {"family": "gaussian", "sigma": 1.0},
            "n_units": 50, "n": 64}"#,
    );
    let dir = tmp.path().join("run");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "simulate");

    let panel = aggrolab::io::read_panel(&dir.join("panel_000")).unwrap();
    assert_eq!((panel.rows, panel.cols), (50, 64));
    assert_eq!(panel.coeffs.len(), 50);
    assert_eq!(panel.master_seed, 7);
    assert!(panel.values.iter().all(|v| v.is_finite()));
    assert!(panel.coeffs.iter().all(|&x| (0.0..1.0).contains(&x)));

    let man = manifest(&dir);
    let listed: Vec<&str> = man["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["file"].as_str().unwrap())
        .collect();
    assert!(listed.contains(&"panel_000.bin"));
    assert!(listed.contains(&"panel_000.json"));
}

#[test]
fn disaggregate_robinson_writes_a_moment_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "rob.json",
        r#"{"kind": "disaggregate", "seed": 21,
            "mixing": {"family": "beta_type", "p": 1.0, "q": 1.5},
            "innovation": {"family": "gaussian", "sigma": 1.0},
            "n_units": 500, "n": 30,
            "method": {"estimator": "robinson", "k_max": 3}}"#,
    );
    let dir = tmp.path().join("run");
    let out = run(&[
        "disaggregate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "disaggregate");

    let table = fs::read_to_string(dir.join("moments.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("k,mu_hat"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], vec![0.0, 1.0]);
    // Moments of a distribution on [0, 1) must decrease in k.
    for pair in rows.windows(2) {
        assert!(pair[1][1] < pair[0][1]);
    }
}

#[test]
fn worker_count_comes_from_env_unless_the_flag_overrides_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "diag.json",
        r#"{"kind": "diagnose", "beta": 0.5, "alpha": 2.0}"#,
    );

    let dir = tmp.path().join("env");
    let out = bin()
        .env("AGGROLAB_WORKERS", "3")
        .args([
            "diagnose",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_exit(&out, 0, "env workers");
    assert_eq!(manifest(&dir)["workers"], 3);

    let dir = tmp.path().join("flag");
    let out = bin()
        .env("AGGROLAB_WORKERS", "3")
        .args([
            "diagnose",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            "5",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_exit(&out, 0, "flag workers");
    assert_eq!(manifest(&dir)["workers"], 5);

    let out = bin()
        .env("AGGROLAB_WORKERS", "not a number")
        .args(["diagnose", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_exit(&out, 2, "unparseable env workers");
}

#[test]
fn field_exports_grid_green_table_and_spectral_slice() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "field.json",
        r#"{"kind": "field", "seed": 5, "variant": "4n",
            "mixing": {"family": "beta_type", "p": 1.0, "q": 1.5},
            "innovation": {"family": "gaussian", "sigma": 1.0},
            "rows": 16, "cols": 16, "n_units": 2, "tol": 1e-3,
            "green": {"a": 0.5, "tol": 1e-4},
            "spectral": {"points": 4, "max_freq": 1.0}}"#,
    );
    let dir = tmp.path().join("run");
    let out = run(&[
        "field",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "field");

    for name in ["field.bin", "field.json", "green.csv", "spectral.csv"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("field.json")).unwrap()).unwrap();
    assert_eq!(sidecar["variant"], "4n");
    assert_eq!(sidecar["rows"], 16);
    // 16 x 16 grid of little-endian f64 values.
    let bytes = fs::read(dir.join("field.bin")).unwrap();
    assert_eq!(bytes.len(), 16 * 16 * 8);

    let spectral = fs::read_to_string(dir.join("spectral.csv")).unwrap();
    assert_eq!(spectral.lines().count(), 5);
    assert_eq!(spectral.lines().next(), Some("u,density"));
}
