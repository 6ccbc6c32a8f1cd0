//! End-to-end runs of the `sttsim` binary on small configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use stt_sim::io::read_linking;

const BIN: &str = env!("CARGO_BIN_EXE_sttsim");

/// Spin-boson at memory 1 and a handful of steps, cheap enough for debug runs.
fn small_config(dir: &Path, out: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"[discretization]
tau = 0.25
n_steps = 8
memory = 1

[stt]
n_basis = 6
max_steps = 2000
target_loss = 1e-10

[output]
directory = "{}"

[oracle]
path_steps = 2
n_traj = 200
substeps = 4
{extra}
"#,
        dir.join(out).display()
    );
    let path = dir.join(format!("{out}.toml"));
    fs::write(&path, text).unwrap();
    path
}

fn sttsim(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = sttsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "sttlink"))
        .collect();
    v.sort();
    v
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let fa = csv_files(a);
    assert!(!fa.is_empty());
    for f in fa {
        let other = b.join(f.file_name().unwrap());
        assert_eq!(fs::read(&f).unwrap(), fs::read(&other).unwrap(), "{} differs", f.display());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "run", "");
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let d = dir.to_str().unwrap();
        run_ok(&["train", "--config", cfg, "--out", d, "--threads", threads]);
        run_ok(&["propagate", "--config", cfg, "--out", d, "--threads", threads]);
        run_ok(&["oracle", "--config", cfg, "--out", d, "--threads", threads]);
    }
    assert_same_outputs(&a, &b);
    for f in ["observables.csv", "bonds.csv", "path_sum.csv", "monte_carlo.csv", "training_T2.csv"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
}

#[test]
fn archived_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "first", "");
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    run_ok(&["propagate", "--config", cfg.to_str().unwrap()]);
    let first = tmp.path().join("first");
    let archived = first.join("config.toml");
    let second = tmp.path().join("second");
    let (a, s) = (archived.to_str().unwrap(), second.to_str().unwrap());
    run_ok(&["train", "--config", a, "--out", s]);
    run_ok(&["propagate", "--config", a, "--out", s]);
    assert_same_outputs(&first, &second);
}

#[test]
fn seed_override_changes_only_stochastic_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "s", "");
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["oracle", "--config", cfg, "--out", a.to_str().unwrap(), "--seed", "1"]);
    run_ok(&["oracle", "--config", cfg, "--out", b.to_str().unwrap(), "--seed", "2"]);
    let body = |p: PathBuf| fs::read_to_string(p).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(a.join("path_sum.csv")), body(b.join("path_sum.csv")));
    assert_ne!(body(a.join("monte_carlo.csv")), body(b.join("monte_carlo.csv")));
}

#[test]
fn linking_trained_for_another_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "base", "");
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    let linking = tmp.path().join("base").join("linking.sttlink");
    let other = small_config(tmp.path(), "other", "[system]\nalpha = 0.5\n");
    let out = sttsim(&["propagate", "--config", other.to_str().unwrap(), "--linking", linking.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trained for config"));

    // changing only the output settings keeps the linking file valid
    let renamed = small_config(tmp.path(), "renamed", "");
    run_ok(&["propagate", "--config", renamed.to_str().unwrap(), "--linking", linking.to_str().unwrap()]);
}

#[test]
fn propagate_without_training_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "fresh", "");
    let out = sttsim(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn memory_zero_trains_one_single_variable_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "m0", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("memory = 1", "memory = 0");
    fs::write(&cfg, text).unwrap();
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    let dir = tmp.path().join("m0");
    assert!(dir.join("training_T1.csv").exists());
    assert!(!dir.join("training_T2.csv").exists());
    let (set, _) = read_linking(&dir.join("linking.sttlink")).unwrap();
    assert_eq!(set.memory, 0);
    assert_eq!(set.trains.len(), 1);
    assert_eq!(set.trains[0].bonds.len() - 1, set.channels);
}

#[test]
fn spin_boson_training_writes_one_set_per_transfer_function() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "m4", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("memory = 1", "memory = 4").replace("n_basis = 6", "n_basis = 10");
    fs::write(&cfg, text).unwrap();
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    let dir = tmp.path().join("m4");
    let (set, _) = read_linking(&dir.join("linking.sttlink")).unwrap();
    assert_eq!(set.trains.len(), 5);
    for j in 1..=5 {
        let curve = fs::read_to_string(dir.join(format!("training_T{j}.csv"))).unwrap();
        assert_eq!(curve.lines().next(), Some("step,loss"));
    }
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = tmp.path().join("unknown.toml");
    fs::write(&unknown, "[system]\nmodle = \"chain\"\n").unwrap();
    let invalid = tmp.path().join("invalid.toml");
    fs::write(&invalid, "[discretization]\ntau = -1.0\n").unwrap();
    let missing = tmp.path().join("missing.toml");
    for p in [&unknown, &invalid, &missing] {
        let out = sttsim(&["oracle", "--config", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", p.display());
    }
}

#[test]
fn path_sum_budget_overrun_is_a_resource_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "big", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("path_steps = 2", "path_steps = 40");
    fs::write(&cfg, text).unwrap();
    let out = sttsim(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
