//! End-to-end tests of the command-line binary: exit codes, RESULT lines,
//! configuration handling, and artifact placement.

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_frontspeed");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Parses the `RESULT <scenario> key=value ...` line.
fn parse_result(text: &str) -> Option<(String, HashMap<String, String>)> {
    let line = text.lines().find(|l| l.starts_with("RESULT "))?;
    let mut parts = line.split_whitespace();
    parts.next();
    let scenario = parts.next()?.to_string();
    let mut map = HashMap::new();
    for kv in parts {
        let (k, v) = kv.split_once('=')?;
        map.insert(k.to_string(), v.to_string());
    }
    Some((scenario, map))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn version_flag_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--version"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("frontspeed"));
    assert!(text.contains("defaults:"));
    assert!(text.contains("tol_s0="));
}

#[test]
fn missing_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(64));
    assert!(stderr(&out).contains("subcommand"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["semiwave", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("semiwave"));
}

#[test]
fn missing_config_file_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["semiwave", "--config", "no-such-file.conf"]);
    assert_eq!(out.status.code(), Some(66));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a = 2\nwavelength = 3\n");
    let out = run_in(dir.path(), &["semiwave", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(66));
    assert!(stderr(&out).contains("wavelength"));
}

#[test]
fn mixed_physical_and_dimensionless_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d1 = 1\nd2 = 1\na1 = 1\na2 = 1\nb1 = 1\nb2 = 2\nc1 = 0.5\nc2 = 1\nmu_hat = 1\nh0 = 4\n",
    );
    let out = run_in(dir.path(), &["speed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(66));
}

#[test]
fn semiwave_run_writes_profile_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "l_left = 30\nl_right = 30\nh_xi = 0.1\ns = 0, 0.3\n",
    );
    let out = run_in(
        dir.path(),
        &["semiwave", "--config", cfg.to_str().unwrap(), "--out", "art"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let (scenario, map) = parse_result(&stdout(&out)).expect("no RESULT line");
    assert_eq!(scenario, "semiwave");
    let d0: f64 = map["dpsi0_0"].parse().unwrap();
    let d1: f64 = map["dpsi0_1"].parse().unwrap();
    assert!(d0 > d1);
    assert!(dir.path().join("art/profile_00.csv").exists());
    assert!(dir.path().join("art/profile_01.csv").exists());
}

#[test]
fn vanishing_run_decides_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    // Superior invader, but seeded below the critical size: it dies out.
    let cfg = write_config(
        dir.path(),
        "h0 = 0.3\nu0_amplitude = 0.3\nt_end = 60\ny_cells = 150\ndr = 0.25\ndt = 0.02\n",
    );
    let out = run_in(
        dir.path(),
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", "v"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let (_, map) = parse_result(&stdout(&out)).unwrap();
    assert_eq!(map["outcome"], "vanishing");
    assert!(dir.path().join("v/front.csv").exists());
}

#[test]
fn inferior_regime_simulate_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    // The verification pipeline selects a speed first, which only exists in
    // the superior-invader regime; anything else is a clean failure.
    let cfg = write_config(dir.path(), "a = 0.5\nb = 2\nt_end = 20\n");
    let out = run_in(
        dir.path(),
        &["simulate", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("superior"), "stderr: {}", stderr(&out));
}

#[test]
fn undecided_horizon_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // Superior invader but a horizon too short for the front to triple h0.
    let cfg = write_config(
        dir.path(),
        "t_end = 4\ny_cells = 120\ndr = 0.25\ndt = 0.02\n",
    );
    let out = run_in(
        dir.path(),
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", "u"],
    );
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    let (_, map) = parse_result(&stdout(&out)).unwrap();
    assert_eq!(map["outcome"], "undetermined");
}

#[test]
fn check_against_stale_store_fails_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // A store whose single entry disagrees with what the code computes.
    let store = dir.path().join("stale.csv");
    std::fs::write(
        &store,
        "fingerprint,value,tolerance,note\n\
         dpsi0|s=0|a=2|b=0.5|d=1|r=1|grid=60:60:0.05,0.999,0.000001,stale\n",
    )
    .unwrap();
    let cfg = write_config(dir.path(), &format!("store = {}\n", store.display()));
    let out = run_in(dir.path(), &["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("FAIL"), "missing FAIL line: {text}");
    // Values computed but absent from the store surface as NEW.
    assert!(text.contains("NEW"), "missing NEW lines: {text}");
    let (_, map) = parse_result(&text).unwrap();
    assert_eq!(map["fail"], "1");
}
