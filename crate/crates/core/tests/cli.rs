use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use micropump::cli::run_with;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("micropump-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("micropump").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

#[test]
fn empty_invocation_prints_usage_and_fails() {
    let (code, out, err) = run(&[]);
    assert_eq!(code, 1);
    assert!(format!("{out}{err}").contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = run(&["sweep", "--bogus"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn mech_prints_the_standard_spring_constant() {
    let dir = scratch("mech");
    let (code, out, _) = run(&["mech", "--out", &out_arg(&dir)]);
    assert_eq!(code, 0);
    let k: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("inlet_valve.spring_constant_n_per_m = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((k - 0.5625).abs() < 1e-12);
    assert!(dir.join("resolved_config.toml").exists());
    assert!(dir.join("mech.txt").exists());
}

#[test]
fn pq_reports_half_flow_at_half_head() {
    let dir = scratch("pq");
    let (code, out, _) = run(&["pq", "--head", "0.26", "--out", &out_arg(&dir)]);
    assert_eq!(code, 0);
    assert!(out.contains("head 0.26 m -> 36 ml/min"), "{out}");
    let csv = fs::read_to_string(dir.join("pq.csv")).unwrap();
    assert!(csv.starts_with("# micropump "));
    assert!(csv.lines().nth(1).unwrap() == "head_m,flow_ml_per_min");
}

#[test]
fn head_above_shutoff_is_rejected() {
    let dir = scratch("pq-bad");
    let (code, _, err) = run(&["pq", "--head", "0.9", "--out", &out_arg(&dir)]);
    assert_eq!(code, 1);
    assert!(err.contains("--head"));
}

#[test]
fn sweep_writes_one_row_per_grid_frequency() {
    let dir = scratch("sweep");
    let (code, _, _) = run(&["sweep", "--out", &out_arg(&dir)]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "frequency_hz,flow_ml_per_min,abnormal");
    assert_eq!(rows.len(), 1 + 12);
}

#[test]
fn resolved_config_reloads_to_the_same_hash() {
    let dir = scratch("reload");
    let cfg = dir.join("in.toml");
    fs::write(&cfg, "[drive]\nfrequency_hz = 120.0\n[sweep]\nf_min_hz = 80.0\n").unwrap();
    let (code, _, err) = run(&["sim", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir)]);
    assert_eq!(code, 0, "{err}");
    let first = fs::read_to_string(dir.join("resolved_config.toml")).unwrap();

    let again = scratch("reload-2");
    let resolved = dir.join("resolved_config.toml");
    let (code, _, err) = run(&["sim", "--config", resolved.to_str().unwrap(), "--out", &out_arg(&again)]);
    assert_eq!(code, 0, "{err}");
    let second = fs::read_to_string(again.join("resolved_config.toml")).unwrap();
    assert_eq!(first, second);
    assert!(first.contains("drive.frequency_hz = 120"));
}

#[test]
fn config_errors_name_every_bad_key() {
    let dir = scratch("bad-config");
    let cfg = dir.join("in.toml");
    fs::write(&cfg, "[drive]\nfrequency_hz = -3.0\nvoltag_v = 1.0\n").unwrap();
    let (code, _, err) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir)]);
    assert_eq!(code, 1);
    assert!(err.contains("drive.frequency_hz"), "{err}");
    assert!(err.contains("drive.voltag_v"), "{err}");
}

#[test]
fn loss_needs_a_pipe_area() {
    let dir = scratch("loss");
    let data = dir.join("loss.csv");
    fs::write(&data, "velocity_m_per_s,head_m\n0.1,0.12\n0.2,0.24\n0.3,0.37\n").unwrap();
    let (code, _, err) = run(&["loss", "--data", data.to_str().unwrap(), "--out", &out_arg(&dir.join("out"))]);
    assert_eq!(code, 1);
    assert!(err.contains("hydraulics.pipe_area_m2"), "{err}");

    let cfg = dir.join("in.toml");
    fs::write(&cfg, "[hydraulics]\npipe_area_m2 = 7.0e-6\n").unwrap();
    let (code, out, err) = run(&[
        "loss",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--decompose",
        "0.4,0.12,0.08",
        "--out",
        &out_arg(&dir.join("out")),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("pump_internal_head_m = 0.2"), "{out}");

    let (code, _, err) = run(&[
        "loss",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--decompose",
        "0.4,0.12",
        "--out",
        &out_arg(&dir.join("out")),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("--decompose"), "{err}");
}

#[test]
fn malformed_data_reports_its_line() {
    let dir = scratch("thermal-bad");
    let data = dir.join("t.csv");
    fs::write(&data, "power_w,core_temp_c\n30,48\n60,hot\n").unwrap();
    let (code, _, err) = run(&["thermal", "--data", data.to_str().unwrap(), "--out", &out_arg(&dir)]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn thermal_flags_extrapolation() {
    let dir = scratch("thermal");
    let (code, out, _) = run(&["thermal", "--power", "45", "--power", "90", "--out", &out_arg(&dir)]);
    assert_eq!(code, 0);
    assert!(out.contains("45 W -> 60.8"), "{out}");
    assert!(out.contains("(extrapolated)"));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = scratch("numeric");
    let cfg = dir.join("in.toml");
    // a step longer than the drive period allows
    fs::write(&cfg, "[solver]\ndt_s = 1.0e-3\n").unwrap();
    let (code, _, err) = run(&["sim", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir)]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn binary_matches_the_library_entry_point() {
    let dir = scratch("bin");
    let output = Command::new(env!("CARGO_BIN_EXE_micropump"))
        .args(["pq", "--head", "0.13", "--out", &out_arg(&dir)])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("head 0.13 m -> 54 ml/min"));
    let status = Command::new(env!("CARGO_BIN_EXE_micropump")).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
