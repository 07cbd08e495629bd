use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bdspectral"));
    cmd.env_remove("BDSPECTRAL_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn list_shows_every_family() {
    let out = run(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().any(|l| l.starts_with("Racah") && l.contains("c=-N")));
}

#[test]
fn krawtchouk_stationary_is_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--family", "krawtchouk", "--p", "0.5", "--N", "2", "--out", dir.path().to_str().unwrap(), "stationary"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    assert_eq!(csv, "x,pi\n0,0.25\n1,0.5\n2,0.25\n");
    let side = read_json(&dir.path().join("stationary.json"));
    assert_eq!(side["t_S"], 0.5);
    assert_eq!(side["cutoff"], Value::Null);
    assert!(side["residuals"]["stationarity"].as_f64().unwrap() < 1e-15);
}

#[test]
fn zero_step_transition_is_identity() {
    let out = run(&["solve", "--family", "hahn", "--a", "1.5", "--b", "2.5", "--N", "4", "transition", "--steps", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (x, line) in text.lines().skip(1).enumerate() {
        for (y, v) in line.split(',').skip(1).enumerate() {
            let v: f64 = v.parse().unwrap();
            let want = if x == y { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "({x},{y}) = {v}");
        }
    }
}

#[test]
fn q_charlier_evolution_keeps_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["solve", "--family", "qcharlier", "--a", "0.8", "--q", "0.5", "--out", d, "evolve", "--steps", "20", "--from", "delta:0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let side = read_json(&dir.path().join("evolve.json"));
    let total: f64 = read_csv(&dir.path().join("evolve.csv")).iter().map(|r| r[0]).sum::<f64>()
        + side["tail_mass"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-10, "{total}");
    assert!(side["cutoff"].as_u64().unwrap() > 0);
    assert!(side["residuals"]["mass"].as_f64().unwrap() < 1e-10);
    assert!(side["residuals"]["stepping"].as_f64().unwrap() < 1e-10);
}

#[test]
fn continuous_time_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let start = dir.path().join("start.csv");
    std::fs::write(&start, "x,p\n0,0.5\n1,0.5\n").unwrap();
    let from = format!("file:{}", start.display());
    let out = run(&["solve", "--family", "krawtchouk", "--p", "0.3", "--N", "5", "continuous", "--time", "50", "--from", &from]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // binomial(5, 0.3) after a long time
    let pi = [0.16807, 0.36015, 0.3087, 0.1323, 0.02835, 0.00243];
    for (v, p) in values.iter().zip(pi) {
        assert!((v - p).abs() < 1e-9, "{v} vs {p}");
    }
}

#[test]
fn verify_passes_on_krawtchouk() {
    let out = run(&["verify", "--family", "krawtchouk", "--p", "0.5", "--N", "8", "fast"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.contains("oracle_power"));
}

#[test]
fn verify_full_reports_the_two_set_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify", "--family", "qmeixner", "--b", "0.5", "--c", "2", "--q", "0.5", "--out", dir.path().to_str().unwrap(), "full",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["residuals"]["passed"], true);
    let checks = report["residuals"]["checks"].as_array().unwrap();
    let identity = checks.iter().find(|c| c["name"] == "identity").unwrap();
    assert!(identity["detail"].as_str().unwrap().contains("two-set"));
    assert!(identity["value"].as_f64().unwrap() < 1e-8);
    assert!(checks.iter().any(|c| c["name"] == "monte_carlo"));
}

#[test]
fn corrupted_norms_fail_verification() {
    let out = run(&["verify", "--family", "krawtchouk", "--p", "0.5", "--N", "8", "fast", "--corrupt-dn2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "verify_failed");
    assert_eq!(err["failed_checks"][0], "orthogonality");
}

#[test]
fn mirror_spectrum_examples() {
    let out = run(&["mirror", "--family", "krawtchouk", "--p", "0.5", "--N", "2", "--ts", "0.5", "spectrum"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let kappa_s: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(kappa_s, vec![1.0, 0.0, 0.0]);

    let out = run(&["mirror", "--family", "hahn", "--a", "1", "--b", "1", "--N", "4", "spectrum"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let kappa_s: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(kappa_s[1], 0.0);
    assert_eq!(kappa_s[3], 0.0);
}

#[test]
fn mirror_evolution_reaches_pi_in_one_step() {
    let out = run(&["mirror", "--family", "krawtchouk", "--p", "0.5", "--N", "2", "--ts", "0.5", "evolve", "--steps", "1", "--from", "delta:2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (v, p) in values.iter().zip([0.25, 0.5, 0.25]) {
        assert!((v - p).abs() < 1e-14);
    }
}

#[test]
fn asymmetric_chain_is_a_domain_error() {
    let out = run(&["mirror", "--family", "krawtchouk", "--p", "0.3", "--N", "4", "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "not_mirror_symmetric");
}

#[test]
fn dual_rates_are_reflected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["dual", "--family", "krawtchouk", "--p", "0.3", "--N", "4", "--out", d]);
    assert!(out.status.success());
    let dual = read_csv(&dir.path().join("dual.csv"));
    // Krawtchouk: B(x) = p(N-x), D(x) = (1-p)x
    for (x, row) in dual.iter().enumerate() {
        let death_reflected = 0.7 * (4 - x) as f64;
        let birth_reflected = 0.3 * x as f64;
        assert!((row[0] - death_reflected).abs() < 1e-14);
        assert!((row[1] - birth_reflected).abs() < 1e-14);
    }
    assert!(read_json(&dir.path().join("dual.json"))["residuals"]["spectrum"].as_f64().unwrap() < 1e-10);
}

#[test]
fn invalid_parameters_exit_with_error_json() {
    let out = run(&["solve", "--family", "krawtchouk", "--p", "1.5", "--N", "3", "stationary"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "param");
    assert_eq!(err["exit_code"], 2);

    let out = run(&["solve", "--family", "krawtchouk", "--p", "0.5", "--N", "3", "--set", "minus", "stationary"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "involution_undefined");
}

#[test]
fn missing_files_are_io_errors() {
    let out = run(&["solve", "--config", "/nonexistent/scenario.json", "stationary"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    std::fs::write(&cfg, r#"{"family": "krawtchouk", "params": {"p": 0.2}, "N": 2, "t_S": 0.25}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve", "--config", cfg.to_str().unwrap(), "--p", "0.5", "--out", out_dir.to_str().unwrap(), "stationary",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let side = read_json(&out_dir.join("stationary.json"));
    assert_eq!(side["t_S"], 0.25);
    assert_eq!(side["config"]["params"]["p"], 0.5);
    // the sidecar's config is itself a valid scenario file
    let again = dir.path().join("again.json");
    std::fs::write(&again, side["config"].to_string()).unwrap();
    let out = run(&["solve", "--config", again.to_str().unwrap(), "stationary"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "x,pi\n0,0.25\n1,0.5\n2,0.25\n");
}

#[test]
fn simulation_is_deterministic_and_seeded_from_env() {
    let args = ["simulate", "--family", "qhahn", "--q", "0.7", "--a", "0.4", "--b", "0.6", "--N", "6", "--walks", "20000"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let seeded = bin().args(args).env("BDSPECTRAL_SEED", "11").output().unwrap();
    assert_ne!(seeded.stdout, first.stdout);
    let flagged = run(&[&args[..], &["--seed", "11"]].concat());
    assert_eq!(seeded.stdout, flagged.stdout);
    let side: Value = serde_json::from_slice(&seeded.stderr).unwrap();
    assert_eq!(side["residuals"]["seed"], 11);
    assert!(side["residuals"]["chi_square"]["p_value"].as_f64().unwrap() > 1e-4);
}
