use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gaussdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussdyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn two_oscillator(gamma: f64, extra: &str) -> String {
    format!(
        r#"name = "pair"
{extra}
[model]
kind = "two_oscillator"
omega_s = 1.0
omega_e_sq = 1.0
gamma = {gamma}
[system]
preset = "squeezed"
r = 0.4
[environment]
preset = "thermal"
beta = 1.5
[time]
t_max = 10.0
steps = 200
"#
    )
}

#[test]
fn decoupled_purity_stays_one() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &two_oscillator(0.0, ""));
    let out = dir.path().join("out");
    let r = gaussdyn(&["simulate", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let purity = column(&csv, "purity");
    assert_eq!(purity.len(), 201);
    assert!(purity.iter().all(|p| (p - 1.0).abs() < 1e-12));
    let s = summary(&out);
    assert_eq!(s["version"], gaussdyn::VERSION);
    assert_eq!(s["outputs"]["trajectory"]["status"], "ok");
    assert!(s["tolerances"]["ode"].as_f64().is_some());
    assert!(s["diagnostics"]["min_symplectic_eigenvalue"].as_f64().unwrap() >= 0.5 - 1e-9);
}

#[test]
fn csv_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "s.toml",
        &two_oscillator(0.5, "outputs = [\"trajectory\", \"coefficients\"]"),
    );
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let r = gaussdyn(&["simulate", "--scenario", &sc, "--out", out.to_str().unwrap()]);
        assert!(r.status.success());
        files.push((
            std::fs::read(out.join("trajectory.csv")).unwrap(),
            std::fs::read(out.join("coefficients.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn bath_purity_rate_is_minus_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"name = "bath"
[model]
kind = "qbm"
omega_s = 1.0
k = [1.0]
[system]
preset = "vacuum"
[environment]
preset = "tau"
tau = 0.5
[time]
t_max = 1.0
steps = 10
"#;
    let sc = write(dir.path(), "s.toml", text);
    let out = dir.path().join("out");
    let r = gaussdyn(&["purity-rate", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let s = summary(&out);
    let v = s["scalars"]["ddot_purity"].as_f64().unwrap();
    assert!((v + 2.0).abs() < 1e-9, "{v}");
    let fd = s["scalars"]["purity_rate"]["finite_difference"].as_f64().unwrap();
    assert!((fd + 2.0).abs() < 1e-4, "{fd}");
}

#[test]
fn critical_time_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"name = "resonant"
[model]
kind = "two_oscillator"
omega_s = 2.0
omega_e_sq = 4.0
gamma = 1.0
[system]
preset = "vacuum"
[environment]
preset = "vacuum"
[time]
t_max = 40.0
steps = 4
[[sweep]]
model.gamma = 1.0
[[sweep]]
model.gamma = 0.5
"#;
    let sc = write(dir.path(), "s.toml", text);
    let out = dir.path().join("out");
    let r = gaussdyn(&["critical-time", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let t: Vec<f64> = (0..2)
        .map(|k| {
            summary(&out.join(format!("resonant-{k}")))["scalars"]["critical_time"]["t_c"]
                .as_f64()
                .unwrap()
        })
        .collect();
    assert!(t[1] >= t[0], "{t:?}");
}

#[test]
fn invalid_state_is_rejected_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = two_oscillator(0.5, "").replace(
        "preset = \"squeezed\"\nr = 0.4",
        "preset = \"custom\"\ncovariance = [[0.4, 0.0], [0.0, 0.4]]",
    );
    let sc = write(dir.path(), "s.toml", &text);
    let r = gaussdyn(&["validate", "--scenario", &sc]);
    assert_eq!(r.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&r.stderr).unwrap();
    let msg = err["error"].as_str().unwrap();
    assert!(msg.contains("0.4") && msg.contains("1/2"), "{msg}");
}

#[test]
fn validate_reports_symplectic_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &two_oscillator(0.5, ""));
    let r = gaussdyn(&["validate", "--scenario", &sc]);
    assert!(r.status.success());
    let v: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["system_pure"], true);
    assert_eq!(v["environment_dof"], 1);
}

#[test]
fn failed_output_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    // the grid is far too narrow for the initial state
    let text = format!(
        "{}[wigner]\nhalf_width = 1.0\npoints = 16\n",
        two_oscillator(0.5, "outputs = [\"trajectory\", \"wigner_grid\"]")
    );
    let sc = write(dir.path(), "s.toml", &text);
    let out = dir.path().join("out");
    let r = gaussdyn(&["simulate", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
    let s = summary(&out);
    assert_eq!(s["outputs"]["trajectory"]["status"], "ok");
    assert_eq!(s["outputs"]["wigner_grid"]["status"], "failed");
    assert!(s["outputs"]["wigner_grid"]["error"].as_str().unwrap().contains("boundary"));
}

#[test]
fn json_format_and_tolerance_override() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &two_oscillator(0.5, ""));
    let out = dir.path().join("out");
    let r = gaussdyn(&[
        "simulate",
        "--scenario",
        &sc,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
        "--tol",
        "1e-9",
    ]);
    assert!(r.status.success());
    let series: Value = serde_json::from_str(&std::fs::read_to_string(out.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(series["columns"][0], "t");
    assert_eq!(series["rows"].as_array().unwrap().len(), 201);
    assert_eq!(summary(&out)["tolerances"]["ode"], 1e-9);
}
