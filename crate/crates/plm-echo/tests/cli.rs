//! End-to-end checks of the command-line surface: exit codes, JSON report
//! fields, CSV layout and the documented error paths.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plm-echo"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// Small, fast grids; alpha0 400/m over 1 cm and theta0 = pi/2 give
/// alpha_s L = alpha_e L = 2.
const BASE: &str = r#"
[grids]
profile = "rectangular"
delta_in_rad_per_s = 6.283185307179586e6
n_bins = 101
n_cells = 50
length_m = 0.01

[stage]
alpha0_s_per_m = 400.0
alpha0_e_per_m = 400.0

[protocol]
variant = "basic"
"#;

fn run_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn run_writes_report_and_waveforms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", BASE);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    let doc = run_json(&output);
    assert!(doc["efficiency"].as_f64().unwrap() > 0.5);
    assert!(doc["peak_time_s"].as_f64().is_some());
    assert!(doc["shape_fidelity"].as_f64().unwrap() > 0.9);
    for file in ["report.json", "echo.csv", "transmitted.csv", "effective_config.toml"] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }
    let echo_csv = std::fs::read_to_string(out_dir.join("echo.csv")).unwrap();
    assert!(echo_csv.starts_with("time_s,re,im\n"));
}

#[test]
fn run_deep_symmetric_memory_is_nearly_lossless() {
    let dir = tempfile::tempdir().unwrap();
    // alpha_s L = alpha_e L = 20, x = 1
    let body = BASE
        .replace("alpha0_s_per_m = 400.0", "alpha0_s_per_m = 4000.0")
        .replace("alpha0_e_per_m = 400.0", "alpha0_e_per_m = 4000.0")
        .replace("n_bins = 101", "n_bins = 201")
        .replace("n_cells = 50", "n_cells = 100")
        + "\n[signal]\nfwhm_s = 6.366e-6\n";
    let cfg = write_config(dir.path(), "deep.toml", &body);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    let doc = run_json(&output);
    assert!(
        doc["efficiency"].as_f64().unwrap() >= 0.99,
        "efficiency {}",
        doc["efficiency"]
    );
}

#[test]
fn run_rejects_storage_beyond_optical_coherence() {
    let dir = tempfile::tempdir().unwrap();
    // default storage time is 40*fwhm ~ 159 us; cap T2,opt below it
    let body = format!("{BASE}\n[budget]\nt2_opt_s = 50e-6\n");
    let cfg = write_config(dir.path(), "bad.toml", &body);
    let output = bin()
        .args(["--config", cfg.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("T < T2,o"), "stderr: {stderr}");
}

#[test]
fn run_missing_config_exits_2() {
    let output = bin().args(["--config", "/nonexistent/nope.toml", "run"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_depth_grid_matches_formula_exactly_in_oracle_column() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{BASE}\n[sweep]\nparameter = \"alpha-l\"\nvalues = [1.0, 2.0, 5.0, 10.0]\n"
    );
    let cfg = write_config(dir.path(), "sweep.toml", &body);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "sweep"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "value,efficiency_sim,efficiency_oracle,abs_error");
    for (line, value) in lines.zip([1.0f64, 2.0, 5.0, 10.0]) {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], value);
        let expect = (1.0 - (-value).exp()).powi(2);
        assert!(
            (fields[2] - expect).abs() <= 1e-12,
            "oracle column {} vs {expect}",
            fields[2]
        );
        // the simulation itself tracks the formula closely
        assert!((fields[1] - expect).abs() / expect < 0.02);
    }
}

#[test]
fn sweep_without_values_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{BASE}\n[sweep]\nparameter = \"alpha-l\"\nvalues = []\n");
    let cfg = write_config(dir.path(), "empty.toml", &body);
    let output = bin().args(["--config", cfg.to_str().unwrap(), "sweep"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_theta0_efficiency_peaks_near_symmetry_point() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<String> =
        (0..21).map(|k| format!("{}", 0.3 + (std::f64::consts::PI - 0.6) * k as f64 / 20.0)).collect();
    let body = format!(
        "{BASE}\n[sweep]\nparameter = \"theta0\"\nvalues = [{}]\n",
        values.join(", ")
    );
    let cfg = write_config(dir.path(), "theta.toml", &body);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "sweep"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    let argmax_sim = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1[1].total_cmp(&b.1[1]))
        .unwrap()
        .0;
    // x = tan(theta0/2) crosses 1 at theta0 = pi/2, the middle grid point
    assert_eq!(argmax_sim, 10, "efficiency should peak at the symmetry point");
}

#[test]
fn oracle_efficiency_value() {
    let output = bin()
        .args(["oracle", "efficiency", "--x", "1", "--alpha-sl", "2", "--alpha-el", "2"])
        .output()
        .unwrap();
    let doc = run_json(&output);
    assert!((doc["efficiency"].as_f64().unwrap() - 0.7476450724155088).abs() < 1e-12);
}

#[test]
fn materials_lookup_prints_table_values() {
    let output = bin().args(["materials", "lookup", "Eu", "151", "1"]).output().unwrap();
    let doc = run_json(&output);
    let text = doc.to_string();
    assert!(text.contains("34.533"));
    assert!(text.contains("46.175"));
    let missing = bin().args(["materials", "lookup", "Eu", "151", "3"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn phasematch_degenerate_geometry_matches() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{BASE}\n[geometry]\nk_s = [0.0, 0.0, 1.0e7]\nk0 = [0.0, 0.0, 0.0]\n\
         k1 = [0.0, 0.0, 5.0e6]\nk2 = [0.0, 0.0, 5.0e6]\ntarget_k31_rad_per_m = 1.0e7\n"
    );
    let cfg = write_config(dir.path(), "pm.toml", &body);
    let output = bin().args(["--config", cfg.to_str().unwrap(), "phasematch"]).output().unwrap();
    let doc = run_json(&output);
    assert_eq!(doc["matched"], Value::Bool(true));
    assert_eq!(doc["residual_rad"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["backward"], Value::Bool(false));
}

#[test]
fn validate_reports_material_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{BASE}\n[budget]\nt2_opt_s = 1.5e-3\nt2_spin_s = 21600.0\n\n\
         [material]\nion = \"Eu\"\nisotope = 151\nsite = \"1\"\n"
    );
    let cfg = write_config(dir.path(), "val.toml", &body);
    let output = bin().args(["--config", cfg.to_str().unwrap(), "validate"]).output().unwrap();
    let doc = run_json(&output);
    assert!(doc["timescales"]["checks"].as_array().unwrap().len() >= 4);
    assert!(doc["feasibility"]["chosen"]["t2_spin_s"].as_f64().unwrap() > 1e4);
}

#[test]
fn effective_config_reparses_to_equal_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", BASE);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let effective = std::fs::read_to_string(out_dir.join("effective_config.toml")).unwrap();
    let parsed = plm_echo::config::SimConfig::from_toml(&effective).unwrap();
    let resolved = parsed.resolve().unwrap();
    assert_eq!(resolved.effective, parsed);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", BASE);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let output = bin()
            .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "run"])
            .output()
            .unwrap();
        assert!(output.status.success());
        outputs.push((
            std::fs::read(out_dir.join("report.json")).unwrap(),
            std::fs::read(out_dir.join("echo.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}
