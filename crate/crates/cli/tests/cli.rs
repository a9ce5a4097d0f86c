use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sqz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqz"))
        .args(args)
        .output()
        .expect("run sqz")
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, content).unwrap();
    path
}

const SQUEEZER: &str = r#""squeezer": {
    "efficiency": 0.965, "threshold_mW": 221, "phase_jitter_deg": 0.66,
    "cavity": { "coupler_transmissivity": 0.10, "round_trip_loss": 0.001, "round_trip_length_m": 0.0798 }
}"#;

fn model_config(dir: &TempDir, pump_mw: f64, efficiency: f64) -> PathBuf {
    let squeezer = SQUEEZER.replace("0.965", &efficiency.to_string());
    write(
        dir,
        "model.json",
        &format!(r#"{{ "schema_version": 1, {squeezer}, "pump_mW": {pump_mw}, "frequency_Hz": 5e6 }}"#),
    )
}

fn run_with(config: &Path, command: &str, extra: &[&str]) -> Output {
    let config = config.display().to_string();
    let mut args = vec![command, "--config", config.as_str()];
    args.extend_from_slice(extra);
    sqz(&args)
}

#[test]
fn model_reference_point() {
    let out = sqz(&["model", "--config", &bundled("model_reference.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().next().unwrap(), "-12.41 dB / +19.79 dB");

    let out = sqz(&["model", "--config", &bundled("model_reference.json"), "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["squeezed"]["dB"].as_f64().unwrap() + 12.4097).abs() < 1e-3);
    assert!((v["antisqueezed"]["linear"].as_f64().unwrap() - 95.3205).abs() < 1e-3);
}

#[test]
fn model_at_zero_pump_is_vacuum() {
    let dir = TempDir::new().unwrap();
    let out = run_with(&model_config(&dir, 0.0, 0.965), "model", &[]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().next().unwrap(), "0.00 dB / 0.00 dB");
}

#[test]
fn model_error_classes() {
    let dir = TempDir::new().unwrap();
    let out = run_with(&model_config(&dir, 300.0, 0.965), "model", &[]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("above threshold"), "{}", stderr(&out));

    let out = run_with(&model_config(&dir, 100.0, 1.5), "model", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("efficiency"), "{}", stderr(&out));

    let config = write(&dir, "typo.json", r#"{ "schema_version": 1, "pump_mw": 1 }"#);
    let out = run_with(&config, "model", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));

    let config = write(&dir, "future.json", &format!(r#"{{ "schema_version": 2, {SQUEEZER}, "pump_mW": 1, "frequency_Hz": 1 }}"#));
    let out = run_with(&config, "model", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("schema_version"));

    assert_eq!(code(&sqz(&["model"])), 2);
    assert_eq!(code(&sqz(&["model", "--config", "/nonexistent/config.json"])), 2);
    assert_eq!(code(&sqz(&["frobnicate"])), 2);
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_pump_series() {
    let out = sqz(&["spectrum", "--config", &bundled("spectrum_pump_series.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "pump_mW,theta_deg,frequency_Hz,squeezed_dB,antisqueezed_dB");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4 * 96 * 2);
    let clean: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "180" && r[1] == "0")
        .map(|r| r[3].parse().unwrap())
        .collect();
    let deepest = clean.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((deepest + 14.05).abs() < 0.1, "{deepest}");
    assert_eq!(deepest, clean[0]);
}

#[test]
fn spectrum_rejects_empty_range() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "spectrum.json",
        &format!(
            r#"{{ "schema_version": 1, {SQUEEZER}, "pump_mW": [100],
                 "frequency_Hz": {{ "start_Hz": 1e6, "stop_Hz": 2e6, "points": 0 }} }}"#
        ),
    );
    assert_eq!(code(&run_with(&config, "spectrum", &[])), 2);
}

fn synth_config(dir: &TempDir, scatter: f64, pump_jitter: f64, seed: u64) -> PathBuf {
    write(
        dir,
        "synth.json",
        &format!(
            r#"{{ "schema_version": 1, {SQUEEZER},
                 "trace": {{ "n_points": 50, "rbw": 300e3, "vbw": 300, "relative_scatter": {scatter}, "seed": {seed} }},
                 "mode": {{ "kind": "sweep", "pump_mW": [6, 40, 75, 110, 145, 180], "frequency_Hz": 5e6,
                            "pump_jitter_rel": {pump_jitter}, "repeats": 2 }} }}"#
        ),
    )
}

fn fit_config(dir: &TempDir, dataset: &str, extra: &str) -> PathBuf {
    write(
        dir,
        "fit.json",
        &format!(
            r#"{{ "schema_version": 1, "dataset": "{dataset}",
                 "cavity": {{ "coupler_transmissivity": 0.10, "round_trip_loss": 0.001, "round_trip_length_m": 0.0798 }}
                 {extra} }}"#
        ),
    )
}

fn param(report: &Value, name: &str) -> (f64, f64) {
    let p = &report["parameters"][name];
    (p["value"].as_f64().unwrap(), p["std_error"].as_f64().unwrap())
}

#[test]
fn noiseless_synth_then_fit_recovers_truth() {
    let dir = TempDir::new().unwrap();
    let config = synth_config(&dir, 0.0, 0.0, 1);
    let data = dir.path().join("clean.csv");
    let out = run_with(&config, "synth", &["--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = run_with(&fit_config(&dir, "clean.csv", ""), "fit", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["fit"]["converged"], Value::Bool(true));
    for (name, truth) in [("efficiency", 0.965), ("threshold_mW", 221.0), ("phase_jitter_deg", 0.66)] {
        let (value, _) = param(&report, name);
        assert!(((value - truth) / truth).abs() < 1e-6, "{name}: {value}");
    }
}

#[test]
fn bundled_noisy_sweep_fits_within_errors() {
    let out = sqz(&["fit", "--config", &bundled("fit_sweep.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for (name, truth) in [("efficiency", 0.965), ("threshold_mW", 221.0), ("phase_jitter_deg", 0.66)] {
        let (value, err) = param(&report, name);
        assert!((value - truth).abs() <= 3.0 * err, "{name}: {value} +/- {err}");
    }
    let (_, eta_err) = param(&report, "efficiency");
    assert!(eta_err > 0.002 / 3.0 && eta_err < 0.002 * 3.0);
    assert_eq!(report["covariance"]["order"][1], "threshold_mW");
    assert_eq!(report["inputs"]["dataset"]["points"].as_array().unwrap().len(), 72);
    assert_eq!(report["tool"]["name"], "sqz");
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);

    let again = sqz(&["fit", "--config", &bundled("fit_sweep.json")]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn fit_writes_curve_over_the_pump_range() {
    let dir = TempDir::new().unwrap();
    let config = synth_config(&dir, 0.0715, 0.03, 9);
    let out = run_with(&config, "synth", &["--out", dir.path().join("noisy.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let config = fit_config(&dir, "noisy.csv", r#", "curve_points": 25, "curve_out": "curve.csv""#);
    let out = run_with(&config, "fit", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let rows = csv_rows(&curve);
    assert_eq!(rows.len(), 25);
    let pumps: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let measured: Vec<f64> = report["inputs"]["dataset"]["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["pump_mW"].as_f64().unwrap())
        .collect();
    let lo = measured.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = measured.iter().copied().fold(0.0, f64::max);
    assert!((pumps[0] - lo).abs() < 1e-9 && (pumps[24] - hi).abs() < 1e-9);

    let csv_out = run_with(&config, "fit", &["--format", "csv"]);
    assert_eq!(stdout(&csv_out), curve);
}

#[test]
fn fit_input_errors() {
    let dir = TempDir::new().unwrap();
    write(
        &dir,
        "short.csv",
        "pump_mW,sigma_pump_mW,frequency_Hz,quadrature,value_dB\n180,5.4,5e6,sqz,-12\n",
    );
    let out = run_with(&fit_config(&dir, "short.csv", ""), "fit", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sigma_dB"), "{}", stderr(&out));

    write(
        &dir,
        "broken.csv",
        "# header comment\npump_mW,sigma_pump_mW,frequency_Hz,quadrature,value_dB,sigma_dB\n180,5.4,5e6,sqz,-12,0.3\n100,3,5e6,sqz,oops,0.3\n",
    );
    let out = run_with(&fit_config(&dir, "broken.csv", ""), "fit", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let out = run_with(&fit_config(&dir, "missing.csv", ""), "fit", &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn non_convergence_is_reported_not_fatal() {
    let dir = TempDir::new().unwrap();
    let config = synth_config(&dir, 0.0715, 0.03, 4);
    run_with(&config, "synth", &["--out", dir.path().join("d.csv").to_str().unwrap()]);
    let out = run_with(&fit_config(&dir, "d.csv", r#", "max_iterations": 1"#), "fit", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["fit"]["converged"], Value::Bool(false));
}

fn trace(dir: &TempDir, name: &str, levels: &[f64]) {
    let mut text = String::from("frequency_Hz,power_dB\n");
    for (i, l) in levels.iter().enumerate() {
        text.push_str(&format!("{},{l}\n", 1500 + 1000 * i));
    }
    write(dir, name, &text);
}

fn correct_config(dir: &TempDir, vacuum: &str, dark: Option<&str>) -> PathBuf {
    let dark = dark.map(|d| format!(r#", "dark": {d}"#)).unwrap_or_default();
    write(
        dir,
        "correct.json",
        &format!(r#"{{ "schema_version": 1, "measured": "meas.csv", "vacuum": {vacuum} {dark} }}"#),
    )
}

fn corrected_values(out: &Output) -> Vec<f64> {
    csv_rows(&stdout(out)).iter().map(|r| r[1].parse().unwrap()).collect()
}

#[test]
fn correct_subtracts_dark_and_normalises() {
    let dir = TempDir::new().unwrap();
    trace(&dir, "meas.csv", &[-12.3, -12.3]);
    let out = run_with(&correct_config(&dir, r#"{ "level_dB": 0 }"#, Some(r#"{ "level_dB": -26 }"#)), "correct", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for v in corrected_values(&out) {
        assert!((v + 12.48).abs() < 0.02, "{v}");
    }

    trace(&dir, "meas.csv", &[-60.0, -65.0]);
    let out = run_with(&correct_config(&dir, r#"{ "level_dB": -50 }"#, None), "correct", &[]);
    let values = corrected_values(&out);
    assert!((values[0] + 10.0).abs() < 1e-12 && (values[1] + 15.0).abs() < 1e-12);
    assert!(stdout(&out).contains("frequency_Hz,power_dB"));
}

#[test]
fn correct_error_paths() {
    let dir = TempDir::new().unwrap();
    trace(&dir, "meas.csv", &[-12.0, -12.0, -12.0]);
    trace(&dir, "vac.csv", &[0.0, -30.0, 0.0]);
    let out = run_with(&correct_config(&dir, r#"{ "path": "vac.csv" }"#, Some(r#"{ "level_dB": -26 }"#)), "correct", &[]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("sample 2"), "{}", stderr(&out));

    trace(&dir, "vac.csv", &[0.0, 0.0]);
    let out = run_with(&correct_config(&dir, r#"{ "path": "vac.csv" }"#, None), "correct", &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bundled_low_frequency_traces_normalise() {
    let out = sqz(&["correct", "--config", &bundled("correct_low_frequency.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 120);
    let first: f64 = rows[0][0].parse().unwrap();
    let last: f64 = rows[119][0].parse().unwrap();
    assert_eq!((first, last), (1500.0, 80000.0));
    let deepest = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    assert!(deepest < -9.0 && deepest > -11.0, "{deepest}");
}

#[test]
fn cavity_reports() {
    let out = sqz(&["cavity", "--config", &bundled("opa_cavity.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r["stable"], Value::Bool(true));
    assert!((r["mode"]["waist_radius_um"].as_f64().unwrap() / 40.3 - 1.0).abs() < 0.05);
    assert!((r["fwhm_MHz"].as_f64().unwrap() / 63.6 - 1.0).abs() < 0.05);
    assert!((r["optical_round_trip_length_mm"].as_f64().unwrap() - 79.8).abs() < 0.1);

    let out = sqz(&["cavity", "--config", &bundled("shg_cavity.json")]);
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((r["mode"]["waist_radius_um"].as_f64().unwrap() / 59.4 - 1.0).abs() < 0.05);
    assert!((r["fwhm_MHz"].as_f64().unwrap() / 43.3 - 1.0).abs() < 0.05);

    let out = sqz(&["cavity", "--config", &bundled("planar_cavity.json")]);
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r["stable"], Value::Bool(false));
    assert_eq!(r["stability_parameter"].as_f64().unwrap(), 1.0);
    assert!(r["mode"].is_null());
    assert!(r["diagnostic"].as_str().unwrap().contains("stability"));
}

#[test]
fn cavity_layout_errors_are_validation() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "bad.json",
        r#"{ "schema_version": 1, "wavelength_m": 1.55e-6,
             "elements": [ { "type": "gap", "length_m": 0.01 } ] }"#,
    );
    assert_eq!(code(&run_with(&config, "cavity", &[])), 2);
}

#[test]
fn synth_is_reproducible_and_echoes_seed() {
    let dir = TempDir::new().unwrap();
    let config = synth_config(&dir, 0.0715, 0.03, 42);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_with(&config, "synth", &["--out", a.to_str().unwrap()]);
    run_with(&config, "synth", &["--out", b.to_str().unwrap()]);
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert!(String::from_utf8(a.clone()).unwrap().contains("# seed: 42\n"));

    let out = run_with(&config, "synth", &["--seed", "43"]);
    assert!(stdout(&out).contains("# seed: 43\n"));
    assert_ne!(out.stdout, a);

    for bundled_config in ["synth_sweep.json", "synth_zero_span.json", "synth_spectrum.json"] {
        let first = sqz(&["synth", "--config", &bundled(bundled_config)]);
        let second = sqz(&["synth", "--config", &bundled(bundled_config)]);
        assert_eq!(code(&first), 0, "{}", stderr(&first));
        assert_eq!(first.stdout, second.stdout, "{bundled_config}");
    }
}

#[test]
fn bundled_sweep_dataset_is_current() {
    let out = sqz(&["synth", "--config", &bundled("synth_sweep.json")]);
    let checked_in = std::fs::read(bundled("data/sweep_seed42.csv")).unwrap();
    assert_eq!(out.stdout, checked_in);
}

#[test]
fn scatter_free_synth_matches_model() {
    let dir = TempDir::new().unwrap();
    let config = synth_config(&dir, 0.0, 0.0, 5);
    let out = run_with(&config, "synth", &[]);
    let rows = csv_rows(&stdout(&out));
    let row = rows.iter().find(|r| r[0] == "180" && r[3] == "sqz").unwrap();
    let model = run_with(&model_config(&dir, 180.0, 0.965), "model", &["--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&model)).unwrap();
    let expected = v["squeezed"]["dB"].as_f64().unwrap();
    assert!((row[4].parse::<f64>().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn synth_spec_errors_are_validation() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "synth.json",
        &format!(
            r#"{{ "schema_version": 1, {SQUEEZER},
                 "trace": {{ "n_points": 1, "rbw": 300e3, "vbw": 300, "seed": 1 }},
                 "mode": {{ "kind": "zero_span", "pump_mW": 100, "frequency_Hz": 5e6, "quadrature": "sqz" }} }}"#
        ),
    );
    let out = run_with(&config, "synth", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("n_points"));

    let config = synth_config(&dir, 0.1, 0.03, 1);
    let text = std::fs::read_to_string(&config).unwrap().replace("\"repeats\": 2", "\"repeats\": 0");
    std::fs::write(&config, text).unwrap();
    assert_eq!(code(&run_with(&config, "synth", &[])), 2);
}
