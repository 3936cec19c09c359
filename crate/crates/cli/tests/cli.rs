// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spinforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPINFORGE_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&spinforge(&["--help"], d.path())), 0);
    assert_eq!(code(&spinforge(&["--version"], d.path())), 0);
    for sub in ["run", "fit", "spectrum", "calibrate-noise", "titrate", "sensitivity", "reproduce"] {
        let o = spinforge(&[sub, "--help"], d.path());
        assert_eq!(code(&o), 0, "{sub}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&spinforge(&[], d.path())), 2);
    assert_eq!(code(&spinforge(&["run", "--protocol", "nmr"], d.path())), 2);
    assert_eq!(code(&spinforge(&["run", "--protocol", "odmr", "--b0", "78mQ"], d.path())), 2);
    assert_eq!(code(&spinforge(&["reproduce", "fig9"], d.path())), 2);
}

#[test]
fn odmr_run_writes_csv_and_sidecar() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["run", "--protocol", "odmr", "--b0", "78mT", "--out", "d", "--seed", "3"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("d/odmr.csv")).unwrap();
    assert!(csv.starts_with("frequency_hz,contrast\n"), "{}", &csv[..40]);
    let meta = json(&d.path().join("d/odmr.json"));
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!(meta["tool_version"].is_string());
    assert_eq!(meta["config"]["b0"], 0.078);

    // The Lorentzian fit lands on the field-derived line.
    let o = spinforge(&["fit", "--model", "lorentzian", "--input", "d/odmr.csv", "--x", "frequency_hz", "--y", "contrast"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let f0 = r["estimates"][1].as_f64().unwrap();
    assert!((f0 / 2.19e9 - 1.0).abs() < 0.005, "{f0}");
}

#[test]
fn sidecar_reproduces_the_run() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["run", "--protocol", "t1", "--out", "a"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = spinforge(&["run", "--protocol", "t1", "--config", "a/t1.json", "--out", "b"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(d.path().join("a/t1.csv")).unwrap(), fs::read(d.path().join("b/t1.csv")).unwrap());
}

#[test]
fn seed_comes_from_flag_then_environment() {
    let d = tempfile::tempdir().unwrap();
    let run = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_spinforge"));
        c.args(["run", "--protocol", "odmr", "--out", out]).current_dir(d.path()).env_remove("SPINFORGE_SEED");
        if let Some(e) = env {
            c.env("SPINFORGE_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.status().unwrap().success());
        json(&d.path().join(out).join("odmr.json"))["seed"].as_u64().unwrap()
    };
    assert_eq!(run("e", Some("41"), None), 41);
    assert_eq!(run("f", Some("41"), Some("7")), 7);
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinforge"));
    let o = c
        .args(["run", "--protocol", "odmr"])
        .current_dir(d.path())
        .env("SPINFORGE_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn svg_does_not_change_numbers() {
    let d = tempfile::tempdir().unwrap();
    for (out, svg) in [("plain", false), ("plot", true)] {
        let mut args = vec!["run", "--protocol", "rabi", "--seed", "9", "--out", out];
        if svg {
            args.push("--svg");
        }
        assert_eq!(code(&spinforge(&args, d.path())), 0);
    }
    assert!(d.path().join("plot/rabi.svg").exists());
    assert!(!d.path().join("plain/rabi.svg").exists());
    for f in ["rabi.csv", "rabi.json"] {
        assert_eq!(fs::read(d.path().join("plain").join(f)).unwrap(), fs::read(d.path().join("plot").join(f)).unwrap());
    }
}

#[test]
fn cpmg_over_the_event_cap_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["run", "--protocol", "cpmg", "--n", "4096"], d.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("event cap"), "{}", stderr(&o));
    assert!(!d.path().join("cpmg.csv").exists());
}

#[test]
fn fit_rejects_empty_and_unknown_inputs() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("empty.csv"), "x,y\n").unwrap();
    let o = spinforge(&["fit", "--model", "stretchedexp", "--input", "empty.csv"], d.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    fs::write(d.path().join("line.csv"), "x,y\n1,2\n2,4\n3,6\n").unwrap();
    assert_eq!(code(&spinforge(&["fit", "--model", "spline", "--input", "line.csv"], d.path())), 2);
    assert_eq!(code(&spinforge(&["fit", "--model", "linear", "--input", "missing.csv"], d.path())), 2);
    let o = spinforge(&["fit", "--model", "linear", "--input", "line.csv", "--out", "fit.json"], d.path());
    assert_eq!(code(&o), 0);
    assert!((json(&d.path().join("fit.json"))["estimates"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn table_power_law_fit_matches_the_library() {
    let d = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/cpmg_summary.csv");
    let o = spinforge(
        &["fit", "--model", "powerlaw", "--input", fixture.to_str().unwrap(), "--x", "n", "--y", "t2_s", "--sigma", "t2_sd_s"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let s = r["estimates"][1].as_f64().unwrap();
    assert!((s - 0.79).abs() <= 0.01, "s = {s}");
    assert!(r["weighted"].as_bool().unwrap());
}

#[test]
fn casr_trace_beats_at_one_kilohertz() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(
        &["run", "--protocol", "casr", "--nu-rf", "15.626MHz", "--nu-base", "15.625MHz", "--duration", "2s", "--seed", "1"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = spinforge(&["spectrum", "--input", "casr.csv", "--svg-max", "2kHz"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let (f, w) = (r["peak_hz"].as_f64().unwrap(), r["fwhm_hz"].as_f64().unwrap());
    assert!((f - 1000.0).abs() <= 0.5, "{f}");
    assert!(w <= 1.2, "{w}");
    assert!(d.path().join("spectrum.svg").exists());

    let o = spinforge(&["run", "--protocol", "casr", "--duration", "10us"], d.path());
    assert_eq!(code(&o), 2, "a record shorter than a few readouts is a configuration error");
}

#[test]
fn calibrate_noise_reports_unreachable_exponent() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["calibrate-noise", "--t2", "45ns", "--exponent", "0.79", "--out", "noise.json"], d.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("outside the band"), "{}", stderr(&o));
    let r = json(&d.path().join("noise.json"));
    assert_eq!(r["feasible"], false);

    let o = spinforge(&["calibrate-noise", "--t2", "45ns", "--exponent", "0.64", "--out", "ok.json"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = spinforge(&["run", "--protocol", "echo", "--noise", "ok.json", "--seed", "2"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.path().join("echo.csv").exists());
}

#[test]
fn titrate_writes_summary_and_fit() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["titrate", "--seed", "4", "--svg"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("titration.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    let r = json(&d.path().join("titration.json"));
    assert_eq!(r["seed"], 4);
    assert!(d.path().join("titration.svg").exists());
    assert_eq!(code(&spinforge(&["titrate", "--from", "1mM", "--to", "1uM"], d.path())), 2);
}

#[test]
fn sensitivity_reports_eta() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["sensitivity", "--seed", "5", "--duration", "0.5s"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&d.path().join("sensitivity.json"));
    assert!(r["eta_t_per_sqrt_hz"].as_f64().unwrap() > 0.0);
    let o = spinforge(&["sensitivity", "--b-rf", "1mT,2mT,4mT", "--duration", "0.5s"], d.path());
    assert_eq!(code(&o), 3, "a nonlinear response is a runtime failure: {}", stderr(&o));
}

#[test]
fn reproduce_writes_a_checked_bundle() {
    let d = tempfile::tempdir().unwrap();
    let o = spinforge(&["reproduce", "fig2b", "--seed", "8", "--out", "bundle"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")).count() >= 4);
    let dir = d.path().join("bundle/fig2b");
    for f in ["odmr.csv", "odmr.json", "odmr.svg", "odmr_fit.json", "report.json", "report.md"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let r = json(&dir.join("report.json"));
    assert_eq!(r["seed"], 8);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"].is_boolean()));
}
