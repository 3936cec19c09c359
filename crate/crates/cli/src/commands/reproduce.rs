// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! One bundle per figure: data, plots and a checked report.
//!
//! Reports hold no timings or host details, so a re-run with the recorded
//! seed writes byte-identical files whatever the worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use spinforge_core::analysis::{fit, peak_fwhm, spectrum, FitData, FitOptions, FitResult, ModelId, Spectrum, Window};
use spinforge_core::engine::{field_to_frequency, t2_analytic, DecouplingSequence, DriveModel};
use spinforge_core::protocols::{
    fit_cpmg_family, fit_titration, linspace, logspace, run_casr, run_cpmg, run_odmr, run_rabi,
    run_spinlock, run_t1, run_titration, CasrConfig, CpmgConfig, OdmrConfig, RabiConfig, SpinlockConfig, SweepResult,
    T1Config, TitrationConfig,
};
use spinforge_core::rng::derive_seed;

use super::run::write_outputs;
use super::titrate;
use crate::fixtures::{cpmg_table, HILL_CURVE, PUBLISHED_HILL, PUBLISHED_POWER_LAW};
use crate::io::{columns_csv, json_text, parse_csv, resolve_seed, write_atomic};
use crate::svg::{Plot, Series};
use crate::{CliError, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// ODMR line and its Lorentzian fit.
    Fig2b,
    /// Pair-model Rabi beating, its spectrum and the √P scaling.
    Fig2de,
    /// T1 and spin-lock relaxation fits.
    Fig3a,
    /// CPMG family and the T2(N) power law.
    Fig3b,
    /// CASR trace and its 1 kHz beat.
    Fig4cd,
    /// Ion titration and its Hill-Langmuir fit.
    Fig4g,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig2b,
        Figure::Fig2de,
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::Fig4cd,
        Figure::Fig4g,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Figure::Fig2b => "fig2b",
            Figure::Fig2de => "fig2de",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4cd => "fig4cd",
            Figure::Fig4g => "fig4g",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    /// Figure to rebuild.
    #[arg(value_enum)]
    pub figure: Figure,
    #[command(flatten)]
    pub common: Common,
}

/// One extracted quantity against its accepted window `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    fn window(name: &str, value: f64, target: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            lo,
            hi,
            pass: value.is_finite() && value >= lo && value <= hi,
        }
    }

    /// `|value/target − 1| ≤ rel`.
    fn rel(name: &str, value: f64, target: f64, rel: f64) -> Self {
        let (a, b) = (target * (1.0 - rel), target * (1.0 + rel));
        Self::window(name, value, target, a.min(b), a.max(b))
    }

    /// `|value − target| ≤ abs`.
    fn abs(name: &str, value: f64, target: f64, abs: f64) -> Self {
        Self::window(name, value, target, target - abs, target + abs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub figure: String,
    pub seed: u64,
    pub tool_version: String,
    pub checks: Vec<Check>,
    pub config: serde_json::Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn markdown(&self) -> String {
        let mut s = format!(
            "# {}\n\nseed {}, spinforge {}\n\n| check | value | target | window | result |\n|---|---|---|---|---|\n",
            self.figure, self.seed, self.tool_version
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "| {} | {:.6e} | {:.6e} | [{:.6e}, {:.6e}] | {} |",
                c.name,
                c.value,
                c.target,
                c.lo,
                c.hi,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

struct Bundle<'a> {
    dir: &'a Path,
    checks: Vec<Check>,
    config: serde_json::Map<String, serde_json::Value>,
}

impl Bundle<'_> {
    fn put(&self, name: &str, text: &str) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), text.as_bytes())
    }

    fn sweep(&mut self, name: &str, sweep: &SweepResult, config: impl Serialize, y: &str) -> Result<(), CliError> {
        let v = serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_outputs(self.dir, name, sweep, &v, true, Some(y))?;
        self.config.insert(name.into(), v);
        Ok(())
    }

    fn fit(&self, name: &str, r: &FitResult) -> Result<(), CliError> {
        self.put(&format!("{name}.json"), &json_text(r)?)
    }
}

fn fit_sweep(s: &SweepResult, model: ModelId, opts: &FitOptions) -> Result<FitResult, CliError> {
    Ok(fit(model, &FitData::new(s.axis_values.clone(), s.contrast_values.clone()), opts)?)
}

fn par(r: &FitResult, name: &str) -> f64 {
    r.get(name).unwrap_or(f64::NAN)
}

fn spectrum_plot(title: &str, spec: &Spectrum, fmax: f64, marks: &[(f64, String)]) -> Plot {
    let keep = spec.frequencies.iter().take_while(|f| **f <= fmax).count();
    let mut p = Plot::new(title, "frequency (Hz)", "|FFT|").with(Series::line(
        "spectrum",
        spec.frequencies[..keep].to_vec(),
        spec.magnitude[..keep].to_vec(),
    ));
    for (f, l) in marks {
        p = p.mark(*f, l.clone());
    }
    p
}

fn spectrum_csv(spec: &Spectrum, fmax: f64) -> String {
    let keep = spec.frequencies.iter().take_while(|f| **f <= fmax).count();
    columns_csv(&["frequency_hz", "magnitude"], &[&spec.frequencies[..keep], &spec.magnitude[..keep]])
}

fn mean_removed(y: &[f64]) -> Vec<f64> {
    let m = y.iter().sum::<f64>() / y.len().max(1) as f64;
    y.iter().map(|v| v - m).collect()
}

fn fig2b(b: &mut Bundle, seed: u64) -> Result<(), CliError> {
    let cfg = OdmrConfig { seed, ..OdmrConfig::default() };
    let center = cfg.center.map_or_else(|| field_to_frequency(cfg.b0), Ok)?;
    let sweep = run_odmr(&cfg)?;
    let r = fit_sweep(&sweep, ModelId::Lorentzian, &FitOptions::default())?;
    b.sweep("odmr", &sweep, &cfg, "ODMR contrast")?;
    b.fit("odmr_fit", &r)?;
    b.checks.push(Check::rel("odmr_amplitude", par(&r, "A"), cfg.amplitude, 0.02));
    b.checks.push(Check::rel("odmr_center_hz", par(&r, "f0"), center, 0.02));
    b.checks.push(Check::rel("odmr_hwhm_hz", par(&r, "hwhm"), cfg.hwhm, 0.02));
    b.checks.push(Check::rel("field_to_frequency_78mT_hz", field_to_frequency(0.078)?, 2.19e9, 0.005));
    Ok(())
}

const RABI_RECORD: f64 = 1e-6;
const RABI_STEP: f64 = 1e-9;
const RABI_PAD: usize = 8;

fn rabi_spectrum(cfg: &RabiConfig) -> Result<(SweepResult, Spectrum), CliError> {
    let sweep = run_rabi(cfg)?;
    let spec = spectrum(&mean_removed(&sweep.contrast_values), RABI_STEP, Window::Hann, RABI_PAD)?;
    Ok((sweep, spec))
}

fn fig2de(b: &mut Bundle, seed: u64) -> Result<(), CliError> {
    let n = (RABI_RECORD / RABI_STEP).round() as usize + 1;
    let cfg = RabiConfig {
        durations: linspace(0.0, RABI_RECORD, n),
        model: DriveModel::Pair,
        seed,
        ..RabiConfig::default()
    };
    let omega = cfg.rabi_slope * cfg.power.sqrt();
    let (sweep, spec) = rabi_spectrum(&cfg)?;
    let win = 0.25 * omega;
    let (f1, a1) = spec.peak_in(omega - win, omega + win).unwrap_or((f64::NAN, f64::NAN));
    let (f2, a2) = spec.peak_in(2.0 * omega - win, 2.0 * omega + win).unwrap_or((f64::NAN, f64::NAN));
    b.sweep("rabi", &sweep, &cfg, "Rabi contrast")?;
    b.put("rabi_spectrum.csv", &spectrum_csv(&spec, 3.0 * omega))?;
    let ratio = a1 / a2;
    let marks = [(f1, format!("Ω {:.2} MHz", f1 / 1e6)), (f2, format!("2Ω, ratio {ratio:.3}"))];
    b.put("rabi_spectrum.svg", &spectrum_plot("pair Rabi spectrum", &spec, 3.0 * omega, &marks).render())?;
    b.checks.push(Check::rel("rabi_peak_omega_hz", f1, omega, 0.01));
    b.checks.push(Check::rel("rabi_peak_2omega_hz", f2, 2.0 * omega, 0.01));
    b.checks.push(Check::rel("rabi_peak_ratio", ratio, 4.0, 0.05));

    let powers = [2.0, 8.0, 18.0, 32.0];
    let mut freqs = Vec::new();
    for (i, &p) in powers.iter().enumerate() {
        let c = RabiConfig {
            power: p,
            seed: derive_seed(seed, i as u64 + 1),
            ..cfg.clone()
        };
        let o = c.rabi_slope * p.sqrt();
        let (_, s) = rabi_spectrum(&c)?;
        freqs.push(s.peak_in(0.75 * o, 1.25 * o).map_or(f64::NAN, |x| x.0));
    }
    let roots: Vec<f64> = powers.iter().map(|p: &f64| p.sqrt()).collect();
    let slope = fit(
        ModelId::LinearThroughOrigin,
        &FitData::new(roots.clone(), freqs.clone()),
        &FitOptions::default(),
    )?;
    b.put("rabi_power.csv", &columns_csv(&["sqrt_power_sqrt_w", "rabi_hz"], &[&roots, &freqs]))?;
    b.fit("rabi_power_fit", &slope)?;
    let line: Vec<f64> = roots.iter().map(|r| slope.predict(*r)).collect();
    let plot = Plot::new("Rabi frequency against √P", "√P (√W)", "Ω (Hz)")
        .with(Series::markers("FFT peak", roots.clone(), freqs))
        .with(Series::line("fit", roots, line));
    b.put("rabi_power.svg", &plot.render())?;
    b.checks.push(Check::rel("rabi_slope_hz_per_sqrt_w", par(&slope, "a"), cfg.rabi_slope, 0.01));
    Ok(())
}

fn fig3a(b: &mut Bundle, seed: u64) -> Result<(), CliError> {
    let t1 = T1Config { seed, ..T1Config::default() };
    let sweep = run_t1(&t1)?;
    let r = fit_sweep(&sweep, ModelId::StretchedExp, &FitOptions::default())?;
    b.sweep("t1", &sweep, &t1, "T1 contrast")?;
    b.fit("t1_fit", &r)?;
    b.checks.push(Check::rel("t1_s", par(&r, "T"), t1.envelope.timescale, 0.04));
    b.checks.push(Check::rel("t1_stretch", par(&r, "c"), t1.envelope.stretch, 0.05));

    let sl = SpinlockConfig {
        seed: derive_seed(seed, 1),
        ..SpinlockConfig::default()
    };
    let sweep = run_spinlock(&sl)?;
    let r = fit_sweep(&sweep, ModelId::StretchedExp, &FitOptions::default().fix("c", 1.0))?;
    b.sweep("spinlock", &sweep, &sl, "spin-lock contrast")?;
    b.fit("spinlock_fit", &r)?;
    let t1rho = par(&r, "T");
    let t2 = t2_analytic(DecouplingSequence::Hahn, &sl.noise)?;
    let mut bounded = Check::window("t1rho_between_t2_and_2t1_s", t1rho, t2, t2, 2.0 * sl.t1);
    bounded.pass = bounded.pass && t1rho > t2;
    b.checks.push(bounded);
    b.checks.push(Check::window("t1rho_s", t1rho, 16.57e-6, 5e-6, 26e-6));
    Ok(())
}

const CPMG_COUNTS: [u32; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

fn fig3b(b: &mut Bundle, seed: u64) -> Result<(), CliError> {
    let base = CpmgConfig { seed, ..CpmgConfig::default() };
    let mut curves = Vec::new();
    for (i, &n) in CPMG_COUNTS.iter().enumerate() {
        let c = CpmgConfig {
            pulses: n,
            seed: derive_seed(seed, i as u64),
            ..base.clone()
        };
        let s = run_cpmg(&c)?;
        let v = serde_json::to_value(&c).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_outputs(b.dir, &format!("cpmg_n{n}"), &s, &v, false, None)?;
        curves.push((n, s));
    }
    b.config.insert("cpmg".into(), serde_json::to_value(&base).map_err(|e| CliError::Runtime(e.to_string()))?);
    let family = fit_cpmg_family(&curves)?;
    b.put("cpmg_family_fit.json", &json_text(&family)?)?;

    let mut plot = Plot::new("CPMG family", "total evolution time (s)", "normalised contrast").log_x();
    for (n, s) in &curves {
        let y: Vec<f64> = s.contrast_values.iter().map(|v| v / family.amplitude).collect();
        plot = plot.with(Series::line(&format!("N = {n}"), s.axis_values.clone(), y));
    }
    b.put("cpmg_family.svg", &plot.render())?;

    let table = cpmg_table();
    let ns: Vec<f64> = family.rows.iter().map(|r| r.pulses as f64).collect();
    let sim: Vec<f64> = family.rows.iter().map(|r| r.t2).collect();
    let published: Vec<f64> = table.iter().map(|r| r.t2).collect();
    let law: Vec<f64> = ns.iter().map(|n| family.power_law.predict(*n)).collect();
    b.put("t2_table.csv", &columns_csv(&["n", "t2_sim_s", "t2_published_s"], &[&ns, &sim, &published]))?;
    let inset = Plot::new("T2 against pulse count", "N", "T2 (s)")
        .log_x()
        .log_y()
        .with(Series::markers("simulated", ns.clone(), sim))
        .with(Series::markers("published", ns.clone(), published))
        .with(Series::line("power law", ns, law));
    b.put("t2_power_law.svg", &inset.render())?;

    b.checks.push(Check::abs("cpmg_exponent_s", par(&family.power_law, "s"), 2.0 / 3.0, 0.02));
    for (row, pubd) in family.rows.iter().zip(&table) {
        b.checks.push(Check::rel(&format!("t2_n{}_s", row.pulses), row.t2, pubd.t2, 0.30));
    }

    let n: Vec<f64> = table.iter().map(|r| r.pulses as f64).collect();
    let t2: Vec<f64> = table.iter().map(|r| r.t2).collect();
    let sd: Vec<f64> = table.iter().map(|r| r.t2_sd).collect();
    let fixture = fit(ModelId::PowerLaw, &FitData::new(n, t2).with_sigma(sd), &FitOptions::default())?;
    b.fit("table_power_law_fit", &fixture)?;
    let (a, a_sd, s, s_sd) = PUBLISHED_POWER_LAW;
    b.checks.push(Check::abs("table_power_law_a_s", par(&fixture, "a"), a, a_sd));
    b.checks.push(Check::abs("table_power_law_s", par(&fixture, "s"), s, s_sd));
    Ok(())
}

const CASR_FMAX: f64 = 5e3;

fn casr_peak(cfg: &CasrConfig) -> Result<(spinforge_core::protocols::CasrRun, Spectrum, f64, f64), CliError> {
    let run = run_casr(cfg)?;
    let spec = spectrum(&run.detrended(), run.dt(), Window::Rect, 1)?;
    let (f, w) = peak_fwhm(&spec)?;
    Ok((run, spec, f, w))
}

fn fig4cd(b: &mut Bundle, seed: u64) -> Result<(), CliError> {
    let cfg = CasrConfig { seed, ..CasrConfig::default() };
    let (run, spec, f, w) = casr_peak(&cfg)?;
    // The full stream is rebuilt from the recorded config; the bundle keeps
    // the first 20 ms of it.
    let head = ((0.02 / run.period).ceil() as usize).min(run.sweep.len());
    let mut trace = run.sweep.clone();
    trace.axis_values.truncate(head);
    trace.contrast_values.truncate(head);
    b.sweep("casr_trace", &trace, &cfg, "normalised counts")?;
    b.put("casr_spectrum.csv", &spectrum_csv(&spec, CASR_FMAX))?;
    let beat = (cfg.nu_rf - cfg.nu_base).abs();
    let marks = [(f, format!("{f:.3} Hz, FWHM {w:.3} Hz"))];
    b.put("casr_spectrum.svg", &spectrum_plot("CASR spectrum", &spec, 2.0 * beat, &marks).render())?;
    b.checks.push(Check::abs("casr_peak_hz", f, beat, spec.bin_width()));
    b.checks.push(Check::window("casr_fwhm_hz", w, 1.0, 0.0, 1.2));

    let long = CasrConfig {
        duration: 2.0 * cfg.duration,
        seed: derive_seed(seed, 1),
        ..cfg.clone()
    };
    let (_, _, _, w2) = casr_peak(&long)?;
    b.config.insert("casr_long".into(), serde_json::to_value(&long).map_err(|e| CliError::Runtime(e.to_string()))?);
    b.checks.push(Check::rel("casr_fwhm_ratio", w / w2, 2.0, 0.10));
    Ok(())
}

fn fig4g(b: &mut Bundle, seed: u64) -> Result<(), CliError> {
    let cfg = TitrationConfig { seed, ..TitrationConfig::default() };
    let steps = run_titration(&cfg)?;
    let fitted = fit_titration(&steps)?;
    b.put("titration.csv", &titrate::summary_csv(&steps, &fitted))?;
    b.put("titration_fit.json", &json_text(&fitted)?)?;
    b.put("titration.svg", &titrate::plot(&steps, &fitted).render())?;
    b.config.insert("titration".into(), serde_json::to_value(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?);
    let (kd, a) = (PUBLISHED_HILL[1].0, PUBLISHED_HILL[3].0);
    b.checks.push(Check::rel("titration_kd_m", par(&fitted.hill, "Kd"), kd, 0.20));
    b.checks.push(Check::rel("titration_baseline_a", par(&fitted.hill, "A"), a, 0.30));

    let t = parse_csv(HILL_CURVE, "hill_fixture.csv")?;
    let data = FitData::new(t.columns[0].clone(), t.columns[1].clone());
    let start = PUBLISHED_HILL.iter().map(|p| p.0 * 1.1).collect();
    let r = fit(ModelId::HillLangmuir, &data, &FitOptions::default().start(start))?;
    b.fit("fixture_hill_fit", &r)?;
    for (name, (v, sd)) in ModelId::HillLangmuir.param_names().iter().zip(PUBLISHED_HILL) {
        b.checks.push(Check::abs(&format!("fixture_hill_{name}"), par(&r, name), v, sd));
    }
    let grid = logspace(1e-7, 1.0, 200);
    let curve: Vec<f64> = grid.iter().map(|c| r.predict(*c)).collect();
    let plot = Plot::new("published titration curve", "concentration (M)", "ODMR contrast")
        .log_x()
        .with(Series::markers("fixture", t.columns[0].clone(), t.columns[1].clone()))
        .with(Series::line("Hill fit", grid, curve));
    b.put("fixture_hill.svg", &plot.render())?;
    Ok(())
}

/// Builds the bundle for `figure` in `dir` and returns its report.
pub fn build(figure: Figure, seed: u64, dir: &Path) -> Result<Report, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut b = Bundle {
        dir,
        checks: Vec::new(),
        config: serde_json::Map::new(),
    };
    match figure {
        Figure::Fig2b => fig2b(&mut b, seed)?,
        Figure::Fig2de => fig2de(&mut b, seed)?,
        Figure::Fig3a => fig3a(&mut b, seed)?,
        Figure::Fig3b => fig3b(&mut b, seed)?,
        Figure::Fig4cd => fig4cd(&mut b, seed)?,
        Figure::Fig4g => fig4g(&mut b, seed)?,
    }
    let report = Report {
        figure: figure.id().into(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        checks: b.checks,
        config: serde_json::Value::Object(b.config),
    };
    write_atomic(&dir.join("report.json"), json_text(&report)?.as_bytes())?;
    write_atomic(&dir.join("report.md"), report.markdown().as_bytes())?;
    Ok(report)
}

pub fn bundle_dir(out: &Path, figure: Figure) -> PathBuf {
    out.join(figure.id())
}

/// Writes the bundle and prints one PASS/FAIL line per check. Failed checks
/// are findings, not errors, so the exit status stays 0.
pub fn execute(a: &ReproduceArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.common.seed, None)?;
    let dir = bundle_dir(&a.common.out, a.figure);
    let report = build(a.figure, seed, &dir)?;
    for c in &report.checks {
        println!(
            "{} {} {}: {:.6e} in [{:.6e}, {:.6e}]",
            if c.pass { "PASS" } else { "FAIL" },
            report.figure,
            c.name,
            c.value,
            c.lo,
            c.hi
        );
    }
    println!("bundle written to {} (seed {seed})", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_windows() {
        assert!(Check::rel("x", 1.03, 1.0, 0.04).pass);
        assert!(!Check::rel("x", 1.05, 1.0, 0.04).pass);
        assert!(Check::rel("neg", -1.0, -1.0, 0.1).pass);
        assert!(!Check::abs("nan", f64::NAN, 0.0, 1.0).pass);
    }

    #[test]
    fn figure_ids_are_value_names() {
        for f in Figure::ALL {
            assert_eq!(f.to_possible_value().unwrap().get_name(), f.id());
        }
    }
}
