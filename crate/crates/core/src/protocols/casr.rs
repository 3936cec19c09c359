// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Coherently averaged synchronized readout.
//!
//! XY-2 subsequences are repeated back to back with a period locked to the
//! base frequency. An RF field detuned by Δν from that base reaches each
//! subsequence at a phase that advances by 2πΔν·P, so the readout stream
//! beats at Δν.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{default_noise, require, ProtocolError, SweepResult};
use crate::analysis::{estimate_sensitivity, spectrum, Sensitivity, SensitivityInput, Window};
use crate::engine::{coherence_analytic, DecouplingSequence, NoiseModel, GAMMA_E_HZ_PER_T};
use crate::pulseq::{compile, parse_def, Bindings, CompileOptions, EventKind, PulseCalibration, Schedule};
use crate::readout::{emit_series, ReadoutModel};
use crate::rng::derive_seed;

/// Largest distance of `P·ν_base` from an integer that still counts as locked.
const LOCK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CasrConfig {
    /// RF signal frequency, Hz.
    pub nu_rf: f64,
    /// Frequency the subsequence is tuned to, Hz.
    pub nu_base: f64,
    /// RF field amplitude, T.
    pub b_rf: f64,
    /// RF phase at t = 0, rad.
    pub phase0: f64,
    /// Half inter-pulse delay, s. Defaults to a quarter base period.
    pub tau: Option<f64>,
    /// Idle time closing each subsequence, s. Defaults to the shortest pad
    /// that makes the period a whole number of base periods.
    pub pad: Option<f64>,
    /// Total sampling time t_s, s.
    pub duration: f64,
    pub noise: NoiseModel,
    pub readout: ReadoutModel,
    /// Repetitions averaged into each readout point.
    pub averages: u64,
    pub seed: u64,
}

impl Default for CasrConfig {
    fn default() -> Self {
        Self {
            nu_rf: 15.626e6,
            nu_base: 15.625e6,
            b_rf: 10e-6,
            phase0: 0.0,
            tau: None,
            pad: None,
            duration: 2.0,
            noise: default_noise(),
            readout: ReadoutModel::default(),
            averages: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasrRun {
    /// Readout stream: counts normalised to the bright level, against time.
    pub sweep: SweepResult,
    /// Subsequence period P, s.
    pub period: f64,
    /// Coherence left after one subsequence's free evolution.
    pub coherence: f64,
}

impl CasrRun {
    /// Readout stream with its mean removed, ready for a spectrum.
    pub fn detrended(&self) -> Vec<f64> {
        let y = &self.sweep.contrast_values;
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        y.iter().map(|v| v - mean).collect()
    }

    /// Sample interval of the stream, s.
    pub fn dt(&self) -> f64 {
        self.period
    }
}

/// XY-2 subsequence with half delay `$tau`, centre gap `$gap` and pad `$pad`.
const SUBSEQUENCE: &str = "seq casr {
    laser 5us
    mw pi/2 x
    wait $tau
    mw pi x
    wait $gap
    mw pi y
    wait $tau
    mw pi/2 y
    read
    wait $pad
}";

fn compile_casr(tau: f64, pad: f64) -> Result<Schedule, ProtocolError> {
    let mut b: Bindings = [("tau".to_string(), tau), ("gap".to_string(), 2.0 * tau)].into_iter().collect();
    let def = if pad > 0.0 {
        b.insert("pad".into(), pad);
        parse_def(SUBSEQUENCE, "casr")?
    } else {
        parse_def(&SUBSEQUENCE.replace("\n    wait $pad", ""), "casr")?
    };
    Ok(compile(&def, &b, &PulseCalibration::default(), CompileOptions::default())?)
}

/// Compiles the subsequence and checks it is locked to `nu_base`.
fn locked_schedule(cfg: &CasrConfig) -> Result<Schedule, ProtocolError> {
    require(cfg.nu_base > 0.0 && cfg.nu_base.is_finite(), || "base frequency must be positive".into())?;
    require(cfg.nu_rf > 0.0 && cfg.nu_rf.is_finite(), || "RF frequency must be positive".into())?;
    let tau = cfg.tau.unwrap_or(0.25 / cfg.nu_base);
    require(tau > 0.0 && tau.is_finite(), || format!("τ must be positive, got {tau}"))?;
    let base_period = 1.0 / cfg.nu_base;
    let pad = match cfg.pad {
        Some(p) => {
            require(p >= 0.0 && p.is_finite(), || format!("pad must be non-negative, got {p}"))?;
            p
        }
        None => {
            let bare = compile_casr(tau, 0.0)?.total_duration;
            let cycles = (bare / base_period - LOCK_TOLERANCE).ceil();
            (cycles * base_period - bare).max(0.0)
        }
    };
    let s = compile_casr(tau, pad)?;
    let cycles = s.total_duration * cfg.nu_base;
    if (cycles - cycles.round()).abs() > LOCK_TOLERANCE {
        return Err(ProtocolError::TimingMismatch(format!(
            "subsequence period {:.6e} s is {cycles:.6} periods of {:.6e} Hz, not a whole number",
            s.total_duration, cfg.nu_base
        )));
    }
    Ok(s)
}

/// Free-evolution windows `(start, end, sign)` between the first and last
/// pulse; the sign of the toggling function flips at every π pulse.
fn toggling_windows(s: &Schedule) -> Vec<(f64, f64, f64)> {
    let first = s.events.iter().position(|e| e.kind == EventKind::Mw);
    let last = s.events.iter().rposition(|e| e.kind == EventKind::Mw);
    let (Some(a), Some(b)) = (first, last) else {
        return Vec::new();
    };
    let mut sign = 1.0;
    let mut out = Vec::new();
    for e in &s.events[a + 1..b] {
        match e.kind {
            EventKind::Mw if e.nominal_rad.is_some_and(|r| (r - PI).abs() < 1e-12) => sign = -sign,
            EventKind::Wait if e.duration > 0.0 => out.push((e.t_start, e.t_end(), sign)),
            _ => {}
        }
    }
    out
}

fn readout_count(cfg: &CasrConfig, period: f64) -> Result<usize, ProtocolError> {
    require(cfg.duration > 0.0 && cfg.duration.is_finite(), || "sampling time must be positive".into())?;
    let n = (cfg.duration / period + 1e-9).floor() as usize;
    require(n >= 8, || format!("sampling time {} s holds only {n} subsequences", cfg.duration))?;
    Ok(n)
}

/// Accumulated phase `φ_k = γe·B_RF ∫ y(t) sin(2πν_RF t + φ0) dt` of every
/// subsequence in the stream.
pub fn casr_phases(cfg: &CasrConfig) -> Result<Vec<f64>, ProtocolError> {
    let s = locked_schedule(cfg)?;
    let period = s.total_duration;
    let n = readout_count(cfg, period)?;
    let windows = toggling_windows(&s);
    let omega = 2.0 * PI * cfg.nu_rf;
    let gamma = 2.0 * PI * GAMMA_E_HZ_PER_T;
    let cycles_per_period = period * cfg.nu_rf;
    Ok((0..n)
        .map(|k| {
            // Start phase of subsequence k, reduced to one RF cycle.
            let start = 2.0 * PI * (k as f64 * cycles_per_period).fract() + cfg.phase0;
            let integral: f64 = windows
                .iter()
                .map(|&(a, b, sign)| sign * ((omega * a + start).cos() - (omega * b + start).cos()) / omega)
                .sum();
            gamma * cfg.b_rf * integral
        })
        .collect())
}

/// Runs the synchronized readout over the full sampling time.
///
/// Each point reads `p = ½(1 + W·sin φ_k)` with `W` the subsequence coherence
/// under the configured bath, averaged over `averages` repetitions.
pub fn run_casr(cfg: &CasrConfig) -> Result<CasrRun, ProtocolError> {
    require(cfg.b_rf >= 0.0 && cfg.b_rf.is_finite(), || "RF amplitude must be non-negative".into())?;
    require(cfg.averages >= 1, || "averages must be at least 1".into())?;
    cfg.readout.validate()?;
    let s = locked_schedule(cfg)?;
    let period = s.total_duration;
    let pulses = toggling_windows(&s).len().saturating_sub(1) as u32;
    let coherence = if pulses == 0 {
        1.0
    } else {
        coherence_analytic(DecouplingSequence::Cpmg(pulses), s.free_evolution(), &cfg.noise)?
    };
    let phases = casr_phases(cfg)?;
    let ps: Vec<f64> = phases.iter().map(|phi| 0.5 * (1.0 + coherence * phi.sin())).collect();
    let counts = emit_series(&ps, &cfg.readout, cfg.averages, cfg.seed, 0)?;
    let bright = cfg.readout.mean_counts(0.0);
    let y = counts.into_iter().map(|c| c / bright).collect();
    let x = (0..phases.len()).map(|k| k as f64 * period).collect();
    let sweep = SweepResult::new("casr", ("time", "s"), x, y, cfg.averages, 1, cfg.seed)
        .meta("nu_rf_hz", cfg.nu_rf)
        .meta("nu_base_hz", cfg.nu_base)
        .meta("b_rf_t", cfg.b_rf)
        .meta("period_s", period)
        .meta("coherence", coherence)
        .meta("noise", cfg.noise.id())
        .meta("values", "counts_over_bright");
    sweep.validate()?;
    Ok(CasrRun {
        sweep,
        period,
        coherence,
    })
}

/// Sensitivity from runs of `base` at each RF amplitude.
///
/// Run `i` uses seed `derive_seed(base.seed, i)`. Spectra are taken of the
/// mean-removed stream with a rectangular window; `noise_band` (Hz) must not
/// contain the beat at `|ν_RF − ν_base|`.
pub fn casr_sensitivity(
    base: &CasrConfig,
    amplitudes: &[f64],
    noise_band: (f64, f64),
) -> Result<Sensitivity, ProtocolError> {
    require(amplitudes.len() >= 3, || "need at least 3 RF amplitudes".into())?;
    let spectra = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let run = run_casr(&CasrConfig {
                b_rf: b,
                seed: derive_seed(base.seed, i as u64),
                ..base.clone()
            })?;
            Ok(spectrum(&run.detrended(), run.dt(), Window::Rect, 1)?)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let input = SensitivityInput {
        amplitudes: amplitudes.to_vec(),
        spectra,
        signal_frequency: (base.nu_rf - base.nu_base).abs(),
        noise_band,
        record_duration: base.duration,
        averages: base.averages as f64,
    };
    Ok(estimate_sensitivity(&input)?)
}
