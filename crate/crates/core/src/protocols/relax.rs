// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_noise, logspace, require, EnsembleEnvelope, ProtocolError, SweepResult};
use crate::engine::{evolve, t1rho_rate, DensityMatrix, DriveParams, EvolveConfig, NoiseModel};
use crate::pulseq::{compile, corpus, parse_def, Bindings, CompileOptions, PulseCalibration};
use crate::readout::{emit_shot, referenced_contrast, ReadoutModel, ReferencingScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct T1Config {
    /// Delays between initialisation and readout, s.
    pub delays: Vec<f64>,
    /// Ensemble decay applied to the population difference.
    pub envelope: EnsembleEnvelope,
    pub readout: ReadoutModel,
    pub averages: u64,
    pub sweeps: u64,
    pub seed: u64,
}

impl Default for T1Config {
    fn default() -> Self {
        Self {
            delays: logspace(2e-6, 180e-6, 40),
            envelope: EnsembleEnvelope {
                timescale: 25.87e-6,
                stretch: 0.665,
            },
            readout: ReadoutModel::default(),
            averages: 10_000,
            sweeps: 50,
            seed: 0,
        }
    }
}

/// Pumped-state population right after the MW part of `name` (T bound).
fn initial_population(name: &str, delay: f64) -> Result<f64, ProtocolError> {
    let def = parse_def(corpus::T1, name)?;
    let b: Bindings = [("T".to_string(), delay)].into_iter().collect();
    let s = compile(&def, &b, &PulseCalibration::default(), CompileOptions::default())?;
    let drive = DriveParams::from_pi_duration(PulseCalibration::default().pi);
    let ev = evolve(&DensityMatrix::polarized(2)?, &s, &EvolveConfig::noise_free(drive))?;
    Ok(ev.readouts[0])
}

/// Longitudinal relaxation with a π-pulse reference.
///
/// The population difference from equilibrium decays as the ensemble
/// envelope `exp[−(T/T1)^c]`. Each point is the fractional brightness of the
/// π-referenced shot over the plain one, so it starts near ε and decays to 0.
pub fn run_t1(cfg: &T1Config) -> Result<SweepResult, ProtocolError> {
    require(!cfg.delays.is_empty(), || "delay list is empty".into())?;
    require(cfg.delays.iter().all(|t| *t > 0.0 && t.is_finite()), || "delays must be positive".into())?;
    require(cfg.averages >= 1 && cfg.sweeps >= 1, || "averages and sweeps must be at least 1".into())?;
    let env = EnsembleEnvelope::new(cfg.envelope.timescale, cfg.envelope.stretch)?;
    cfg.readout.validate()?;
    let shots = cfg.averages * cfg.sweeps;
    let contrast = cfg
        .delays
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let decay = env.at(t);
            let pm = 0.5 + (initial_population("t1", t)? - 0.5) * decay;
            let pr = 0.5 + (initial_population("t1_ref", t)? - 0.5) * decay;
            let m = emit_shot(pm, &cfg.readout, shots, cfg.seed, 2 * i as u64)?;
            let r = emit_shot(pr, &cfg.readout, shots, cfg.seed, 2 * i as u64 + 1)?;
            Ok(-referenced_contrast(m, r, ReferencingScheme::pi_pulse_difference())?)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let r = SweepResult::new("t1", ("delay", "s"), cfg.delays.clone(), contrast, cfg.averages, cfg.sweeps, cfg.seed)
        .meta("t1_s", env.timescale)
        .meta("stretch", env.stretch)
        .meta("scheme", "pi_pulse_ref/difference");
    r.validate()?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpinlockConfig {
    /// Lock durations, s. Empty picks a log grid spanning the expected decay.
    pub durations: Vec<f64>,
    /// Nutation frequency of the locking field, Hz.
    pub f_sl: f64,
    pub noise: NoiseModel,
    /// Lab-frame relaxation time, s.
    pub t1: f64,
    pub readout: ReadoutModel,
    pub averages: u64,
    pub sweeps: u64,
    pub seed: u64,
}

impl Default for SpinlockConfig {
    /// Lock at 30 % of the 50 MHz drive that makes 5 ns π/2 pulses.
    fn default() -> Self {
        Self {
            durations: Vec::new(),
            f_sl: 0.3 * 50e6,
            noise: default_noise(),
            t1: 25.87e-6,
            readout: ReadoutModel::default(),
            averages: 100_000,
            sweeps: 1,
            seed: 0,
        }
    }
}

/// Rotating-frame relaxation: the locked coherence decays at the bath
/// spectral density sampled at the lock frequency plus the T1 floor.
/// Shots ending in π/2 and 3π/2 are paired, so the contrast is
/// `ε·e^{−Γt}/(2 − ε)` in the noiseless limit.
pub fn run_spinlock(cfg: &SpinlockConfig) -> Result<SweepResult, ProtocolError> {
    require(cfg.f_sl > 0.0, || format!("spin-lock frequency must be positive, got {}", cfg.f_sl))?;
    require(cfg.t1 > 0.0, || "T1 must be positive".into())?;
    require(cfg.averages >= 1 && cfg.sweeps >= 1, || "averages and sweeps must be at least 1".into())?;
    cfg.readout.validate()?;
    let rate = t1rho_rate(&cfg.noise, cfg.f_sl, cfg.t1)?;
    let durations = if cfg.durations.is_empty() {
        logspace(0.02 / rate, 4.0 / rate, 50)
    } else {
        cfg.durations.clone()
    };
    require(durations.iter().all(|t| *t >= 0.0 && t.is_finite()), || "durations must be non-negative".into())?;
    let shots = cfg.averages * cfg.sweeps;
    let contrast = durations
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let w = (-rate * t).exp();
            let s = emit_shot(0.5 * (1.0 - w), &cfg.readout, shots, cfg.seed, 2 * i as u64)?;
            let r = emit_shot(0.5 * (1.0 + w), &cfg.readout, shots, cfg.seed, 2 * i as u64 + 1)?;
            Ok(referenced_contrast(s, r, ReferencingScheme::alternation())?)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let r = SweepResult::new("spinlock", ("duration", "s"), durations, contrast, cfg.averages, cfg.sweeps, cfg.seed)
        .meta("f_sl_hz", cfg.f_sl)
        .meta("t1rho_s", 1.0 / rate)
        .meta("noise", cfg.noise.id())
        .meta("scheme", "final_pulse_alternation/difference");
    r.validate()?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{fit, FitData, FitOptions, ModelId};

    #[test]
    fn t1_starts_full_and_reaches_1_over_e() {
        let quiet = ReadoutModel {
            photons: 1e13,
            ..ReadoutModel::default()
        };
        let cfg = T1Config {
            delays: vec![1e-12, 25.87e-6],
            readout: quiet,
            ..T1Config::default()
        };
        let r = run_t1(&cfg).unwrap();
        let eps = quiet.contrast;
        let full = eps / (1.0 - eps * 0.0);
        assert!((r.contrast_values[0] / full - 1.0).abs() < 1e-3, "{:?}", r.contrast_values);
        let at_t1 = eps * (-1.0f64).exp() / (1.0 - eps * 0.5 * (1.0 - (-1.0f64).exp()));
        assert!((r.contrast_values[1] / at_t1 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn spinlock_rate_and_monotonicity() {
        let noise = NoiseModel::new(1e6, 1e-7).unwrap();
        let mut last = 0.0;
        for f in [1e5, 1e6, 1e7] {
            let cfg = SpinlockConfig {
                f_sl: f,
                noise,
                readout: ReadoutModel {
                    photons: 1e12,
                    ..ReadoutModel::default()
                },
                ..SpinlockConfig::default()
            };
            let r = run_spinlock(&cfg).unwrap();
            let fit = fit(
                ModelId::StretchedExp,
                &FitData::new(r.axis_values.clone(), r.contrast_values.clone()),
                &FitOptions::default(),
            )
            .unwrap();
            let t = fit.get("T").unwrap();
            let want = 1.0 / t1rho_rate(&noise, f, cfg.t1).unwrap();
            assert!((t / want - 1.0).abs() < 0.01, "{t} vs {want}");
            assert!(t > last);
            last = t;
        }
    }
}
