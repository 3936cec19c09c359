// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_noise, linspace, require, ProtocolError, SweepResult};
use crate::analysis::{fit, FitData, FitOptions, FitResult, ModelId};
use crate::engine::{
    coherence_analytic, evolve, t2_analytic, DecouplingSequence, DensityMatrix, DriveParams, EvolveConfig,
    NoiseModel, PulseMode,
};
use crate::pulseq::{compile, corpus, cpmg_source, parse_def, Bindings, CompileOptions, EventKind, PulseCalibration, Schedule, SeqDef};
use crate::readout::{emit_shot, referenced_contrast, ReadoutModel, ReferencingScheme};
use crate::rng::derive_seed;

/// Events allowed per compiled CPMG schedule; CPMG-1024 needs about 2050.
pub const CPMG_EVENT_CAP: usize = 4096;

/// Pulse counts at or above this have their stretch fixed in the family fit.
const FIXED_STRETCH_FROM: u32 = 256;
const FIXED_STRETCH: f64 = 2.40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoherenceBackend {
    /// Filter-function decay with ideal π pulses.
    #[default]
    Analytic,
    /// Trajectory average through the compiled schedule.
    MonteCarlo { trajectories: usize, pulse_mode: PulseMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpmgConfig {
    /// Number of π pulses.
    pub pulses: u32,
    /// Half inter-pulse delays τ, s. Empty picks a grid around the expected T2.
    pub taus: Vec<f64>,
    pub noise: NoiseModel,
    pub backend: CoherenceBackend,
    pub readout: ReadoutModel,
    pub averages: u64,
    pub sweeps: u64,
    pub seed: u64,
    /// Largest allowed number of events per compiled schedule.
    pub event_cap: usize,
}

impl Default for CpmgConfig {
    fn default() -> Self {
        Self {
            pulses: 1,
            taus: Vec::new(),
            noise: default_noise(),
            backend: CoherenceBackend::Analytic,
            readout: ReadoutModel::default(),
            averages: 100_000,
            sweeps: 1,
            seed: 0,
            event_cap: CPMG_EVENT_CAP,
        }
    }
}


fn pi_pulses(s: &Schedule) -> u32 {
    s.events
        .iter()
        .filter(|e| e.kind == EventKind::Mw && e.nominal_rad.is_some_and(|a| (a - PI).abs() < 1e-12))
        .count() as u32
}

/// Runs an echo-type sequence and its 3π/2-ended twin over `taus`.
///
/// The contrast is the alternation difference `(s − r)/(s + r)`, which is
/// `ε·W/(2 − ε)` for coherence `W` in the noiseless limit. The x axis is the
/// total free evolution time of the compiled sequence.
pub fn run_echo_sequences(
    signal: &SeqDef,
    alternate: &SeqDef,
    cfg: &CpmgConfig,
    taus: &[f64],
) -> Result<SweepResult, ProtocolError> {
    require(!taus.is_empty(), || "τ list is empty".into())?;
    require(taus.iter().all(|t| *t > 0.0 && t.is_finite()), || "τ values must be positive".into())?;
    require(cfg.averages >= 1 && cfg.sweeps >= 1, || "averages and sweeps must be at least 1".into())?;
    cfg.readout.validate()?;
    let calib = PulseCalibration::default();
    let opts = CompileOptions {
        event_cap: cfg.event_cap,
    };
    let compiled: Vec<(Schedule, Schedule)> = taus
        .iter()
        .map(|&tau| {
            let b: Bindings = [("tau".to_string(), tau)].into_iter().collect();
            Ok((compile(signal, &b, &calib, opts)?, compile(alternate, &b, &calib, opts)?))
        })
        .collect::<Result<_, ProtocolError>>()?;
    let drive = DriveParams::from_pi_duration(calib.pi);
    let shots = cfg.averages * cfg.sweeps;
    let points: Vec<(f64, f64)> = compiled
        .par_iter()
        .enumerate()
        .map(|(i, (sig, alt))| {
            let total = sig.free_evolution();
            let (ps, pa) = match cfg.backend {
                CoherenceBackend::Analytic => {
                    let n = pi_pulses(sig);
                    require(n >= 1, || "sequence has no π pulses".into())?;
                    let seq = if n == 1 {
                        DecouplingSequence::Hahn
                    } else {
                        DecouplingSequence::Cpmg(n)
                    };
                    let w = coherence_analytic(seq, total, &cfg.noise)?;
                    (0.5 * (1.0 - w), 0.5 * (1.0 + w))
                }
                CoherenceBackend::MonteCarlo {
                    trajectories,
                    pulse_mode,
                } => {
                    let seed = derive_seed(cfg.seed, i as u64);
                    let mut ec = EvolveConfig::monte_carlo(drive, cfg.noise, trajectories, seed);
                    ec.pulse_mode = pulse_mode;
                    let rho = DensityMatrix::polarized(2)?;
                    (evolve(&rho, sig, &ec)?.readouts[0], evolve(&rho, alt, &ec)?.readouts[0])
                }
            };
            let s = emit_shot(ps, &cfg.readout, shots, cfg.seed, 2 * i as u64)?;
            let r = emit_shot(pa, &cfg.readout, shots, cfg.seed, 2 * i as u64 + 1)?;
            Ok((total, referenced_contrast(s, r, ReferencingScheme::alternation())?))
        })
        .collect::<Result<_, ProtocolError>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let n = compiled.first().map_or(0, |(s, _)| pi_pulses(s));
    let backend = match cfg.backend {
        CoherenceBackend::Analytic => "analytic".to_string(),
        CoherenceBackend::MonteCarlo { trajectories, .. } => format!("monte_carlo({trajectories})"),
    };
    let r = SweepResult::new("cpmg", ("evolution_time", "s"), x, y, cfg.averages, cfg.sweeps, cfg.seed)
        .meta("pulses", n)
        .meta("noise", cfg.noise.id())
        .meta("backend", backend)
        .meta("scheme", "final_pulse_alternation/difference");
    r.validate()?;
    Ok(r)
}

/// `cfg.taus`, or 40 delays spanning 0.05 to 3 times the expected T2.
fn tau_grid(cfg: &CpmgConfig, n: u32) -> Result<Vec<f64>, ProtocolError> {
    if !cfg.taus.is_empty() {
        return Ok(cfg.taus.clone());
    }
    let t2 = t2_analytic(DecouplingSequence::Cpmg(n), &cfg.noise).map_err(|e| {
        ProtocolError::InvalidConfig(format!("cannot choose a default τ grid ({e}); give taus explicitly"))
    })?;
    Ok(linspace(0.05 * t2, 3.0 * t2, 40).into_iter().map(|t| t / (2.0 * n as f64)).collect())
}

/// CPMG-N decay against total evolution time `T = 2Nτ`.
pub fn run_cpmg(cfg: &CpmgConfig) -> Result<SweepResult, ProtocolError> {
    require(cfg.pulses >= 1, || "need at least one π pulse".into())?;
    let n = cfg.pulses;
    let source = cpmg_source(n as u64);
    let signal = parse_def(&source, "cpmg")?;
    let alternate = parse_def(&source.replace("mw pi/2 y\n    read", "mw 3pi/2 y\n    read"), "cpmg")?;
    run_echo_sequences(&signal, &alternate, cfg, &tau_grid(cfg, n)?)
}

/// Hahn echo from the shipped `echo`/`echo_alt` sequences; `cfg.pulses` is
/// ignored.
pub fn run_hahn_echo(cfg: &CpmgConfig) -> Result<SweepResult, ProtocolError> {
    let signal = parse_def(corpus::ECHO, "echo")?;
    let alternate = parse_def(corpus::ECHO, "echo_alt")?;
    let mut r = run_echo_sequences(&signal, &alternate, cfg, &tau_grid(cfg, 1)?)?;
    r.protocol = "echo".into();
    Ok(r)
}

/// One row of the Table-1-style summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpmgRow {
    pub pulses: u32,
    pub t2: f64,
    pub t2_error: f64,
    pub stretch: f64,
    pub stretch_fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpmgFamilyFit {
    /// Echo amplitude at T = 0 from the N = 1 fit; every curve is divided by it.
    pub amplitude: f64,
    pub rows: Vec<CpmgRow>,
    /// `T2(N) = a·N^s`.
    pub power_law: FitResult,
}

/// Normalises and fits a family of CPMG decays.
///
/// The N = 1 curve is fitted with `A·exp[−(T/T2)^c]`; all curves are divided
/// by `A` and refitted with the amplitude fixed to 1 (and the stretch fixed
/// to 2.40 from N = 256 on). A power law is then fitted to T2(N).
pub fn fit_cpmg_family(curves: &[(u32, SweepResult)]) -> Result<CpmgFamilyFit, ProtocolError> {
    let echo = curves
        .iter()
        .find(|(n, _)| *n == 1)
        .ok_or_else(|| ProtocolError::InvalidConfig("family fit needs the N = 1 curve".into()))?;
    let data = |r: &SweepResult, scale: f64| {
        FitData::new(r.axis_values.clone(), r.contrast_values.iter().map(|y| y / scale).collect())
    };
    let first = fit(ModelId::StretchedExp, &data(&echo.1, 1.0), &FitOptions::default())?;
    let amplitude = first.estimates[0];
    require(amplitude > 0.0, || format!("echo amplitude must be positive, got {amplitude}"))?;
    let mut rows = Vec::with_capacity(curves.len());
    for (n, r) in curves {
        let mut opts = FitOptions::default().fix("A", 1.0);
        let fixed = *n >= FIXED_STRETCH_FROM;
        if fixed {
            opts = opts.fix("c", FIXED_STRETCH);
        }
        let f = fit(ModelId::StretchedExp, &data(r, amplitude), &opts)?;
        rows.push(CpmgRow {
            pulses: *n,
            t2: f.estimates[1],
            t2_error: f.std_errors[1],
            stretch: f.estimates[2],
            stretch_fixed: fixed,
        });
    }
    rows.sort_by_key(|r| r.pulses);
    let x = rows.iter().map(|r| r.pulses as f64).collect();
    let y = rows.iter().map(|r| r.t2).collect();
    let power_law = fit(ModelId::PowerLaw, &FitData::new(x, y), &FitOptions::default())?;
    Ok(CpmgFamilyFit {
        amplitude,
        rows,
        power_law,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_total_evolution_time() {
        let cfg = CpmgConfig {
            pulses: 8,
            taus: vec![10e-9, 20e-9],
            ..CpmgConfig::default()
        };
        let r = run_cpmg(&cfg).unwrap();
        assert!((r.axis_values[0] - 160e-9).abs() < 1e-18);
        assert!((r.axis_values[1] - 320e-9).abs() < 1e-18);
    }

    #[test]
    fn no_noise_no_decay() {
        let cfg = CpmgConfig {
            pulses: 4,
            taus: linspace(10e-9, 2e-6, 12),
            noise: NoiseModel::quiet(),
            readout: ReadoutModel {
                photons: 1e12,
                ..ReadoutModel::default()
            },
            ..CpmgConfig::default()
        };
        let r = run_cpmg(&cfg).unwrap();
        let full = 0.004 / (2.0 - 0.004);
        assert!(r.contrast_values.iter().all(|c| (c / full - 1.0).abs() < 1e-4));
    }

    #[test]
    fn single_pulse_cpmg_is_the_hahn_echo() {
        let cfg = CpmgConfig {
            pulses: 1,
            seed: 11,
            ..CpmgConfig::default()
        };
        let a = run_cpmg(&cfg).unwrap();
        let b = run_hahn_echo(&cfg).unwrap();
        assert_eq!(a.axis_values, b.axis_values);
        assert_eq!(a.contrast_values, b.contrast_values);
    }

    #[test]
    fn event_cap_is_enforced() {
        let cfg = CpmgConfig {
            pulses: 4096,
            taus: vec![1e-8],
            ..CpmgConfig::default()
        };
        assert!(matches!(
            run_cpmg(&cfg),
            Err(ProtocolError::Pulseq(crate::pulseq::PulseqError::EventCap { .. }))
        ));
    }
}
