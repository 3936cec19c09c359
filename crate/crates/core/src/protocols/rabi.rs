// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{linspace, require, ProtocolError, SweepResult};
use crate::engine::{evolve, DensityMatrix, DriveModel, DriveParams, EvolveConfig};
use crate::pulseq::{compile, corpus, parse_def, Bindings, CompileOptions, PulseCalibration};
use crate::readout::{emit_shot, referenced_contrast, ReadoutModel, ReferencingScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RabiConfig {
    /// MW pulse lengths, s.
    pub durations: Vec<f64>,
    /// MW power, W.
    pub power: f64,
    /// Rabi frequency per √W, Hz/√W.
    pub rabi_slope: f64,
    pub model: DriveModel,
    /// Optional damping time of the oscillation, s.
    pub decay: Option<f64>,
    pub readout: ReadoutModel,
    pub averages: u64,
    pub sweeps: u64,
    pub seed: u64,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            durations: linspace(0.0, 200e-9, 201),
            power: 30.0,
            rabi_slope: 9.2e6,
            model: DriveModel::Pair,
            decay: None,
            readout: ReadoutModel::default(),
            averages: 100_000,
            sweeps: 1,
            seed: 0,
        }
    }
}

/// Pumped-state population after a resonant pulse of length `t`.
fn population(drive: &DriveParams, t: f64) -> Result<f64, ProtocolError> {
    let dim = drive.model.dim();
    if t == 0.0 {
        return Ok(1.0);
    }
    let def = parse_def(corpus::RABI, "rabi")?;
    let b: Bindings = [("t".to_string(), t)].into_iter().collect();
    let s = compile(&def, &b, &PulseCalibration::default(), CompileOptions::default())?;
    let ev = evolve(&DensityMatrix::polarized(dim)?, &s, &EvolveConfig::noise_free(*drive))?;
    Ok(ev.readouts[0])
}

/// Rabi nutation at `Ω = a_R·√P`, referenced to an MW-off shot.
///
/// The single-spin model nutates at Ω; the pair model reads the site-ordered
/// |↑↓⟩ population and carries Ω and 2Ω components.
pub fn run_rabi(cfg: &RabiConfig) -> Result<SweepResult, ProtocolError> {
    require(!cfg.durations.is_empty(), || "duration list is empty".into())?;
    require(cfg.durations.iter().all(|t| *t >= 0.0 && t.is_finite()), || {
        "pulse durations must be finite and non-negative".into()
    })?;
    require(cfg.decay.map_or(true, |d| d > 0.0), || "decay time must be positive".into())?;
    require(cfg.averages >= 1 && cfg.sweeps >= 1, || "averages and sweeps must be at least 1".into())?;
    cfg.readout.validate()?;
    let drive = DriveParams::from_power(cfg.rabi_slope, cfg.power)?.with_model(cfg.model);
    let mean = match cfg.model {
        DriveModel::Single => 0.5,
        DriveModel::Pair => 3.0 / 8.0,
    };
    let shots = cfg.averages * cfg.sweeps;
    let contrast = cfg
        .durations
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut p = population(&drive, t)?;
            if let Some(td) = cfg.decay {
                p = mean + (p - mean) * (-t / td).exp();
            }
            let s = emit_shot(p, &cfg.readout, shots, cfg.seed, 2 * i as u64)?;
            let r = emit_shot(1.0, &cfg.readout, shots, cfg.seed, 2 * i as u64 + 1)?;
            Ok(referenced_contrast(s, r, ReferencingScheme::mw_off_difference())?)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let r = SweepResult::new("rabi", ("duration", "s"), cfg.durations.clone(), contrast, cfg.averages, cfg.sweeps, cfg.seed)
        .meta("rabi_frequency_hz", drive.rabi_frequency)
        .meta("power_w", cfg.power)
        .meta("model", format!("{:?}", cfg.model).to_lowercase())
        .meta("scheme", "mw_off/difference");
    r.validate()?;
    Ok(r)
}
