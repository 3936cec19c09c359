// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{linspace, require, ProtocolError, SweepResult};
use crate::engine::field_to_frequency;
use crate::readout::{emit_shot, referenced_contrast, ReadoutModel, ReferencingScheme};

/// Pulsed ODMR with an MW-off reference after every shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdmrConfig {
    /// Microwave frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Bias field, T. Sets the line centre through γe·B0.
    pub b0: f64,
    /// Overrides the field-derived line centre, Hz.
    pub center: Option<f64>,
    /// Peak referenced contrast of the line.
    pub amplitude: f64,
    /// Half width at half maximum, Hz.
    pub hwhm: f64,
    /// Drive amplitude relative to the calibrated one; 0 switches the MW off.
    pub mw_amplitude: f64,
    /// Extra width added in quadrature (drive-power broadening), Hz.
    pub power_broadening: f64,
    pub readout: ReadoutModel,
    pub averages: u64,
    pub sweeps: u64,
    pub seed: u64,
}

impl Default for OdmrConfig {
    fn default() -> Self {
        Self {
            frequencies: linspace(2.0e9, 2.4e9, 201),
            b0: 0.078,
            center: None,
            amplitude: 5.83e-4,
            hwhm: 12.9e6,
            mw_amplitude: 1.0,
            power_broadening: 0.0,
            readout: ReadoutModel::default(),
            averages: 100_000,
            sweeps: 26,
            seed: 0,
        }
    }
}

/// Lorentzian ODMR line plus shot noise.
///
/// The drive empties the optically pumped state by `q(f)`, chosen so that
/// the MW-off referenced contrast `(s − r)/r` equals `A/(1 + ((f − f0)/Δf)²)`
/// in the noiseless limit.
pub fn run_odmr(cfg: &OdmrConfig) -> Result<SweepResult, ProtocolError> {
    require(!cfg.frequencies.is_empty(), || "frequency list is empty".into())?;
    require(cfg.frequencies.iter().all(|f| f.is_finite()), || "frequencies must be finite".into())?;
    require(cfg.amplitude >= 0.0, || format!("amplitude must be non-negative, got {}", cfg.amplitude))?;
    require(cfg.hwhm > 0.0, || format!("HWHM must be positive, got {}", cfg.hwhm))?;
    require(cfg.mw_amplitude >= 0.0, || "MW amplitude must be non-negative".into())?;
    require(cfg.power_broadening >= 0.0, || "power broadening must be non-negative".into())?;
    require(cfg.averages >= 1 && cfg.sweeps >= 1, || "averages and sweeps must be at least 1".into())?;
    cfg.readout.validate()?;
    let f0 = match cfg.center {
        Some(f) => f,
        None => field_to_frequency(cfg.b0)?,
    };
    let eps = cfg.readout.contrast;
    let peak = cfg.amplitude * cfg.mw_amplitude;
    let depth = peak * (1.0 - eps) / eps;
    require(depth <= 1.0, || {
        format!("line amplitude {peak} exceeds what readout contrast {eps} can produce")
    })?;
    let width = cfg.hwhm.hypot(cfg.power_broadening);
    let shots = cfg.averages * cfg.sweeps;
    let contrast = cfg
        .frequencies
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let x = (f - f0) / width;
            let q = depth / (1.0 + x * x);
            let s = emit_shot(1.0 - q, &cfg.readout, shots, cfg.seed, 2 * i as u64)?;
            let r = emit_shot(1.0, &cfg.readout, shots, cfg.seed, 2 * i as u64 + 1)?;
            Ok(referenced_contrast(s, r, ReferencingScheme::mw_off_difference())?)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;
    let r = SweepResult::new("odmr", ("frequency", "Hz"), cfg.frequencies.clone(), contrast, cfg.averages, cfg.sweeps, cfg.seed)
        .meta("b0_t", cfg.b0)
        .meta("center_hz", f0)
        .meta("hwhm_hz", width)
        .meta("scheme", "mw_off/difference");
    r.validate()?;
    Ok(r)
}
