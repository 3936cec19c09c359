// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{logspace, require, run_odmr, run_t1, EnsembleEnvelope, OdmrConfig, ProtocolError, SweepResult, T1Config};
use crate::analysis::{fit, FitData, FitOptions, FitResult, ModelId};
use crate::chemsense::{contrast_of_concentration, occupancy, t1_of_concentration, TitrationModel};
use crate::readout::ReadoutModel;

/// Readout contrast of the ion-sensing setup; the line amplitudes it has to
/// carry reach about 15 %.
pub const TITRATION_READOUT_CONTRAST: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TitrationConfig {
    /// Ion concentrations, mol/L, ascending. Zero is pure water.
    pub concentrations: Vec<f64>,
    pub model: TitrationModel,
    /// Spectrum settings; the amplitude is replaced per concentration.
    pub odmr: OdmrConfig,
    /// Relaxation settings; the envelope is replaced per concentration.
    pub t1: T1Config,
    pub seed: u64,
}

impl Default for TitrationConfig {
    fn default() -> Self {
        let readout = ReadoutModel {
            contrast: TITRATION_READOUT_CONTRAST,
            ..ReadoutModel::default()
        };
        let mut concentrations = vec![0.0];
        concentrations.extend(logspace(1e-6, 0.1, 11));
        Self {
            concentrations,
            model: TitrationModel::default(),
            odmr: OdmrConfig {
                readout,
                ..OdmrConfig::default()
            },
            t1: T1Config {
                delays: logspace(0.1e-6, 180e-6, 40),
                readout,
                ..T1Config::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitrationStep {
    /// mol/L.
    pub concentration: f64,
    /// Site occupancy used by the generator.
    pub theta: f64,
    /// Generator T1, s.
    pub t1_true: f64,
    /// Generator ODMR amplitude (fraction).
    pub amplitude_true: f64,
    pub odmr: SweepResult,
    pub t1: SweepResult,
}

/// Runs an ODMR spectrum and a T1 decay at every concentration.
///
/// Step `i` uses seed `seed + i` for both sweeps, so steps are independent
/// and the whole titration is reproducible.
pub fn run_titration(cfg: &TitrationConfig) -> Result<Vec<TitrationStep>, ProtocolError> {
    require(!cfg.concentrations.is_empty(), || "concentration list is empty".into())?;
    require(cfg.concentrations.iter().all(|c| *c >= 0.0 && c.is_finite()), || {
        "concentrations must be finite and non-negative".into()
    })?;
    require(cfg.concentrations.windows(2).all(|w| w[0] < w[1]), || {
        "concentrations must be strictly ascending".into()
    })?;
    cfg.model.validate()?;
    cfg.concentrations
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let theta = occupancy(c, &cfg.model)?;
            let t1_true = t1_of_concentration(c, &cfg.model)?;
            let amplitude_true = contrast_of_concentration(c, &cfg.model)?;
            let odmr = run_odmr(&OdmrConfig {
                amplitude: amplitude_true,
                seed,
                ..cfg.odmr.clone()
            })?
            .meta("concentration_m", c);
            let t1 = run_t1(&T1Config {
                envelope: EnsembleEnvelope::new(t1_true, 1.0)?,
                seed,
                ..cfg.t1.clone()
            })?
            .meta("concentration_m", c);
            Ok(TitrationStep {
                concentration: c,
                theta,
                t1_true,
                amplitude_true,
                odmr,
                t1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitrationFit {
    /// Fitted Lorentzian amplitude per step.
    pub amplitudes: Vec<f64>,
    pub amplitude_errors: Vec<f64>,
    /// `C0/(1 + (c/K_d)^n) + A` through the amplitudes.
    pub hill: FitResult,
}

/// Fits each spectrum with a Lorentzian, then the amplitudes with the
/// Hill-Langmuir isotherm.
pub fn fit_titration(steps: &[TitrationStep]) -> Result<TitrationFit, ProtocolError> {
    require(steps.len() >= 5, || "a Hill fit needs at least 5 concentrations".into())?;
    let lines = steps
        .par_iter()
        .map(|s| {
            let data = FitData::new(s.odmr.axis_values.clone(), s.odmr.contrast_values.clone());
            fit(ModelId::Lorentzian, &data, &FitOptions::default())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let amplitudes: Vec<f64> = lines.iter().map(|f| f.estimates[0]).collect();
    let amplitude_errors = lines.iter().map(|f| f.std_errors[0]).collect();
    let x = steps.iter().map(|s| s.concentration).collect();
    let hill = fit(ModelId::HillLangmuir, &FitData::new(x, amplitudes.clone()), &FitOptions::default())?;
    Ok(TitrationFit {
        amplitudes,
        amplitude_errors,
        hill,
    })
}
