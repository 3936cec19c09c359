// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Photon counting and reference normalisation.
//!
//! A readout of spin observable `p` (population of the optically pumped,
//! dimmer state) yields Poisson counts with mean `R0·(1 − ε·p)`. Driving the
//! spin out of the pumped state therefore brightens the signal, which is the
//! positive ODMR contrast seen in experiment.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{substream, Domain};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReadoutError {
    #[error("invalid readout model: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("reference counts must be positive, got {0}")]
    ZeroReference(f64),
    #[error("scheme {kind:?} cannot be combined by {combine:?}")]
    IncompatibleScheme { kind: SchemeKind, combine: Combine },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Mean photons per readout with the spin fully in the bright state (R0).
    pub photons: f64,
    /// Fractional fluorescence contrast ε.
    pub contrast: f64,
    /// Readout window, s.
    pub duration: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            photons: 1e4,
            contrast: 0.004,
            duration: 5e-6,
        }
    }
}

impl ReadoutModel {
    pub fn new(photons: f64, contrast: f64) -> Result<Self, ReadoutError> {
        let m = Self {
            photons,
            contrast,
            ..Self::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if !(self.photons > 0.0) || !self.photons.is_finite() {
            return Err(ReadoutError::InvalidModel(format!(
                "photons per readout must be positive, got {}",
                self.photons
            )));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(ReadoutError::InvalidModel(format!(
                "contrast must lie in (0, 1), got {}",
                self.contrast
            )));
        }
        if !(self.duration > 0.0) {
            return Err(ReadoutError::InvalidModel(format!(
                "readout duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    /// Expected counts `R0·(1 − ε·p)`.
    pub fn mean_counts(&self, p: f64) -> f64 {
        self.photons * (1.0 - self.contrast * p)
    }
}

fn check_p(p: f64) -> Result<(), ReadoutError> {
    // Populations come out of floating-point propagation; allow a hair of slack.
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(ReadoutError::InvalidInput(format!("spin observable must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Averaged counts of shot `index`: the sum of `averages` Poisson draws is
/// itself Poisson, so one draw at `averages·λ` is taken and divided back.
pub fn emit_shot(p: f64, model: &ReadoutModel, averages: u64, seed: u64, index: u64) -> Result<f64, ReadoutError> {
    model.validate()?;
    check_p(p)?;
    if averages == 0 {
        return Err(ReadoutError::InvalidInput("averages must be at least 1".into()));
    }
    let lambda = averages as f64 * model.mean_counts(p.clamp(0.0, 1.0));
    let mut rng = substream(seed, Domain::ShotNoise, index);
    let total: f64 = Poisson::new(lambda)
        .map_err(|e| ReadoutError::InvalidInput(format!("Poisson mean {lambda}: {e}")))?
        .sample(&mut rng);
    Ok(total / averages as f64)
}

/// Mean of `averages` shot-noise-limited readouts of observable `p`.
pub fn emit(p: f64, model: &ReadoutModel, averages: u64, seed: u64) -> Result<f64, ReadoutError> {
    emit_shot(p, model, averages, seed, 0)
}

/// Readout `i` of the series uses shot stream `offset + i`, so the result is
/// independent of how the series is split across threads.
pub fn emit_series(
    ps: &[f64],
    model: &ReadoutModel,
    averages: u64,
    seed: u64,
    offset: u64,
) -> Result<Vec<f64>, ReadoutError> {
    ps.par_iter()
        .enumerate()
        .map(|(i, &p)| emit_shot(p, model, averages, seed, offset + i as u64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Same sequence with the microwave switched off.
    MwOff,
    /// Same sequence with a π pulse after initialisation.
    PiPulseRef,
    /// Shots ending in π/2 and 3π/2, paired.
    FinalPulseAlternation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Ratio,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferencingScheme {
    pub kind: SchemeKind,
    pub combine: Combine,
}

impl ReferencingScheme {
    /// Alternation only has a normalised-difference form.
    pub fn new(kind: SchemeKind, combine: Combine) -> Result<Self, ReadoutError> {
        if kind == SchemeKind::FinalPulseAlternation && combine == Combine::Ratio {
            return Err(ReadoutError::IncompatibleScheme { kind, combine });
        }
        Ok(Self { kind, combine })
    }

    pub fn mw_off_difference() -> Self {
        Self {
            kind: SchemeKind::MwOff,
            combine: Combine::Difference,
        }
    }

    pub fn pi_pulse_difference() -> Self {
        Self {
            kind: SchemeKind::PiPulseRef,
            combine: Combine::Difference,
        }
    }

    pub fn alternation() -> Self {
        Self {
            kind: SchemeKind::FinalPulseAlternation,
            combine: Combine::Difference,
        }
    }
}

/// Combines a measurement with its reference.
///
/// Ratio gives `s/r` and difference `(s − r)/r`. For final-pulse alternation
/// `signal` is the π/2-ended shot and `reference` the 3π/2-ended one, and
/// the result is `(s − r)/(s + r)`, which vanishes for a dephased spin.
pub fn referenced_contrast(signal: f64, reference: f64, scheme: ReferencingScheme) -> Result<f64, ReadoutError> {
    if !(signal >= 0.0) || !signal.is_finite() || !(reference >= 0.0) || !reference.is_finite() {
        return Err(ReadoutError::InvalidInput(format!(
            "counts must be finite and non-negative (signal {signal}, reference {reference})"
        )));
    }
    let value = match (scheme.kind, scheme.combine) {
        (SchemeKind::FinalPulseAlternation, Combine::Ratio) => {
            return Err(ReadoutError::IncompatibleScheme {
                kind: scheme.kind,
                combine: scheme.combine,
            })
        }
        (SchemeKind::FinalPulseAlternation, Combine::Difference) => {
            let sum = signal + reference;
            if sum == 0.0 {
                return Err(ReadoutError::ZeroReference(sum));
            }
            (signal - reference) / sum
        }
        (_, combine) => {
            if reference == 0.0 {
                return Err(ReadoutError::ZeroReference(reference));
            }
            match combine {
                Combine::Ratio => signal / reference,
                Combine::Difference => (signal - reference) / reference,
            }
        }
    };
    Ok(value)
}

/// Point-wise [`referenced_contrast`] over two equally long series.
pub fn referenced_series(signal: &[f64], reference: &[f64], scheme: ReferencingScheme) -> Result<Vec<f64>, ReadoutError> {
    if signal.len() != reference.len() {
        return Err(ReadoutError::InvalidInput(format!(
            "signal and reference lengths differ ({} vs {})",
            signal.len(),
            reference.len()
        )));
    }
    signal
        .iter()
        .zip(reference)
        .map(|(&s, &r)| referenced_contrast(s, r, scheme))
        .collect()
}
