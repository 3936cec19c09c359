// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::fit::{fit, FitData, FitOptions};
use super::models::ModelId;
use super::spectrum::Spectrum;
use super::FitError;

/// Largest tolerated `|k₂|·B_max / |k₁|` in a quadratic fit of peak amplitude.
pub const NONLINEARITY_LIMIT: f64 = 0.1;

/// Spectra of synchronized-readout streams recorded at several RF amplitudes.
#[derive(Debug, Clone)]
pub struct SensitivityInput {
    /// RF field amplitude of each run, T.
    pub amplitudes: Vec<f64>,
    pub spectra: Vec<Spectrum>,
    /// Expected beat frequency, Hz.
    pub signal_frequency: f64,
    /// Signal-free band used for the noise floor, Hz.
    pub noise_band: (f64, f64),
    /// Record length t_s, s.
    pub record_duration: f64,
    /// Shots averaged per readout point.
    pub averages: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    /// η, T/√Hz.
    pub eta: f64,
    /// Peak amplitude per tesla.
    pub slope: f64,
    pub slope_std_error: f64,
    /// RMS magnitude in the noise band.
    pub noise_floor: f64,
    pub peak_amplitudes: Vec<f64>,
    /// `|k₂|·B_max/|k₁|` from the quadratic check.
    pub quadratic_ratio: f64,
}

/// `η = (σ/k)·√(t_s·averages)` with `k` the through-origin slope of peak
/// amplitude against field and `σ` the RMS of the signal-free bins.
pub fn estimate_sensitivity(input: &SensitivityInput) -> Result<Sensitivity, FitError> {
    let n = input.amplitudes.len();
    if n < 3 || input.spectra.len() != n {
        return Err(FitError::InvalidInput(
            "sensitivity needs at least 3 RF amplitudes, one spectrum each".into(),
        ));
    }
    if input.amplitudes.iter().any(|b| !(*b > 0.0)) {
        return Err(FitError::InvalidInput("RF amplitudes must be positive".into()));
    }
    let (lo, hi) = input.noise_band;
    if lo <= input.signal_frequency && input.signal_frequency <= hi {
        return Err(FitError::InvalidInput("noise band contains the signal frequency".into()));
    }
    let peaks: Vec<f64> = input
        .spectra
        .iter()
        .map(|s| s.peak_near(input.signal_frequency, 2.0 * s.bin_width() * s.zero_pad as f64))
        .collect();

    // Quadratic check: y = k1 B + k2 B² by normal equations.
    let (mut s2, mut s3, mut s4, mut sy1, mut sy2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (b, y) in input.amplitudes.iter().zip(&peaks) {
        s2 += b * b;
        s3 += b * b * b;
        s4 += b * b * b * b;
        sy1 += b * y;
        sy2 += b * b * y;
    }
    let det = s2 * s4 - s3 * s3;
    let bmax = input.amplitudes.iter().copied().fold(0.0, f64::max);
    let quadratic_ratio = if det.abs() > 0.0 {
        let k1 = (sy1 * s4 - sy2 * s3) / det;
        let k2 = (s2 * sy2 - s3 * sy1) / det;
        if k1 != 0.0 {
            (k2 * bmax / k1).abs()
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };
    if quadratic_ratio > NONLINEARITY_LIMIT {
        return Err(FitError::Nonlinear { ratio: quadratic_ratio });
    }

    let lin = fit(
        ModelId::LinearThroughOrigin,
        &FitData::new(input.amplitudes.clone(), peaks.clone()),
        &FitOptions::default(),
    )?;
    let slope = lin.estimates[0];
    if !(slope > 0.0) {
        return Err(FitError::InvalidInput("peak amplitude does not grow with field".into()));
    }
    let floors: Vec<f64> = input
        .spectra
        .iter()
        .map(|s| s.rms_in(lo, hi))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| FitError::InvalidInput("noise band holds no bins".into()))?;
    let noise_floor = (floors.iter().map(|f| f * f).sum::<f64>() / floors.len() as f64).sqrt();
    let eta = noise_floor / slope * (input.record_duration * input.averages).sqrt();
    Ok(Sensitivity {
        eta,
        slope,
        slope_std_error: lin.std_errors[0],
        noise_floor,
        peak_amplitudes: peaks,
        quadratic_ratio,
    })
}
