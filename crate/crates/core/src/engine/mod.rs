// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Spin dynamics.
//!
//! Two- and four-level density matrices are propagated through compiled
//! schedules in the rotating frame. Dephasing comes from an
//! Ornstein–Uhlenbeck frequency shift δ(t) with autocorrelation
//! `C(t) = Δ² exp(−|t|/τc)`; the same bath has an analytic description
//! ([`coherence_analytic`]) used to cross-check the Monte Carlo backend.

mod calibrate;
mod coherence;
mod evolve;
mod noise;
mod pair;
mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{calibrate_noise, slow_bath_seed, CalibrationTargets, NoiseCalibration};
pub use coherence::{
    coherence_analytic, decoherence_exponent, hahn_chi_closed_form, t2_analytic, DecouplingSequence,
    TogglingKernel,
};
pub use evolve::{evolve, Backend, EvolveConfig, Evolution, PulseMode, TraceRow};
pub use noise::{ou_g, OuProcess};
pub use pair::{pair_rabi, pair_rabi_closed_form};
pub use state::DensityMatrix;

/// Free-electron gyromagnetic ratio, Hz/T (g ≈ 2, spin-½).
pub const GAMMA_E_HZ_PER_T: f64 = 28.0249e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: state has dimension {state}, drive model expects {model}")]
    DimensionMismatch { state: usize, model: usize },
    #[error("schedule is not runnable: {0}")]
    Unrunnable(String),
    #[error("density matrix invariant violated: {0}")]
    InvalidState(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    #[error("root bracketing failed: {0}")]
    NoRoot(String),
    #[error("calibration did not converge: {0}")]
    CalibrationNonConvergence(String),
    #[error("target exponent s = {target} is outside the reachable band [{band_lo:.3}, {band_hi:.3}]; closest achievable s = {closest:.3}")]
    Infeasible {
        target: f64,
        band_lo: f64,
        band_hi: f64,
        closest: f64,
        best: Box<NoiseCalibration>,
    },
}

/// Bias field to electron-spin resonance frequency, `γe·B0`.
pub fn field_to_frequency(b0_tesla: f64) -> Result<f64, EngineError> {
    if !(b0_tesla >= 0.0) || !b0_tesla.is_finite() {
        return Err(EngineError::InvalidParameter(format!(
            "bias field must be non-negative, got {b0_tesla} T"
        )));
    }
    Ok(GAMMA_E_HZ_PER_T * b0_tesla)
}

/// Which spins the microwave drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriveModel {
    /// One spin-½ (dimension 2).
    #[default]
    Single,
    /// Two uncoupled spin-½ sites driven collectively (dimension 4).
    Pair,
}

impl DriveModel {
    pub fn dim(&self) -> usize {
        match self {
            DriveModel::Single => 2,
            DriveModel::Pair => 4,
        }
    }
}

/// Microwave drive in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Linear nutation frequency at full amplitude, Hz.
    pub rabi_frequency: f64,
    /// Drive phase offset, rad (added to each pulse's own phase).
    pub phase: f64,
    /// Carrier detuning from resonance, Hz.
    pub detune: f64,
    pub model: DriveModel,
}

impl DriveParams {
    pub fn new(rabi_frequency: f64) -> Self {
        Self {
            rabi_frequency,
            phase: 0.0,
            detune: 0.0,
            model: DriveModel::Single,
        }
    }

    /// `Ω = a_R·√P`.
    pub fn from_power(rabi_slope: f64, power_w: f64) -> Result<Self, EngineError> {
        if !(power_w >= 0.0) || !(rabi_slope >= 0.0) {
            return Err(EngineError::InvalidParameter(format!(
                "power and Rabi slope must be non-negative (P = {power_w}, a = {rabi_slope})"
            )));
        }
        Ok(Self::new(rabi_slope * power_w.sqrt()))
    }

    /// Drive whose full-amplitude π pulse lasts `pi_duration`.
    pub fn from_pi_duration(pi_duration: f64) -> Self {
        Self::new(0.5 / pi_duration)
    }

    pub fn with_model(mut self, model: DriveModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_detune(mut self, detune: f64) -> Self {
        self.detune = detune;
        self
    }
}

/// Phenomenological relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    /// Population decay time toward the maximally mixed state, s.
    pub t1: f64,
    /// Ensemble stretch exponent, applied only at the protocol layer.
    pub stretch: f64,
    /// Native coherence time, for reference.
    pub t2_native: Option<f64>,
}

impl RelaxationParams {
    pub fn new(t1: f64, stretch: f64) -> Result<Self, EngineError> {
        if !(t1 > 0.0) {
            return Err(EngineError::InvalidParameter(format!("T1 must be positive, got {t1}")));
        }
        if !(stretch > 0.0 && stretch <= 1.0) {
            return Err(EngineError::InvalidParameter(format!(
                "stretch exponent must be in (0, 1], got {stretch}"
            )));
        }
        Ok(Self {
            t1,
            stretch,
            t2_native: None,
        })
    }

    /// No population relaxation.
    pub fn none() -> Self {
        Self {
            t1: f64::INFINITY,
            stretch: 1.0,
            t2_native: None,
        }
    }
}

/// Ornstein–Uhlenbeck dephasing bath: rms shift Δ (rad/s), correlation time τc (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub delta: f64,
    pub tau_c: f64,
}

impl NoiseModel {
    pub fn new(delta: f64, tau_c: f64) -> Result<Self, EngineError> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(EngineError::InvalidParameter(format!(
                "noise amplitude must be non-negative, got {delta}"
            )));
        }
        if !(tau_c > 0.0) || !tau_c.is_finite() {
            return Err(EngineError::InvalidParameter(format!(
                "correlation time must be positive, got {tau_c}"
            )));
        }
        Ok(Self { delta, tau_c })
    }

    pub fn quiet() -> Self {
        Self {
            delta: 0.0,
            tau_c: 1e-6,
        }
    }

    /// `C(t) = Δ² exp(−|t|/τc)`, (rad/s)².
    pub fn autocorrelation(&self, t: f64) -> f64 {
        self.delta * self.delta * (-t.abs() / self.tau_c).exp()
    }

    /// Short identifier for metadata.
    pub fn id(&self) -> String {
        format!("ou(delta={:e}rad/s,tau_c={:e}s)", self.delta, self.tau_c)
    }
}

/// Readout for the spin-pair picture: rank-1 projector onto the
/// site-ordered antiparallel state |↑↓⟩ under collective drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairModel {
    /// Basis index of the readout state in |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩ order.
    pub readout_index: usize,
    pub collective_drive: bool,
}

impl Default for PairModel {
    fn default() -> Self {
        Self {
            readout_index: 1,
            collective_drive: true,
        }
    }
}

impl PairModel {
    pub fn projector(&self) -> nalgebra::Matrix4<num_complex::Complex64> {
        let mut p = nalgebra::Matrix4::zeros();
        p[(self.readout_index, self.readout_index)] = num_complex::Complex64::new(1.0, 0.0);
        p
    }
}

/// Rotating-frame relaxation rate under a spin lock at nutation `f_sl` (Hz):
/// `Γ1ρ = Δ²τc / (1 + (2π f_sl τc)²) + 1/(2 T1)`.
pub fn t1rho_rate(noise: &NoiseModel, f_sl: f64, t1: f64) -> Result<f64, EngineError> {
    if !(f_sl >= 0.0) {
        return Err(EngineError::InvalidParameter(format!(
            "spin-lock frequency must be non-negative, got {f_sl}"
        )));
    }
    let w = 2.0 * std::f64::consts::PI * f_sl * noise.tau_c;
    let bath = noise.delta * noise.delta * noise.tau_c / (1.0 + w * w);
    let floor = if t1.is_finite() { 0.5 / t1 } else { 0.0 };
    Ok(bath + floor)
}
