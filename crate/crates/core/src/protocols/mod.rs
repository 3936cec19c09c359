// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end experiments.
//!
//! Each protocol takes a serialisable config record, builds its pulse
//! sequences, evolves or evaluates the spin response, passes it through the
//! shot-noise readout and returns a [`SweepResult`]. Results are
//! reproducible bit-for-bit for a fixed seed, regardless of thread count.

mod casr;
mod cpmg;
mod odmr;
mod rabi;
mod relax;
mod titration;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::FitError;
use crate::chemsense::ChemError;
use crate::engine::{slow_bath_seed, EngineError, NoiseModel};
use crate::pulseq::PulseqError;
use crate::readout::ReadoutError;

pub use casr::{casr_phases, casr_sensitivity, run_casr, CasrConfig, CasrRun};
pub use cpmg::CPMG_EVENT_CAP;
pub use cpmg::{
    fit_cpmg_family, run_cpmg, run_echo_sequences, run_hahn_echo, CoherenceBackend, CpmgConfig, CpmgFamilyFit, CpmgRow,
};
pub use odmr::{run_odmr, OdmrConfig};
pub use rabi::{run_rabi, RabiConfig};
pub use relax::{run_spinlock, run_t1, SpinlockConfig, T1Config};
pub use titration::{fit_titration, run_titration, TitrationConfig, TitrationFit, TitrationStep, TITRATION_READOUT_CONTRAST};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("timing mismatch: {0}")]
    TimingMismatch(String),
    #[error(transparent)]
    Pulseq(#[from] PulseqError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// One experiment: a swept axis and the referenced contrast at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub protocol: String,
    pub axis_name: String,
    pub axis_unit: String,
    pub axis_values: Vec<f64>,
    pub contrast_values: Vec<f64>,
    /// Shots per point and sweep.
    pub averages: u64,
    pub sweeps: u64,
    pub seed: u64,
    /// Free-form context: bias field, drive, noise model and so on.
    pub metadata: BTreeMap<String, String>,
}

impl SweepResult {
    pub(crate) fn new(protocol: &str, axis: (&str, &str), x: Vec<f64>, y: Vec<f64>, averages: u64, sweeps: u64, seed: u64) -> Self {
        Self {
            protocol: protocol.into(),
            axis_name: axis.0.into(),
            axis_unit: axis.1.into(),
            axis_values: x,
            contrast_values: y,
            averages,
            sweeps,
            seed,
            metadata: BTreeMap::new(),
        }
    }

    pub(crate) fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.axis_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis_values.is_empty()
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.axis_values.len() != self.contrast_values.len() {
            return Err(ProtocolError::InvalidConfig(format!(
                "axis has {} values but contrast has {}",
                self.axis_values.len(),
                self.contrast_values.len()
            )));
        }
        if self.axis_values.iter().chain(&self.contrast_values).any(|v| !v.is_finite()) {
            return Err(ProtocolError::InvalidConfig("sweep produced non-finite values".into()));
        }
        Ok(())
    }

    /// Header of the axis column, e.g. `frequency_hz`.
    pub fn axis_column(&self) -> String {
        if self.axis_unit.is_empty() {
            self.axis_name.clone()
        } else {
            format!("{}_{}", self.axis_name, self.axis_unit.to_lowercase().replace('/', "_per_"))
        }
    }

    /// Two-column CSV; values printed with shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},contrast\n", self.axis_column());
        for (x, y) in self.axis_values.iter().zip(&self.contrast_values) {
            let _ = writeln!(out, "{x:e},{y:e}");
        }
        out
    }

    /// JSON sidecar describing the run: metadata, seed, config and its hash.
    pub fn sidecar<C: Serialize>(&self, config: &C) -> serde_json::Value {
        let config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        serde_json::json!({
            "protocol": self.protocol,
            "axis": { "name": self.axis_name, "unit": self.axis_unit },
            "points": self.len(),
            "averages": self.averages,
            "sweeps": self.sweeps,
            "seed": self.seed,
            "metadata": self.metadata,
            "config_hash": config_hash(&config),
            "config": config,
            "tool_version": env!("CARGO_PKG_VERSION"),
        })
    }
}

/// SHA-256 of the compact JSON encoding, hex.
pub fn config_hash<C: Serialize + ?Sized>(config: &C) -> String {
    let text = serde_json::to_string(config).unwrap_or_default();
    Sha256::digest(text.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Stretched-exponential envelope `exp[−(t/T)^c]` applied to ensemble decays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEnvelope {
    pub timescale: f64,
    pub stretch: f64,
}

impl EnsembleEnvelope {
    pub fn new(timescale: f64, stretch: f64) -> Result<Self, ProtocolError> {
        if !(timescale > 0.0) || !timescale.is_finite() {
            return Err(ProtocolError::InvalidConfig(format!("envelope timescale must be positive, got {timescale}")));
        }
        if !(stretch > 0.0 && stretch <= 3.0) {
            return Err(ProtocolError::InvalidConfig(format!("stretch must lie in (0, 3], got {stretch}")));
        }
        Ok(Self { timescale, stretch })
    }

    pub fn at(&self, t: f64) -> f64 {
        (-(t.max(0.0) / self.timescale).powf(self.stretch)).exp()
    }
}

/// Bath used when a config does not name one: τc = 10 µs with Δ set so that
/// the Hahn-echo T2 is 45 ns.
pub fn default_noise() -> NoiseModel {
    slow_bath_seed(45e-9, 10e-6).expect("valid constants")
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` log-spaced values from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ProtocolError> {
    if cond {
        Ok(())
    } else {
        Err(ProtocolError::InvalidConfig(msg()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_sidecar() {
        let r = SweepResult::new("t1", ("delay", "s"), vec![1e-6, 2e-6], vec![0.5, 0.25], 10, 2, 7).meta("k", 1);
        assert_eq!(r.to_csv(), "delay_s,contrast\n1e-6,5e-1\n2e-6,2.5e-1\n");
        let j = r.sidecar(&serde_json::json!({"a": 1}));
        assert_eq!(j["seed"], 7);
        assert_eq!(j["config_hash"].as_str().unwrap().len(), 64);
        assert_eq!(j["config_hash"], config_hash(&serde_json::json!({"a": 1})));
    }

    #[test]
    fn envelope_definition() {
        let e = EnsembleEnvelope::new(25.87e-6, 0.665).unwrap();
        assert_eq!(e.at(0.0), 1.0);
        assert!((e.at(25.87e-6) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(EnsembleEnvelope::new(1.0, 3.5).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let l = logspace(1e-6, 1e-4, 3);
        assert!((l[1] - 1e-5).abs() < 1e-18);
    }
}
