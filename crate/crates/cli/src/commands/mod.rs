// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

pub mod calibrate;
pub mod fit;
pub mod reproduce;
pub mod run;
pub mod sensitivity;
pub mod spectrum;
pub mod titrate;

use std::path::Path;

use spinforge_core::analysis::FitError;
use spinforge_core::engine::{EngineError, NoiseModel};
use spinforge_core::protocols::ProtocolError;

use crate::io::read_json;
use crate::CliError;

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Engine(e) => e.into(),
            ProtocolError::Fit(e) => e.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidParameter(_) | EngineError::DimensionMismatch { .. } | EngineError::Unrunnable(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::InvalidInput(_)
            | FitError::TooFewPoints { .. }
            | FitError::UnknownModel(_)
            | FitError::UnknownParameter(_)
            | FitError::NonUniform(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Reads a bath from JSON: either `{"delta": …, "tau_c": …}` or the output
/// of `calibrate-noise`, which holds it under `"model"`.
pub fn load_noise(path: &Path) -> Result<NoiseModel, CliError> {
    let v = read_json(path)?;
    let m = v.get("model").unwrap_or(&v);
    let get = |k: &str| {
        m.get(k)
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| CliError::Usage(format!("{}: missing numeric '{k}'", path.display())))
    };
    Ok(NoiseModel::new(get("delta")?, get("tau_c")?)?)
}
