// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Curve fitting, spectra and sensitivity estimation.

mod fit;
pub mod lm;
mod models;
mod sensitivity;
mod spectrum;

use thiserror::Error;

pub use fit::{fit, fit_multistart, FitData, FitOptions, FitResult};
pub use lm::{Bounds, LmOptions};
pub use models::ModelId;
pub use sensitivity::{estimate_sensitivity, Sensitivity, SensitivityInput, NONLINEARITY_LIMIT};
pub use spectrum::{peak_fwhm, spectrum, uniform_step, Spectrum, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("need at least {need} data points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("{0}")]
    UnknownParameter(String),
    #[error("model evaluation failed: {0}")]
    Evaluation(String),
    #[error("singular normal equations: {0}")]
    Singular(String),
    #[error("no convergence after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        result: Box<FitResult>,
    },
    #[error("non-uniform sampling: {0}")]
    NonUniform(String),
    #[error("no significant peak: {0}")]
    NoPeak(String),
    #[error("response is nonlinear: quadratic term is {ratio:.3} of the linear term (limit 0.1)")]
    Nonlinear { ratio: f64 },
}
