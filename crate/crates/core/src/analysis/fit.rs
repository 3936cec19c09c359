// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, Bounds, LmOptions};
use super::models::ModelId;
use super::FitError;

/// Observations, optionally with one standard deviation per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y, sigma: None }
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.x.len() != self.y.len() {
            return Err(FitError::InvalidInput(format!(
                "x has {} values but y has {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(FitError::InvalidInput("data contain non-finite values".into()));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() || s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(FitError::InvalidInput("sigma must be positive, one per point".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitOptions {
    /// Starting values; the model's data-driven guess when absent.
    pub initial: Option<Vec<f64>>,
    /// Parameters pinned by name.
    pub fixed: BTreeMap<String, f64>,
    /// Overrides the model's default bounds.
    pub bounds: Option<Vec<Bounds>>,
    pub lm: LmOptions,
}

impl FitOptions {
    pub fn fix(mut self, name: &str, value: f64) -> Self {
        self.fixed.insert(name.to_string(), value);
        self
    }

    pub fn start(mut self, p: Vec<f64>) -> Self {
        self.initial = Some(p);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub fixed: Vec<bool>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub covariance: Vec<Vec<f64>>,
    pub n_points: usize,
    pub weighted: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.estimates[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.model.eval(&self.estimates, x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("FitResult serializes")
    }
}

/// Fits `model` to `data` by damped least squares.
///
/// With `sigma` present the residuals are weighted by `1/σ`. Standard errors
/// come from `s²(JᵀJ)⁻¹` with `s²` the reduced residual sum of squares.
/// Reaching the iteration limit returns [`FitError::NonConvergence`] carrying
/// the last iterate.
pub fn fit(model: ModelId, data: &FitData, opts: &FitOptions) -> Result<FitResult, FitError> {
    data.validate()?;
    let np = model.n_params();
    if data.len() < np + 1 {
        return Err(FitError::TooFewPoints {
            need: np + 1,
            got: data.len(),
        });
    }
    let names = model.param_names();
    let mut p0 = match &opts.initial {
        Some(p) if p.len() == np => p.clone(),
        Some(p) => {
            return Err(FitError::InvalidInput(format!(
                "{model} takes {np} parameters, {} given",
                p.len()
            )))
        }
        None => model.initial_guess(&data.x, &data.y)?,
    };
    let mut fixed = vec![false; np];
    for (name, &v) in &opts.fixed {
        let j = names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| FitError::UnknownParameter(format!("{model} has no parameter '{name}'")))?;
        fixed[j] = true;
        p0[j] = v;
    }
    let bounds = opts.bounds.clone().unwrap_or_else(|| model.default_bounds());
    if bounds.len() != np {
        return Err(FitError::InvalidInput("bounds must have one entry per parameter".into()));
    }
    for j in 0..np {
        if !fixed[j] && !bounds[j].contains(p0[j]) {
            p0[j] = match (bounds[j].lo, bounds[j].hi) {
                (Some(lo), Some(hi)) => 0.5 * (lo + hi),
                (Some(lo), None) => lo.abs().max(1.0) * 1e-3 + lo,
                (None, Some(hi)) => hi - hi.abs().max(1.0) * 1e-3,
                _ => p0[j],
            };
        }
    }

    let w: Vec<f64> = match &data.sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; data.len()],
    };
    let m = data.len();
    let res = |p: &[f64]| -> Result<DVector<f64>, String> {
        Ok(DVector::from_fn(m, |i, _| (model.eval(p, data.x[i]) - data.y[i]) * w[i]))
    };
    let jac = |p: &[f64]| -> Result<DMatrix<f64>, String> {
        let mut j = DMatrix::zeros(m, np);
        let mut g = vec![0.0; np];
        for i in 0..m {
            model.gradient(p, data.x[i], &mut g);
            for k in 0..np {
                j[(i, k)] = g[k] * w[i];
            }
        }
        Ok(j)
    };
    let rep = levenberg_marquardt(&res, &jac, &p0, &fixed, &bounds, &opts.lm)?;

    let nfree = rep.free.len();
    let mut cov = vec![vec![0.0; np]; np];
    let mut se = vec![0.0; np];
    if nfree > 0 {
        let dof = (m - nfree) as f64;
        let s2 = rep.rss / dof;
        let inv = rep
            .normal
            .clone()
            .cholesky()
            .ok_or_else(|| FitError::Singular("normal matrix is not positive definite at the solution".into()))?
            .inverse();
        for (a, &ja) in rep.free.iter().enumerate() {
            for (b, &jb) in rep.free.iter().enumerate() {
                cov[ja][jb] = s2 * inv[(a, b)];
            }
            se[ja] = cov[ja][ja].max(0.0).sqrt();
        }
    }
    let result = FitResult {
        model,
        names: names.iter().map(|s| s.to_string()).collect(),
        estimates: rep.params,
        std_errors: se,
        fixed,
        rss: rep.rss,
        iterations: rep.iterations,
        converged: rep.converged,
        gradient_norm: rep.gradient_norm,
        covariance: cov,
        n_points: m,
        weighted: data.sigma.is_some(),
    };
    if !result.converged {
        return Err(FitError::NonConvergence {
            iterations: result.iterations,
            result: Box::new(result),
        });
    }
    Ok(result)
}

/// Runs [`fit`] from several starts in parallel and keeps the lowest RSS,
/// ties going to the earliest start.
pub fn fit_multistart(
    model: ModelId,
    data: &FitData,
    opts: &FitOptions,
    starts: &[Vec<f64>],
) -> Result<FitResult, FitError> {
    if starts.is_empty() {
        return fit(model, data, opts);
    }
    let results: Vec<Result<FitResult, FitError>> = starts
        .par_iter()
        .map(|s| fit(model, data, &opts.clone().start(s.clone())))
        .collect();
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(f) => {
                if best.as_ref().map_or(true, |b| f.rss < b.rss) {
                    best = Some(f);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}
