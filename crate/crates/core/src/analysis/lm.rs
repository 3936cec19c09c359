// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Damped Gauss–Newton (Levenberg–Marquardt) least squares.
//!
//! Each iteration solves `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr` for the free
//! parameters. An accepted step divides λ by 3, a rejected one multiplies it
//! by 3. Iteration stops when the relative step falls below `xtol` or the
//! gradient norm `‖Jᵀr‖` falls below `gtol`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    pub xtol: f64,
    pub gtol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            xtol: 1e-8,
            gtol: 1e-10,
            lambda0: 1e-3,
        }
    }
}

/// Closed interval, either side optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Bounds {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Bounds {
    pub const FREE: Bounds = Bounds { lo: None, hi: None };

    pub fn positive() -> Self {
        Self { lo: Some(0.0), hi: None }
    }

    pub fn between(lo: f64, hi: f64) -> Self {
        Self {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo.map_or(true, |lo| v >= lo) && self.hi.map_or(true, |hi| v <= hi)
    }

    /// Pulls a trial value back inside, halfway from the old value to the bound.
    fn project(&self, old: f64, trial: f64) -> f64 {
        if let Some(lo) = self.lo {
            if trial <= lo {
                return lo + 0.5 * (old - lo);
            }
        }
        if let Some(hi) = self.hi {
            if trial >= hi {
                return hi - 0.5 * (hi - old);
            }
        }
        trial
    }
}

/// Result of a solve over the full parameter vector.
#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `JᵀJ` over the free parameters at the solution.
    pub normal: DMatrix<f64>,
    pub free: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

pub type ResidualFn<'a> = dyn Fn(&[f64]) -> Result<DVector<f64>, String> + 'a;
pub type JacobianFn<'a> = dyn Fn(&[f64]) -> Result<DMatrix<f64>, String> + 'a;

/// Central-difference Jacobian of `f`, columns for all parameters.
pub fn numeric_jacobian(f: &ResidualFn<'_>, p: &[f64]) -> Result<DMatrix<f64>, String> {
    let r0 = f(p)?;
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-8);
        q[j] = p[j] + h;
        let up = f(&q)?;
        q[j] = p[j] - h;
        let down = f(&q)?;
        q[j] = p[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    Ok(jac)
}

fn restrict(jac: &DMatrix<f64>, free: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(jac.nrows(), free.len(), |i, k| jac[(i, free[k])])
}

/// Minimizes `‖r(p)‖²` starting from `p0`; `fixed[j]` pins parameter `j`.
pub fn levenberg_marquardt(
    residuals: &ResidualFn<'_>,
    jacobian: &JacobianFn<'_>,
    p0: &[f64],
    fixed: &[bool],
    bounds: &[Bounds],
    opts: &LmOptions,
) -> Result<LmReport, FitError> {
    let n = p0.len();
    if fixed.len() != n || bounds.len() != n {
        return Err(FitError::InvalidInput("mask and bounds must match the parameter count".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    let eval = |p: &[f64]| residuals(p).map_err(FitError::Evaluation);
    let mut p = p0.to_vec();
    let mut r = eval(&p)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::Evaluation("non-finite residual at the initial guess".into()));
    }
    let mut rss = r.norm_squared();
    if free.is_empty() {
        return Ok(LmReport {
            params: p,
            residuals: r,
            rss,
            normal: DMatrix::zeros(0, 0),
            free,
            iterations: 0,
            converged: true,
            gradient_norm: 0.0,
        });
    }
    let mut lambda = opts.lambda0;
    let mut jac = restrict(&jacobian(&p).map_err(FitError::Evaluation)?, &free);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let gnorm = grad.norm();
        if gnorm < opts.gtol {
            converged = true;
            break;
        }
        for k in 0..free.len() {
            if !(jtj[(k, k)] > 0.0) {
                return Err(FitError::Singular(format!(
                    "parameter {} has no influence on the residuals",
                    free[k]
                )));
            }
        }
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e30 {
            let mut a = jtj.clone();
            for k in 0..free.len() {
                a[(k, k)] += lambda * jtj[(k, k)];
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 3.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let mut trial = p.clone();
            for (k, &j) in free.iter().enumerate() {
                trial[j] = bounds[j].project(p[j], p[j] + delta[k]);
            }
            let step: f64 = free
                .iter()
                .map(|&j| (trial[j] - p[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = free.iter().map(|&j| p[j] * p[j]).sum::<f64>().sqrt();
            small_step = step <= opts.xtol * (scale + opts.xtol);
            let rt = match eval(&trial) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => v,
                _ => {
                    lambda *= 3.0;
                    continue;
                }
            };
            let rss_t = rt.norm_squared();
            if rss_t <= rss {
                p = trial;
                r = rt;
                rss = rss_t;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            if small_step {
                break;
            }
            lambda *= 3.0;
        }
        if accepted {
            jac = restrict(&jacobian(&p).map_err(FitError::Evaluation)?, &free);
        }
        if small_step || !accepted {
            // Either the step is below tolerance or no descent is possible
            // at any damping: a stationary point to working precision.
            converged = true;
            break;
        }
    }
    let jtj = jac.transpose() * &jac;
    let gradient_norm = (jac.transpose() * &r).norm();
    Ok(LmReport {
        params: p,
        residuals: r,
        rss,
        normal: jtj,
        free,
        iterations,
        converged,
        gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_as_least_squares() {
        let res = |p: &[f64]| -> Result<DVector<f64>, String> {
            Ok(DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]))
        };
        let jac = |p: &[f64]| -> Result<DMatrix<f64>, String> {
            Ok(DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0]))
        };
        let rep = levenberg_marquardt(
            &res,
            &jac,
            &[-1.2, 1.0],
            &[false, false],
            &[Bounds::FREE; 2],
            &LmOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!((rep.params[0] - 1.0).abs() < 1e-8 && (rep.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_parameters_stay_put_and_bounds_hold() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let res = |p: &[f64]| -> Result<DVector<f64>, String> {
            Ok(DVector::from_iterator(xs.len(), xs.iter().map(|&x| p[0] * x + p[1] - (2.0 * x - 1.0))))
        };
        let nj = |p: &[f64]| numeric_jacobian(&res, p);
        let rep = levenberg_marquardt(
            &res,
            &nj,
            &[1.0, 0.5],
            &[false, true],
            &[Bounds::FREE, Bounds::FREE],
            &LmOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.params[1], 0.5);
        let rep = levenberg_marquardt(
            &res,
            &nj,
            &[1.0, 0.5],
            &[false, false],
            &[Bounds::between(0.0, 1.5), Bounds::FREE],
            &LmOptions::default(),
        )
        .unwrap();
        assert!(rep.params[0] <= 1.5);
    }

    #[test]
    fn dead_parameter_is_singular() {
        let res = |p: &[f64]| -> Result<DVector<f64>, String> { Ok(DVector::from_vec(vec![p[0] - 1.0, p[0] + 1.0])) };
        let nj = |p: &[f64]| numeric_jacobian(&res, p);
        let err = levenberg_marquardt(
            &res,
            &nj,
            &[0.3, 2.0],
            &[false, false],
            &[Bounds::FREE; 2],
            &LmOptions::default(),
        );
        assert!(matches!(err, Err(FitError::Singular(_))));
    }
}
