// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Paramagnetic-ion titration model.
//!
//! Ions bind to the sensor surface with Hill occupancy θ(c); bound ions add a
//! relaxation rate `Γmax·θ` and quench the ODMR contrast down to an
//! unquenchable baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChemError {
    #[error("invalid titration model: {0}")]
    InvalidModel(String),
    #[error("concentration must be finite and non-negative, got {0}")]
    InvalidConcentration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TitrationModel {
    /// Dissociation constant, mol/L.
    pub kd: f64,
    /// Hill coefficient.
    pub n: f64,
    /// Relaxation time in pure water, s.
    pub t1_water: f64,
    /// Extra relaxation rate at full occupancy, 1/s.
    pub gamma_max: f64,
    /// Quenchable contrast (fraction).
    pub c0: f64,
    /// Unquenchable contrast baseline (fraction).
    pub offset: f64,
}

impl Default for TitrationModel {
    /// Gd³⁺ best fit, with Γmax chosen so that T1(1 mM) = 3 µs.
    fn default() -> Self {
        let mut m = Self {
            kd: 1.69e-5,
            n: 0.78,
            t1_water: 27e-6,
            gamma_max: 0.0,
            c0: 0.1195,
            offset: 0.0272,
        };
        m.gamma_max = m.gamma_for_t1(1e-3, 3e-6);
        m
    }
}

impl TitrationModel {
    pub fn validate(&self) -> Result<(), ChemError> {
        let positive = [
            ("K_d", self.kd),
            ("T1_water", self.t1_water),
            ("C0", self.c0),
            ("A", self.offset),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ChemError::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.n > 0.0 && self.n <= 4.0) {
            return Err(ChemError::InvalidModel(format!("Hill coefficient must lie in (0, 4], got {}", self.n)));
        }
        if !(self.gamma_max >= 0.0) || !self.gamma_max.is_finite() {
            return Err(ChemError::InvalidModel(format!("Γmax must be non-negative, got {}", self.gamma_max)));
        }
        if self.c0 + self.offset > 1.0 {
            return Err(ChemError::InvalidModel(format!(
                "C0 + A must not exceed 1, got {}",
                self.c0 + self.offset
            )));
        }
        Ok(())
    }

    /// Γmax that gives relaxation time `t1` at concentration `c`.
    pub fn gamma_for_t1(&self, c: f64, t1: f64) -> f64 {
        let theta = hill(c, self.kd, self.n);
        (1.0 / t1 - 1.0 / self.t1_water) / theta
    }
}

fn hill(c: f64, kd: f64, n: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    // θ = x/(1 + x) with x = (c/Kd)^n, written to stay finite for huge x.
    1.0 / (1.0 + (kd / c).powf(n))
}

fn check(c: f64) -> Result<(), ChemError> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(ChemError::InvalidConcentration(c));
    }
    Ok(())
}

/// Hill occupancy `θ = (c/Kd)^n / (1 + (c/Kd)^n)`, c in mol/L.
pub fn occupancy(c: f64, model: &TitrationModel) -> Result<f64, ChemError> {
    check(c)?;
    Ok(hill(c, model.kd, model.n))
}

/// `1/T1(c) = 1/T1_water + Γmax·θ(c)`.
pub fn t1_of_concentration(c: f64, model: &TitrationModel) -> Result<f64, ChemError> {
    let theta = occupancy(c, model)?;
    Ok(1.0 / (1.0 / model.t1_water + model.gamma_max * theta))
}

/// `C(c) = C0·(1 − θ) + A`, the same curve as `C0/(1 + (c/Kd)^n) + A`.
pub fn contrast_of_concentration(c: f64, model: &TitrationModel) -> Result<f64, ChemError> {
    let theta = occupancy(c, model)?;
    Ok(model.c0 * (1.0 - theta) + model.offset)
}

/// One row of a titration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TitrationPoint {
    pub concentration: f64,
    pub theta: f64,
    pub t1: f64,
    pub contrast: f64,
}

pub fn titration_table(concentrations: &[f64], model: &TitrationModel) -> Result<Vec<TitrationPoint>, ChemError> {
    model.validate()?;
    concentrations
        .iter()
        .map(|&c| {
            Ok(TitrationPoint {
                concentration: c,
                theta: occupancy(c, model)?,
                t1: t1_of_concentration(c, model)?,
                contrast: contrast_of_concentration(c, model)?,
            })
        })
        .collect()
}

/// CSV with columns concentration_mol_per_L, theta, t1_s, contrast.
pub fn titration_csv(points: &[TitrationPoint]) -> String {
    let mut out = String::from("concentration_mol_per_L,theta,t1_s,contrast\n");
    for p in points {
        out.push_str(&format!("{:e},{:e},{:e},{:e}\n", p.concentration, p.theta, p.t1, p.contrast));
    }
    out
}

/// `n` log-spaced concentrations from `lo` to `hi`, inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_anchors() {
        let m = TitrationModel::default();
        assert_eq!(occupancy(0.0, &m).unwrap(), 0.0);
        for n in [0.5, 0.78, 1.0, 3.0] {
            let m = TitrationModel { n, ..m };
            assert!((occupancy(m.kd, &m).unwrap() - 0.5).abs() < 1e-15);
        }
        let theta = occupancy(1e-3, &m).unwrap();
        assert!((theta - 0.96).abs() < 0.005, "{theta}");
        assert!(occupancy(-1.0, &m).is_err());
    }

    #[test]
    fn relaxation_anchors() {
        let m = TitrationModel::default();
        assert!((t1_of_concentration(0.0, &m).unwrap() - 27e-6).abs() < 1e-18);
        assert!((t1_of_concentration(1e-3, &m).unwrap() - 3e-6).abs() < 1e-15);
        let sat = 1.0 / (1.0 / m.t1_water + m.gamma_max);
        assert!((t1_of_concentration(1e6, &m).unwrap() - sat).abs() / sat < 1e-4);
    }

    #[test]
    fn contrast_anchors() {
        let m = TitrationModel::default();
        assert!((contrast_of_concentration(0.0, &m).unwrap() - 0.1467).abs() < 1e-12);
        let half = contrast_of_concentration(m.kd, &m).unwrap();
        assert!((half - (m.c0 / 2.0 + m.offset)).abs() < 1e-15);
        let far = contrast_of_concentration(0.1, &m).unwrap();
        assert!((far - m.offset).abs() / m.offset < 0.01, "{far}");
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-6, 1e-1, 11);
        assert_eq!(g.len(), 11);
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[10] - 0.1).abs() < 1e-15);
        assert!((g[1] / g[0] - 10f64.powf(0.5)).abs() < 1e-12);
    }
}
