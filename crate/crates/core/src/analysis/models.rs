// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lm::Bounds;
use super::FitError;

/// The closed-form models used throughout the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// `A / (1 + ((x − f0)/w)²)`
    Lorentzian,
    /// `A·exp[−(x/T)^c]`
    StretchedExp,
    /// `a·x^s`
    PowerLaw,
    /// `a·x`
    LinearThroughOrigin,
    /// `C0 / (1 + (x/Kd)^n) + A`
    HillLangmuir,
    /// `A·cos(2πf·x + φ)·exp(−x/T) + B`
    DampedCosine,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::Lorentzian,
        ModelId::StretchedExp,
        ModelId::PowerLaw,
        ModelId::LinearThroughOrigin,
        ModelId::HillLangmuir,
        ModelId::DampedCosine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Lorentzian => "lorentzian",
            ModelId::StretchedExp => "stretchedexp",
            ModelId::PowerLaw => "powerlaw",
            ModelId::LinearThroughOrigin => "linear",
            ModelId::HillLangmuir => "hill",
            ModelId::DampedCosine => "dampedcosine",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelId::Lorentzian => &["A", "f0", "hwhm"],
            ModelId::StretchedExp => &["A", "T", "c"],
            ModelId::PowerLaw => &["a", "s"],
            ModelId::LinearThroughOrigin => &["a"],
            ModelId::HillLangmuir => &["C0", "Kd", "n", "A"],
            ModelId::DampedCosine => &["A", "f", "T", "phi", "B"],
        }
    }

    /// Units of each parameter given the units of x and y.
    pub fn param_units(&self) -> &'static [&'static str] {
        match self {
            ModelId::Lorentzian => &["y", "x", "x"],
            ModelId::StretchedExp => &["y", "x", "1"],
            ModelId::PowerLaw => &["y", "1"],
            ModelId::LinearThroughOrigin => &["y/x"],
            ModelId::HillLangmuir => &["y", "x", "1", "y"],
            ModelId::DampedCosine => &["y", "1/x", "x", "rad", "y"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    pub fn default_bounds(&self) -> Vec<Bounds> {
        let f = Bounds::FREE;
        let pos = Bounds::positive();
        match self {
            ModelId::Lorentzian => vec![f, f, pos],
            ModelId::StretchedExp => vec![f, pos, Bounds::between(0.0, 5.0)],
            ModelId::PowerLaw => vec![pos, f],
            ModelId::LinearThroughOrigin => vec![f],
            ModelId::HillLangmuir => vec![f, pos, Bounds::between(0.0, 4.0), f],
            ModelId::DampedCosine => vec![f, pos, pos, f, f],
        }
    }

    pub fn eval(&self, p: &[f64], x: f64) -> f64 {
        match self {
            ModelId::Lorentzian => {
                let u = (x - p[1]) / p[2];
                p[0] / (1.0 + u * u)
            }
            ModelId::StretchedExp => p[0] * (-(x / p[1]).powf(p[2])).exp(),
            ModelId::PowerLaw => p[0] * x.powf(p[1]),
            ModelId::LinearThroughOrigin => p[0] * x,
            ModelId::HillLangmuir => p[0] / (1.0 + (x / p[1]).powf(p[2])) + p[3],
            ModelId::DampedCosine => {
                p[0] * (2.0 * PI * p[1] * x + p[3]).cos() * (-x / p[2]).exp() + p[4]
            }
        }
    }

    /// Analytic gradient with respect to the parameters, written into `g`.
    pub fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        match self {
            ModelId::Lorentzian => {
                let u = (x - p[1]) / p[2];
                let d = 1.0 + u * u;
                g[0] = 1.0 / d;
                let common = 2.0 * p[0] * u / (d * d);
                g[1] = common / p[2];
                g[2] = common * u / p[2];
            }
            ModelId::StretchedExp => {
                if x <= 0.0 {
                    // (x/T)^c → 0 with vanishing derivatives for c > 0.
                    g[0] = if x == 0.0 { 1.0 } else { (-(x / p[1]).powf(p[2])).exp() };
                    g[1] = 0.0;
                    g[2] = 0.0;
                    return;
                }
                let r = x / p[1];
                let rc = r.powf(p[2]);
                let e = (-rc).exp();
                g[0] = e;
                g[1] = p[0] * e * rc * p[2] / p[1];
                g[2] = -p[0] * e * rc * r.ln();
            }
            ModelId::PowerLaw => {
                let xs = x.powf(p[1]);
                g[0] = xs;
                g[1] = p[0] * xs * x.ln();
            }
            ModelId::LinearThroughOrigin => g[0] = x,
            ModelId::HillLangmuir => {
                let r = x / p[1];
                let rn = if x > 0.0 { r.powf(p[2]) } else { 0.0 };
                let d = 1.0 + rn;
                g[0] = 1.0 / d;
                g[1] = p[0] * rn * p[2] / (p[1] * d * d);
                g[2] = if x > 0.0 { -p[0] * rn * r.ln() / (d * d) } else { 0.0 };
                g[3] = 1.0;
            }
            ModelId::DampedCosine => {
                let arg = 2.0 * PI * p[1] * x + p[3];
                let e = (-x / p[2]).exp();
                let (s, c) = arg.sin_cos();
                g[0] = c * e;
                g[1] = -p[0] * s * e * 2.0 * PI * x;
                g[2] = p[0] * c * e * x / (p[2] * p[2]);
                g[3] = -p[0] * s * e;
                g[4] = 1.0;
            }
        }
    }

    /// Starting point from the data alone.
    pub fn initial_guess(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, FitError> {
        let n = x.len();
        if n == 0 {
            return Err(FitError::InvalidInput("no data".into()));
        }
        let (imax, ymax) = argmax(y);
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
        let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
        let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(match self {
            ModelId::Lorentzian => {
                // Width from the count of points above half maximum.
                let half = 0.5 * ymax;
                let above: Vec<f64> = x.iter().zip(y).filter(|(_, &v)| v >= half).map(|(&xi, _)| xi).collect();
                let lo = above.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = above.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let spacing = (xmax - xmin) / (n.max(2) - 1) as f64;
                let w = (0.5 * (hi - lo)).max(spacing);
                vec![ymax, x[imax], w]
            }
            ModelId::StretchedExp => {
                let a = y[x.iter().enumerate().fold(0, |b, (i, &v)| if v < x[b] { i } else { b })];
                let a = if a > 0.0 { a } else { ymax };
                // Regress ln(−ln(y/A)) on ln x over usable points.
                let pts: Vec<(f64, f64)> = x
                    .iter()
                    .zip(y)
                    .filter_map(|(&xi, &yi)| {
                        let r = yi / (a * 1.0001);
                        (xi > 0.0 && r > 0.0 && r < 1.0).then(|| (xi.ln(), (-r.ln()).ln()))
                    })
                    .collect();
                match linreg(&pts) {
                    Some((slope, icpt)) if slope > 0.05 => {
                        let c = slope.min(4.0);
                        vec![a, (-icpt / slope).exp(), c]
                    }
                    _ => vec![a, 0.5 * (xmin + xmax).max(f64::MIN_POSITIVE), 1.0],
                }
            }
            ModelId::PowerLaw => {
                let pts: Vec<(f64, f64)> = x
                    .iter()
                    .zip(y)
                    .filter(|(&xi, &yi)| xi > 0.0 && yi > 0.0)
                    .map(|(&xi, &yi)| (xi.ln(), yi.ln()))
                    .collect();
                let (s, icpt) = linreg(&pts).ok_or_else(|| {
                    FitError::InvalidInput("power law needs two positive points".into())
                })?;
                vec![icpt.exp(), s]
            }
            ModelId::LinearThroughOrigin => {
                let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                let sxx: f64 = x.iter().map(|a| a * a).sum();
                vec![if sxx > 0.0 { sxy / sxx } else { 0.0 }]
            }
            ModelId::HillLangmuir => {
                // Kd at the concentration closest to the midpoint of the contrast range.
                let mid = 0.5 * (ymax + ymin);
                let k = y
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - mid).abs().total_cmp(&(b.1 - mid).abs()))
                    .map(|(i, _)| i)
                    .unwrap();
                let kd = if x[k] > 0.0 { x[k] } else { xmax.max(f64::MIN_POSITIVE) };
                vec![(ymax - ymin).max(f64::MIN_POSITIVE), kd, 1.0, ymin]
            }
            ModelId::DampedCosine => {
                let mean = y.iter().sum::<f64>() / n as f64;
                let amp = 0.5 * (ymax - ymin);
                // Frequency from mean-crossings.
                let crossings = y.windows(2).filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0).count();
                let span = (xmax - xmin).max(f64::MIN_POSITIVE);
                let f = (crossings as f64 / (2.0 * span)).max(1.0 / span);
                let phi = if y[0] >= mean { 0.0 } else { PI };
                vec![amp, f, 10.0 * span, phi, mean]
            }
        })
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = FitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match key.as_str() {
            "lorentzian" => ModelId::Lorentzian,
            "stretchedexp" | "stretchedexponential" => ModelId::StretchedExp,
            "powerlaw" => ModelId::PowerLaw,
            "linear" | "linearthroughorigin" => ModelId::LinearThroughOrigin,
            "hill" | "hilllangmuir" => ModelId::HillLangmuir,
            "dampedcosine" => ModelId::DampedCosine,
            _ => return Err(FitError::UnknownModel(s.to_string())),
        })
    }
}

fn argmax(y: &[f64]) -> (usize, f64) {
    y.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b })
}

/// Ordinary least-squares line; returns (slope, intercept).
pub(crate) fn linreg(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in ModelId::ALL {
            assert_eq!(m.name().parse::<ModelId>().unwrap(), m);
            assert_eq!(m.param_names().len(), m.default_bounds().len());
            assert_eq!(m.param_units().len(), m.n_params());
        }
        assert!("gaussian".parse::<ModelId>().is_err());
        assert_eq!("Stretched-Exp".parse::<ModelId>().unwrap(), ModelId::StretchedExp);
    }

    #[test]
    fn hill_equals_occupancy_form() {
        let p = [0.1195, 1.69e-5, 0.78, 0.0272];
        for c in [1e-7f64, 1.69e-5, 1e-3, 0.1] {
            let r: f64 = (c / p[1]).powf(p[2]);
            let theta = r / (1.0 + r);
            let alt = p[0] * (1.0 - theta) + p[3];
            assert!((ModelId::HillLangmuir.eval(&p, c) - alt).abs() < 1e-15);
        }
        assert!((ModelId::HillLangmuir.eval(&p, 1.69e-5) - (p[0] / 2.0 + p[3])).abs() < 1e-15);
    }
}
