// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rect,
    Hann,
}

impl Window {
    fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl FromStr for Window {
    type Err = FitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "none" => Ok(Window::Rect),
            "hann" | "hanning" => Ok(Window::Hann),
            _ => Err(FitError::InvalidInput(format!("unknown window '{s}'"))),
        }
    }
}

/// One-sided amplitude spectrum.
///
/// `magnitude[k]` is scaled so that a sinusoid of amplitude `a` sampled over
/// the whole record reads `a` at its bin, for either window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub window: Window,
    pub zero_pad: usize,
    /// Number of input samples.
    pub samples: usize,
    pub dt: f64,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Index of the largest magnitude, ignoring DC.
    pub fn argmax(&self) -> usize {
        let mut best = 1.min(self.magnitude.len() - 1);
        for k in 1..self.magnitude.len() {
            if self.magnitude[k] > self.magnitude[best] {
                best = k;
            }
        }
        best
    }

    /// Largest magnitude within `±half_width` Hz of `f`.
    pub fn peak_near(&self, f: f64, half_width: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.magnitude)
            .filter(|(fr, _)| (**fr - f).abs() <= half_width)
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    }

    /// Strongest bin in `[lo, hi]` Hz, refined by a parabola through its
    /// neighbours. Returns `(frequency, magnitude)`.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let m = &self.magnitude;
        let k = (0..m.len())
            .filter(|&k| self.frequencies[k] >= lo && self.frequencies[k] <= hi)
            .max_by(|&a, &b| m[a].total_cmp(&m[b]))?;
        if k == 0 || k + 1 >= m.len() {
            return Some((self.frequencies[k], m[k]));
        }
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        let den = a - 2.0 * b + c;
        let off = if den != 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
        Some((self.frequencies[k] + off * self.bin_width(), b - 0.25 * (a - c) * off))
    }

    /// RMS magnitude over bins with `lo ≤ f ≤ hi`.
    pub fn rms_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let sel: Vec<f64> = self
            .frequencies
            .iter()
            .zip(&self.magnitude)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, m)| m * m)
            .collect();
        if sel.is_empty() {
            None
        } else {
            Some((sel.iter().sum::<f64>() / sel.len() as f64).sqrt())
        }
    }

    /// `Σ|x|²` reconstructed from the one-sided spectrum of an unpadded
    /// rect-windowed record; equals the time-domain energy by Parseval.
    pub fn parseval_energy(&self) -> f64 {
        let n = self.samples as f64;
        let m = self.magnitude.len();
        let mut e = 0.0;
        for (k, a) in self.magnitude.iter().enumerate() {
            let nyquist = self.samples % 2 == 0 && k == m - 1;
            if k == 0 || nyquist {
                e += (a * n).powi(2);
            } else {
                e += 2.0 * (a * n / 2.0).powi(2);
            }
        }
        e / n
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,magnitude\n");
        for (f, m) in self.frequencies.iter().zip(&self.magnitude) {
            s.push_str(&format!("{f:e},{m:e}\n"));
        }
        s
    }
}

/// Checks that `times` are uniformly spaced and returns the step.
pub fn uniform_step(times: &[f64]) -> Result<f64, FitError> {
    if times.len() < 2 {
        return Err(FitError::InvalidInput("need at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(FitError::NonUniform("time axis must increase".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(FitError::NonUniform(format!(
                "step {} is {:e}, expected {:e}",
                i,
                w[1] - w[0],
                dt
            )));
        }
    }
    Ok(dt)
}

/// Magnitude spectrum of a real, uniformly sampled series.
///
/// The series is windowed, zero-padded to `zero_pad × len` and transformed;
/// only frequencies `0 ≤ f ≤ f_Nyquist` are returned.
pub fn spectrum(series: &[f64], dt: f64, window: Window, zero_pad: usize) -> Result<Spectrum, FitError> {
    if series.len() < 8 {
        return Err(FitError::InvalidInput(format!(
            "spectrum needs at least 8 samples, got {}",
            series.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FitError::InvalidInput(format!("sample interval must be positive, got {dt}")));
    }
    if zero_pad == 0 {
        return Err(FitError::InvalidInput("zero-pad factor must be at least 1".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(FitError::InvalidInput("series contains non-finite values".into()));
    }
    let n = series.len();
    let nfft = n * zero_pad;
    let w = window.weights(n);
    let gain: f64 = w.iter().sum();
    let mut buf: Vec<Complex64> = series
        .iter()
        .zip(&w)
        .map(|(x, wi)| Complex64::new(x * wi, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)).take(nfft - n))
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let half = nfft / 2;
    let df = 1.0 / (nfft as f64 * dt);
    let mut frequencies = Vec::with_capacity(half + 1);
    let mut magnitude = Vec::with_capacity(half + 1);
    for (k, z) in buf.iter().enumerate().take(half + 1) {
        let edge = k == 0 || (nfft % 2 == 0 && k == half);
        let scale = if edge { 1.0 } else { 2.0 };
        frequencies.push(k as f64 * df);
        magnitude.push(scale * z.norm() / gain);
    }
    Ok(Spectrum {
        frequencies,
        magnitude,
        window,
        zero_pad,
        samples: n,
        dt,
    })
}

/// Peak frequency and full width at half maximum.
///
/// Requires the global maximum to exceed 5× the median magnitude; the
/// half-maximum crossings on both sides are found by linear interpolation.
pub fn peak_fwhm(spec: &Spectrum) -> Result<(f64, f64), FitError> {
    let m = &spec.magnitude;
    if m.len() < 3 {
        return Err(FitError::NoPeak("spectrum too short".into()));
    }
    let mut sorted = m.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let k = spec.argmax();
    let peak = m[k];
    let scale = sorted[sorted.len() - 1];
    if !(peak > 5.0 * median) || peak <= 1e-12 * scale {
        return Err(FitError::NoPeak(format!(
            "maximum {peak:e} is not above 5× the median {median:e}"
        )));
    }
    let half = 0.5 * peak;
    let f = &spec.frequencies;
    let mut left = None;
    for i in (0..k).rev() {
        if m[i] < half {
            let t = (half - m[i]) / (m[i + 1] - m[i]);
            left = Some(f[i] + t * (f[i + 1] - f[i]));
            break;
        }
    }
    let mut right = None;
    for i in k + 1..m.len() {
        if m[i] < half {
            let t = (m[i - 1] - half) / (m[i - 1] - m[i]);
            right = Some(f[i - 1] + t * (f[i] - f[i - 1]));
            break;
        }
    }
    // Parabolic refinement of the peak location.
    let fpk = if k > 0 && k + 1 < m.len() {
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        let den = a - 2.0 * b + c;
        let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
        f[k] + off.clamp(-0.5, 0.5) * spec.bin_width()
    } else {
        f[k]
    };
    match (left, right) {
        (Some(l), Some(r)) => Ok((fpk, r - l)),
        _ => Err(FitError::NoPeak("half-maximum crossing falls outside the spectrum".into())),
    }
}
