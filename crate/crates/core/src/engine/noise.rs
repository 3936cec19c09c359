// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use rand_distr::StandardNormal;

use super::NoiseModel;

/// `g(a) = 2a − 3 + 4e^{−a} − e^{−2a}`, evaluated without cancellation for small `a`.
///
/// `Δ²τc² g(h/τc)` is the variance of the phase an OU process accumulates over
/// a window `h` given its starting value, and the Hahn-echo decoherence
/// exponent is `(Δτc)² g(T/2τc)`.
pub fn ou_g(a: f64) -> f64 {
    if a < 0.1 {
        // Σ_{k≥3} (−1)^k (4 − 2^k) a^k / k!
        let mut sum = 0.0;
        let mut term = a * a / 2.0; // a^k / k! at k = 2
        let mut pow2 = 4.0;
        for k in 3..30 {
            term *= a / k as f64;
            pow2 *= 2.0;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let t = sign * (4.0 - pow2) * term;
            sum += t;
            if t.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        2.0 * a - 3.0 + 4.0 * (-a).exp() - (-2.0 * a).exp()
    }
}

/// One Ornstein–Uhlenbeck trajectory δ(t), rad/s.
///
/// [`advance`](OuProcess::advance) samples the end value and the integral
/// `∫δ dt` over the step jointly from their exact bivariate Gaussian law, so
/// any step length is exact.
#[derive(Debug, Clone)]
pub struct OuProcess {
    delta: f64,
    tau_c: f64,
    value: f64,
}

impl OuProcess {
    /// Starts from the stationary distribution N(0, Δ²).
    pub fn stationary<R: Rng + ?Sized>(noise: &NoiseModel, rng: &mut R) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Self {
            delta: noise.delta,
            tau_c: noise.tau_c,
            value: noise.delta * z,
        }
    }

    pub fn starting_at(noise: &NoiseModel, value: f64) -> Self {
        Self {
            delta: noise.delta,
            tau_c: noise.tau_c,
            value,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Advances by `h` seconds and returns the accumulated phase `∫δ dt` (rad).
    pub fn advance<R: Rng + ?Sized>(&mut self, h: f64, rng: &mut R) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        if self.delta == 0.0 {
            return self.value * h;
        }
        let tau = self.tau_c;
        let a = h / tau;
        let e = (-a).exp();
        let one_m_e = -(-a).exp_m1();
        let d2 = self.delta * self.delta;

        let var_v = d2 * one_m_e * (1.0 + e);
        let mean_v = self.value * e;
        let mean_i = self.value * tau * one_m_e;

        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);

        let sd_v = var_v.sqrt();
        let new_value = mean_v + sd_v * z1;
        // I | δ' : regression on the standardized δ' innovation.
        let cov = d2 * tau * one_m_e * one_m_e;
        let cond_var = (d2 * tau * tau * (ou_g(a) - one_m_e.powi(3) / (1.0 + e))).max(0.0);
        let phase = if sd_v > 0.0 {
            mean_i + cov / sd_v * z1 + cond_var.sqrt() * z2
        } else {
            mean_i
        };
        self.value = new_value;
        phase
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    #[test]
    fn g_series_matches_closed_form_at_switch() {
        for a in [0.02f64, 0.05, 0.0999] {
            let closed = 2.0 * a - 3.0 + 4.0 * (-a).exp() - (-2.0 * a).exp();
            let series = ou_g(a);
            assert!((closed - series).abs() < 1e-9 * series.abs().max(1e-6), "{a}");
        }
        let a = 1e-4f64;
        assert!((ou_g(a) - (2.0 / 3.0 * a.powi(3) - 0.5 * a.powi(4))).abs() < 1e-20);
        // Continuous across the branch switch.
        assert!((ou_g(0.1 - 1e-12) - ou_g(0.1)).abs() < 1e-13);
    }

    #[test]
    fn moments_of_joint_step() {
        let noise = NoiseModel::new(2.0e6, 1e-6).unwrap();
        let h = 0.7e-6;
        let start = 1.0e6;
        let n = 200_000;
        let mut rng = substream(11, Domain::Trajectory, 0);
        let (mut sv, mut si, mut svv, mut sii, mut svi) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let mut p = OuProcess::starting_at(&noise, start);
            let i = p.advance(h, &mut rng);
            let v = p.value();
            sv += v;
            si += i;
            svv += v * v;
            sii += i * i;
            svi += v * i;
        }
        let nf = n as f64;
        let (mv, mi) = (sv / nf, si / nf);
        let var_v = svv / nf - mv * mv;
        let var_i = sii / nf - mi * mi;
        let cov = svi / nf - mv * mi;

        let a: f64 = h / noise.tau_c;
        let e = (-a).exp();
        let d2 = noise.delta * noise.delta;
        let tau = noise.tau_c;
        assert!((mv - start * e).abs() < 4.0 * (d2 * (1.0 - e * e) / nf).sqrt());
        assert!((mi - start * tau * (1.0 - e)).abs() < 4.0 * (d2 * tau * tau * ou_g(a) / nf).sqrt());
        assert!((var_v / (d2 * (1.0 - e * e)) - 1.0).abs() < 0.02);
        assert!((var_i / (d2 * tau * tau * ou_g(a)) - 1.0).abs() < 0.02);
        assert!((cov / (d2 * tau * (1.0 - e).powi(2)) - 1.0).abs() < 0.03);
    }

    #[test]
    fn step_splitting_preserves_phase_variance() {
        // Stationary phase variance over T: 2Δ²τ²(T/τ − 1 + e^{−T/τ}).
        let noise = NoiseModel::new(1.0e6, 2e-6).unwrap();
        let t_total: f64 = 3e-6;
        let expect = 2.0 * (noise.delta * noise.tau_c).powi(2)
            * (t_total / noise.tau_c - 1.0 + (-t_total / noise.tau_c).exp());
        for steps in [1usize, 7] {
            let n = 100_000;
            let mut rng = substream(5, Domain::Trajectory, steps as u64);
            let mut s2 = 0.0;
            for _ in 0..n {
                let mut p = OuProcess::stationary(&noise, &mut rng);
                let mut phi = 0.0;
                for _ in 0..steps {
                    phi += p.advance(t_total / steps as f64, &mut rng);
                }
                s2 += phi * phi;
            }
            let var = s2 / n as f64;
            assert!((var / expect - 1.0).abs() < 0.02, "steps {steps}: {var} vs {expect}");
        }
    }
}
