// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::noise::ou_g;
use super::{EngineError, NoiseModel};

const REL_TOL: f64 = 1e-6;
const MAX_INTERVALS: usize = 200_000;

/// π-pulse train with ideal pulses at `t_k = (k − ½)T/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecouplingSequence {
    Hahn,
    Cpmg(u32),
}

impl DecouplingSequence {
    pub fn pulses(&self) -> u32 {
        match *self {
            DecouplingSequence::Hahn => 1,
            DecouplingSequence::Cpmg(n) => n,
        }
    }
}

/// Autocorrelation `K(u) = ∫ y(t) y(t+u) dt` of the ±1 toggling function of
/// an N-pulse train of total length T.
///
/// `y` is constant on the 2N cells of width `h = T/2N`, so `K` is linear
/// between the grid points `u = m·h`.
#[derive(Debug, Clone)]
pub struct TogglingKernel {
    pub cell: f64,
    /// `K(m·h)` for `m = 0..=2N`.
    pub knots: Vec<f64>,
}

impl TogglingKernel {
    pub fn new(pulses: u32, total: f64) -> Self {
        let cells = 2 * pulses as usize;
        let h = total / cells as f64;
        // Cell signs + − − + + − − … repeat with period 4, so the lag-m sum
        // Σ_j s_j s_{j+m} only needs a count of each residue of j mod 4.
        let sign = |j: usize| if ((j + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let mut knots = Vec::with_capacity(cells + 1);
        for m in 0..=cells {
            let len = cells - m;
            let acc: f64 = (0..4)
                .map(|r| sign(r) * sign(r + m) * ((len + 3 - r) / 4) as f64)
                .sum();
            knots.push(h * acc);
        }
        Self { cell: h, knots }
    }

    pub fn at(&self, u: f64) -> f64 {
        let x = u / self.cell;
        if x <= 0.0 {
            return self.knots[0];
        }
        let m = x.floor() as usize;
        if m + 1 >= self.knots.len() {
            return *self.knots.last().unwrap();
        }
        let f = x - m as f64;
        self.knots[m] * (1.0 - f) + self.knots[m + 1] * f
    }
}

// Gauss–Kronrod 7/15 nodes and weights on [−1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// G7K15 on `[a, b]`: (Kronrod value, |K − G| error estimate, roundoff level).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = r * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        kron += WGK[i] * (f1 + f2);
        abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    let trunc = ((kron - gauss) * r).abs();
    let floor = 50.0 * f64::EPSILON * abs * r.abs();
    (kron * r, trunc, floor)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    trunc: f64,
    floor: f64,
}

impl Piece {
    fn new(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Self {
        let (value, trunc, floor) = gk15(f, a, b);
        Self { a, b, value, trunc, floor }
    }

    fn err(&self) -> f64 {
        self.trunc.max(self.floor)
    }

    /// Splitting only helps while truncation dominates roundoff.
    fn refinable(&self) -> bool {
        self.trunc > self.floor
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |p: &Piece| if p.refinable() { p.trunc } else { -1.0 };
        key(self).total_cmp(&key(other))
    }
}

/// Globally adaptive G7K15 over the given breakpoints.
///
/// Refines the piece with the largest truncation error until the summed
/// error is below `REL_TOL·|I|`. Pieces already at roundoff level are never
/// split; if the answer is roundoff-limited above tolerance that is an error.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, breaks: &[f64]) -> Result<f64, EngineError> {
    let mut heap: BinaryHeap<Piece> = breaks.windows(2).map(|w| Piece::new(&f, w[0], w[1])).collect();
    let mut count = heap.len();
    let (mut total, mut err): (f64, f64) = (
        heap.iter().map(|p| p.value).sum(),
        heap.iter().map(Piece::err).sum(),
    );
    while err > REL_TOL * total.abs() && err > 1e-300 {
        let worst = heap.pop().expect("non-empty");
        if !worst.refinable() || count >= MAX_INTERVALS {
            return Err(EngineError::QuadratureNonConvergence(format!(
                "error estimate {err:e} exceeds {REL_TOL:e} × |{total:e}| after {count} intervals{}",
                if worst.refinable() { "" } else { " (roundoff limited)" }
            )));
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = Piece::new(&f, worst.a, mid);
        let right = Piece::new(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.err() + right.err() - worst.err();
        heap.push(left);
        heap.push(right);
        count += 1;
        if count % 64 == 0 {
            // Re-sum to stop drift in the running totals.
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(Piece::err).sum();
        }
    }
    if !total.is_finite() {
        return Err(EngineError::QuadratureNonConvergence("non-finite integral".into()));
    }
    Ok(total)
}

/// Decoherence exponent `χ(T) = ½∫∫ y(t) y(t′) C(t − t′) dt dt′`.
///
/// Written as `∫₀ᵀ y(t) F(t) dt` with `F(t) = ∫₀ᵗ y(t′) C(t − t′) dt′`. For the
/// exponential `C` the inner integral obeys a one-step recursion across the
/// cells of the toggling function, and the outer integral is done by
/// adaptive quadrature cell by cell. Integrating against the lag kernel `K(u)`
/// instead loses most digits to cancellation once N is large.
pub fn decoherence_exponent(
    seq: DecouplingSequence,
    total: f64,
    noise: &NoiseModel,
) -> Result<f64, EngineError> {
    if !(total > 0.0) || !total.is_finite() {
        return Err(EngineError::InvalidParameter(format!("evolution time must be positive, got {total}")));
    }
    let n = seq.pulses();
    if n == 0 {
        return Err(EngineError::InvalidParameter("pulse count must be at least 1".into()));
    }
    if noise.delta == 0.0 {
        return Ok(0.0);
    }
    let cells = 2 * n as usize;
    let h = total / cells as f64;
    let tau = noise.tau_c;
    let d2 = noise.delta * noise.delta;
    let sign = |j: usize| if ((j + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    // F at the start of each cell.
    let decay = (-h / tau).exp();
    let gain = -d2 * tau * (-h / tau).exp_m1();
    let mut start = Vec::with_capacity(cells);
    let mut fj = 0.0;
    for j in 0..cells {
        start.push(fj);
        fj = fj * decay + sign(j) * gain;
    }
    let integrand = |t: f64| {
        let j = ((t / h) as usize).min(cells - 1);
        let x = t - j as f64 * h;
        let s = sign(j);
        s * (start[j] * (-x / tau).exp() - s * d2 * tau * (-x / tau).exp_m1())
    };
    // F relaxes over τc after each sign flip; graded breakpoints keep the
    // quadrature from stepping over that layer when cells are long.
    let mut breaks = Vec::with_capacity(cells + 1);
    for j in 0..cells {
        let t0 = j as f64 * h;
        breaks.push(t0);
        let mut x = tau / 16.0;
        while x < h {
            breaks.push(t0 + x);
            x *= 4.0;
        }
    }
    breaks.push(total);
    let chi = integrate(integrand, &breaks)?;
    Ok(chi.max(0.0))
}

/// Coherence `W(T) = exp(−χ(T))` under the OU bath.
pub fn coherence_analytic(
    seq: DecouplingSequence,
    total: f64,
    noise: &NoiseModel,
) -> Result<f64, EngineError> {
    Ok((-decoherence_exponent(seq, total, noise)?).exp())
}

/// Hahn-echo exponent `(Δτc)² [T/τc − 3 + 4e^{−T/2τc} − e^{−T/τc}]`.
pub fn hahn_chi_closed_form(noise: &NoiseModel, total: f64) -> f64 {
    (noise.delta * noise.tau_c).powi(2) * ou_g(total / (2.0 * noise.tau_c))
}

/// Evolution time at which the coherence falls to 1/e.
pub fn t2_analytic(seq: DecouplingSequence, noise: &NoiseModel) -> Result<f64, EngineError> {
    if noise.delta == 0.0 {
        return Err(EngineError::NoRoot("no decay without noise".into()));
    }
    let f = |t: f64| decoherence_exponent(seq, t, noise).map(|c| c.ln());
    // χ lies below both its slow-bath (T³/12τcN²·Δ²) and its motional-narrowing
    // (Δ²τcT) asymptote, so the larger of the two crossings is a lower bracket.
    let n = seq.pulses() as f64;
    let (d2, tau) = (noise.delta * noise.delta, noise.tau_c);
    let slow = (12.0 * tau * n * n / d2).cbrt();
    let fast = 1.0 / (d2 * tau);
    let mut lo = slow.max(fast);
    let mut flo = f(lo)?;
    let mut guard = 0;
    while flo > 0.0 {
        // Only reachable through rounding at the crossing itself.
        lo *= 0.5;
        flo = f(lo)?;
        guard += 1;
        if guard > 60 {
            return Err(EngineError::NoRoot("could not bracket from below".into()));
        }
    }
    let mut hi = lo * 2.0;
    let mut fhi = f(hi)?;
    while fhi <= 0.0 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = f(hi)?;
        guard += 1;
        if guard > 400 || !hi.is_finite() {
            return Err(EngineError::NoRoot("could not bracket from above".into()));
        }
    }
    // Illinois false position on (ln T, ln χ).
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (mut fa, mut fb) = (flo, fhi);
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c.exp())?;
        if (b - a).abs() < 1e-12 || fc.abs() < 1e-12 {
            return Ok(c.exp());
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(((a + b) * 0.5).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_knots() {
        let k = TogglingKernel::new(1, 2.0);
        assert_eq!(k.knots, vec![2.0, -1.0, 0.0]);
        assert_eq!(k.at(0.5), 0.5);
        let k = TogglingKernel::new(2, 4.0);
        // signs + − − +
        assert_eq!(k.knots, vec![4.0, -1.0, -2.0, 1.0, 0.0]);
    }

    #[test]
    fn hahn_closed_form_matches_quadrature() {
        for (delta, tau) in [(1e6, 1e-6), (1.148e9, 10e-6), (3e7, 5e-9), (1e8, 1e-7)] {
            let n = NoiseModel::new(delta, tau).unwrap();
            for t in [1e-9, 4.5e-8, 1e-7, 1e-6, 3e-5] {
                let q = decoherence_exponent(DecouplingSequence::Hahn, t, &n).unwrap();
                let c = hahn_chi_closed_form(&n, t);
                assert!((q - c).abs() <= 1e-6 * c, "Δ={delta} τ={tau} T={t}: {q} vs {c}");
            }
        }
    }

    // Exact double sum over cell pairs: ½ Σ_ij s_i s_j ∫_i∫_j C.
    fn cell_pair_sum(n: u32, total: f64, noise: &NoiseModel) -> f64 {
        let cells = 2 * n as usize;
        let h = total / cells as f64;
        let a = h / noise.tau_c;
        let d2t2 = (noise.delta * noise.tau_c).powi(2);
        let s: Vec<f64> = (0..cells).map(|j| [1.0, -1.0, -1.0, 1.0][j % 4]).collect();
        let mut chi = 0.0;
        for i in 0..cells {
            for j in 0..cells {
                let m = i.abs_diff(j);
                let pair = if m == 0 {
                    2.0 * d2t2 * (a - 1.0 + (-a).exp())
                } else {
                    d2t2 * (1.0 - (-a).exp()).powi(2) * (-(m as f64 - 1.0) * a).exp()
                };
                chi += 0.5 * s[i] * s[j] * pair;
            }
        }
        chi
    }

    #[test]
    fn matches_cell_pair_sum_and_lag_kernel() {
        for (delta, tau) in [(1e7, 1e-6), (3e7, 5e-8), (2e6, 2e-5)] {
            let noise = NoiseModel::new(delta, tau).unwrap();
            for n in [1u32, 2, 3, 8] {
                let t = 2e-6;
                let got = decoherence_exponent(DecouplingSequence::Cpmg(n), t, &noise).unwrap();
                let pairs = cell_pair_sum(n, t, &noise);
                assert!((got - pairs).abs() <= 1e-6 * pairs, "N={n}: {got} vs {pairs}");
                let kernel = TogglingKernel::new(n, t);
                let breaks: Vec<f64> = (0..kernel.knots.len()).map(|m| m as f64 * kernel.cell).collect();
                let lag = integrate(|u| noise.autocorrelation(u) * kernel.at(u), &breaks).unwrap();
                assert!((got - lag).abs() <= 1e-5 * pairs, "N={n}: {got} vs lag {lag}");
            }
        }
    }

    #[test]
    fn large_pulse_counts_converge() {
        let noise = NoiseModel::new(1.148e9, 10e-6).unwrap();
        for n in [256u32, 1024] {
            let t2 = t2_analytic(DecouplingSequence::Cpmg(n), &noise).unwrap();
            // Slow bath: T2 grows as N^{2/3}.
            let slow = 45e-9 * (n as f64).powf(2.0 / 3.0);
            assert!((t2 / slow - 1.0).abs() < 0.02, "N={n}: {t2}");
        }
    }

    #[test]
    fn zero_noise_is_coherent() {
        let n = NoiseModel::new(0.0, 1e-6).unwrap();
        assert_eq!(coherence_analytic(DecouplingSequence::Cpmg(8), 1e-3, &n).unwrap(), 1.0);
        assert!(t2_analytic(DecouplingSequence::Hahn, &n).is_err());
    }

    #[test]
    fn slow_bath_t2_is_45ns() {
        let tau = 10e-6;
        let t2: f64 = 45e-9;
        let delta = (12.0 * tau / t2.powi(3)).sqrt();
        assert!((delta - 1.15e9).abs() / 1.15e9 < 0.01);
        let n = NoiseModel::new(delta, tau).unwrap();
        let got = t2_analytic(DecouplingSequence::Hahn, &n).unwrap();
        assert!((got - t2).abs() / t2 < 1e-3, "{got}");
        let w = coherence_analytic(DecouplingSequence::Hahn, got, &n).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-8);
    }
}
