// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Checks against references computed here, independently of the library.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spinforge_core::analysis::{fit, FitData, FitOptions, ModelId};
use spinforge_core::engine::{
    coherence_analytic, evolve, pair_rabi, pair_rabi_closed_form, DecouplingSequence, DensityMatrix, DriveParams,
    EvolveConfig, NoiseModel, PulseMode,
};
use spinforge_core::pulseq::{compile, corpus, parse_def, Bindings, CompileOptions, PulseCalibration};
use spinforge_core::readout::{emit_series, referenced_series, Combine, ReadoutModel, ReferencingScheme, SchemeKind};

type C = num_complex::Complex64;

/// |↑↓⟩ population under `Ω(S1x + S2x)`, by RK4 on the Schrödinger equation.
fn pair_rabi_rk4(omega_hz: f64, t: f64) -> f64 {
    // S1x + S2x in |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩ order.
    let h = [
        [0.0, 0.5, 0.5, 0.0],
        [0.5, 0.0, 0.0, 0.5],
        [0.5, 0.0, 0.0, 0.5],
        [0.0, 0.5, 0.5, 0.0],
    ];
    let w = 2.0 * PI * omega_hz;
    let deriv = |psi: &[C; 4]| {
        let mut d = [C::default(); 4];
        for i in 0..4 {
            for j in 0..4 {
                d[i] += C::new(0.0, -w * h[i][j]) * psi[j];
            }
        }
        d
    };
    let steps = ((t * w * 200.0).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let mut psi = [C::default(), C::new(1.0, 0.0), C::default(), C::default()];
    let axpy = |a: &[C; 4], k: &[C; 4], s: f64| std::array::from_fn::<C, 4, _>(|i| a[i] + k[i] * s);
    for _ in 0..steps {
        let k1 = deriv(&psi);
        let k2 = deriv(&axpy(&psi, &k1, dt / 2.0));
        let k3 = deriv(&axpy(&psi, &k2, dt / 2.0));
        let k4 = deriv(&axpy(&psi, &k3, dt));
        for i in 0..4 {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    psi[1].norm_sqr()
}

#[test]
fn pair_rabi_matches_independent_propagation() {
    let omega = 9.2e6 * 30f64.sqrt();
    for k in 0..=200 {
        let t = k as f64 * 1e-9;
        let lib = pair_rabi(omega, t).unwrap();
        let rk = pair_rabi_rk4(omega, t);
        assert!((lib - rk).abs() < 1e-9, "t = {t}: {lib} vs {rk}");
        assert!((pair_rabi_closed_form(omega, t) - rk).abs() < 1e-9);
    }
}

/// `χ = ½Δ² Σᵢⱼ yᵢyⱼ ∫∫_cells e^{−|t−t'|/τc}`, with the cell integrals in
/// closed form for an ideal-pulse CPMG-N train of total length `t`.
fn chi_cell_sum(n: u32, t: f64, noise: &NoiseModel) -> f64 {
    let cells = 2 * n as usize;
    let h = t / cells as f64;
    let tc = noise.tau_c;
    let sign = |i: usize| if ((i + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    // ∫₀ʰ∫₀ʰ e^{−|u−v|/τc} and the cross term between cells m apart.
    let x = h / tc;
    let same = 2.0 * tc * tc * (x - 1.0 + (-x).exp());
    let cross = |m: usize| tc * tc * (-((m as f64 - 1.0) * x)).exp() * (1.0 - (-x).exp()).powi(2);
    let mut sum = 0.0;
    for i in 0..cells {
        for j in 0..cells {
            let w = sign(i) * sign(j);
            sum += w * if i == j { same } else { cross(i.abs_diff(j)) };
        }
    }
    0.5 * noise.delta * noise.delta * sum
}

#[test]
fn cpmg_coherence_matches_cell_sum() {
    for (delta, tau_c) in [(5e6, 2e-8), (5e6, 2e-7), (1.148e9, 1e-5)] {
        let noise = NoiseModel::new(delta, tau_c).unwrap();
        for n in [1u32, 2, 8, 32] {
            for t in [1e-8, 1e-7, 1e-6, 3e-6] {
                let lib = coherence_analytic(DecouplingSequence::Cpmg(n), t, &noise).unwrap();
                let want = (-chi_cell_sum(n, t, &noise)).exp();
                assert!((lib - want).abs() < 1e-6 * want.max(1e-12) + 1e-12, "N={n} T={t}: {lib} vs {want}");
            }
        }
    }
}

/// Trajectory average of the Hahn-echo coherence with instantaneous pulses.
fn hahn_monte_carlo(noise: &NoiseModel, total: f64, trajectories: usize, seed: u64) -> f64 {
    let def = parse_def(corpus::ECHO, "echo").unwrap();
    let b: Bindings = [("tau".to_string(), total / 2.0)].into_iter().collect();
    let s = compile(&def, &b, &PulseCalibration::default(), CompileOptions::default()).unwrap();
    let mut cfg = EvolveConfig::monte_carlo(DriveParams::from_pi_duration(10e-9), *noise, trajectories, seed);
    cfg.pulse_mode = PulseMode::Ideal;
    let p = evolve(&DensityMatrix::polarized(2).unwrap(), &s, &cfg).unwrap().readouts[0];
    1.0 - 2.0 * p
}

/// Tighter of the two convergence levels: 10⁵ trajectories within 1 %.
#[test]
fn monte_carlo_hahn_converges_at_1e5_trajectories() {
    let regimes = [
        ("fast", NoiseModel::new(5e6, 2e-8).unwrap(), 4e-6),
        ("intermediate", NoiseModel::new(5e6, 2e-7).unwrap(), 2e-6),
        ("slow", NoiseModel::new(1e6, 1e-5).unwrap(), 4e-6),
    ];
    for (name, noise, t_max) in regimes {
        let mut worst: f64 = 0.0;
        for k in 1..=6 {
            let t = t_max * k as f64 / 6.0;
            let mc = hahn_monte_carlo(&noise, t, 100_000, 11 + k);
            let w = coherence_analytic(DecouplingSequence::Hahn, t, &noise).unwrap();
            worst = worst.max((mc - w).abs());
        }
        assert!(worst <= 0.01, "{name}: max deviation {worst}");
    }
}

#[test]
fn equal_streams_ratio_concentrates_at_one() {
    let m = ReadoutModel::default();
    let ratio = ReferencingScheme::new(SchemeKind::MwOff, Combine::Ratio).unwrap();
    let stats = |avg: u64| {
        let p = vec![0.3; 5000];
        let s = emit_series(&p, &m, avg, 5, 0).unwrap();
        let r = emit_series(&p, &m, avg, 5, 10_000).unwrap();
        let c = referenced_series(&s, &r, ratio).unwrap();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c.len() - 1) as f64;
        (mean, var)
    };
    let (m1, v1) = stats(10);
    let (m2, v2) = stats(1000);
    assert!((m1 - 1.0).abs() < 4.0 * (v1 / 5000.0).sqrt());
    assert!((m2 - 1.0).abs() < 4.0 * (v2 / 5000.0).sqrt());
    // Poisson: var ≈ 2/(averages·R0(1 − εp)).
    let want = 2.0 / (10.0 * m.mean_counts(0.3));
    assert!((v1 / want - 1.0).abs() < 0.1, "{v1} vs {want}");
    assert!((v1 / v2 / 100.0 - 1.0).abs() < 0.1, "{}", v1 / v2);
}

/// Truth, sampling grid and noise-free curve for each model.
fn robustness_case(model: ModelId) -> (Vec<f64>, Vec<f64>) {
    let p = match model {
        ModelId::Lorentzian => vec![5.83e-4, 2.19e9, 12.9e6],
        ModelId::StretchedExp => vec![0.004, 25.87e-6, 0.665],
        ModelId::PowerLaw => vec![33e-9, 0.79],
        ModelId::LinearThroughOrigin => vec![9.2e6],
        ModelId::HillLangmuir => vec![0.1195, 1.69e-5, 0.78, 0.0272],
        ModelId::DampedCosine => vec![0.3, 50e6, 400e-9, 0.2, 0.5],
    };
    let x: Vec<f64> = (0..80)
        .map(|i| {
            let u = i as f64 / 79.0;
            match model {
                ModelId::Lorentzian => 2.0e9 + 0.4e9 * u,
                ModelId::StretchedExp => 2e-6 * (90f64).powf(u),
                ModelId::PowerLaw => 2f64.powf(10.0 * u),
                ModelId::LinearThroughOrigin => 1.0 + 5.0 * u,
                ModelId::HillLangmuir => 1e-7 * 1e6f64.powf(u),
                ModelId::DampedCosine => 400e-9 * u,
            }
        })
        .collect();
    (p, x)
}

#[test]
fn fits_are_honest_under_one_percent_noise() {
    for model in ModelId::ALL {
        let (truth, x) = robustness_case(model);
        let clean: Vec<f64> = x.iter().map(|&xi| model.eval(&truth, xi)).collect();
        let mut covered = vec![0usize; truth.len()];
        let trials = 200;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let g = Normal::new(0.0, 0.01).unwrap();
            let y: Vec<f64> = clean.iter().map(|v| v * (1.0 + g.sample(&mut rng))).collect();
            let sigma: Vec<f64> = clean.iter().map(|v| 0.01 * v.abs()).collect();
            let start: Vec<f64> = truth.iter().map(|v| v * 1.05).collect();
            let r = fit(model, &FitData::new(x.clone(), y).with_sigma(sigma), &FitOptions::default().start(start))
                .unwrap_or_else(|e| panic!("{model:?} seed {seed}: {e}"));
            for (i, (est, se)) in r.estimates.iter().zip(&r.std_errors).enumerate() {
                if (est - truth[i]).abs() <= 3.0 * se {
                    covered[i] += 1;
                }
            }
        }
        for (i, c) in covered.iter().enumerate() {
            let rate = *c as f64 / trials as f64;
            assert!(rate >= 0.95, "{model:?} {}: {rate}", model.param_names()[i]);
        }
    }
}
