// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};

use super::state::C64;
use super::{EngineError, PairModel};

fn collective_sx() -> Matrix4<C64> {
    let half = C64::new(0.5, 0.0);
    let sx = Matrix2::new(C64::default(), half, half, C64::default());
    let id = Matrix2::<C64>::identity();
    sx.kronecker(&id) + id.kronecker(&sx)
}

/// Readout probability of a spin pair started in |↑↓⟩ after collective
/// resonant drive `Ω(S1x + S2x)` for time `t`.
///
/// Propagates by full 4×4 matrix exponentiation, independent of
/// [`pair_rabi_closed_form`].
pub fn pair_rabi(rabi_frequency: f64, t: f64) -> Result<f64, EngineError> {
    if !(rabi_frequency >= 0.0) || !(t >= 0.0) {
        return Err(EngineError::InvalidParameter(format!(
            "pair_rabi needs Ω ≥ 0 and t ≥ 0 (Ω = {rabi_frequency}, t = {t})"
        )));
    }
    let model = PairModel::default();
    let h = collective_sx() * C64::new(2.0 * PI * rabi_frequency, 0.0);
    let u = (h * C64::new(0.0, -t)).exp();
    let mut psi0 = nalgebra::Vector4::<C64>::zeros();
    psi0[model.readout_index] = C64::new(1.0, 0.0);
    let psi = u * psi0;
    Ok(psi[model.readout_index].norm_sqr())
}

/// `3/8 + ½cos(2πΩt) + ⅛cos(4πΩt)`, i.e. `cos⁴(πΩt)`.
pub fn pair_rabi_closed_form(rabi_frequency: f64, t: f64) -> f64 {
    let x = 2.0 * PI * rabi_frequency * t;
    0.375 + 0.5 * x.cos() + 0.125 * (2.0 * x).cos()
}
