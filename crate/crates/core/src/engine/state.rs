// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix};
use num_complex::Complex64;

use super::EngineError;

pub(crate) type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = -1e-10;

/// Density matrix of a spin-½ (dimension 2) or a spin-½ pair (dimension 4).
///
/// Basis order is |↑⟩, |↓⟩ for one spin and |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩ for the
/// pair. The readout state is |↑⟩ (index 0) or |↑↓⟩ (index 1).
#[derive(Debug, Clone, PartialEq)]
pub enum DensityMatrix {
    Qubit(Matrix2<C64>),
    Pair(Matrix4<C64>),
}

/// Index of the optically read-out basis state for dimension `D`.
pub(crate) const fn readout_index(d: usize) -> usize {
    if d == 2 {
        0
    } else {
        1
    }
}

pub(crate) fn pure_projector<const D: usize>(index: usize) -> SMatrix<C64, D, D> {
    let mut m = SMatrix::<C64, D, D>::zeros();
    m[(index, index)] = C64::new(1.0, 0.0);
    m
}

pub(crate) fn mixed<const D: usize>() -> SMatrix<C64, D, D> {
    SMatrix::<C64, D, D>::identity() * C64::new(1.0 / D as f64, 0.0)
}

/// `P |r⟩⟨r| + (1 − P) I/D`, the state after optical (re)polarisation.
pub(crate) fn polarized<const D: usize>(polarization: f64) -> SMatrix<C64, D, D> {
    pure_projector::<D>(readout_index(D)) * C64::new(polarization, 0.0)
        + mixed::<D>() * C64::new(1.0 - polarization, 0.0)
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        match self {
            DensityMatrix::Qubit(_) => 2,
            DensityMatrix::Pair(_) => 4,
        }
    }

    /// Fully polarised readout state: |↑⟩⟨↑| or |↑↓⟩⟨↑↓|.
    pub fn polarized(dim: usize) -> Result<Self, EngineError> {
        Self::partially_polarized(dim, 1.0)
    }

    pub fn partially_polarized(dim: usize, polarization: f64) -> Result<Self, EngineError> {
        if !(0.0..=1.0).contains(&polarization) {
            return Err(EngineError::InvalidParameter(format!(
                "polarization must lie in [0, 1], got {polarization}"
            )));
        }
        match dim {
            2 => Ok(DensityMatrix::Qubit(polarized::<2>(polarization))),
            4 => Ok(DensityMatrix::Pair(polarized::<4>(polarization))),
            d => Err(EngineError::InvalidParameter(format!("unsupported dimension {d}"))),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, EngineError> {
        Self::partially_polarized(dim, 0.0)
    }

    /// Validates and wraps a 2×2 or 4×4 matrix.
    pub fn from_matrix(m: &DMatrix<C64>) -> Result<Self, EngineError> {
        let rho = match (m.nrows(), m.ncols()) {
            (2, 2) => DensityMatrix::Qubit(Matrix2::from_iterator(m.iter().copied())),
            (4, 4) => DensityMatrix::Pair(Matrix4::from_iterator(m.iter().copied())),
            (r, c) => {
                return Err(EngineError::InvalidParameter(format!(
                    "density matrix must be 2x2 or 4x4, got {r}x{c}"
                )))
            }
        };
        rho.check_invariants()?;
        Ok(rho)
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        match self {
            DensityMatrix::Qubit(m) => DMatrix::from_iterator(2, 2, m.iter().copied()),
            DensityMatrix::Pair(m) => DMatrix::from_iterator(4, 4, m.iter().copied()),
        }
    }

    pub fn trace(&self) -> C64 {
        self.to_dmatrix().trace()
    }

    /// Largest |ρ − ρ†| entry.
    pub fn hermiticity_error(&self) -> f64 {
        let m = self.to_dmatrix();
        (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dmatrix();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian to 1e-12, unit trace to 1e-12, eigenvalues ≥ −1e-10.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        let h = self.hermiticity_error();
        if h > HERMITIAN_TOL {
            return Err(EngineError::InvalidState(format!("not Hermitian (error {h:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(EngineError::InvalidState(format!("trace {tr} != 1")));
        }
        let ev = self.min_eigenvalue();
        if ev < POSITIVITY_TOL {
            return Err(EngineError::InvalidState(format!("negative eigenvalue {ev:e}")));
        }
        Ok(())
    }

    /// Population of the optically read-out state.
    pub fn readout_population(&self) -> f64 {
        match self {
            DensityMatrix::Qubit(m) => m[(0, 0)].re,
            DensityMatrix::Pair(m) => m[(1, 1)].re,
        }
    }

    /// Bloch vector (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) of a single spin.
    pub fn bloch(&self) -> Option<[f64; 3]> {
        match self {
            DensityMatrix::Qubit(m) => {
                let r01 = m[(0, 1)];
                Some([2.0 * r01.re, -2.0 * r01.im, m[(0, 0)].re - m[(1, 1)].re])
            }
            DensityMatrix::Pair(_) => None,
        }
    }
}

/// Cheap per-event sanity check used under `debug_assertions`.
pub(crate) fn debug_check<const D: usize>(m: &SMatrix<C64, D, D>) -> bool {
    let mut herm = 0.0f64;
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..D {
        tr += m[(i, i)];
        for j in 0..D {
            herm = herm.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let psd = if D == 2 {
        let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
        det >= -1e-10 && m[(0, 0)].re >= -1e-10 && m[(1, 1)].re >= -1e-10
    } else {
        (0..D).all(|i| m[(i, i)].re >= -1e-10)
    };
    herm <= 1e-10 && (tr.re - 1.0).abs() <= 1e-10 && tr.im.abs() <= 1e-10 && psd
}
