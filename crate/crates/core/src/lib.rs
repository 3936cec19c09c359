// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and analysis toolkit for optically addressable spin-½ defects.
//!
//! The crate is organised along the measurement chain: [`pulseq`] compiles
//! pulse-sequence text into timed schedules, [`engine`] evolves spin states
//! through them, [`readout`] turns spin populations into photon counts,
//! [`protocols`] runs complete experiments, [`analysis`] fits and transforms
//! the results and [`chemsense`] models paramagnetic-ion titrations.

pub mod analysis;
pub mod chemsense;
pub mod engine;
pub mod protocols;
pub mod pulseq;
pub mod readout;
pub mod rng;
pub mod units;
