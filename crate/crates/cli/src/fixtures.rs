// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Published data shipped with the tool.

use crate::io::{parse_csv, Table};

/// Published CPMG T2 and stretch exponent for N = 1 … 1024.
pub const CPMG_SUMMARY: &str = include_str!("../fixtures/cpmg_summary.csv");

/// Published Hill-Langmuir titration curve sampled at 1 µM … 100 mM.
pub const HILL_CURVE: &str = include_str!("../fixtures/hill_fixture.csv");

/// One row of the published CPMG table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedCpmgRow {
    pub pulses: u32,
    pub t2: f64,
    pub t2_sd: f64,
    pub stretch: f64,
    pub stretch_fixed: bool,
}

pub fn cpmg_table() -> Vec<PublishedCpmgRow> {
    let t: Table = parse_csv(CPMG_SUMMARY, "cpmg_summary.csv").expect("shipped fixture parses");
    (0..t.rows())
        .map(|i| PublishedCpmgRow {
            pulses: t.columns[0][i] as u32,
            t2: t.columns[1][i],
            t2_sd: t.columns[2][i],
            stretch: t.columns[3][i],
            stretch_fixed: t.columns[5][i] != 0.0,
        })
        .collect()
}

/// Published power-law fit of the CPMG table, `(a [s], a_sd, s, s_sd)`.
pub const PUBLISHED_POWER_LAW: (f64, f64, f64, f64) = (33e-9, 2e-9, 0.79, 0.01);

/// Published Hill-Langmuir parameters and uncertainties, in fit order
/// `(C0, Kd [M], n, A)`.
pub const PUBLISHED_HILL: [(f64, f64); 4] = [(0.1195, 0.0045), (1.69e-5, 4.20e-6), (0.78, 0.11), (0.0272, 0.0020)];
