// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Unit-suffixed quantity parsing.
//!
//! One lexer serves both the pulse-sequence language and command-line flags,
//! so `16ns` means the same thing in a `.pseq` file and in `--tau 16ns`.
//! All values are converted to SI base units (s, Hz, T, W, mol/L, rad).

use std::fmt;

use thiserror::Error;

/// Physical dimension of a parsed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Time,
    Frequency,
    Field,
    Power,
    Angle,
    Concentration,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Field => "magnetic field",
            Dimension::Power => "power",
            Dimension::Angle => "angle",
            Dimension::Concentration => "concentration",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("invalid number '{0}'")]
    InvalidNumber(String),
    #[error("unknown unit '{unit}' for {dim}")]
    UnknownUnit { unit: String, dim: Dimension },
    #[error("missing unit for {0}")]
    MissingUnit(Dimension),
}

/// Unit table: suffix, dimension, scale to SI.
const UNITS: &[(&str, Dimension, f64)] = &[
    ("ps", Dimension::Time, 1e-12),
    ("ns", Dimension::Time, 1e-9),
    ("us", Dimension::Time, 1e-6),
    ("µs", Dimension::Time, 1e-6),
    ("ms", Dimension::Time, 1e-3),
    ("s", Dimension::Time, 1.0),
    ("Hz", Dimension::Frequency, 1.0),
    ("kHz", Dimension::Frequency, 1e3),
    ("MHz", Dimension::Frequency, 1e6),
    ("GHz", Dimension::Frequency, 1e9),
    ("T", Dimension::Field, 1.0),
    ("mT", Dimension::Field, 1e-3),
    ("uT", Dimension::Field, 1e-6),
    ("µT", Dimension::Field, 1e-6),
    ("nT", Dimension::Field, 1e-9),
    ("W", Dimension::Power, 1.0),
    ("mW", Dimension::Power, 1e-3),
    ("deg", Dimension::Angle, std::f64::consts::PI / 180.0),
    ("rad", Dimension::Angle, 1.0),
    ("M", Dimension::Concentration, 1.0),
    ("mM", Dimension::Concentration, 1e-3),
    ("uM", Dimension::Concentration, 1e-6),
    ("µM", Dimension::Concentration, 1e-6),
    ("nM", Dimension::Concentration, 1e-9),
];

/// Scale factor to SI for `unit` in dimension `dim`, if the pair is known.
pub fn unit_scale(unit: &str, dim: Dimension) -> Option<f64> {
    UNITS
        .iter()
        .find(|(u, d, _)| *u == unit && *d == dim)
        .map(|&(_, _, s)| s)
}

/// Every unit suffix accepted for `dim`, in table order.
pub fn units_for(dim: Dimension) -> Vec<&'static str> {
    UNITS.iter().filter(|(_, d, _)| *d == dim).map(|&(u, _, _)| u).collect()
}

/// Splits `text` into its leading numeric literal and the trailing suffix.
///
/// The numeric part accepts an optional sign, digits, a decimal point and an
/// exponent (`1.5e-3`). An `e` is only taken as an exponent when followed by
/// a digit (optionally signed), so `5e` is number `5` with unit `e`.
pub fn split_number(text: &str) -> (&str, &str) {
    let b = text.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    text.split_at(i)
}

/// Parses a bare number (no unit).
pub fn parse_number(text: &str) -> Result<f64, UnitError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| UnitError::InvalidNumber(text.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(UnitError::InvalidNumber(text.to_string()))
    }
}

/// Parses `"16ns"`, `"78mT"`, `"15.626MHz"` into SI units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    let (num, unit) = split_number(text);
    if num.is_empty() || num == "+" || num == "-" {
        return Err(UnitError::InvalidNumber(text.to_string()));
    }
    let value = parse_number(num)?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(UnitError::MissingUnit(dim));
    }
    let scale = unit_scale(unit, dim).ok_or_else(|| UnitError::UnknownUnit {
        unit: unit.to_string(),
        dim,
    })?;
    Ok(value * scale)
}

/// Like [`parse_quantity`] but a bare number is accepted as already in SI.
pub fn parse_quantity_or_si(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    match parse_quantity(text, dim) {
        Err(UnitError::MissingUnit(_)) => parse_number(text),
        other => other,
    }
}
