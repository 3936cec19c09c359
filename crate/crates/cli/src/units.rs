// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Clap value parsers for unit-suffixed flags.

use spinforge_core::units::{parse_quantity_or_si, Dimension};

fn quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    parse_quantity_or_si(text, dim).map_err(|e| e.to_string())
}

pub fn time(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Time)
}

pub fn frequency(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Frequency)
}

pub fn field(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Field)
}

pub fn power(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Power)
}

pub fn angle(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Angle)
}

pub fn concentration(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Concentration)
}

/// Comma-separated list of quantities, e.g. `2uT,4uT,8uT`.
pub fn list(s: &str, dim: Dimension) -> Result<Vec<f64>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| quantity(p, dim)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes_and_bare_si() {
        assert_eq!(field("78mT").unwrap(), 0.078);
        assert!((time("16ns").unwrap() - 16e-9).abs() < 1e-24);
        assert_eq!(frequency("15.626MHz").unwrap(), 15.626e6);
        assert_eq!(time("2").unwrap(), 2.0);
        assert!(field("78mHz").is_err());
        assert_eq!(list("1uM, 1mM", Dimension::Concentration).unwrap(), vec![1e-6, 1e-3]);
    }
}
