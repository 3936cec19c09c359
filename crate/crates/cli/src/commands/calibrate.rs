// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::Args;
use spinforge_core::engine::{calibrate_noise, CalibrationTargets, EngineError, NoiseCalibration};

use crate::io::{json_text, write_atomic};
use crate::{units, CliError};

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Target Hahn-echo coherence time, e.g. 45ns.
    #[arg(long, value_parser = units::time, default_value = "45ns")]
    pub t2: f64,
    /// Target power-law exponent s of T2(N) = t2·N^s (dimensionless).
    #[arg(long, default_value_t = 0.79)]
    pub exponent: f64,
    /// Pulse counts to match, comma separated (default 1,2,4,…,1024).
    #[arg(long, value_delimiter = ',')]
    pub counts: Vec<u32>,
    /// Calibration JSON to write; usable as `run --noise`.
    #[arg(long, value_name = "FILE", default_value = "noise.json")]
    pub out: PathBuf,
}

fn report(cal: &NoiseCalibration, targets: &CalibrationTargets) -> serde_json::Value {
    serde_json::json!({
        "targets": targets,
        "model": cal.model,
        "a_s": cal.a,
        "s": cal.s,
        "t2": cal.t2.iter().map(|(n, t)| serde_json::json!({ "n": n, "t2_s": t })).collect::<Vec<_>>(),
        "reachable_exponent_band": [cal.band.0, cal.band.1],
        "feasible": cal.feasible,
        "rss": cal.rss,
    })
}

/// Writes the calibration. An unreachable exponent still writes the closest
/// model (marked infeasible) and exits with a runtime error.
pub fn execute(a: &CalibrateArgs) -> Result<(), CliError> {
    let mut targets = CalibrationTargets::new(a.t2, a.exponent);
    if !a.counts.is_empty() {
        targets.pulse_counts = a.counts.clone();
    }
    match calibrate_noise(&targets) {
        Ok(cal) => {
            let text = json_text(&report(&cal, &targets))?;
            write_atomic(&a.out, text.as_bytes())?;
            print!("{text}");
            Ok(())
        }
        Err(EngineError::Infeasible {
            target,
            band_lo,
            band_hi,
            closest,
            best,
        }) => {
            let text = json_text(&report(&best, &targets))?;
            write_atomic(&a.out, text.as_bytes())?;
            print!("{text}");
            Err(CliError::Runtime(format!(
                "exponent {target} is outside the band [{band_lo:.3}, {band_hi:.3}] a single Lorentzian bath reaches; \
                 closest model (s = {closest:.3}) written to {}",
                a.out.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}
