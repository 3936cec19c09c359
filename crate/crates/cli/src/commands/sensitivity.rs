// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use clap::Args;
use spinforge_core::protocols::{casr_sensitivity, CasrConfig};
use spinforge_core::readout::ReadoutModel;
use spinforge_core::units::Dimension;

use crate::io::{json_text, resolve_seed, write_atomic};
use crate::{units, CliError, Common};

#[derive(Debug, Clone, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub common: Common,
    /// RF amplitudes in the linear regime, comma separated, e.g. 2uT,4uT,8uT.
    #[arg(long, default_value = "2.5uT,5uT,10uT,20uT")]
    pub b_rf: String,
    /// RF signal frequency, e.g. 15.626MHz.
    #[arg(long, value_parser = units::frequency, default_value = "15.626MHz")]
    pub nu_rf: f64,
    /// Locked base frequency, e.g. 15.625MHz.
    #[arg(long, value_parser = units::frequency, default_value = "15.625MHz")]
    pub nu_base: f64,
    /// Sampling time per run, e.g. 2s.
    #[arg(long, value_parser = units::time, default_value = "2s")]
    pub duration: f64,
    /// Repetitions averaged per readout point.
    #[arg(long, default_value_t = 1000)]
    pub averages: u64,
    /// Mean photons per bright readout.
    #[arg(long)]
    pub photons: Option<f64>,
    /// Readout contrast ε (fraction).
    #[arg(long)]
    pub contrast: Option<f64>,
    /// Signal-free band for the noise floor, LO,HI, e.g. 1.5kHz,3kHz (default 1.5 to 3 times the beat).
    #[arg(long)]
    pub noise_band: Option<String>,
}

pub fn execute(a: &SensitivityArgs) -> Result<(), CliError> {
    let amplitudes = units::list(&a.b_rf, Dimension::Field).map_err(CliError::Usage)?;
    let beat = (a.nu_rf - a.nu_base).abs();
    let band = match &a.noise_band {
        Some(s) => match units::list(s, Dimension::Frequency).map_err(CliError::Usage)?.as_slice() {
            [lo, hi] if lo < hi => (*lo, *hi),
            _ => return Err(CliError::Usage("--noise-band expects LO,HI with LO < HI".into())),
        },
        None => (1.5 * beat, 3.0 * beat),
    };
    let base_readout = ReadoutModel::default();
    let cfg = CasrConfig {
        nu_rf: a.nu_rf,
        nu_base: a.nu_base,
        duration: a.duration,
        averages: a.averages,
        readout: ReadoutModel {
            photons: a.photons.unwrap_or(base_readout.photons),
            contrast: a.contrast.unwrap_or(base_readout.contrast),
            ..base_readout
        },
        seed: resolve_seed(a.common.seed, None)?,
        ..CasrConfig::default()
    };
    let sens = casr_sensitivity(&cfg, &amplitudes, band)?;
    let out = serde_json::json!({
        "eta_t_per_sqrt_hz": sens.eta,
        "sensitivity": sens,
        "noise_band_hz": [band.0, band.1],
        "amplitudes_t": amplitudes,
        "seed": cfg.seed,
        "config": cfg,
    });
    let text = json_text(&out)?;
    write_atomic(&a.common.out.join("sensitivity.json"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}
