// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::Args;
use spinforge_core::analysis::{peak_fwhm, spectrum, uniform_step, Window};

use crate::io::{json_text, read_csv, write_atomic};
use crate::svg::{Plot, Series};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    /// Trace CSV with a header row: time column (s) then values.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Value column (default: the second column).
    #[arg(long)]
    pub column: Option<String>,
    /// Window applied before the transform: rect or hann.
    #[arg(long, default_value = "rect")]
    pub window: String,
    /// Zero-padding factor (transform length = factor × samples).
    #[arg(long, default_value_t = 1)]
    pub zero_pad: usize,
    /// Keep the mean instead of subtracting it first.
    #[arg(long)]
    pub keep_mean: bool,
    /// Spectrum CSV to write (frequency_hz, magnitude).
    #[arg(long, value_name = "FILE", default_value = "spectrum.csv")]
    pub out: PathBuf,
    /// Also write an SVG plot next to the CSV, up to this frequency (Hz, e.g. 5kHz).
    #[arg(long, value_parser = crate::units::frequency, value_name = "FREQ")]
    pub svg_max: Option<f64>,
}

pub fn execute(a: &SpectrumArgs) -> Result<(), CliError> {
    let window: Window = a.window.parse().map_err(CliError::from)?;
    let table = read_csv(&a.input)?;
    let t = table.column(Some(&table.headers[0]), "", 0)?;
    let dt = uniform_step(t)?;
    let mut y = table.column(a.column.as_deref(), "y", 1)?.to_vec();
    if !a.keep_mean && !y.is_empty() {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        y.iter_mut().for_each(|v| *v -= mean);
    }
    let spec = spectrum(&y, dt, window, a.zero_pad)?;
    write_atomic(&a.out, spec.to_csv().as_bytes())?;
    let peak = peak_fwhm(&spec);
    if let Err(e) = &peak {
        eprintln!("note: {e}");
    }
    if let Some(fmax) = a.svg_max {
        let keep = spec.frequencies.iter().take_while(|f| **f <= fmax).count();
        let mut p = Plot::new("amplitude spectrum", "frequency (Hz)", "|FFT|").with(Series::line(
            "spectrum",
            spec.frequencies[..keep].to_vec(),
            spec.magnitude[..keep].to_vec(),
        ));
        if let Ok((f, w)) = peak {
            p = p.mark(f, format!("{f:.3} Hz, FWHM {w:.3} Hz"));
        }
        write_atomic(&a.out.with_extension("svg"), p.render().as_bytes())?;
    }
    let summary = serde_json::json!({
        "samples": spec.samples,
        "dt_s": dt,
        "bin_width_hz": spec.bin_width(),
        "window": spec.window,
        "zero_pad": spec.zero_pad,
        "peak_hz": peak.as_ref().ok().map(|p| p.0),
        "fwhm_hz": peak.as_ref().ok().map(|p| p.1),
    });
    print!("{}", json_text(&summary)?);
    Ok(())
}
