// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::Args;
use spinforge_core::analysis::{fit, FitData, FitError, FitOptions, FitResult, ModelId};

use crate::io::{json_text, read_csv, write_atomic};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Model: lorentzian, stretchedexp, powerlaw, linear, hill or dampedcosine.
    #[arg(long)]
    pub model: String,
    /// CSV with a header row; uses columns x and y, else the first two columns.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Column holding the abscissa (SI units).
    #[arg(long)]
    pub x: Option<String>,
    /// Column holding the ordinate.
    #[arg(long)]
    pub y: Option<String>,
    /// Column of one-sigma errors for a weighted fit.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Hold a parameter fixed, NAME=VALUE in SI units (repeatable), e.g. A=1.
    #[arg(long = "fix", value_name = "NAME=VALUE")]
    pub fixed: Vec<String>,
    /// Also write the result JSON here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn parse_fixed(items: &[String]) -> Result<Vec<(String, f64)>, CliError> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--fix expects NAME=VALUE, got '{s}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--fix {k}: '{v}' is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

pub fn execute(a: &FitArgs) -> Result<(), CliError> {
    let model: ModelId = a.model.parse().map_err(CliError::from)?;
    let table = read_csv(&a.input)?;
    let x = table.column(a.x.as_deref(), "x", 0)?.to_vec();
    let y = table.column(a.y.as_deref(), "y", 1)?.to_vec();
    let mut data = FitData::new(x, y);
    if let Some(s) = &a.sigma {
        data.sigma = Some(table.column(Some(s), s, 0)?.to_vec());
    }
    let mut opts = FitOptions::default();
    for (k, v) in parse_fixed(&a.fixed)? {
        opts = opts.fix(&k, v);
    }
    let (result, err): (FitResult, Option<CliError>) = match fit(model, &data, &opts) {
        Ok(r) => (r, None),
        Err(FitError::NonConvergence { iterations, result }) => (
            *result,
            Some(CliError::Runtime(format!("fit did not converge after {iterations} iterations"))),
        ),
        Err(e) => return Err(e.into()),
    };
    let text = json_text(&result)?;
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
