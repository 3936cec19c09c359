// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! The `spinforge` command-line tool.
//!
//! Quantity flags take unit suffixes parsed by the same lexer as the pulse
//! language (`78mT`, `16ns`, `15.626MHz`); a bare number is read in SI units.
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod fixtures;
pub mod io;
pub mod svg;
pub mod units;

pub use commands::reproduce::Figure;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, unreadable input or an invalid configuration.
    Usage(String),
    /// The computation itself failed (non-convergence, infeasible target).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(
    name = "spinforge",
    version,
    about = "Simulate, fit and reproduce pulsed spin-defect sensing experiments",
    long_about = "Simulate, fit and reproduce pulsed spin-defect sensing experiments.\n\n\
        Quantities accept unit suffixes: time ps/ns/us/ms/s, frequency Hz/kHz/MHz/GHz, \
        field nT/uT/mT/T, power mW/W, concentration nM/uM/mM/M, angle deg/rad. \
        Bare numbers are SI. The SPINFORGE_SEED environment variable overrides configured seeds.\n\n\
        Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one protocol and write <protocol>.csv plus a JSON sidecar.
    Run(commands::run::RunArgs),
    /// Fit a model to two CSV columns and print the result as JSON.
    Fit(commands::fit::FitArgs),
    /// Amplitude spectrum of a uniformly sampled CSV trace.
    Spectrum(commands::spectrum::SpectrumArgs),
    /// Find a bath (Δ, τc) whose CPMG coherence times follow t2·N^s.
    CalibrateNoise(commands::calibrate::CalibrateArgs),
    /// Synthetic paramagnetic-ion titration with Lorentzian and Hill fits.
    Titrate(commands::titrate::TitrateArgs),
    /// Magnetic sensitivity from synchronized-readout runs at several RF amplitudes.
    Sensitivity(commands::sensitivity::SensitivityArgs),
    /// Rebuild one published figure as a bundle of data, plots and a report.
    Reproduce(commands::reproduce::ReproduceArgs),
}

/// Flags shared by commands that simulate.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
    /// RNG seed (unsigned integer). Overrides SPINFORGE_SEED and the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write SVG plots of the results.
    #[arg(long)]
    pub svg: bool,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => commands::run::execute(a),
        Command::Fit(a) => commands::fit::execute(a),
        Command::Spectrum(a) => commands::spectrum::execute(a),
        Command::CalibrateNoise(a) => commands::calibrate::execute(a),
        Command::Titrate(a) => commands::titrate::execute(a),
        Command::Sensitivity(a) => commands::sensitivity::execute(a),
        Command::Reproduce(a) => commands::reproduce::execute(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_flag_is_documented() {
        let root = Cli::command();
        for sub in root.get_subcommands() {
            for arg in sub.get_arguments() {
                if arg.get_id() == "help" || arg.get_id() == "version" {
                    continue;
                }
                assert!(
                    arg.get_help().is_some(),
                    "{} --{} has no help text",
                    sub.get_name(),
                    arg.get_id()
                );
            }
        }
    }
}
