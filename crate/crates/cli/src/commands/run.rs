// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use spinforge_core::engine::DriveModel;
use spinforge_core::protocols::{
    linspace, logspace, run_casr, run_cpmg, run_hahn_echo, run_odmr, run_rabi, run_spinlock, run_t1, CasrConfig,
    CoherenceBackend, CpmgConfig, OdmrConfig, RabiConfig, SpinlockConfig, SweepResult, T1Config,
};
use spinforge_core::engine::PulseMode;
use spinforge_core::readout::ReadoutModel;
use spinforge_core::units::Dimension;

use super::load_noise;
use crate::io::{read_json, resolve_seed, write_atomic, write_json};
use crate::svg::{Plot, Series};
use crate::{units, CliError, Common};

/// Points drawn in the SVG of a long readout stream.
const PLOT_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Odmr,
    Rabi,
    T1,
    Echo,
    Cpmg,
    Spinlock,
    Casr,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Odmr => "odmr",
            Protocol::Rabi => "rabi",
            Protocol::T1 => "t1",
            Protocol::Echo => "echo",
            Protocol::Cpmg => "cpmg",
            Protocol::Spinlock => "spinlock",
            Protocol::Casr => "casr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Single,
    Pair,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment to run.
    #[arg(long, value_enum)]
    pub protocol: Protocol,
    #[command(flatten)]
    pub common: Common,
    /// Protocol config as JSON; a sidecar from an earlier run is accepted and reproduces it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Shots averaged per point and sweep.
    #[arg(long)]
    pub averages: Option<u64>,
    /// Number of full sweeps averaged.
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Sweep start: frequency for odmr (2.0GHz), half delay τ for echo and cpmg (5ns), time otherwise (2us).
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Sweep stop, same unit kind as --start.
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<String>,
    /// Number of sweep points (default 101 when --start/--stop are given).
    #[arg(long)]
    pub points: Option<usize>,
    /// Space sweep points logarithmically.
    #[arg(long)]
    pub log: bool,
    /// Mean photons per bright readout (dimensionless).
    #[arg(long)]
    pub photons: Option<f64>,
    /// Readout contrast ε between bright and pumped state (fraction).
    #[arg(long)]
    pub contrast: Option<f64>,
    /// odmr: bias field, e.g. 78mT.
    #[arg(long, value_parser = units::field)]
    pub b0: Option<f64>,
    /// odmr: peak line contrast (fraction).
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// odmr: half width at half maximum, e.g. 12.9MHz.
    #[arg(long, value_parser = units::frequency)]
    pub hwhm: Option<f64>,
    /// odmr: drive amplitude relative to calibrated (0 switches the MW off).
    #[arg(long)]
    pub mw_amplitude: Option<f64>,
    /// rabi: MW power, e.g. 30W.
    #[arg(long, value_parser = units::power)]
    pub power: Option<f64>,
    /// rabi: Rabi frequency per square-root watt, e.g. 9.2MHz (read as Hz/√W).
    #[arg(long, value_parser = units::frequency)]
    pub rabi_slope: Option<f64>,
    /// rabi: single spin or spin pair readout.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// rabi: damping time of the oscillation, e.g. 300ns.
    #[arg(long, value_parser = units::time)]
    pub decay: Option<f64>,
    /// t1: envelope time constant; spinlock: lab-frame T1. E.g. 25.87us.
    #[arg(long, value_parser = units::time)]
    pub t1: Option<f64>,
    /// t1: stretch exponent c of exp[-(t/T1)^c] (dimensionless).
    #[arg(long)]
    pub stretch: Option<f64>,
    /// spinlock: nutation frequency of the locking field, e.g. 15MHz.
    #[arg(long, value_parser = units::frequency)]
    pub f_sl: Option<f64>,
    /// echo/cpmg: number of π pulses.
    #[arg(long = "n")]
    pub pulses: Option<u32>,
    /// echo/cpmg/spinlock/casr: bath JSON, as written by calibrate-noise or {"delta": rad/s, "tau_c": s}.
    #[arg(long, value_name = "FILE")]
    pub noise: Option<PathBuf>,
    /// echo/cpmg: average this many Monte Carlo trajectories instead of the analytic decay.
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// echo/cpmg: largest number of events one compiled schedule may hold.
    #[arg(long)]
    pub event_cap: Option<usize>,
    /// casr: RF signal frequency, e.g. 15.626MHz.
    #[arg(long, value_parser = units::frequency)]
    pub nu_rf: Option<f64>,
    /// casr: frequency the subsequence is locked to, e.g. 15.625MHz.
    #[arg(long, value_parser = units::frequency)]
    pub nu_base: Option<f64>,
    /// casr: RF field amplitude, e.g. 10uT.
    #[arg(long, value_parser = units::field)]
    pub b_rf: Option<f64>,
    /// casr: total sampling time t_s, e.g. 2s.
    #[arg(long, value_parser = units::time)]
    pub duration: Option<f64>,
    /// casr: half inter-pulse delay τ, e.g. 16ns (default: a quarter base period).
    #[arg(long, value_parser = units::time)]
    pub tau: Option<f64>,
    /// casr: RF phase at t = 0, e.g. 90deg.
    #[arg(long, value_parser = units::angle)]
    pub phase0: Option<f64>,
}

/// Config from `--config` (plain or sidecar) or the defaults, plus whether a
/// file supplied it.
fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>, protocol: &str) -> Result<(C, bool), CliError> {
    let Some(path) = path else {
        return Ok((C::default(), false));
    };
    let v = read_json(path)?;
    let body = match (v.get("protocol"), v.get("config")) {
        (Some(p), Some(c)) => {
            if p.as_str() != Some(protocol) {
                return Err(CliError::Usage(format!(
                    "{} describes protocol {p}, not '{protocol}'",
                    path.display()
                )));
            }
            c.clone()
        }
        _ => v,
    };
    let cfg = serde_json::from_value(body)
        .map_err(|e| CliError::Usage(format!("{}: invalid {protocol} config: {e}", path.display())))?;
    Ok((cfg, true))
}

/// Sweep grid from --start/--stop/--points, if any of them was given.
fn grid(a: &RunArgs, dim: Dimension) -> Result<Option<Vec<f64>>, CliError> {
    if a.start.is_none() && a.stop.is_none() && a.points.is_none() {
        return Ok(None);
    }
    let parse = |flag: &str, v: &Option<String>| -> Result<f64, CliError> {
        let s = v
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("--{flag} is required with --start/--stop/--points")))?;
        spinforge_core::units::parse_quantity_or_si(s, dim).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
    };
    let (lo, hi) = (parse("start", &a.start)?, parse("stop", &a.stop)?);
    let n = a.points.unwrap_or(101);
    if n == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    if a.log {
        if !(lo > 0.0 && hi > 0.0) {
            return Err(CliError::Usage("--log needs positive --start and --stop".into()));
        }
        Ok(Some(logspace(lo, hi, n)))
    } else {
        Ok(Some(linspace(lo, hi, n)))
    }
}

fn readout(base: ReadoutModel, a: &RunArgs) -> ReadoutModel {
    ReadoutModel {
        photons: a.photons.unwrap_or(base.photons),
        contrast: a.contrast.unwrap_or(base.contrast),
        ..base
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn execute(a: &RunArgs) -> Result<(), CliError> {
    let name = a.protocol.name();
    let cfg_path = a.config.as_deref();
    let noise = a.noise.as_deref().map(load_noise).transpose()?;
    let (sweep, config, extra_plot): (SweepResult, serde_json::Value, Option<String>) = match a.protocol {
        Protocol::Odmr => {
            let (mut c, from_file): (OdmrConfig, bool) = load_config(cfg_path, name)?;
            c.seed = resolve_seed(a.common.seed, from_file.then_some(c.seed))?;
            if let Some(g) = grid(a, Dimension::Frequency)? {
                c.frequencies = g;
            }
            if a.b0.is_some() {
                c.b0 = a.b0.unwrap_or(c.b0);
                c.center = None;
            }
            set(&mut c.amplitude, a.amplitude);
            set(&mut c.hwhm, a.hwhm);
            set(&mut c.mw_amplitude, a.mw_amplitude);
            set(&mut c.averages, a.averages);
            set(&mut c.sweeps, a.sweeps);
            c.readout = readout(c.readout, a);
            (run_odmr(&c)?, to_value(&c)?, None)
        }
        Protocol::Rabi => {
            let (mut c, from_file): (RabiConfig, bool) = load_config(cfg_path, name)?;
            c.seed = resolve_seed(a.common.seed, from_file.then_some(c.seed))?;
            if let Some(g) = grid(a, Dimension::Time)? {
                c.durations = g;
            }
            set(&mut c.power, a.power);
            set(&mut c.rabi_slope, a.rabi_slope);
            if let Some(m) = a.model {
                c.model = match m {
                    ModelArg::Single => DriveModel::Single,
                    ModelArg::Pair => DriveModel::Pair,
                };
            }
            if a.decay.is_some() {
                c.decay = a.decay;
            }
            set(&mut c.averages, a.averages);
            set(&mut c.sweeps, a.sweeps);
            c.readout = readout(c.readout, a);
            (run_rabi(&c)?, to_value(&c)?, None)
        }
        Protocol::T1 => {
            let (mut c, from_file): (T1Config, bool) = load_config(cfg_path, name)?;
            c.seed = resolve_seed(a.common.seed, from_file.then_some(c.seed))?;
            if let Some(g) = grid(a, Dimension::Time)? {
                c.delays = g;
            }
            set(&mut c.envelope.timescale, a.t1);
            set(&mut c.envelope.stretch, a.stretch);
            set(&mut c.averages, a.averages);
            set(&mut c.sweeps, a.sweeps);
            c.readout = readout(c.readout, a);
            (run_t1(&c)?, to_value(&c)?, None)
        }
        Protocol::Echo | Protocol::Cpmg => {
            let (mut c, from_file): (CpmgConfig, bool) = load_config(cfg_path, name)?;
            c.seed = resolve_seed(a.common.seed, from_file.then_some(c.seed))?;
            if let Some(g) = grid(a, Dimension::Time)? {
                c.taus = g;
            }
            if a.protocol == Protocol::Echo {
                c.pulses = 1;
            } else {
                set(&mut c.pulses, a.pulses);
            }
            set(&mut c.noise, noise);
            if let Some(t) = a.trajectories {
                c.backend = CoherenceBackend::MonteCarlo {
                    trajectories: t,
                    pulse_mode: PulseMode::Finite,
                };
            }
            set(&mut c.event_cap, a.event_cap);
            set(&mut c.averages, a.averages);
            set(&mut c.sweeps, a.sweeps);
            c.readout = readout(c.readout, a);
            let r = if a.protocol == Protocol::Echo {
                run_hahn_echo(&c)?
            } else {
                run_cpmg(&c)?
            };
            (r, to_value(&c)?, None)
        }
        Protocol::Spinlock => {
            let (mut c, from_file): (SpinlockConfig, bool) = load_config(cfg_path, name)?;
            c.seed = resolve_seed(a.common.seed, from_file.then_some(c.seed))?;
            if let Some(g) = grid(a, Dimension::Time)? {
                c.durations = g;
            }
            set(&mut c.f_sl, a.f_sl);
            set(&mut c.t1, a.t1);
            set(&mut c.noise, noise);
            set(&mut c.averages, a.averages);
            set(&mut c.sweeps, a.sweeps);
            c.readout = readout(c.readout, a);
            (run_spinlock(&c)?, to_value(&c)?, None)
        }
        Protocol::Casr => {
            let (mut c, from_file): (CasrConfig, bool) = load_config(cfg_path, name)?;
            c.seed = resolve_seed(a.common.seed, from_file.then_some(c.seed))?;
            set(&mut c.nu_rf, a.nu_rf);
            set(&mut c.nu_base, a.nu_base);
            set(&mut c.b_rf, a.b_rf);
            set(&mut c.duration, a.duration);
            set(&mut c.phase0, a.phase0);
            if a.tau.is_some() {
                c.tau = a.tau;
            }
            set(&mut c.noise, noise);
            set(&mut c.averages, a.averages);
            c.readout = readout(c.readout, a);
            let run = run_casr(&c)?;
            (run.sweep, to_value(&c)?, Some("normalised counts".to_string()))
        }
    };
    write_outputs(&a.common.out, name, &sweep, &config, a.common.svg, extra_plot.as_deref())?;
    println!(
        "{name}: {} points, seed {}, wrote {}",
        sweep.len(),
        sweep.seed,
        a.common.out.join(format!("{name}.csv")).display()
    );
    Ok(())
}

fn to_value<C: Serialize>(c: &C) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(c).map_err(|e| CliError::Runtime(format!("config encoding: {e}")))
}

/// `<name>.csv`, `<name>.json` and optionally `<name>.svg` in `dir`.
pub fn write_outputs(
    dir: &Path,
    name: &str,
    sweep: &SweepResult,
    config: &serde_json::Value,
    svg: bool,
    y_label: Option<&str>,
) -> Result<(), CliError> {
    write_atomic(&dir.join(format!("{name}.csv")), sweep.to_csv().as_bytes())?;
    write_json(&dir.join(format!("{name}.json")), &sweep.sidecar(config))?;
    if svg {
        write_atomic(&dir.join(format!("{name}.svg")), sweep_plot(sweep, y_label).render().as_bytes())?;
    }
    Ok(())
}

pub fn sweep_plot(sweep: &SweepResult, y_label: Option<&str>) -> Plot {
    let step = (sweep.len() / PLOT_POINTS).max(1);
    let x: Vec<f64> = sweep.axis_values.iter().step_by(step).copied().collect();
    let y: Vec<f64> = sweep.contrast_values.iter().step_by(step).copied().collect();
    let series = if sweep.len() > 300 {
        Series::line(&sweep.protocol, x, y)
    } else {
        Series::markers(&sweep.protocol, x, y)
    };
    Plot::new(
        &sweep.protocol,
        &format!("{} ({})", sweep.axis_name, sweep.axis_unit),
        y_label.unwrap_or("contrast"),
    )
    .with(series)
}
