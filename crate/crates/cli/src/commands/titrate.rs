// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use clap::Args;
use spinforge_core::protocols::{fit_titration, logspace, run_titration, TitrationConfig, TitrationFit, TitrationStep};

use crate::io::{columns_csv, resolve_seed, write_atomic, write_json};
use crate::svg::{Plot, Series};
use crate::{units, CliError, Common};

#[derive(Debug, Clone, Args)]
pub struct TitrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Lowest ion concentration, e.g. 1uM.
    #[arg(long, value_parser = units::concentration, default_value = "1uM")]
    pub from: f64,
    /// Highest ion concentration, e.g. 100mM.
    #[arg(long, value_parser = units::concentration, default_value = "100mM")]
    pub to: f64,
    /// Number of log-spaced concentrations.
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Leave out the pure-water reference point.
    #[arg(long)]
    pub no_water: bool,
    /// ODMR shots averaged per point and sweep.
    #[arg(long)]
    pub averages: Option<u64>,
    /// ODMR sweeps per spectrum.
    #[arg(long)]
    pub sweeps: Option<u64>,
}

pub fn config(a: &TitrateArgs) -> Result<TitrationConfig, CliError> {
    if !(a.from > 0.0 && a.to > a.from) || a.points < 2 {
        return Err(CliError::Usage("need 0 < --from < --to and --points ≥ 2".into()));
    }
    let mut c = TitrationConfig::default();
    c.concentrations = if a.no_water { Vec::new() } else { vec![0.0] };
    c.concentrations.extend(logspace(a.from, a.to, a.points));
    if let Some(v) = a.averages {
        c.odmr.averages = v;
    }
    if let Some(v) = a.sweeps {
        c.odmr.sweeps = v;
    }
    c.seed = resolve_seed(a.common.seed, None)?;
    Ok(c)
}

pub fn summary_csv(steps: &[TitrationStep], fit: &TitrationFit) -> String {
    let col = |f: fn(&TitrationStep) -> f64| steps.iter().map(f).collect::<Vec<_>>();
    let c = col(|s| s.concentration);
    let theta = col(|s| s.theta);
    let t1 = col(|s| s.t1_true);
    let truth = col(|s| s.amplitude_true);
    columns_csv(
        &["concentration_m", "theta", "t1_s", "amplitude_true", "amplitude_fit", "amplitude_err"],
        &[&c, &theta, &t1, &truth, &fit.amplitudes, &fit.amplitude_errors],
    )
}

pub fn plot(steps: &[TitrationStep], fit: &TitrationFit) -> Plot {
    let pos: Vec<usize> = (0..steps.len()).filter(|&i| steps[i].concentration > 0.0).collect();
    let x: Vec<f64> = pos.iter().map(|&i| steps[i].concentration).collect();
    let y: Vec<f64> = pos.iter().map(|&i| fit.amplitudes[i]).collect();
    let lo = x.first().copied().unwrap_or(1e-6);
    let hi = x.last().copied().unwrap_or(0.1);
    let grid = logspace(lo, hi, 200);
    let curve: Vec<f64> = grid.iter().map(|&c| fit.hill.model.eval(&fit.hill.estimates, c)).collect();
    Plot::new("ODMR contrast against ion concentration", "concentration (M)", "ODMR contrast")
        .log_x()
        .with(Series::markers("Lorentzian amplitude", x, y))
        .with(Series::line("Hill fit", grid, curve))
}

pub fn execute(a: &TitrateArgs) -> Result<(), CliError> {
    let cfg = config(a)?;
    let steps = run_titration(&cfg)?;
    let fit = fit_titration(&steps)?;
    let dir = &a.common.out;
    write_atomic(&dir.join("titration.csv"), summary_csv(&steps, &fit).as_bytes())?;
    write_json(
        &dir.join("titration.json"),
        &serde_json::json!({ "seed": cfg.seed, "config": cfg, "fit": fit }),
    )?;
    if a.common.svg {
        write_atomic(&dir.join("titration.svg"), plot(&steps, &fit).render().as_bytes())?;
    }
    let h = &fit.hill;
    println!(
        "Hill fit: C0 = {:.4}, Kd = {:.3e} M, n = {:.3}, A = {:.4} (seed {})",
        h.estimates[0], h.estimates[1], h.estimates[2], h.estimates[3], cfg.seed
    );
    Ok(())
}
