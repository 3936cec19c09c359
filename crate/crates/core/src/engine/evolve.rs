// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix2, SMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::OuProcess;
use super::state::{debug_check, polarized, C64};
use super::{DensityMatrix, DriveModel, DriveParams, EngineError, NoiseModel, RelaxationParams};
use crate::pulseq::{EventKind, Schedule};
use crate::rng::{substream, Domain};

/// Trajectories summed per block before the ordered final reduction.
const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Deterministic propagation with δ ≡ 0.
    NoiseFree,
    /// Average over OU trajectories; trajectory `k` draws from substream `k` of `seed`.
    MonteCarlo { trajectories: usize, seed: u64 },
}

/// How microwave pulses with a nominal rotation angle are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PulseMode {
    /// Finite-duration rectangular pulses with noise acting during the pulse.
    #[default]
    Finite,
    /// Instantaneous rotations by the nominal angle; pulses take no time.
    Ideal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub drive: DriveParams,
    pub relax: RelaxationParams,
    pub noise: NoiseModel,
    pub backend: Backend,
    pub pulse_mode: PulseMode,
    /// Polarization left by each laser event, in [0, 1].
    pub polarization: f64,
    /// Number of leading trajectories whose per-event samples are recorded.
    pub trace_trajectories: usize,
}

impl EvolveConfig {
    pub fn noise_free(drive: DriveParams) -> Self {
        Self {
            drive,
            relax: RelaxationParams::none(),
            noise: NoiseModel::quiet(),
            backend: Backend::NoiseFree,
            pulse_mode: PulseMode::Finite,
            polarization: 1.0,
            trace_trajectories: 0,
        }
    }

    pub fn monte_carlo(drive: DriveParams, noise: NoiseModel, trajectories: usize, seed: u64) -> Self {
        Self {
            noise,
            backend: Backend::MonteCarlo { trajectories, seed },
            ..Self::noise_free(drive)
        }
    }
}

/// One debug sample: trajectory, time at event end, δ(t), readout population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trajectory: usize,
    pub t: f64,
    pub delta: f64,
    pub population: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    /// Trajectory-averaged readout population at each `read`.
    pub readouts: Vec<f64>,
    /// Trajectory-averaged state at each `read`.
    pub states: Vec<DensityMatrix>,
    pub trace: Vec<TraceRow>,
}

impl Evolution {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("trajectory,t_s,delta_rad_per_s,population\n");
        for r in &self.trace {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", r.trajectory, r.t, r.delta, r.population);
        }
        out
    }
}

/// `exp(−i ω·σ t/2)` for a single spin.
pub(crate) fn rotation(wx: f64, wy: f64, wz: f64, t: f64) -> Matrix2<C64> {
    let norm = (wx * wx + wy * wy + wz * wz).sqrt();
    let theta = norm * t;
    if theta == 0.0 {
        return Matrix2::identity();
    }
    let (nx, ny, nz) = (wx / norm, wy / norm, wz / norm);
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    Matrix2::new(
        C64::new(c, -s * nz),
        C64::new(-ny * s, -nx * s),
        C64::new(ny * s, -nx * s),
        C64::new(c, s * nz),
    )
}

/// Rotation about the z axis by `phi`, as a diagonal pair of phases.
fn z_phases(phi: f64) -> (C64, C64) {
    (C64::from_polar(1.0, -0.5 * phi), C64::from_polar(1.0, 0.5 * phi))
}

trait Spin<const D: usize> {
    fn apply(rho: &mut SMatrix<C64, D, D>, u: &Matrix2<C64>);
    fn apply_z(rho: &mut SMatrix<C64, D, D>, phi: f64);
}

struct One;
struct Two;

impl Spin<2> for One {
    fn apply(rho: &mut Matrix2<C64>, u: &Matrix2<C64>) {
        *rho = u * *rho * u.adjoint();
    }
    fn apply_z(rho: &mut Matrix2<C64>, phi: f64) {
        let (a, b) = z_phases(phi);
        let off = a * b.conj();
        rho[(0, 1)] *= off;
        rho[(1, 0)] *= off.conj();
    }
}

impl Spin<4> for Two {
    fn apply(rho: &mut nalgebra::Matrix4<C64>, u: &Matrix2<C64>) {
        let uu = u.kronecker(u);
        *rho = uu * *rho * uu.adjoint();
    }
    fn apply_z(rho: &mut nalgebra::Matrix4<C64>, phi: f64) {
        let (a, b) = z_phases(phi);
        let d = [a * a, a * b, b * a, b * b];
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] *= d[i] * d[j].conj();
            }
        }
    }
}

/// Hermitian part, scaled to unit trace.
fn tidy<const D: usize>(rho: SMatrix<C64, D, D>) -> SMatrix<C64, D, D> {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = h.trace().re;
    h * C64::new(1.0 / tr, 0.0)
}

struct Job<'a> {
    schedule: &'a Schedule,
    cfg: &'a EvolveConfig,
}

impl Job<'_> {
    /// Runs one trajectory; calls `on_read` with the state at each `read`.
    fn run<const D: usize, S>(
        &self,
        rho0: &SMatrix<C64, D, D>,
        noise: Option<(&mut OuProcess, &mut rand_chacha::ChaCha8Rng)>,
        mut on_read: impl FnMut(&SMatrix<C64, D, D>),
        mut on_event: impl FnMut(f64, f64, &SMatrix<C64, D, D>),
    ) where
        S: Spin<D>,
    {
        let cfg = self.cfg;
        let drive = &cfg.drive;
        let two_pi = 2.0 * PI;
        let mut rho = *rho0;
        let mut noise = noise;
        let dt_cap = cfg.noise.tau_c / 20.0;
        let mut t = 0.0;
        let reset = polarized::<D>(cfg.polarization);

        for ev in &self.schedule.events {
            match ev.kind {
                EventKind::Laser => {
                    if let Some((ou, rng)) = noise.as_mut() {
                        ou.advance(ev.duration, &mut **rng);
                    }
                    rho = reset;
                    t += ev.duration;
                }
                EventKind::Read => on_read(&rho),
                EventKind::Wait => {
                    let mut phi = two_pi * drive.detune * ev.duration;
                    if let Some((ou, rng)) = noise.as_mut() {
                        let n = (ev.duration / dt_cap).ceil().max(1.0) as usize;
                        let h = ev.duration / n as f64;
                        for _ in 0..n {
                            phi += ou.advance(h, &mut **rng);
                        }
                    }
                    S::apply_z(&mut rho, phi);
                    if cfg.relax.t1.is_finite() {
                        let keep = (-ev.duration / cfg.relax.t1).exp();
                        rho = rho * C64::new(keep, 0.0)
                            + SMatrix::<C64, D, D>::identity() * C64::new((1.0 - keep) / D as f64, 0.0);
                    }
                    t += ev.duration;
                }
                EventKind::Mw => {
                    let phase = ev.phase_deg.to_radians() + drive.phase;
                    let omega = two_pi * drive.rabi_frequency * ev.amp_rel;
                    let (wx, wy) = (omega * phase.cos(), omega * phase.sin());
                    let wz0 = two_pi * (drive.detune + ev.detune_hz);
                    match (cfg.pulse_mode, ev.nominal_rad) {
                        (PulseMode::Ideal, Some(angle)) => {
                            let u = rotation(phase.cos(), phase.sin(), 0.0, angle);
                            S::apply(&mut rho, &u);
                        }
                        _ => {
                            if let Some((ou, rng)) = noise.as_mut() {
                                let n = (ev.duration / dt_cap).ceil().max(1.0) as usize;
                                let h = ev.duration / n as f64;
                                for _ in 0..n {
                                    let phi = ou.advance(h, &mut **rng);
                                    let u = rotation(wx, wy, wz0 + phi / h, h);
                                    S::apply(&mut rho, &u);
                                }
                                // Long pulses take ~10⁵ sub-steps; undo the
                                // accumulated roundoff in trace and symmetry.
                                rho = tidy(rho);
                            } else {
                                let u = rotation(wx, wy, wz0, ev.duration);
                                S::apply(&mut rho, &u);
                            }
                            t += ev.duration;
                        }
                    }
                }
            }
            debug_assert!(debug_check(&rho), "density matrix invariant violated after {:?} at t = {t:e}", ev.kind);
            let delta = noise.as_ref().map_or(0.0, |(ou, _)| ou.value());
            on_event(t, delta, &rho);
        }
    }
}

fn check(rho0: &DensityMatrix, schedule: &Schedule, cfg: &EvolveConfig) -> Result<(), EngineError> {
    if !schedule.unbound.is_empty() {
        let names: Vec<_> = schedule.unbound.iter().cloned().collect();
        return Err(EngineError::Unrunnable(format!("unbound placeholders: {}", names.join(", "))));
    }
    let model = cfg.drive.model.dim();
    if rho0.dim() != model {
        return Err(EngineError::DimensionMismatch {
            state: rho0.dim(),
            model,
        });
    }
    if let Backend::MonteCarlo { trajectories, .. } = cfg.backend {
        if trajectories == 0 {
            return Err(EngineError::InvalidParameter("Monte Carlo needs at least one trajectory".into()));
        }
    }
    if !(0.0..=1.0).contains(&cfg.polarization) {
        return Err(EngineError::InvalidParameter(format!(
            "polarization must lie in [0, 1], got {}",
            cfg.polarization
        )));
    }
    if !(cfg.drive.rabi_frequency >= 0.0) {
        return Err(EngineError::InvalidParameter("Rabi frequency must be non-negative".into()));
    }
    rho0.check_invariants()
}

fn evolve_dim<const D: usize, S>(
    rho0: &SMatrix<C64, D, D>,
    schedule: &Schedule,
    cfg: &EvolveConfig,
) -> (Vec<SMatrix<C64, D, D>>, Vec<TraceRow>)
where
    S: Spin<D>,
{
    let job = Job { schedule, cfg };
    let reads = schedule.readout_count;
    match cfg.backend {
        Backend::NoiseFree => {
            let mut states = Vec::with_capacity(reads);
            let mut trace = Vec::new();
            let record = cfg.trace_trajectories > 0;
            job.run::<D, S>(
                rho0,
                None,
                |r| states.push(*r),
                |t, delta, r| {
                    if record {
                        trace.push(TraceRow {
                            trajectory: 0,
                            t,
                            delta,
                            population: r[(super::state::readout_index(D), super::state::readout_index(D))].re,
                        })
                    }
                },
            );
            (states, trace)
        }
        Backend::MonteCarlo { trajectories, seed } => {
            let one = |k: usize, sums: &mut Vec<SMatrix<C64, D, D>>, trace: &mut Vec<TraceRow>| {
                let mut rng = substream(seed, Domain::Trajectory, k as u64);
                let mut ou = OuProcess::stationary(&cfg.noise, &mut rng);
                let mut idx = 0;
                let record = k < cfg.trace_trajectories;
                let ri = super::state::readout_index(D);
                job.run::<D, S>(
                    rho0,
                    Some((&mut ou, &mut rng)),
                    |r| {
                        sums[idx] += r;
                        idx += 1;
                    },
                    |t, delta, r| {
                        if record {
                            trace.push(TraceRow {
                                trajectory: k,
                                t,
                                delta,
                                population: r[(ri, ri)].re,
                            })
                        }
                    },
                );
            };
            let blocks = trajectories.div_ceil(BLOCK);
            let partials: Vec<(Vec<SMatrix<C64, D, D>>, Vec<TraceRow>)> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut sums = vec![SMatrix::<C64, D, D>::zeros(); reads];
                    let mut trace = Vec::new();
                    for k in b * BLOCK..((b + 1) * BLOCK).min(trajectories) {
                        one(k, &mut sums, &mut trace);
                    }
                    (sums, trace)
                })
                .collect();
            let mut total = vec![SMatrix::<C64, D, D>::zeros(); reads];
            let mut trace = Vec::new();
            for (sums, tr) in partials {
                for (t, s) in total.iter_mut().zip(sums) {
                    *t += s;
                }
                trace.extend(tr);
            }
            let scale = C64::new(1.0 / trajectories as f64, 0.0);
            for t in &mut total {
                *t *= scale;
            }
            (total, trace)
        }
    }
}

/// Propagates `rho0` through `schedule`.
///
/// Laser events reset the state to the polarized readout state, waits apply
/// free precession plus T1 depolarization, MW events apply the rotating-frame
/// drive, and each `read` records the readout-state population. With the
/// Monte Carlo backend the result is the ordered mean over trajectories and
/// does not depend on the number of worker threads.
pub fn evolve(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    cfg: &EvolveConfig,
) -> Result<Evolution, EngineError> {
    check(rho0, schedule, cfg)?;
    let (states, trace) = match (rho0, cfg.drive.model) {
        (DensityMatrix::Qubit(m), DriveModel::Single) => {
            let (s, tr) = evolve_dim::<2, One>(m, schedule, cfg);
            (s.into_iter().map(DensityMatrix::Qubit).collect::<Vec<_>>(), tr)
        }
        (DensityMatrix::Pair(m), DriveModel::Pair) => {
            let (s, tr) = evolve_dim::<4, Two>(m, schedule, cfg);
            (s.into_iter().map(DensityMatrix::Pair).collect::<Vec<_>>(), tr)
        }
        _ => unreachable!("dimension checked above"),
    };
    Ok(Evolution {
        readouts: states.iter().map(DensityMatrix::readout_population).collect(),
        states,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulseq::{compile, parse_def, Bindings, CompileOptions, PulseCalibration};

    fn sched(src: &str, bindings: &[(&str, f64)]) -> Schedule {
        let def = parse_def(src, "s").unwrap();
        let b: Bindings = bindings.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        compile(&def, &b, &PulseCalibration::default(), CompileOptions::default()).unwrap()
    }

    fn drive() -> DriveParams {
        DriveParams::from_pi_duration(10e-9)
    }

    #[test]
    fn pi_pulse_inverts() {
        let s = sched("seq s { laser 1us mw pi x read }", &[]);
        let rho = DensityMatrix::polarized(2).unwrap();
        let ev = evolve(&rho, &s, &EvolveConfig::noise_free(drive())).unwrap();
        assert!(ev.readouts[0].abs() < 1e-9);
        ev.states[0].check_invariants().unwrap();
    }

    #[test]
    fn echo_refocuses_static_detuning() {
        let src = "seq s { laser 1us mw pi/2 y wait 40ns mw pi x wait 40ns mw pi/2 -y read }";
        let s = sched(src, &[]);
        let rho = DensityMatrix::polarized(2).unwrap();
        let ideal = |detune: f64| {
            let mut cfg = EvolveConfig::noise_free(drive().with_detune(detune));
            cfg.pulse_mode = PulseMode::Ideal;
            evolve(&rho, &s, &cfg).unwrap().readouts[0]
        };
        let a = ideal(0.0);
        let b = ideal(3.3e6);
        assert!((a - 1.0).abs() < 1e-12, "{a}");
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn t1_relaxes_toward_mixed() {
        let s = sched("seq s { laser 1us wait 10us read }", &[]);
        let mut cfg = EvolveConfig::noise_free(drive());
        cfg.relax = RelaxationParams::new(10e-6, 1.0).unwrap();
        let ev = evolve(&DensityMatrix::polarized(2).unwrap(), &s, &cfg).unwrap();
        let expect = 0.5 + 0.5 * (-1.0f64).exp();
        assert!((ev.readouts[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let s = sched("seq s { laser 1us wait $t read }", &[("t", 1e-6)]);
        let mut s2 = s.clone();
        s2.unbound.insert("t".into());
        let cfg = EvolveConfig::noise_free(drive());
        assert!(matches!(
            evolve(&DensityMatrix::polarized(2).unwrap(), &s2, &cfg),
            Err(EngineError::Unrunnable(_))
        ));
        let s = sched("seq s { laser 1us read }", &[]);
        assert!(matches!(
            evolve(&DensityMatrix::polarized(4).unwrap(), &s, &cfg),
            Err(EngineError::DimensionMismatch { state: 4, model: 2 })
        ));
    }

    #[test]
    fn pair_collective_pi_pulse_empties_readout() {
        let s = sched("seq s { laser 1us mw pi x read }", &[]);
        let cfg = EvolveConfig::noise_free(drive().with_model(DriveModel::Pair));
        let ev = evolve(&DensityMatrix::polarized(4).unwrap(), &s, &cfg).unwrap();
        assert!(ev.readouts[0].abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_is_thread_independent() {
        let src = "seq s { laser 1us mw pi/2 y wait 30ns mw pi x wait 30ns mw pi/2 y read }";
        let s = sched(src, &[]);
        let noise = NoiseModel::new(1.148e9, 10e-6).unwrap();
        let mut cfg = EvolveConfig::monte_carlo(drive(), noise, 300, 42);
        cfg.trace_trajectories = 2;
        let rho = DensityMatrix::polarized(2).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| evolve(&rho, &s, &cfg).unwrap());
        let b = four.install(|| evolve(&rho, &s, &cfg).unwrap());
        assert_eq!(a.readouts[0].to_bits(), b.readouts[0].to_bits());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 2 * s.events.len());
        assert!(a.trace_csv().starts_with("trajectory,t_s"));
        a.states[0].check_invariants().unwrap();
    }
}
