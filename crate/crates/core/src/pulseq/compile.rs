// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::PulseqError;

/// Default cap on the number of events after loop expansion.
pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

/// Fixed-duration pulse calibration: symbolic angles map onto these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseCalibration {
    /// Duration of a π/2 pulse, s.
    pub half_pi: f64,
    /// Duration of a π pulse, s.
    pub pi: f64,
}

impl Default for PulseCalibration {
    /// 5 ns / 10 ns, the fixed pulse lengths used with amplitude tuning.
    fn default() -> Self {
        Self {
            half_pi: 5e-9,
            pi: 10e-9,
        }
    }
}

impl PulseCalibration {
    fn validate(&self) -> Result<(), PulseqError> {
        if !(self.half_pi > 0.0 && self.pi > 0.0 && self.half_pi.is_finite() && self.pi.is_finite())
        {
            return Err(PulseqError::InvalidCalibration(format!(
                "pulse durations must be positive (pi/2 = {}, pi = {})",
                self.half_pi, self.pi
            )));
        }
        Ok(())
    }
}

/// Placeholder values, in seconds.
pub type Bindings = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Laser,
    Mw,
    Wait,
    Read,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Laser => "laser",
            EventKind::Mw => "mw",
            EventKind::Wait => "wait",
            EventKind::Read => "read",
        }
    }
}

/// One timed event of a compiled schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_start: f64,
    pub duration: f64,
    pub kind: EventKind,
    pub phase_deg: f64,
    pub amp_rel: f64,
    pub detune_hz: f64,
    /// Nominal rotation for pulses written as `pi/2`, `pi` or `3pi/2`.
    pub nominal_rad: Option<f64>,
}

impl Event {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }
}

/// A loop-expanded, absolutely timestamped sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub name: String,
    pub events: Vec<Event>,
    pub total_duration: f64,
    pub readout_count: usize,
    /// Always empty for schedules produced by [`compile`].
    pub unbound: BTreeSet<String>,
}

impl Schedule {
    /// A schedule is runnable when it records at least one readout.
    pub fn is_runnable(&self) -> bool {
        self.readout_count >= 1 && self.unbound.is_empty()
    }

    /// CSV export: `t_start_s,duration_s,kind,phase_deg,amp_rel,detune_hz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_start_s,duration_s,kind,phase_deg,amp_rel,detune_hz\n");
        for e in &self.events {
            let _ = writeln!(
                out,
                "{:e},{:e},{},{},{},{}",
                e.t_start,
                e.duration,
                e.kind.as_str(),
                e.phase_deg,
                e.amp_rel,
                e.detune_hz
            );
        }
        out
    }

    /// Sum of `wait` durations between the first and last MW pulse, i.e. the
    /// free-evolution time of an echo-type sequence.
    pub fn free_evolution(&self) -> f64 {
        let first = self.events.iter().position(|e| e.kind == EventKind::Mw);
        let last = self.events.iter().rposition(|e| e.kind == EventKind::Mw);
        match (first, last) {
            (Some(a), Some(b)) if b > a => self.events[a..b]
                .iter()
                .filter(|e| e.kind == EventKind::Wait)
                .map(|e| e.duration)
                .sum(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    pub event_cap: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

fn expanded_count(body: &[Instruction]) -> u128 {
    body.iter()
        .map(|i| match &i.kind {
            InstrKind::Repeat { count, body } => {
                (*count as u128).saturating_mul(expanded_count(body))
            }
            _ => 1,
        })
        .fold(0u128, |a, b| a.saturating_add(b))
}

fn resolve(d: &DurationExpr, bindings: &Bindings) -> Result<f64, PulseqError> {
    match d {
        DurationExpr::Fixed(q) => Ok(q.si),
        DurationExpr::Placeholder(p) => match bindings.get(p) {
            Some(&v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(&v) => Err(PulseqError::InvalidBinding {
                name: p.clone(),
                value: v,
            }),
            None => Err(PulseqError::Unbound(p.clone())),
        },
    }
}

struct Emitter<'a> {
    bindings: &'a Bindings,
    calib: &'a PulseCalibration,
    events: Vec<Event>,
    t: f64,
}

impl Emitter<'_> {
    fn push(&mut self, kind: EventKind, duration: f64, phase_deg: f64, amp_rel: f64, detune_hz: f64, nominal_rad: Option<f64>) {
        self.events.push(Event {
            t_start: self.t,
            duration,
            kind,
            phase_deg,
            amp_rel,
            detune_hz,
            nominal_rad,
        });
        self.t += duration;
    }

    fn body(&mut self, body: &[Instruction]) -> Result<(), PulseqError> {
        for ins in body {
            match &ins.kind {
                InstrKind::Laser(d) => {
                    let d = resolve(d, self.bindings)?;
                    self.push(EventKind::Laser, d, 0.0, 0.0, 0.0, None);
                }
                InstrKind::Wait(d) => {
                    let d = resolve(d, self.bindings)?;
                    self.push(EventKind::Wait, d, 0.0, 0.0, 0.0, None);
                }
                InstrKind::Read => self.push(EventKind::Read, 0.0, 0.0, 0.0, 0.0, None),
                InstrKind::Mw {
                    angle,
                    phase,
                    amp,
                    detune,
                } => {
                    let duration = match angle {
                        Angle::HalfPi => self.calib.half_pi,
                        Angle::Pi => self.calib.pi,
                        Angle::ThreeHalfPi => 3.0 * self.calib.half_pi,
                        Angle::Duration(d) => resolve(d, self.bindings)?,
                    };
                    self.push(
                        EventKind::Mw,
                        duration,
                        phase.degrees(),
                        amp.unwrap_or(1.0),
                        detune.as_ref().map_or(0.0, |q| q.si),
                        angle.nominal_rad(),
                    );
                }
                InstrKind::Repeat { count, body } => {
                    for _ in 0..*count {
                        self.body(body)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Expands loops, resolves placeholders and symbolic angles, and assigns
/// absolute start times. Pure: equal inputs give equal schedules.
pub fn compile(
    def: &SeqDef,
    bindings: &Bindings,
    calib: &PulseCalibration,
    opts: CompileOptions,
) -> Result<Schedule, PulseqError> {
    calib.validate()?;
    if let Some(p) = def.placeholders().into_iter().find(|p| !bindings.contains_key(p)) {
        return Err(PulseqError::Unbound(p));
    }
    let n = expanded_count(&def.body);
    if n > opts.event_cap as u128 {
        return Err(PulseqError::EventCap {
            cap: opts.event_cap,
            requested: n,
        });
    }
    let mut em = Emitter {
        bindings,
        calib,
        events: Vec::with_capacity(n as usize),
        t: 0.0,
    };
    em.body(&def.body)?;
    let readout_count = em.events.iter().filter(|e| e.kind == EventKind::Read).count();
    Ok(Schedule {
        name: def.name.clone(),
        total_duration: em.t,
        events: em.events,
        readout_count,
        unbound: BTreeSet::new(),
    })
}

/// One sweepable axis: a placeholder and its values in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub placeholder: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(placeholder: impl Into<String>, values: Vec<f64>) -> Result<Self, PulseqError> {
        let s = Self {
            placeholder: placeholder.into(),
            values,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PulseqError> {
        if self.values.is_empty() {
            return Err(PulseqError::InvalidSweep("sweep has no values".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(PulseqError::InvalidSweep(format!("non-finite sweep value {v}")));
        }
        let up = self.values.windows(2).all(|w| w[1] >= w[0]);
        let down = self.values.windows(2).all(|w| w[1] <= w[0]);
        if !(up || down) {
            return Err(PulseqError::InvalidSweep("sweep values are not monotone".into()));
        }
        Ok(())
    }
}

/// Compiles one schedule per sweep value, in sweep order.
pub fn expand_sweep(
    def: &SeqDef,
    sweep: &SweepSpec,
    base: &Bindings,
    calib: &PulseCalibration,
    opts: CompileOptions,
) -> Result<Vec<Schedule>, PulseqError> {
    sweep.validate()?;
    if !def.placeholders().contains(&sweep.placeholder) {
        return Err(PulseqError::PlaceholderAbsent(sweep.placeholder.clone()));
    }
    sweep
        .values
        .iter()
        .map(|&v| {
            let mut b = base.clone();
            b.insert(sweep.placeholder.clone(), v);
            compile(def, &b, calib, opts)
        })
        .collect()
}
