// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Pulse-sequence language.
//!
//! A `.pseq` file holds one or more `seq NAME { ... }` definitions built from
//! `laser`, `mw`, `wait`, `read` and `repeat` instructions:
//!
//! ```text
//! seq echo {
//!     laser 5us
//!     mw pi/2 y
//!     wait $tau
//!     mw pi x
//!     wait $tau
//!     mw pi/2 y
//!     read
//! }
//! ```
//!
//! [`parse`] yields an instruction tree with source positions, [`compile`]
//! binds `$placeholders`, resolves symbolic angles through a
//! [`PulseCalibration`] and expands loops into a strictly sequential
//! [`Schedule`]. [`expand_sweep`] compiles one schedule per sweep value.

mod ast;
mod compile;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::{
    Angle, DurationExpr, InstrKind, Instruction, Phase, Program, Quantity, SeqDef, Span,
};
pub use compile::{
    compile, expand_sweep, Bindings, CompileOptions, Event, EventKind, PulseCalibration,
    Schedule, SweepSpec, DEFAULT_EVENT_CAP,
};
pub use parser::{parse, MAX_NESTING};
pub use printer::pretty;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PulseqError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: semantic error: {msg}")]
    Semantic { line: u32, col: u32, msg: String },
    #[error("unbound placeholder '${0}'")]
    Unbound(String),
    #[error("placeholder '${name}' bound to invalid duration {value}")]
    InvalidBinding { name: String, value: f64 },
    #[error("expanded schedule needs {requested} events, exceeding the event cap of {cap}")]
    EventCap { cap: usize, requested: u128 },
    #[error("sweep placeholder '${0}' does not appear in the sequence")]
    PlaceholderAbsent(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("no sequence named '{0}'")]
    UnknownSequence(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
}

impl PulseqError {
    /// Diagnostic message without the position prefix.
    pub fn message(&self) -> String {
        match self {
            PulseqError::Syntax { msg, .. } | PulseqError::Semantic { msg, .. } => msg.clone(),
            other => other.to_string(),
        }
    }

    pub fn position(&self) -> Option<(u32, u32)> {
        match self {
            PulseqError::Syntax { line, col, .. } | PulseqError::Semantic { line, col, .. } => {
                Some((*line, *col))
            }
            _ => None,
        }
    }
}

/// Golden sequence files, one per measurement protocol.
pub mod corpus {
    pub const ODMR: &str = include_str!("../../corpus/odmr.pseq");
    pub const RABI: &str = include_str!("../../corpus/rabi.pseq");
    pub const T1: &str = include_str!("../../corpus/t1.pseq");
    pub const ECHO: &str = include_str!("../../corpus/echo.pseq");
    pub const CPMG: &str = include_str!("../../corpus/cpmg.pseq");
    pub const SPINLOCK: &str = include_str!("../../corpus/spinlock.pseq");
    pub const CASR: &str = include_str!("../../corpus/casr.pseq");
    pub const CALIBRATION: &str = include_str!("../../corpus/calibration.pseq");

    pub const ALL: &[(&str, &str)] = &[
        ("odmr", ODMR),
        ("rabi", RABI),
        ("t1", T1),
        ("echo", ECHO),
        ("cpmg", CPMG),
        ("spinlock", SPINLOCK),
        ("casr", CASR),
        ("calibration", CALIBRATION),
    ];
}

/// Source for a CPMG sequence with `n` π pulses and placeholder `$tau`.
pub fn cpmg_source(n: u64) -> String {
    assert!(n >= 1);
    let mut s = String::from("seq cpmg {\n    laser 5us\n    mw pi/2 y\n    wait $tau\n");
    if n > 1 {
        s.push_str(&format!(
            "    repeat {} {{\n        mw pi x\n        wait $tau\n        wait $tau\n    }}\n",
            n - 1
        ));
    }
    s.push_str("    mw pi x\n    wait $tau\n    mw pi/2 y\n    read\n}\n");
    s
}

/// Parses `source` and returns the definition called `name`.
pub fn parse_def(source: &str, name: &str) -> Result<SeqDef, PulseqError> {
    let prog = parse(source)?;
    prog.get(name)
        .cloned()
        .ok_or_else(|| PulseqError::UnknownSequence(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> SeqDef {
        parse(src).unwrap().defs.into_iter().next().unwrap()
    }

    fn bind(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn minimal_sequence() {
        let def = one("seq e { laser 5us read }");
        assert_eq!(def.name, "e");
        assert_eq!(def.body.len(), 2);
        match &def.body[0].kind {
            InstrKind::Laser(DurationExpr::Fixed(q)) => assert!((q.si - 5e-6).abs() < 1e-18),
            k => panic!("unexpected {k:?}"),
        }
        assert_eq!(def.body[1].kind, InstrKind::Read);
    }

    #[test]
    fn hahn_echo_has_tau_placeholder() {
        let def = one(
            "seq echo { laser 5us mw pi/2 y wait $tau mw pi x wait $tau mw pi/2 y read }",
        );
        assert_eq!(def.placeholders().into_iter().collect::<Vec<_>>(), vec!["tau"]);
        let phases: Vec<f64> = def
            .body
            .iter()
            .filter_map(|i| match &i.kind {
                InstrKind::Mw { phase, .. } => Some(phase.degrees()),
                _ => None,
            })
            .collect();
        assert_eq!(phases, vec![90.0, 0.0, 90.0]);
    }

    #[test]
    fn unknown_phase_reports_position() {
        let err = parse("seq bad { mw pi q }").unwrap_err();
        assert_eq!(err.message(), "unknown phase 'q'");
        assert_eq!(err.position(), Some((1, 17)));
    }

    #[test]
    fn repeat_expands_and_times_events() {
        let def = one("seq r { repeat 2 { mw pi x wait 16ns } }");
        let s = compile(&def, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap();
        assert_eq!(s.events.len(), 4);
        assert!((s.total_duration - 52e-9).abs() < 1e-21);
        for w in s.events.windows(2) {
            assert_eq!(w[1].t_start, w[0].t_start + w[0].duration);
        }
    }

    #[test]
    fn echo_window_is_forty_ns() {
        let def = parse_def(corpus::ECHO, "echo").unwrap();
        let s = compile(&def, &bind(&[("tau", 10e-9)]), &PulseCalibration::default(), CompileOptions::default()).unwrap();
        let laser_end = s.events[0].t_end();
        let read = s.events.iter().find(|e| e.kind == EventKind::Read).unwrap();
        assert!((read.t_start - laser_end - 40e-9).abs() < 1e-20);
        assert_eq!(s.readout_count, 1);
    }

    #[test]
    fn casr_period_is_multiple_of_rf_period() {
        let def = parse_def(corpus::CASR, "casr").unwrap();
        let s = compile(&def, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap();
        let cycles = s.total_duration * 15.625e6;
        assert!((cycles - cycles.round()).abs() < 1e-9, "cycles = {cycles}");
        assert_eq!(cycles.round(), 80.0);
    }

    #[test]
    fn three_half_pi_uses_three_half_pi_durations() {
        let def = one("seq a { mw 3pi/2 y read }");
        let cal = PulseCalibration { half_pi: 7e-9, pi: 12e-9 };
        let s = compile(&def, &Bindings::new(), &cal, CompileOptions::default()).unwrap();
        assert_eq!(s.events[0].duration, 21e-9);
    }

    #[test]
    fn unbound_placeholder_is_an_error() {
        let def = parse_def(corpus::ECHO, "echo").unwrap();
        let err = compile(&def, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap_err();
        assert_eq!(err, PulseqError::Unbound("tau".into()));
    }

    #[test]
    fn event_cap_stops_runaway_loops() {
        let def = one("seq big { repeat 100000 { repeat 100000 { wait 1ns } } read }");
        let err = compile(&def, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap_err();
        assert!(matches!(err, PulseqError::EventCap { cap: DEFAULT_EVENT_CAP, .. }));
    }

    #[test]
    fn sweep_gives_one_schedule_per_value() {
        let def = parse_def(corpus::ECHO, "echo").unwrap();
        let sweep = SweepSpec::new("tau", vec![10e-9, 20e-9, 30e-9]).unwrap();
        let out = expand_sweep(&def, &sweep, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[0].total_duration < out[1].total_duration);
        assert!(out[1].total_duration < out[2].total_duration);
    }

    #[test]
    fn cpmg_free_evolution_is_two_n_tau() {
        let def = parse_def(corpus::CPMG, "cpmg8").unwrap();
        let sweep = SweepSpec::new("tau", vec![10e-9, 25e-9, 40e-9]).unwrap();
        let out = expand_sweep(&def, &sweep, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap();
        for (s, tau) in out.iter().zip(&sweep.values) {
            assert!((s.free_evolution() - 16.0 * tau).abs() < 1e-18);
            let pis = s.events.iter().filter(|e| e.nominal_rad == Some(std::f64::consts::PI)).count();
            assert_eq!(pis, 8);
        }
    }

    #[test]
    fn generated_cpmg_matches_corpus() {
        let a = parse_def(&cpmg_source(8), "cpmg").unwrap();
        let b = parse_def(corpus::CPMG, "cpmg8").unwrap();
        assert_eq!(a.body, b.body);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        assert!(matches!(SweepSpec::new("tau", vec![]), Err(PulseqError::InvalidSweep(_))));
        assert!(matches!(
            SweepSpec::new("tau", vec![1.0, 3.0, 2.0]),
            Err(PulseqError::InvalidSweep(_))
        ));
    }

    #[test]
    fn sweep_placeholder_must_exist() {
        let def = one("seq e { laser 5us read }");
        let sweep = SweepSpec::new("tau", vec![1e-9]).unwrap();
        let err = expand_sweep(&def, &sweep, &Bindings::new(), &PulseCalibration::default(), CompileOptions::default()).unwrap_err();
        assert_eq!(err, PulseqError::PlaceholderAbsent("tau".into()));
    }

    #[test]
    fn comments_and_split_units() {
        let def = one("# header\nseq e{laser 5 us # trailing\n mw 20 ns 90 deg amp= 0.5 detune=40MHz read}");
        assert_eq!(def.body.len(), 3);
        match &def.body[1].kind {
            InstrKind::Mw { angle, phase, amp, detune } => {
                match angle {
                    Angle::Duration(DurationExpr::Fixed(q)) => assert_eq!(q.si, 20e-9),
                    a => panic!("unexpected {a:?}"),
                }
                assert_eq!(phase.degrees(), 90.0);
                assert_eq!(*amp, Some(0.5));
                assert_eq!(detune.as_ref().unwrap().si, 40e6);
            }
            k => panic!("unexpected {k:?}"),
        }
    }
}
