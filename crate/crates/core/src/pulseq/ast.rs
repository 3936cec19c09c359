// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt;

/// Source position (1-based) attached to every node for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A literal with its unit as written, plus the SI value.
///
/// The literal is kept so that pretty-printing reproduces the exact same
/// `f64` on reparse; equality only looks at the SI value.
#[derive(Debug, Clone)]
pub struct Quantity {
    pub number: f64,
    pub unit: String,
    pub si: f64,
}

impl PartialEq for Quantity {
    fn eq(&self, other: &Self) -> bool {
        self.si == other.si
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.number, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DurationExpr {
    Fixed(Quantity),
    Placeholder(String),
}

impl fmt::Display for DurationExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DurationExpr::Fixed(q) => q.fmt(f),
            DurationExpr::Placeholder(name) => write!(f, "${name}"),
        }
    }
}

/// Rotation angle of a microwave pulse. Symbolic angles are resolved
/// through the pulse calibration at compile time.
#[derive(Debug, Clone, PartialEq)]
pub enum Angle {
    HalfPi,
    Pi,
    ThreeHalfPi,
    Duration(DurationExpr),
}

impl Angle {
    /// Nominal rotation in radians for symbolic angles.
    pub fn nominal_rad(&self) -> Option<f64> {
        use std::f64::consts::PI;
        match self {
            Angle::HalfPi => Some(PI / 2.0),
            Angle::Pi => Some(PI),
            Angle::ThreeHalfPi => Some(1.5 * PI),
            Angle::Duration(_) => None,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::HalfPi => f.write_str("pi/2"),
            Angle::Pi => f.write_str("pi"),
            Angle::ThreeHalfPi => f.write_str("3pi/2"),
            Angle::Duration(d) => d.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    X,
    Y,
    MinusX,
    MinusY,
    Degrees(f64),
}

impl Phase {
    pub fn degrees(&self) -> f64 {
        match self {
            Phase::X => 0.0,
            Phase::Y => 90.0,
            Phase::MinusX => 180.0,
            Phase::MinusY => 270.0,
            Phase::Degrees(d) => *d,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::X => f.write_str("x"),
            Phase::Y => f.write_str("y"),
            Phase::MinusX => f.write_str("-x"),
            Phase::MinusY => f.write_str("-y"),
            Phase::Degrees(d) => write!(f, "{d}deg"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstrKind {
    Laser(DurationExpr),
    Mw {
        angle: Angle,
        phase: Phase,
        /// Relative amplitude in (0, 1].
        amp: Option<f64>,
        /// Detuning from the carrier, Hz.
        detune: Option<Quantity>,
    },
    Wait(DurationExpr),
    Read,
    Repeat {
        count: u64,
        body: Vec<Instruction>,
    },
}

#[derive(Debug, Clone)]
pub struct Instruction {
    pub kind: InstrKind,
    pub span: Span,
}

impl PartialEq for Instruction {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// One `seq NAME { ... }` definition.
#[derive(Debug, Clone)]
pub struct SeqDef {
    pub name: String,
    pub body: Vec<Instruction>,
    pub span: Span,
}

impl PartialEq for SeqDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.body == other.body
    }
}

impl SeqDef {
    /// Names of all `$placeholders` referenced anywhere in the body.
    pub fn placeholders(&self) -> BTreeSet<String> {
        fn walk(body: &[Instruction], out: &mut BTreeSet<String>) {
            for ins in body {
                match &ins.kind {
                    InstrKind::Laser(DurationExpr::Placeholder(p))
                    | InstrKind::Wait(DurationExpr::Placeholder(p)) => {
                        out.insert(p.clone());
                    }
                    InstrKind::Mw {
                        angle: Angle::Duration(DurationExpr::Placeholder(p)),
                        ..
                    } => {
                        out.insert(p.clone());
                    }
                    InstrKind::Repeat { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.body, &mut out);
        out
    }
}

/// A parsed `.pseq` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub defs: Vec<SeqDef>,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&SeqDef> {
        self.defs.iter().find(|d| d.name == name)
    }
}
