// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use super::ast::*;

/// Canonical text form of a program; reparses to an equal tree.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for (i, def) in program.defs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "seq {} {{", def.name);
        block(&def.body, 1, &mut out);
        out.push_str("}\n");
    }
    out
}

fn block(body: &[Instruction], depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for ins in body {
        out.push_str(&pad);
        match &ins.kind {
            InstrKind::Laser(d) => {
                let _ = writeln!(out, "laser {d}");
            }
            InstrKind::Wait(d) => {
                let _ = writeln!(out, "wait {d}");
            }
            InstrKind::Read => out.push_str("read\n"),
            InstrKind::Mw {
                angle,
                phase,
                amp,
                detune,
            } => {
                let _ = write!(out, "mw {angle} {phase}");
                if let Some(a) = amp {
                    let _ = write!(out, " amp={a}");
                }
                if let Some(d) = detune {
                    let _ = write!(out, " detune={d}");
                }
                out.push('\n');
            }
            InstrKind::Repeat { count, body } => {
                let _ = writeln!(out, "repeat {count} {{");
                block(body, depth + 1, out);
                out.push_str(&pad);
                out.push_str("}\n");
            }
        }
    }
}
