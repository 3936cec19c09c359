// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Lexer and recursive-descent parser for the pulse-sequence language.

use super::ast::*;
use super::PulseqError;
use crate::units::{self, Dimension};

/// Maximum `repeat` nesting depth.
pub const MAX_NESTING: usize = 16;

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Open,
    Close,
}

#[derive(Debug, Clone)]
struct Token<'a> {
    tok: Tok<'a>,
    span: Span,
}

fn lex(src: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let mut start: Option<usize> = None;
        let col_of = |byte: usize| line[..byte].chars().count() as u32 + 1;
        let mut spans = Vec::new();
        for (i, ch) in line.char_indices() {
            if ch.is_whitespace() || ch == '{' || ch == '}' {
                if let Some(s) = start.take() {
                    spans.push((s, i, None));
                }
                if ch == '{' || ch == '}' {
                    spans.push((i, i + 1, Some(ch)));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            spans.push((s, line.len(), None));
        }
        for (s, e, brace) in spans {
            let span = Span {
                line: lineno as u32 + 1,
                col: col_of(s),
            };
            let tok = match brace {
                Some('{') => Tok::Open,
                Some(_) => Tok::Close,
                None => Tok::Word(&line[s..e]),
            };
            out.push(Token { tok, span });
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
    eof: Span,
}

fn syntax(span: Span, msg: impl Into<String>) -> PulseqError {
    PulseqError::Syntax {
        line: span.line,
        col: span.col,
        msg: msg.into(),
    }
}

fn semantic(span: Span, msg: impl Into<String>) -> PulseqError {
    PulseqError::Semantic {
        line: span.line,
        col: span.col,
        msg: msg.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token<'a>> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn peek_word(&self) -> Option<&'a str> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), ..
            }) => Some(w),
            _ => None,
        }
    }

    fn expect_word(&mut self, what: &str) -> Result<(&'a str, Span), PulseqError> {
        match self.next() {
            Some(Token {
                tok: Tok::Word(w),
                span,
            }) => Ok((w, span)),
            Some(Token { tok, span }) => Err(syntax(
                span,
                format!(
                    "expected {what}, found '{}'",
                    if tok == Tok::Open { "{" } else { "}" }
                ),
            )),
            None => Err(syntax(self.eof, format!("unexpected end of input, expected {what}"))),
        }
    }

    fn program(&mut self) -> Result<Program, PulseqError> {
        let mut defs: Vec<SeqDef> = Vec::new();
        while let Some(tok) = self.next() {
            match tok.tok {
                Tok::Word("seq") => {
                    let (name, nspan) = self.expect_word("sequence name")?;
                    if !is_ident(name) {
                        return Err(syntax(nspan, format!("invalid sequence name '{name}'")));
                    }
                    if defs.iter().any(|d| d.name == name) {
                        return Err(semantic(nspan, format!("duplicate sequence '{name}'")));
                    }
                    let open = self.open_brace()?;
                    let body = self.block(open, 0)?;
                    defs.push(SeqDef {
                        name: name.to_string(),
                        body,
                        span: tok.span,
                    });
                }
                Tok::Word(w) => {
                    return Err(syntax(tok.span, format!("expected 'seq', found '{w}'")))
                }
                Tok::Open => return Err(syntax(tok.span, "expected 'seq', found '{'")),
                Tok::Close => return Err(syntax(tok.span, "unmatched '}'")),
            }
        }
        Ok(Program { defs })
    }

    fn open_brace(&mut self) -> Result<Span, PulseqError> {
        match self.next() {
            Some(Token {
                tok: Tok::Open,
                span,
            }) => Ok(span),
            Some(Token {
                tok: Tok::Word(w),
                span,
            }) => Err(syntax(span, format!("expected '{{', found '{w}'"))),
            Some(Token { span, .. }) => Err(syntax(span, "expected '{', found '}'")),
            None => Err(syntax(self.eof, "unexpected end of input, expected '{'")),
        }
    }

    /// Instructions up to the matching `}`.
    fn block(&mut self, open: Span, depth: usize) -> Result<Vec<Instruction>, PulseqError> {
        let mut body = Vec::new();
        loop {
            let Some(tok) = self.next() else {
                return Err(syntax(open, "unclosed '{'"));
            };
            let span = tok.span;
            let kind = match tok.tok {
                Tok::Close => return Ok(body),
                Tok::Open => return Err(syntax(span, "unexpected '{'")),
                Tok::Word("laser") => InstrKind::Laser(self.duration()?),
                Tok::Word("wait") => InstrKind::Wait(self.duration()?),
                Tok::Word("read") => InstrKind::Read,
                Tok::Word("mw") => self.mw()?,
                Tok::Word("repeat") => {
                    if depth + 1 > MAX_NESTING {
                        return Err(semantic(
                            span,
                            format!("repeat nesting depth exceeds {MAX_NESTING}"),
                        ));
                    }
                    let (w, cspan) = self.expect_word("repeat count")?;
                    let count: u64 = w
                        .parse()
                        .map_err(|_| syntax(cspan, format!("invalid repeat count '{w}'")))?;
                    if count == 0 {
                        return Err(semantic(cspan, "repeat count must be at least 1"));
                    }
                    let open = self.open_brace()?;
                    let inner = self.block(open, depth + 1)?;
                    InstrKind::Repeat { count, body: inner }
                }
                Tok::Word(w) => return Err(syntax(span, format!("unknown keyword '{w}'"))),
            };
            body.push(Instruction { kind, span });
        }
    }

    /// `NUMBER unit` as one word (`16ns`) or two (`16 ns`).
    fn quantity(&mut self, dim: Dimension, what: &str) -> Result<(Quantity, Span), PulseqError> {
        let (w, span) = self.expect_word(what)?;
        let (num, unit) = units::split_number(w);
        if num.is_empty() || num == "-" || num == "+" {
            return Err(syntax(span, format!("expected {what}, found '{w}'")));
        }
        let number =
            units::parse_number(num).map_err(|_| syntax(span, format!("invalid number '{num}'")))?;
        let unit = if unit.is_empty() {
            match self.peek_word() {
                Some(u) if units::unit_scale(u, dim).is_some() => {
                    self.pos += 1;
                    u
                }
                Some(u) if units::split_number(u).0.is_empty() && !is_keyword(u) => {
                    let sp = self.peek().unwrap().span;
                    return Err(syntax(sp, format!("unknown unit '{u}'")));
                }
                _ => return Err(syntax(span, format!("missing unit after '{num}'"))),
            }
        } else {
            unit
        };
        let scale = units::unit_scale(unit, dim)
            .ok_or_else(|| syntax(span, format!("unknown unit '{unit}'")))?;
        Ok((
            Quantity {
                number,
                unit: unit.to_string(),
                si: number * scale,
            },
            span,
        ))
    }

    fn duration(&mut self) -> Result<DurationExpr, PulseqError> {
        if let Some(w) = self.peek_word() {
            if let Some(name) = w.strip_prefix('$') {
                let span = self.next().unwrap().span;
                if !is_ident(name) {
                    return Err(syntax(span, format!("invalid placeholder '{w}'")));
                }
                return Ok(DurationExpr::Placeholder(name.to_string()));
            }
        }
        let (q, span) = self.quantity(Dimension::Time, "duration")?;
        if q.si <= 0.0 {
            return Err(semantic(span, format!("duration must be positive, found '{q}'")));
        }
        Ok(DurationExpr::Fixed(q))
    }

    fn mw(&mut self) -> Result<InstrKind, PulseqError> {
        let angle = match self.peek_word() {
            Some("pi/2") => {
                self.pos += 1;
                Angle::HalfPi
            }
            Some("pi") => {
                self.pos += 1;
                Angle::Pi
            }
            Some("3pi/2") => {
                self.pos += 1;
                Angle::ThreeHalfPi
            }
            _ => Angle::Duration(self.duration()?),
        };
        let phase = self.phase()?;
        let mut amp = None;
        let mut detune = None;
        while let Some(w) = self.peek_word() {
            if let Some(rest) = w.strip_prefix("amp=") {
                let span = self.next().unwrap().span;
                let text = if rest.is_empty() { self.expect_word("amplitude")?.0 } else { rest };
                let v = units::parse_number(text)
                    .map_err(|_| syntax(span, format!("invalid amplitude '{text}'")))?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(semantic(span, format!("amp_rel {v} out of range (0, 1]")));
                }
                amp = Some(v);
            } else if let Some(rest) = w.strip_prefix("detune=") {
                let span = self.next().unwrap().span;
                let q = if rest.is_empty() {
                    self.quantity(Dimension::Frequency, "detuning")?.0
                } else {
                    let (num, unit) = units::split_number(rest);
                    let number = units::parse_number(num)
                        .map_err(|_| syntax(span, format!("invalid detuning '{rest}'")))?;
                    if unit.is_empty() {
                        return Err(syntax(span, format!("missing unit after '{num}'")));
                    }
                    let scale = units::unit_scale(unit, Dimension::Frequency)
                        .ok_or_else(|| syntax(span, format!("unknown unit '{unit}'")))?;
                    Quantity {
                        number,
                        unit: unit.to_string(),
                        si: number * scale,
                    }
                };
                detune = Some(q);
            } else if w.contains('=') {
                let span = self.peek().unwrap().span;
                let key = w.split('=').next().unwrap_or(w);
                return Err(syntax(span, format!("unknown option '{key}'")));
            } else {
                break;
            }
        }
        Ok(InstrKind::Mw {
            angle,
            phase,
            amp,
            detune,
        })
    }

    fn phase(&mut self) -> Result<Phase, PulseqError> {
        let (w, span) = self.expect_word("phase")?;
        Ok(match w {
            "x" => Phase::X,
            "y" => Phase::Y,
            "-x" => Phase::MinusX,
            "-y" => Phase::MinusY,
            _ => {
                let (num, unit) = units::split_number(w);
                if num.is_empty() || num == "-" || num == "+" {
                    return Err(syntax(span, format!("unknown phase '{w}'")));
                }
                let v = units::parse_number(num)
                    .map_err(|_| syntax(span, format!("unknown phase '{w}'")))?;
                match unit {
                    "deg" => Phase::Degrees(v),
                    "" if self.peek_word() == Some("deg") => {
                        self.pos += 1;
                        Phase::Degrees(v)
                    }
                    _ => return Err(syntax(span, format!("unknown phase '{w}'"))),
                }
            }
        })
    }
}

fn is_keyword(w: &str) -> bool {
    matches!(w, "seq" | "laser" | "mw" | "wait" | "read" | "repeat")
}

/// Parses a complete `.pseq` source.
pub fn parse(source: &str) -> Result<Program, PulseqError> {
    let toks = lex(source);
    let last_line = source.lines().count().max(1) as u32;
    let last_col = source.lines().last().map_or(0, |l| l.chars().count()) as u32 + 1;
    let mut p = Parser {
        toks,
        pos: 0,
        eof: Span {
            line: last_line,
            col: last_col,
        },
    };
    p.program()
}
