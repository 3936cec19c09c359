// Copyright 2026 The Spinforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Files in and out: atomic writes, two-column CSV input, JSON helpers and
//! seed resolution.

use std::collections::hash_map::RandomState;
use std::fs;
use std::hash::{BuildHasher, Hasher};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Environment variable that overrides any configured seed.
pub const SEED_ENV: &str = "SPINFORGE_SEED";

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create a temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("cannot move output into {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn json_text<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(format!("JSON encoding: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, json_text(value)?.as_bytes())
}

pub fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not valid JSON: {e}", path.display())))
}

/// Numeric columns of a CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Column `name`, or column `fallback` by position when `name` is absent.
    pub fn column(&self, name: Option<&str>, default_name: &str, fallback: usize) -> Result<&[f64], CliError> {
        let pick = |n: &str| self.headers.iter().position(|h| h.eq_ignore_ascii_case(n));
        let idx = match name {
            Some(n) => pick(n).ok_or_else(|| CliError::Usage(format!("CSV has no column '{n}'")))?,
            None => match pick(default_name) {
                Some(i) => i,
                None => {
                    if fallback >= self.headers.len() {
                        return Err(CliError::Usage(format!(
                            "CSV needs at least {} columns, found {}",
                            fallback + 1,
                            self.headers.len()
                        )));
                    }
                    fallback
                }
            },
        };
        Ok(&self.columns[idx])
    }
}

/// Parses CSV text: header row, comma separated, `#` comment lines allowed.
pub fn parse_csv(text: &str, origin: &str) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{origin}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Usage(format!("{origin}: empty CSV")));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = parse_cell(field).ok_or_else(|| {
                CliError::Usage(format!("{origin}: row {} column '{}': '{field}' is not a number", i + 2, headers[j]))
            })?;
            columns[j].push(v);
        }
    }
    Ok(Table { headers, columns })
}

fn parse_cell(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "true" => Some(1.0),
        "false" => Some(0.0),
        _ => s.parse().ok(),
    }
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, &path.display().to_string())
}

/// Seed precedence: explicit flag, then `SPINFORGE_SEED`, then the config
/// file, then fresh entropy. The chosen seed is always written out.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer")));
    }
    if let Some(s) = config {
        return Ok(s);
    }
    Ok(entropy_seed())
}

fn entropy_seed() -> u64 {
    let mut h = RandomState::new().build_hasher();
    if let Ok(d) = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        h.write_u128(d.as_nanos());
    }
    h.write_u32(std::process::id());
    h.finish()
}

/// Two-column CSV with shortest round-trip formatting.
pub fn columns_csv(headers: &[&str], columns: &[&[f64]]) -> String {
    let mut s = headers.join(",");
    s.push('\n');
    let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| format!("{:e}", c[i])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
