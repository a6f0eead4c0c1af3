//! Plain-text symbol format.
//!
//! ```text
//! # symbol
//! dim 2
//! pstep 1.0
//! atoms 2
//! # q1 q2 m re im
//! -1 0 1 -0.25 0.0
//! 1 0 1 0.25 0.0
//! ```
//!
//! Records are sorted lexicographically by `(q, m)`. Floats are written in
//! shortest round-trip form, so reading back reproduces the symbol exactly.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::symbol::Symbol;
use crate::error::{Error, Result};

pub fn format_symbol(s: &Symbol) -> String {
    let mut out = String::new();
    write_symbol(&mut out, s);
    out
}

pub fn write_symbol(out: &mut String, s: &Symbol) {
    let dim = s.dim();
    let _ = writeln!(out, "# symbol");
    let _ = writeln!(out, "dim {dim}");
    let _ = writeln!(out, "pstep {:?}", s.pstep());
    let _ = writeln!(out, "atoms {}", s.len());
    let cols: Vec<String> = (1..=dim).map(|i| format!("q{i}")).collect();
    let _ = writeln!(out, "# {} m re im", cols.join(" "));
    for (q, m, c) in s.terms() {
        for v in q {
            let _ = write!(out, "{v} ");
        }
        let _ = writeln!(out, "{m} {:?} {:?}", c.re, c.im);
    }
}

/// Parses one symbol block. Blank lines and `#` comments are ignored.
pub fn parse_symbol(text: &str) -> Result<Symbol> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut header = |name: &str| -> Result<(usize, String)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing `{name}` header")))?;
        let value = line
            .strip_prefix(name)
            .filter(|rest| rest.starts_with(char::is_whitespace))
            .ok_or_else(|| {
                Error::Parse(format!(
                    "line {no}: expected `{name} <value>`, found `{line}`"
                ))
            })?;
        Ok((no, value.trim().to_string()))
    };
    let (no, dim) = header("dim")?;
    let dim: usize = dim
        .parse()
        .map_err(|e| Error::Parse(format!("line {no}: dim: {e}")))?;
    let (no, pstep) = header("pstep")?;
    let pstep: f64 = pstep
        .parse()
        .map_err(|e| Error::Parse(format!("line {no}: pstep: {e}")))?;
    let (no, count) = header("atoms")?;
    let count: usize = count
        .parse()
        .map_err(|e| Error::Parse(format!("line {no}: atoms: {e}")))?;

    let mut terms = Vec::with_capacity(count);
    for (no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 3 {
            return Err(Error::Parse(format!(
                "line {no}: expected {} fields, found {}",
                dim + 3,
                fields.len()
            )));
        }
        let ints = fields[..=dim]
            .iter()
            .map(|v| v.parse::<i32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
        let re: f64 = fields[dim + 1]
            .parse()
            .map_err(|e| Error::Parse(format!("line {no}: re: {e}")))?;
        let im: f64 = fields[dim + 2]
            .parse()
            .map_err(|e| Error::Parse(format!("line {no}: im: {e}")))?;
        terms.push((ints[..dim].to_vec(), ints[dim], Complex64::new(re, im)));
    }
    if terms.len() != count {
        return Err(Error::Parse(format!(
            "header declares {count} atoms, found {}",
            terms.len()
        )));
    }
    Symbol::from_terms(dim, pstep, terms).map_err(|e| Error::Parse(e.to_string()))
}
