use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::symbol::{KeyMap, Symbol, TruncationPolicy};
use crate::error::{Error, Result};
use crate::frequency::Frequency;

/// Which bracket a normal-form computation uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BracketKind {
    Moyal { hbar: f64 },
    Poisson,
}

impl BracketKind {
    pub fn moyal(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::NonPositiveHbar(hbar));
        }
        Ok(Self::Moyal { hbar })
    }

    /// `hbar` for Moyal, `0` for Poisson.
    pub fn hbar(self) -> f64 {
        match self {
            Self::Moyal { hbar } => hbar,
            Self::Poisson => 0.0,
        }
    }
}

/// A bracket result together with the ρ-norm of the atoms pruned from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Bracketed {
    pub symbol: Symbol,
    pub dropped: f64,
}

/// Marker for `L = <omega, xi>`, which has no atomic representation.
#[derive(Debug, Clone, PartialEq)]
pub struct LSymbol {
    frequency: Frequency,
}

impl LSymbol {
    pub fn new(frequency: Frequency) -> Self {
        Self { frequency }
    }

    pub fn frequency(&self) -> &Frequency {
        &self.frequency
    }
}

/// `{F, G}_M` for `hbar > 0`.
///
/// An atom pair `(q1, m1, c1)`, `(q2, m2, c2)` contributes to `(q1+q2, m1+m2)`
/// the amplitude `(2/hbar) c1 c2 sin(hbar delta (m2 <omega,q1> - m1 <omega,q2>) / 2)`.
pub fn moyal_bracket(
    f: &Symbol,
    g: &Symbol,
    hbar: f64,
    freq: &Frequency,
    policy: &TruncationPolicy,
) -> Result<Bracketed> {
    bracket(f, g, BracketKind::moyal(hbar)?, freq, policy)
}

/// `{F, G}`; the pair amplitude is `delta (m2 <omega,q1> - m1 <omega,q2>) c1 c2`.
pub fn poisson_bracket(
    f: &Symbol,
    g: &Symbol,
    freq: &Frequency,
    policy: &TruncationPolicy,
) -> Result<Bracketed> {
    bracket(f, g, BracketKind::Poisson, freq, policy)
}

pub fn bracket(
    f: &Symbol,
    g: &Symbol,
    kind: BracketKind,
    freq: &Frequency,
    policy: &TruncationPolicy,
) -> Result<Bracketed> {
    f.check_compatible(g)?;
    if freq.dim() != f.dim() {
        return Err(Error::Mismatch(format!(
            "frequency dimension {} vs symbol dimension {}",
            freq.dim(),
            f.dim()
        )));
    }
    if let BracketKind::Moyal { hbar } = kind {
        BracketKind::moyal(hbar)?;
    }
    // evaluate in canonical argument order so that antisymmetry is exact
    let raw = match f.canonical_cmp(g) {
        Ordering::Equal => f.zero_like(),
        Ordering::Less => convolve(f, g, kind, freq),
        Ordering::Greater => convolve(g, f, kind, freq).neg(),
    };
    let (symbol, dropped) = raw.truncate(policy);
    Ok(Bracketed { symbol, dropped })
}

fn convolve(f: &Symbol, g: &Symbol, kind: BracketKind, freq: &Frequency) -> Symbol {
    let dim = f.dim();
    let delta = f.pstep();
    let fa: Vec<f64> = f
        .atoms()
        .iter()
        .map(|(k, _)| dot_key(freq, k.q(dim), dim))
        .collect();
    let ga: Vec<f64> = g
        .atoms()
        .iter()
        .map(|(k, _)| dot_key(freq, k.q(dim), dim))
        .collect();

    let mut acc: KeyMap<Complex64> = KeyMap::default();
    acc.reserve(f.len() * g.len() / 2 + 1);
    for (&(k1, c1), &a1) in f.atoms().iter().zip(&fa) {
        let m1 = k1.m() as f64;
        for (&(k2, c2), &a2) in g.atoms().iter().zip(&ga) {
            let d = k2.m() as f64 * a1 - m1 * a2;
            if d == 0.0 {
                continue;
            }
            let factor = match kind {
                BracketKind::Moyal { hbar } => (2.0 / hbar) * (0.5 * hbar * delta * d).sin(),
                BracketKind::Poisson => delta * d,
            };
            *acc.entry(k1.sum(k2, dim)).or_default() += c1 * c2 * factor;
        }
    }
    Symbol::from_keyed(dim, delta, acc.into_iter().collect())
}

#[inline]
fn dot_key(freq: &Frequency, q: [i32; 4], dim: usize) -> f64 {
    freq.dot_int(&q[..dim])
}

/// `{F, L}_M = -<grad_x F, omega>`: each atom `(q, m, c)` becomes
/// `(q, m, -i <q,omega> c)`.
pub fn bracket_with_l(f: &Symbol, l: &LSymbol) -> Result<Symbol> {
    let freq = l.frequency();
    if freq.dim() != f.dim() {
        return Err(Error::Mismatch(format!(
            "frequency dimension {} vs symbol dimension {}",
            freq.dim(),
            f.dim()
        )));
    }
    let dim = f.dim();
    let atoms = f
        .atoms()
        .iter()
        .map(|&(k, c)| (k, c * Complex64::new(0.0, -dot_key(freq, k.q(dim), dim))))
        .collect();
    Ok(Symbol::from_keyed(dim, f.pstep(), atoms))
}
