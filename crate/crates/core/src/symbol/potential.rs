use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::key::MAX_INDEX;
use super::symbol::Symbol;
use crate::error::{Error, Result};

/// One generator of a potential.
///
/// A regular generator `(q, m, a)` expands to `c_{±q,±m} = ±a/4` with the sign
/// of `q`, which is real in `p`-reflection and odd in `x`. A `broken`
/// generator expands to `c_{±q,±m} = i a/4` instead (even in `x`, imaginary
/// Fourier data) and is meant for negative controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub q: Vec<i32>,
    pub m: i32,
    pub amplitude: f64,
    #[serde(default)]
    pub broken: bool,
}

impl Generator {
    pub fn new(q: Vec<i32>, m: i32, amplitude: f64) -> Self {
        Self {
            q,
            m,
            amplitude,
            broken: false,
        }
    }

    pub fn broken(q: Vec<i32>, m: i32, amplitude: f64) -> Self {
        Self {
            q,
            m,
            amplitude,
            broken: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub dim: usize,
    pub pstep: f64,
    pub generators: Vec<Generator>,
}

impl PotentialSpec {
    pub fn new(dim: usize, pstep: f64, generators: Vec<Generator>) -> Self {
        Self {
            dim,
            pstep,
            generators,
        }
    }

    pub fn is_pt_symmetric(&self) -> bool {
        self.generators.iter().all(|g| !g.broken)
    }

    pub fn validate(&self) -> Result<()> {
        Symbol::zero(self.dim, self.pstep).map_err(|e| Error::InvalidPotential(e.to_string()))?;
        for (i, g) in self.generators.iter().enumerate() {
            if g.q.len() != self.dim {
                return Err(Error::InvalidPotential(format!(
                    "generator {i}: q = {:?} has dimension {} != {}",
                    g.q,
                    g.q.len(),
                    self.dim
                )));
            }
            if !g.amplitude.is_finite() {
                return Err(Error::InvalidPotential(format!(
                    "generator {i}: amplitude must be finite"
                )));
            }
            if g.q
                .iter()
                .chain(std::iter::once(&g.m))
                .any(|v| v.abs() > MAX_INDEX)
            {
                return Err(Error::InvalidPotential(format!(
                    "generator {i}: index exceeds {MAX_INDEX}"
                )));
            }
            if !g.broken && g.q.iter().all(|&k| k == 0) {
                return Err(Error::InvalidPotential(format!(
                    "generator {i}: q = 0 is incompatible with oddness in x"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetry completion of the generator list.
pub fn build_potential(spec: &PotentialSpec) -> Result<Symbol> {
    spec.validate()?;
    let mut terms = Vec::with_capacity(4 * spec.generators.len());
    for g in &spec.generators {
        let neg: Vec<i32> = g.q.iter().map(|v| -v).collect();
        let quarter = g.amplitude / 4.0;
        let (plus, minus) = if g.broken {
            (Complex64::new(0.0, quarter), Complex64::new(0.0, quarter))
        } else {
            (Complex64::new(quarter, 0.0), Complex64::new(-quarter, 0.0))
        };
        for m in [g.m, -g.m] {
            terms.push((g.q.clone(), m, plus));
            terms.push((neg.clone(), m, minus));
        }
    }
    Symbol::from_terms(spec.dim, spec.pstep, terms)
}
