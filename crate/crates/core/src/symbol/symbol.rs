use std::cmp::Ordering;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::key::{AtomKey, MAX_DIM, MAX_INDEX};
use crate::error::{Error, Result};
use crate::frequency::Frequency;

/// Default relative tolerance for the reality / parity predicates.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-12;

pub(crate) type KeyMap<V> = HashMap<AtomKey, V, BuildHasherDefault<KeyHasher>>;

/// Multiplicative hasher for packed keys.
#[derive(Default)]
pub(crate) struct KeyHasher(u64);

impl std::hash::Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(5) ^ b as u64).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = (v ^ (v >> 29)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
}

/// A phase-space symbol of the reduced form
/// `F(xi, x) = sum c_{q,m} exp(i (m delta <omega,xi> + <q,x>))`.
///
/// Atoms are kept sorted by key with no zero amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    dim: usize,
    pstep: f64,
    atoms: Vec<(AtomKey, Complex64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    /// Mixed parity.
    None,
    /// The zero symbol, which is both even and odd.
    Zero,
}

impl Parity {
    /// Whether the classification is compatible with the sign `+1` (even)
    /// or `-1` (odd).
    pub fn matches(self, sign: i32) -> bool {
        match self {
            Parity::Zero => true,
            Parity::Even => sign > 0,
            Parity::Odd => sign < 0,
            Parity::None => false,
        }
    }

    pub fn sign(self) -> Option<i32> {
        match self {
            Parity::Even => Some(1),
            Parity::Odd => Some(-1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationPolicy {
    /// Amplitude threshold; atoms with `|c| < eta` (or `eta * max|c|` when
    /// `relative`) are removed.
    pub eta: f64,
    pub relative: bool,
    pub qmax: i32,
    pub mmax: i32,
    /// Weight of the ρ-norm used for the dropped-mass ledger.
    pub rho: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            eta: 1e-14,
            relative: true,
            qmax: 32,
            mmax: 32,
            rho: 3.0,
        }
    }
}

impl TruncationPolicy {
    /// No amplitude pruning and the widest caps the key packing allows.
    pub fn exact() -> Self {
        Self {
            eta: 0.0,
            relative: false,
            qmax: MAX_INDEX,
            mmax: MAX_INDEX,
            rho: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidPolicy(format!(
                "eta must be >= 0, got {}",
                self.eta
            )));
        }
        if !(self.rho > 2.0) || !self.rho.is_finite() {
            return Err(Error::InvalidPolicy(format!(
                "rho must exceed 2, got {}",
                self.rho
            )));
        }
        for (name, cap) in [("qmax", self.qmax), ("mmax", self.mmax)] {
            if !(0..=MAX_INDEX).contains(&cap) {
                return Err(Error::InvalidPolicy(format!(
                    "{name} must lie in 0..={MAX_INDEX}, got {cap}"
                )));
            }
        }
        Ok(())
    }
}

impl Symbol {
    pub fn zero(dim: usize, pstep: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Mismatch(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if !(pstep > 0.0) || !pstep.is_finite() {
            return Err(Error::Mismatch(format!(
                "pstep must be positive, got {pstep}"
            )));
        }
        Ok(Self {
            dim,
            pstep,
            atoms: Vec::new(),
        })
    }

    /// Builds a symbol from `(q, m, c)` terms; repeated keys are summed in
    /// input order.
    pub fn from_terms<Q, I>(dim: usize, pstep: f64, terms: I) -> Result<Self>
    where
        Q: AsRef<[i32]>,
        I: IntoIterator<Item = (Q, i32, Complex64)>,
    {
        let mut s = Self::zero(dim, pstep)?;
        let mut map: KeyMap<Complex64> = KeyMap::default();
        let mut order = Vec::new();
        for (q, m, c) in terms {
            let q = q.as_ref();
            if q.len() != dim {
                return Err(Error::Mismatch(format!(
                    "atom q={q:?} has dimension {} != {dim}",
                    q.len()
                )));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Mismatch(format!(
                    "non-finite amplitude at q={q:?}, m={m}"
                )));
            }
            let key = AtomKey::pack(q, m)?;
            map.entry(key).and_modify(|v| *v += c).or_insert_with(|| {
                order.push(key);
                c
            });
        }
        s.atoms = order
            .into_iter()
            .map(|k| (k, map[&k]))
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .collect();
        s.atoms.sort_unstable_by_key(|(k, _)| *k);
        Ok(s)
    }

    pub fn single(dim: usize, pstep: f64, q: &[i32], m: i32, c: Complex64) -> Result<Self> {
        Self::from_terms(dim, pstep, [(q, m, c)])
    }

    /// Builds from already-unique keys; drops exact zeros and sorts.
    pub(crate) fn from_keyed(dim: usize, pstep: f64, mut atoms: Vec<(AtomKey, Complex64)>) -> Self {
        atoms.retain(|(_, c)| *c != Complex64::new(0.0, 0.0));
        atoms.sort_unstable_by_key(|(k, _)| *k);
        Self { dim, pstep, atoms }
    }

    pub fn zero_like(&self) -> Self {
        Self {
            dim: self.dim,
            pstep: self.pstep,
            atoms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pstep(&self) -> f64 {
        self.pstep
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(AtomKey, Complex64)] {
        &self.atoms
    }

    /// `(q, m, c)` triples in key order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<i32>, i32, Complex64)> + '_ {
        self.atoms
            .iter()
            .map(move |(k, c)| (k.q_vec(self.dim), k.m(), *c))
    }

    pub fn get_key(&self, key: AtomKey) -> Complex64 {
        match self.atoms.binary_search_by_key(&key, |(k, _)| *k) {
            Ok(i) => self.atoms[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn get(&self, q: &[i32], m: i32) -> Complex64 {
        match AtomKey::pack(q, m) {
            Ok(k) if q.len() == self.dim => self.get_key(k),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub(crate) fn check_compatible(&self, other: &Symbol) -> Result<()> {
        if self.dim != other.dim || self.pstep != other.pstep {
            return Err(Error::Mismatch(format!(
                "(dim {}, pstep {}) vs (dim {}, pstep {})",
                self.dim, self.pstep, other.dim, other.pstep
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.check_compatible(other)?;
        let mut out = Vec::with_capacity(self.atoms.len() + other.atoms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() || j < other.atoms.len() {
            let next = match (self.atoms.get(i), other.atoms.get(j)) {
                (Some(a), Some(b)) => match a.0.cmp(&b.0) {
                    Ordering::Less => {
                        i += 1;
                        *a
                    }
                    Ordering::Greater => {
                        j += 1;
                        *b
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (a.0, a.1 + b.1)
                    }
                },
                (Some(a), None) => {
                    i += 1;
                    *a
                }
                (None, Some(b)) => {
                    j += 1;
                    *b
                }
                (None, None) => unreachable!(),
            };
            if next.1 != Complex64::new(0.0, 0.0) {
                out.push(next);
            }
        }
        Ok(Symbol {
            dim: self.dim,
            pstep: self.pstep,
            atoms: out,
        })
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, a: Complex64) -> Symbol {
        let atoms = self.atoms.iter().map(|&(k, c)| (k, c * a)).collect();
        Self::from_keyed(self.dim, self.pstep, atoms)
    }

    pub fn scale_real(&self, a: f64) -> Symbol {
        let atoms = self.atoms.iter().map(|&(k, c)| (k, c * a)).collect();
        Self::from_keyed(self.dim, self.pstep, atoms)
    }

    pub fn neg(&self) -> Symbol {
        Symbol {
            dim: self.dim,
            pstep: self.pstep,
            atoms: self.atoms.iter().map(|&(k, c)| (k, -c)).collect(),
        }
    }

    /// The `q = 0` part (the x-independent average).
    pub fn q0_slice(&self) -> Symbol {
        let atoms = self
            .atoms
            .iter()
            .copied()
            .filter(|(k, _)| k.q_is_zero(self.dim))
            .collect();
        Symbol {
            dim: self.dim,
            pstep: self.pstep,
            atoms,
        }
    }

    pub fn without_q0(&self) -> Symbol {
        let atoms = self
            .atoms
            .iter()
            .copied()
            .filter(|(k, _)| !k.q_is_zero(self.dim))
            .collect();
        Symbol {
            dim: self.dim,
            pstep: self.pstep,
            atoms,
        }
    }

    pub fn is_x_independent(&self) -> bool {
        self.atoms.iter().all(|(k, _)| k.q_is_zero(self.dim))
    }

    /// `max |q|_inf` over the support.
    pub fn q_spread(&self) -> i32 {
        self.atoms
            .iter()
            .map(|(k, _)| k.q_inf_norm(self.dim))
            .max()
            .unwrap_or(0)
    }

    pub fn m_spread(&self) -> i32 {
        self.atoms
            .iter()
            .map(|(k, _)| k.m().abs())
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Total atom mass `sum |c|`.
    pub fn l1_mass(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(_, c)| c.norm())
            .fold(0.0, |a, b| a + b)
    }

    /// `sum exp(rho |q|_1) exp(rho |m delta|) |c|`.
    pub fn rho_norm(&self, rho: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(k, c)| self.weight(k, rho) * c.norm())
            .fold(0.0, |a, b| a + b)
    }

    #[inline]
    pub(crate) fn weight(&self, k: AtomKey, rho: f64) -> f64 {
        (rho * (k.q_l1_norm(self.dim) as f64 + (k.m() as f64 * self.pstep).abs())).exp()
    }

    /// Removes atoms below the amplitude threshold or outside the caps.
    /// Returns the pruned symbol and the ρ-norm of what was removed.
    pub fn truncate(&self, policy: &TruncationPolicy) -> (Symbol, f64) {
        let threshold = if policy.relative {
            policy.eta * self.max_abs()
        } else {
            policy.eta
        };
        let qcap = policy.qmax.min(MAX_INDEX);
        let mcap = policy.mmax.min(MAX_INDEX);
        let mut kept = Vec::with_capacity(self.atoms.len());
        let mut dropped = 0.0;
        for &(k, c) in &self.atoms {
            if c.norm() < threshold || k.q_inf_norm(self.dim) > qcap || k.m().abs() > mcap {
                dropped += self.weight(k, policy.rho) * c.norm();
            } else {
                kept.push((k, c));
            }
        }
        (
            Symbol {
                dim: self.dim,
                pstep: self.pstep,
                atoms: kept,
            },
            dropped,
        )
    }

    /// `sum |c_{-q,m} - sign c_{q,m}| / (2 sum |c|)`; zero for the zero symbol.
    pub fn parity_defect(&self, sign: i32) -> f64 {
        let mass = self.l1_mass();
        if mass == 0.0 {
            return 0.0;
        }
        let s = sign as f64;
        let total: f64 = self
            .atoms
            .iter()
            .map(|&(k, c)| (self.get_key(k.neg_q(self.dim)) - c * s).norm())
            .fold(0.0, |a, b| a + b);
        total / (2.0 * mass)
    }

    /// Parity in `x` with a relative tolerance on coefficient mismatches.
    pub fn parity_j_tol(&self, tol: f64) -> Parity {
        if self.is_zero() {
            return Parity::Zero;
        }
        let even = self.parity_defect(1) <= tol;
        let odd = self.parity_defect(-1) <= tol;
        match (even, odd) {
            (true, false) => Parity::Even,
            (false, true) => Parity::Odd,
            // both within tolerance only for a numerically negligible symbol
            (true, true) => Parity::Zero,
            (false, false) => Parity::None,
        }
    }

    pub fn parity_j(&self) -> Parity {
        self.parity_j_tol(DEFAULT_SYMMETRY_TOL)
    }

    /// Relative violation of `conj(c_{q,m}) = c_{q,-m}` (real Fourier
    /// coefficients `F_q(xi)`).
    pub fn reality_defect(&self) -> f64 {
        self.conj_defect(1.0)
    }

    /// Relative violation of `conj(c_{q,m}) = -c_{q,-m}` (purely imaginary
    /// `F_q(xi)`).
    pub fn imaginary_defect(&self) -> f64 {
        self.conj_defect(-1.0)
    }

    fn conj_defect(&self, sign: f64) -> f64 {
        let mass = self.l1_mass();
        if mass == 0.0 {
            return 0.0;
        }
        let total: f64 = self
            .atoms
            .iter()
            .map(|&(k, c)| (c.conj() - self.get_key(k.neg_m(self.dim)) * sign).norm())
            .fold(0.0, |a, b| a + b);
        total / (2.0 * mass)
    }

    pub fn is_real_coeffs(&self) -> bool {
        self.reality_defect() <= DEFAULT_SYMMETRY_TOL
    }

    pub fn is_imag_coeffs(&self) -> bool {
        self.imaginary_defect() <= DEFAULT_SYMMETRY_TOL
    }

    /// `F(xi, x)` by direct summation.
    pub fn evaluate(&self, xi: &[f64], x: &[f64], f: &Frequency) -> Result<Complex64> {
        self.check_point(xi, f)?;
        if x.len() != self.dim {
            return Err(Error::Mismatch(format!(
                "x has dimension {} != {}",
                x.len(),
                self.dim
            )));
        }
        let t = f.dot(xi);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(k, c) in &self.atoms {
            let qx: f64 = (0..self.dim)
                .map(|i| k.q_component(self.dim, i) as f64 * x[i])
                .fold(0.0, |a, b| a + b);
            acc += c * Complex64::from_polar(1.0, k.m() as f64 * self.pstep * t + qx);
        }
        Ok(acc)
    }

    /// Angular Fourier coefficient `F_q(xi) = sum_m c_{q,m} exp(i m delta <omega,xi>)`.
    pub fn fourier_coeff(&self, q: &[i32], xi: &[f64], f: &Frequency) -> Result<Complex64> {
        self.check_point(xi, f)?;
        if q.len() != self.dim {
            return Err(Error::Mismatch(format!(
                "q has dimension {} != {}",
                q.len(),
                self.dim
            )));
        }
        Ok(self.fourier_coeff_at(q, f.dot(xi)))
    }

    /// `F_q` as a function of the scalar `t = <omega, xi>`.
    pub fn fourier_coeff_at(&self, q: &[i32], t: f64) -> Complex64 {
        let Ok(lo) = AtomKey::pack(q, -MAX_INDEX) else {
            return Complex64::new(0.0, 0.0);
        };
        let hi = AtomKey::pack(q, MAX_INDEX).expect("same q as lo");
        let start = self.atoms.partition_point(|(k, _)| *k < lo);
        self.atoms[start..]
            .iter()
            .take_while(|(k, _)| *k <= hi)
            .map(|&(k, c)| c * Complex64::from_polar(1.0, k.m() as f64 * self.pstep * t))
            .sum()
    }

    fn check_point(&self, xi: &[f64], f: &Frequency) -> Result<()> {
        if xi.len() != self.dim || f.dim() != self.dim {
            return Err(Error::Mismatch(format!(
                "xi dimension {} / frequency dimension {} vs symbol dimension {}",
                xi.len(),
                f.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `max |c^self_{q,m} - c^other_{q,m}|` over the union of supports.
    pub fn max_abs_diff(&self, other: &Symbol) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Deterministic total order used to canonicalize bracket arguments.
    pub(crate) fn canonical_cmp(&self, other: &Symbol) -> Ordering {
        self.atoms.len().cmp(&other.atoms.len()).then_with(|| {
            for (a, b) in self.atoms.iter().zip(&other.atoms) {
                let o =
                    a.0.cmp(&b.0)
                        .then_with(|| a.1.re.total_cmp(&b.1.re))
                        .then_with(|| a.1.im.total_cmp(&b.1.im));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> Symbol {
        Symbol::from_terms(
            2,
            1.0,
            [
                (vec![1, 0], 1, c(0.5, 0.0)),
                (vec![0, 1], -2, c(0.0, 1.5)),
                (vec![0, 0], 0, c(2.0, -1.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn construction_merges_and_prunes() {
        let s = Symbol::from_terms(
            1,
            1.0,
            [(vec![1], 0, c(1.0, 0.0)), (vec![1], 0, c(-1.0, 0.0))],
        )
        .unwrap();
        assert!(s.is_zero());
        let s = Symbol::from_terms(
            1,
            1.0,
            [(vec![2], 0, c(1.0, 0.0)), (vec![1], 3, c(1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(s.terms().map(|t| t.0[0]).collect::<Vec<_>>(), vec![1, 2]);
        assert!(Symbol::from_terms(2, 1.0, [(vec![1], 0, c(1.0, 0.0))]).is_err());
        assert!(Symbol::zero(2, 0.0).is_err());
    }

    #[test]
    fn add_scale_examples() {
        let f = sample();
        assert!(f.add(&f.scale(c(-1.0, 0.0))).unwrap().is_zero());
        assert!(f.zero_like().scale(c(3.0, 2.0)).is_zero());
        let g = Symbol::single(2, 1.0, &[5, 5], 1, c(1.0, 0.0)).unwrap();
        let u = f.add(&g).unwrap();
        assert_eq!(u.len(), f.len() + 1);
        let other = Symbol::zero(2, 0.5).unwrap();
        assert!(f.add(&other).is_err());
        assert!(f.add(&Symbol::zero(1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn rho_norm_single_atom() {
        let s = Symbol::single(2, 1.0, &[1, 0], 1, c(0.5, 0.0)).unwrap();
        let expect = 0.5 * 3f64.exp() * 3f64.exp();
        assert!((s.rho_norm(3.0) - expect).abs() < 1e-12 * expect);
        assert_eq!(s.zero_like().rho_norm(3.0), 0.0);
    }

    #[test]
    fn truncate_examples() {
        let f = sample();
        let loose = TruncationPolicy {
            eta: 0.0,
            relative: false,
            qmax: 100,
            mmax: 100,
            rho: 3.0,
        };
        let (t, dropped) = f.truncate(&loose);
        assert_eq!(t, f);
        assert_eq!(dropped, 0.0);

        let all = TruncationPolicy {
            eta: 10.0,
            relative: false,
            ..loose
        };
        let (t, dropped) = f.truncate(&all);
        assert!(t.is_zero());
        assert!((dropped - f.rho_norm(3.0)).abs() < 1e-12 * dropped);

        let mixed = TruncationPolicy {
            eta: 1.0,
            relative: false,
            qmax: 100,
            mmax: 1,
            rho: 2.5,
        };
        let (t, dropped) = f.truncate(&mixed);
        let removed = f.sub(&t).unwrap();
        assert!((dropped - removed.rho_norm(2.5)).abs() < 1e-12 * dropped);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn parity_examples() {
        let xi = Symbol::from_terms(2, 1.0, [(vec![0, 0], 1, c(1.0, 0.0))]).unwrap();
        assert_eq!(xi.parity_j(), Parity::Even);
        let odd = Symbol::from_terms(
            2,
            1.0,
            [(vec![1, 0], 1, c(1.0, 0.0)), (vec![-1, 0], 1, c(-1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(odd.parity_j(), Parity::Odd);
        assert_eq!(xi.add(&odd).unwrap().parity_j(), Parity::None);
        assert_eq!(xi.zero_like().parity_j(), Parity::Zero);
    }

    #[test]
    fn evaluate_single_atom_and_consistency() {
        let f = Frequency::golden();
        let s = Symbol::single(2, 0.7, &[2, -1], 3, c(0.3, -0.4)).unwrap();
        let xi = [0.2, -1.1];
        let x = [0.5, 2.0];
        let t = f.dot(&xi);
        let expect = c(0.3, -0.4) * Complex64::from_polar(1.0, 3.0 * 0.7 * t + 2.0 * 0.5 - 2.0);
        assert!((s.evaluate(&xi, &x, &f).unwrap() - expect).norm() < 1e-14);

        let g = sample();
        let direct = g.evaluate(&xi, &x, &f).unwrap();
        let mut via_coeffs = c(0.0, 0.0);
        for q in [[1, 0], [0, 1], [0, 0]] {
            let qx = q[0] as f64 * x[0] + q[1] as f64 * x[1];
            via_coeffs += g.fourier_coeff(&q, &xi, &f).unwrap() * Complex64::from_polar(1.0, qx);
        }
        assert!((direct - via_coeffs).norm() < 1e-13);
        assert_eq!(g.zero_like().evaluate(&xi, &x, &f).unwrap(), c(0.0, 0.0));
        assert!(g.evaluate(&[1.0], &x, &f).is_err());
    }
}
