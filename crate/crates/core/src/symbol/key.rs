//! Packed integer keys for Fourier atoms.
//!
//! A key stores `(q_1, ..., q_l, m)` in 12-bit biased fields of a `u64`, with
//! `q_1` in the most significant field and `m` in the least significant one,
//! so integer order on keys is lexicographic order on `(q, m)`.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;
/// Largest `|q_i|` or `|m|` a stored atom may carry. Sums of two stored keys
/// stay within the 12-bit field range, so bracket outputs can be formed with
/// plain integer arithmetic before truncation.
pub const MAX_INDEX: i32 = 1023;

const FIELD_BITS: u32 = 12;
const FIELD_MASK: u64 = (1 << FIELD_BITS) - 1;
const BIAS: i64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomKey(u64);

impl AtomKey {
    pub fn pack(q: &[i32], m: i32) -> Result<Self> {
        if q.is_empty() || q.len() > MAX_DIM {
            return Err(Error::IndexRange(format!(
                "dimension {} outside 1..={MAX_DIM}",
                q.len()
            )));
        }
        if q.iter()
            .chain(std::iter::once(&m))
            .any(|v| v.abs() > MAX_INDEX)
        {
            return Err(Error::IndexRange(format!(
                "atom (q={q:?}, m={m}) exceeds |index| <= {MAX_INDEX}"
            )));
        }
        Ok(Self::pack_unchecked(q, m))
    }

    fn pack_unchecked(q: &[i32], m: i32) -> Self {
        let mut bits = 0u64;
        for &v in q.iter().chain(std::iter::once(&m)) {
            bits = (bits << FIELD_BITS) | (v as i64 + BIAS) as u64;
        }
        Self(bits)
    }

    #[inline]
    fn field(self, i: u32) -> i32 {
        (((self.0 >> (FIELD_BITS * i)) & FIELD_MASK) as i64 - BIAS) as i32
    }

    #[inline]
    pub fn m(self) -> i32 {
        self.field(0)
    }

    #[inline]
    pub fn q_component(self, dim: usize, i: usize) -> i32 {
        self.field((dim - i) as u32)
    }

    pub fn q(self, dim: usize) -> [i32; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for (i, slot) in out.iter_mut().enumerate().take(dim) {
            *slot = self.q_component(dim, i);
        }
        out
    }

    pub fn q_vec(self, dim: usize) -> Vec<i32> {
        self.q(dim)[..dim].to_vec()
    }

    #[inline]
    pub fn q_is_zero(self, dim: usize) -> bool {
        (1..=dim as u32).all(|i| self.field(i) == 0)
    }

    pub fn q_inf_norm(self, dim: usize) -> i32 {
        (1..=dim as u32)
            .map(|i| self.field(i).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn q_l1_norm(self, dim: usize) -> i32 {
        (1..=dim as u32).map(|i| self.field(i).abs()).sum()
    }

    pub fn neg_q(self, dim: usize) -> Self {
        let q = self.q(dim);
        let neg: Vec<i32> = q[..dim].iter().map(|v| -v).collect();
        Self::pack_unchecked(&neg, self.m())
    }

    pub fn neg_m(self, dim: usize) -> Self {
        let q = self.q(dim);
        Self::pack_unchecked(&q[..dim], -self.m())
    }

    /// Component-wise sum of two keys. Exact as long as every component of
    /// the result lies in `[-2047, 2047]`, which holds for inputs bounded by
    /// [`MAX_INDEX`].
    #[inline]
    pub(crate) fn sum(self, other: Self, dim: usize) -> Self {
        Self(self.0 + other.0 - bias(dim))
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

#[inline]
fn bias(dim: usize) -> u64 {
    let mut b = 0u64;
    for _ in 0..=dim {
        b = (b << FIELD_BITS) | BIAS as u64;
    }
    b
}
