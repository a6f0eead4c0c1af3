#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use qnf_core::symbol::{build_potential, Generator, PotentialSpec, Symbol};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn reference_spec() -> PotentialSpec {
    PotentialSpec::new(2, 1.0, vec![Generator::new(vec![1, 0], 1, 1.0)])
}

pub fn reference_potential() -> Symbol {
    build_potential(&reference_spec()).unwrap()
}

/// Random PT potential: up to `max_gens` generators with `|q_i| <= qmax`,
/// `q != 0`, `|m| <= 2` and amplitudes in `[-1, 1]`.
pub fn random_pt_spec(rng: &mut ChaCha8Rng, max_gens: usize, qmax: i32) -> PotentialSpec {
    let count = rng.gen_range(1..=max_gens);
    let mut gens = Vec::with_capacity(count);
    while gens.len() < count {
        let q = vec![rng.gen_range(-qmax..=qmax), rng.gen_range(-qmax..=qmax)];
        if q.iter().all(|&k| k == 0) {
            continue;
        }
        let m = rng.gen_range(-2..=2);
        let a: f64 = rng.gen_range(-1.0..1.0);
        gens.push(Generator::new(q, m, a));
    }
    PotentialSpec::new(2, 1.0, gens)
}

fn atom() -> impl Strategy<Value = (Vec<i32>, i32, Complex64)> {
    (-2i32..=2, -2i32..=2, -2i32..=2, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(q1, q2, m, re, im)| (vec![q1, q2], m, c(re, im)))
}

/// Arbitrary complex symbol on `l = 2` with small support.
pub fn symbol() -> impl Strategy<Value = Symbol> {
    prop::collection::vec(atom(), 0..6).prop_map(|t| Symbol::from_terms(2, 1.0, t).unwrap())
}

/// Symbol supported on `q = 0` only.
pub fn flat_symbol() -> impl Strategy<Value = Symbol> {
    prop::collection::vec((-3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 0..5).prop_map(|t| {
        Symbol::from_terms(
            2,
            1.0,
            t.into_iter().map(|(m, re, im)| (vec![0, 0], m, c(re, im))),
        )
        .unwrap()
    })
}

/// Real coefficient functions: `c_{q,-m} = conj(c_{q,m})`.
pub fn real_symbol() -> impl Strategy<Value = Symbol> {
    symbol().prop_map(|s| {
        let mut terms = Vec::new();
        for (q, m, z) in s.terms() {
            terms.push((q.clone(), m, z * 0.5));
            terms.push((q, -m, z.conj() * 0.5));
        }
        Symbol::from_terms(2, 1.0, terms).unwrap()
    })
}

/// Projects onto definite parity in `x`: `c_{-q,m} = sign c_{q,m}`.
pub fn with_parity(s: &Symbol, sign: i32) -> Symbol {
    let mut terms = Vec::new();
    for (q, m, z) in s.terms() {
        let nq: Vec<i32> = q.iter().map(|k| -k).collect();
        terms.push((q, m, z * 0.5));
        terms.push((nq, m, z * 0.5 * sign as f64));
    }
    Symbol::from_terms(s.dim(), s.pstep(), terms).unwrap()
}
