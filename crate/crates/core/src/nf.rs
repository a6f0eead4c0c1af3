//! Order-by-order normal form of `L + eps V`.
//!
//! The engine is a graded Lie triangle. With `A[0][0] = L`, `A[0][1] = V` and
//!
//! ```text
//! A[1][k] = {W_k, L} + {W_{k-1}, V}
//! A[r][k] = (1/r) sum_{j=1}^{k-1} {W_j, A[r-1][k-j]}      (r >= 2)
//! ```
//!
//! the order-`k` coefficient of `exp(ad_W)(L + eps V)` is `sum_r A[r][k]`.
//! Everything except `{W_k, L}` is known before `W_k`, which gives `V_k`; the
//! homological equation `{W_k, L} + V_k = B_k` then fixes `B_k` and `W_k`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::symbol::{
    bracket, bracket_with_l, write_symbol, BracketKind, LSymbol, Parity, Symbol, TruncationPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quantum,
    Classical,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Quantum => "quantum",
            Mode::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub k: usize,
    pub norm_b: f64,
    pub norm_w: f64,
    pub norm_v: f64,
    /// ρ-norm pruned while forming `V_k`.
    pub dropped: f64,
    /// Running total of `dropped` through order `k`.
    pub cumulative_dropped: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormResult {
    pub mode: Mode,
    pub order: usize,
    /// Zero in classical mode.
    pub hbar: f64,
    pub frequency: Frequency,
    pub policy: TruncationPolicy,
    pub potential: Symbol,
    /// `B_1 ..= B_K`.
    pub b: Vec<Symbol>,
    /// `W_1 ..= W_K`.
    pub w: Vec<Symbol>,
    /// `V_1 ..= V_K` (after pruning).
    pub v: Vec<Symbol>,
    pub records: Vec<OrderRecord>,
}

impl NormalFormResult {
    pub fn b_k(&self, k: usize) -> &Symbol {
        &self.b[k - 1]
    }

    pub fn w_k(&self, k: usize) -> &Symbol {
        &self.w[k - 1]
    }

    pub fn v_k(&self, k: usize) -> &Symbol {
        &self.v[k - 1]
    }

    pub fn bracket_kind(&self) -> BracketKind {
        match self.mode {
            Mode::Quantum => BracketKind::Moyal { hbar: self.hbar },
            Mode::Classical => BracketKind::Poisson,
        }
    }

    pub fn cumulative_dropped(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_dropped)
    }

    /// `||{W_k, L} + V_k - B_k||_rho`.
    pub fn homological_residual(&self, k: usize) -> Result<f64> {
        let l = LSymbol::new(self.frequency.clone());
        let lhs = bracket_with_l(self.w_k(k), &l)?
            .add(self.v_k(k))?
            .sub(self.b_k(k))?;
        Ok(lhs.rho_norm(self.policy.rho))
    }

    /// Text serialization: a header followed by one symbol block per `B_k`
    /// and `W_k`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.policy;
        let _ = writeln!(out, "# normal form");
        let _ = writeln!(out, "mode {}", self.mode.as_str());
        let _ = writeln!(out, "order {}", self.order);
        let _ = writeln!(out, "hbar {:?}", self.hbar);
        let _ = writeln!(out, "omega {:?}", self.frequency.omega());
        let _ = writeln!(out, "pstep {:?}", self.potential.pstep());
        let _ = writeln!(
            out,
            "policy eta={:?} relative={} qmax={} mmax={} rho={:?}",
            p.eta, p.relative, p.qmax, p.mmax, p.rho
        );
        for k in 1..=self.order {
            let _ = writeln!(out, "## B {k}");
            write_symbol(&mut out, self.b_k(k));
            let _ = writeln!(out, "## W {k}");
            write_symbol(&mut out, self.w_k(k));
        }
        out
    }

    /// CSV rows `mode,hbar,k,norm_B,norm_W,dropped` (no header).
    pub fn norms_csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:?},{},{:e},{:e},{:e}",
                self.mode.as_str(),
                self.hbar,
                r.k,
                r.norm_b,
                r.norm_w,
                r.dropped
            );
        }
        out
    }
}

pub const NORMS_CSV_HEADER: &str = "mode,hbar,k,norm_B,norm_W,dropped";

/// `B_k` is the `q = 0` slice of `V_k`; `W_k` divides every other atom by
/// `i <q, omega>`.
pub fn solve_homological(vk: &Symbol, f: &Frequency) -> Result<(Symbol, Symbol)> {
    if f.dim() != vk.dim() {
        return Err(Error::Mismatch(format!(
            "frequency dimension {} vs symbol dimension {}",
            f.dim(),
            vk.dim()
        )));
    }
    let dim = vk.dim();
    let bk = vk.q0_slice();
    let mut atoms = Vec::with_capacity(vk.len());
    for &(key, c) in vk.atoms() {
        if key.q_is_zero(dim) {
            continue;
        }
        let q = key.q(dim);
        atoms.push((key, c * f.small_divisor(&q[..dim])?));
    }
    Ok((bk, Symbol::from_keyed(dim, vk.pstep(), atoms)))
}

/// Quantum normal form through order `order`.
pub fn qnf(
    v: &Symbol,
    f: &Frequency,
    hbar: f64,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<NormalFormResult> {
    normal_form(v, f, BracketKind::moyal(hbar)?, order, policy)
}

/// Classical normal form: every Moyal bracket replaced by the Poisson bracket.
pub fn cnf(
    v: &Symbol,
    f: &Frequency,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<NormalFormResult> {
    normal_form(v, f, BracketKind::Poisson, order, policy)
}

pub fn normal_form(
    v: &Symbol,
    f: &Frequency,
    kind: BracketKind,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<NormalFormResult> {
    if order < 1 {
        return Err(Error::InvalidOrder(format!(
            "order must be at least 1, got {order}"
        )));
    }
    policy.validate()?;
    if f.dim() != v.dim() {
        return Err(Error::Mismatch(format!(
            "frequency dimension {} vs symbol dimension {}",
            f.dim(),
            v.dim()
        )));
    }
    if !v.is_real_coeffs() {
        log::warn!(
            "potential does not have real Fourier coefficients; reality of B_k is not expected"
        );
    }
    if !v.parity_j().matches(-1) && !v.is_x_independent() {
        log::warn!("potential is not odd in x; vanishing of odd orders is not expected");
    }

    let l = LSymbol::new(f.clone());
    let zero = v.zero_like();
    // tri[k][r] = A[r][k] for 1 <= r <= k; slot 0 unused
    let mut tri: Vec<Vec<Symbol>> = vec![Vec::new()];
    let (mut b, mut w, mut vs, mut records) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut cumulative = 0.0;

    for k in 1..=order {
        let mut dropped = 0.0;
        let wv = if k == 1 {
            zero.clone()
        } else {
            let br = bracket(&w[k - 2], v, kind, f, policy)?;
            dropped += br.dropped;
            br.symbol
        };

        let higher: Vec<Result<(Symbol, f64)>> = (2..=k)
            .into_par_iter()
            .map(|r| {
                let mut acc = zero.clone();
                let mut d = 0.0;
                for j in 1..k {
                    let src = k - j;
                    if src < r - 1 {
                        break;
                    }
                    let inner = &tri[src][r - 1];
                    if inner.is_zero() || w[j - 1].is_zero() {
                        continue;
                    }
                    let br = bracket(&w[j - 1], inner, kind, f, policy)?;
                    d += br.dropped;
                    acc = acc.add(&br.symbol)?;
                }
                Ok((acc.scale_real(1.0 / r as f64), d))
            })
            .collect();

        let mut raw = if k == 1 { v.clone() } else { wv.clone() };
        let mut row = vec![zero.clone(), zero.clone()];
        for h in higher {
            let (sym, d) = h?;
            dropped += d;
            raw = raw.add(&sym)?;
            row.push(sym);
        }
        let (vk, d) = raw.truncate(policy);
        dropped += d;

        let (bk, wk) = solve_homological(&vk, f)?;
        row[1] = bracket_with_l(&wk, &l)?.add(&wv)?;
        tri.push(row);

        cumulative += dropped;
        records.push(OrderRecord {
            k,
            norm_b: bk.rho_norm(policy.rho),
            norm_w: wk.rho_norm(policy.rho),
            norm_v: vk.rho_norm(policy.rho),
            dropped,
            cumulative_dropped: cumulative,
        });
        log::debug!(
            "order {k}: |V_k| = {} atoms, |W_k| = {} atoms",
            vk.len(),
            wk.len()
        );
        b.push(bk);
        w.push(wk);
        vs.push(vk);
    }

    let mode = match kind {
        BracketKind::Moyal { .. } => Mode::Quantum,
        BracketKind::Poisson => Mode::Classical,
    };
    Ok(NormalFormResult {
        mode,
        order,
        hbar: kind.hbar(),
        frequency: f.clone(),
        policy: *policy,
        potential: v.clone(),
        b,
        w,
        v: vs,
        records,
    })
}

/// `V_k` by the literal composition sums
///
/// ```text
/// sum_{r=2}^{k} 1/r! sum_{j_1+..+j_r=k} {W_j1, {W_j2, .. {W_jr, L}..}}
///   + sum_{r=1}^{k-1} 1/r! sum_{j_1+..+j_r=k-1} {W_j1, {W_j2, .. {W_jr, V}..}}
/// ```
///
/// `w` must hold at least `W_1 ..= W_{k-1}`.
pub fn vk_literal(
    w: &[Symbol],
    v: &Symbol,
    f: &Frequency,
    k: usize,
    kind: BracketKind,
    policy: &TruncationPolicy,
) -> Result<Symbol> {
    if k < 2 {
        return Err(Error::InvalidOrder(format!(
            "literal V_k needs k >= 2, got {k}"
        )));
    }
    if w.len() < k - 1 {
        return Err(Error::MissingGenerator(w.len() + 1));
    }
    let l = LSymbol::new(f.clone());
    let mut total = v.zero_like();
    let mut factorial = 1.0;
    for r in 1..=k {
        factorial *= r as f64;
        let mut level = v.zero_like();
        if r >= 2 {
            for js in compositions(k, r) {
                let mut inner = bracket_with_l(&w[js[r - 1] - 1], &l)?;
                for &j in js[..r - 1].iter().rev() {
                    inner = bracket(&w[j - 1], &inner, kind, f, policy)?.symbol;
                }
                level = level.add(&inner)?;
            }
        }
        if r < k {
            for js in compositions(k - 1, r) {
                let mut inner = bracket(&w[js[r - 1] - 1], v, kind, f, policy)?.symbol;
                for &j in js[..r - 1].iter().rev() {
                    inner = bracket(&w[j - 1], &inner, kind, f, policy)?.symbol;
                }
                level = level.add(&inner)?;
            }
        }
        total = total.add(&level.scale_real(1.0 / factorial))?;
    }
    Ok(total.truncate(policy).0)
}

/// Ordered compositions of `n` into `r` positive parts.
pub fn compositions(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, r: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if r == 0 {
            if n == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for first in 1..=n.saturating_sub(r - 1) {
            prefix.push(first);
            go(n - first, r - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if r >= 1 && n >= r {
        go(n, r, &mut Vec::new(), &mut out);
    }
    out
}

/// Normal form computed with `V_k` from [`vk_literal`] at every order: the
/// textbook Lie-transform recursion, used as an oracle for the graded engine.
pub fn literal_normal_form(
    v: &Symbol,
    f: &Frequency,
    kind: BracketKind,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<(Vec<Symbol>, Vec<Symbol>)> {
    if order < 1 {
        return Err(Error::InvalidOrder(format!(
            "order must be at least 1, got {order}"
        )));
    }
    let (mut b, mut w) = (Vec::new(), Vec::new());
    for k in 1..=order {
        let vk = if k == 1 {
            v.truncate(policy).0
        } else {
            vk_literal(&w, v, f, k, kind, policy)?
        };
        let (bk, wk) = solve_homological(&vk, f)?;
        b.push(bk);
        w.push(wk);
    }
    Ok((b, w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    /// Weight at which the norms were taken.
    pub rho: f64,
    /// `||B_k||` for `k = 1..=K`.
    pub norms: Vec<f64>,
    /// Share of the cumulative truncation ledger contributed by each order.
    pub ledger_share: Vec<f64>,
    /// Root-test estimate `1 / max ||B_k||^(1/k)` over the upper half of the
    /// nonzero orders; `None` when every `B_k` vanishes.
    pub radius: Option<f64>,
    pub all_zero: bool,
    /// Fewer than four nonzero even orders.
    pub low_confidence: bool,
}

/// Root-test diagnostics on `||B_k||_{rho/2}`.
pub fn convergence_diagnostics(r: &NormalFormResult, rho: f64) -> ConvergenceDiagnostics {
    let half = rho / 2.0;
    let norms: Vec<f64> = r.b.iter().map(|bk| bk.rho_norm(half)).collect();
    let total = r.cumulative_dropped();
    let ledger_share = r
        .records
        .iter()
        .map(|rec| {
            if total > 0.0 {
                rec.dropped / total
            } else {
                0.0
            }
        })
        .collect();
    let mut diag = radius_from_norms(&norms);
    diag.rho = half;
    diag.ledger_share = ledger_share;
    diag
}

/// Root-test estimate on a bare norm sequence (`norms[k-1] = ||B_k||`).
pub fn radius_from_norms(norms: &[f64]) -> ConvergenceDiagnostics {
    let peak = norms.iter().copied().fold(0.0, f64::max);
    let significant: Vec<usize> = (1..=norms.len())
        .filter(|&k| norms[k - 1] > 1e-12 * peak && peak > 0.0)
        .collect();
    let even = significant.iter().filter(|&&k| k % 2 == 0).count();
    let radius = if significant.is_empty() {
        None
    } else {
        let tail = &significant[significant.len() / 2..];
        let root = tail
            .iter()
            .map(|&k| norms[k - 1].powf(1.0 / k as f64))
            .fold(0.0, f64::max);
        Some(1.0 / root)
    };
    ConvergenceDiagnostics {
        rho: f64::NAN,
        norms: norms.to_vec(),
        ledger_share: vec![0.0; norms.len()],
        radius,
        all_zero: significant.is_empty(),
        low_confidence: even < 4,
    }
}

/// Parity expected of `V_k` (`(-1)^k`) and `W_k` (`(-1)^(k+1)`) for odd input.
pub fn expected_parity(k: usize) -> (i32, i32) {
    if k.is_multiple_of(2) {
        (1, -1)
    } else {
        (-1, 1)
    }
}

/// Per-order defects rescaled by `mass_k / max_j mass_j`, so an order that
/// is only cancellation noise does not register as a violation.
pub fn sequence_defects(seq: &[Symbol], defect: impl Fn(&Symbol, usize) -> f64) -> Vec<f64> {
    let top = seq.iter().map(Symbol::l1_mass).fold(0.0, f64::max);
    seq.iter()
        .enumerate()
        .map(|(i, s)| {
            if top == 0.0 {
                0.0
            } else {
                defect(s, i + 1) * s.l1_mass() / top
            }
        })
        .collect()
}

/// Whether a symbol's parity agrees with the expected sign.
pub fn parity_ok(s: &Symbol, sign: i32, tol: f64) -> bool {
    let p = s.parity_j_tol(tol);
    p == Parity::Zero || p.matches(sign)
}
