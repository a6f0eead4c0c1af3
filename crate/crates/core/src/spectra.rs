//! Eigenvalues from the quantization formula versus the matrix oracle.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::nf::{cnf, qnf, Mode, NormalFormResult};
use crate::symbol::{Symbol, TruncationPolicy};
use crate::weyl::{assemble_h, eigenpairs, eigenvalues, matrix_of_symbol, BasisWindow, EigenPairs};

/// Imaginary-part tolerance for `B_k(n hbar, hbar)`, relative to `1 + |re|`.
pub const QNF_IMAG_TOL: f64 = 1e-10;
/// Two oracle eigenvalues closer than this to one QNF value flag the row.
pub const DEFAULT_PAIRING_TOL: f64 = 1e-8;
/// Residuals below this are treated as the floating-point floor.
pub const RESIDUAL_FLOOR: f64 = 1e-13;

const CONTINUATION_STEPS: usize = 8;
const MAX_HALVINGS: u32 = 12;
const AMBIGUITY_RATIO: f64 = 3.0;

/// `hbar <omega, n> + sum_k eps^k B_k(n hbar, hbar)`.
pub fn eigen_qnf(r: &NormalFormResult, n: &[i32], eps: f64) -> Result<f64> {
    let shift = qnf_shift(r, n, eps)?;
    Ok(r.hbar * r.frequency.dot_int(n) + shift)
}

/// `sum_k eps^k B_k(n hbar, hbar)`, with every `B_k` value required real.
pub fn qnf_shift(r: &NormalFormResult, n: &[i32], eps: f64) -> Result<f64> {
    if r.mode != Mode::Quantum {
        return Err(Error::ModeMismatch(
            "the quantization formula needs a quantum normal form".into(),
        ));
    }
    if n.len() != r.frequency.dim() {
        return Err(Error::Mismatch(format!(
            "n has dimension {} != {}",
            n.len(),
            r.frequency.dim()
        )));
    }
    let t = r.hbar * r.frequency.dot_int(n);
    let zero = vec![0; n.len()];
    let mut shift = 0.0;
    let mut power = 1.0;
    for (i, bk) in r.b.iter().enumerate() {
        power *= eps;
        let z = bk.fourier_coeff_at(&zero, t);
        if z.im.abs() > QNF_IMAG_TOL * (1.0 + z.re.abs()) {
            return Err(Error::ComplexEigenvalue {
                order: i + 1,
                n: n.to_vec(),
                re: z.re,
                im: z.im,
            });
        }
        shift += power * z.re;
    }
    Ok(shift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub n: Vec<i32>,
    pub lambda_qnf: f64,
    pub lambda_oracle: Complex64,
    pub residual: f64,
    pub interior: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub interior_rows: usize,
    pub max_interior_residual: f64,
    pub max_interior_imag: f64,
    /// Interior rows whose pairing is ambiguous.
    pub flagged_rows: usize,
    pub continuation_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    pub eps: f64,
    pub hbar: f64,
    pub order: usize,
    pub ncut: i32,
    pub margin: i32,
    pub rows: Vec<SpectralRow>,
    pub summary: SpectralSummary,
}

impl SpectralTable {
    /// CSV with columns `n1..nl, lambda_qnf, re_lambda_oracle,
    /// im_lambda_oracle, residual, interior`.
    pub fn to_csv(&self) -> String {
        let dim = self.rows.first().map_or(0, |r| r.n.len());
        let mut out = String::new();
        for i in 1..=dim {
            let _ = write!(out, "n{i},");
        }
        let _ = writeln!(
            out,
            "lambda_qnf,re_lambda_oracle,im_lambda_oracle,residual,interior"
        );
        for r in &self.rows {
            for v in &r.n {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{}",
                r.lambda_qnf, r.lambda_oracle.re, r.lambda_oracle.im, r.residual, r.interior
            );
        }
        out
    }
}

/// Result of following the unperturbed spectrum to `H(eps)`.
#[derive(Debug, Clone)]
pub struct Continuation {
    /// Tracked eigenvalue per basis index.
    pub values: Vec<Complex64>,
    /// Column of `pairs` each basis index ended on.
    pub chosen: Vec<usize>,
    /// Tracks that stayed ambiguous at the smallest step.
    pub ambiguous: Vec<bool>,
    pub solves: usize,
    /// Eigenvectors at the final `eps`; `None` when `eps = 0` or `V = 0`.
    pub pairs: Option<EigenPairs>,
}

/// Tracks every unperturbed eigenvalue `hbar <omega, n>` to `H(eps)` by
/// nearest-neighbour continuation, halving the step while any interior
/// track has a competitor within three times its own displacement.
pub fn continue_spectrum(
    v: &Symbol,
    eps: f64,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
) -> Result<Continuation> {
    let size = w.size();
    let mut current: Vec<Complex64> = (0..size)
        .map(|i| Complex64::new(hbar * f.dot_int(&w.multi_index(i)), 0.0))
        .collect();
    let mut ambiguous = vec![false; size];
    if eps == 0.0 || v.is_zero() {
        return Ok(Continuation {
            values: current,
            chosen: (0..size).collect(),
            ambiguous,
            solves: 0,
            pairs: None,
        });
    }
    let interior: Vec<bool> = (0..size)
        .map(|i| w.is_interior(&w.multi_index(i)))
        .collect();
    let base = eps / CONTINUATION_STEPS as f64;
    let min_step = base.abs() / f64::powi(2.0, MAX_HALVINGS as i32);
    let mut at = 0.0;
    let mut step = base;
    let mut solves = 0;
    let mut chosen = Vec::new();
    let mut pairs = None;
    while at != eps {
        let last = (eps - at).abs() <= step.abs() * (1.0 + 1e-12);
        let next = if last { eps } else { at + step };
        let h = assemble_h(v, next, hbar, w, f)?;
        let (ev, decomposition) = if last {
            let p = eigenpairs(&h)?;
            (p.values.clone(), Some(p))
        } else {
            (eigenvalues(&h)?, None)
        };
        solves += 1;
        let (assigned, idx, unclear) = assign(&current, &ev, &interior);
        if unclear.iter().any(|&u| u) && step.abs() > min_step {
            step /= 2.0;
            continue;
        }
        for (a, u) in ambiguous.iter_mut().zip(&unclear) {
            *a |= *u;
        }
        current = assigned;
        chosen = idx;
        pairs = decomposition;
        at = next;
        step = if step.abs() * 2.0 < base.abs() {
            step * 2.0
        } else {
            base
        };
    }
    Ok(Continuation {
        values: current,
        chosen,
        ambiguous,
        solves,
        pairs,
    })
}

/// Global greedy nearest assignment of previous values to new eigenvalues.
fn assign(
    prev: &[Complex64],
    ev: &[Complex64],
    interior: &[bool],
) -> (Vec<Complex64>, Vec<usize>, Vec<bool>) {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.iter().enumerate() {
        for (j, e) in ev.iter().enumerate() {
            pairs.push(((p - e).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![Complex64::new(f64::NAN, f64::NAN); n];
    let mut chosen = vec![0; n];
    let (mut row_done, mut col_done) = (vec![false; n], vec![false; n]);
    for (_, i, j) in pairs {
        if row_done[i] || col_done[j] {
            continue;
        }
        row_done[i] = true;
        col_done[j] = true;
        out[i] = ev[j];
        chosen[i] = j;
    }
    let unclear = (0..n)
        .map(|i| {
            if !interior[i] {
                return false;
            }
            let assigned = (prev[i] - ev[chosen[i]]).norm();
            let runner_up = ev
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != chosen[i])
                .map(|(_, e)| (prev[i] - e).norm())
                .fold(f64::INFINITY, f64::min);
            runner_up < AMBIGUITY_RATIO * assigned
        })
        .collect();
    (out, chosen, unclear)
}

/// Eigenvalue shifts `lambda_j - hbar <omega, n_i>` for every basis index
/// `i` by the two-sided Rayleigh quotient
/// `y^H ((L - sigma) x + eps V x) / y^H x`, which avoids cancellation
/// against the large diagonal.
pub fn refined_shifts(
    c: &Continuation,
    v: &Symbol,
    eps: f64,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
) -> Result<Vec<Complex64>> {
    let size = w.size();
    let Some(p) = &c.pairs else {
        return Ok(vec![Complex64::new(0.0, 0.0); size]);
    };
    let mv = matrix_of_symbol(v, hbar, w, f)?;
    let vx = &mv.entries * &p.right;
    let idx: Vec<Vec<i32>> = (0..size).map(|i| w.multi_index(i)).collect();
    let mut out = Vec::with_capacity(size);
    let mut diff = vec![0; w.dim];
    for (i, n) in idx.iter().enumerate() {
        let j = c.chosen[i];
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (k, nk) in idx.iter().enumerate() {
            let y = p.left[(k, j)].conj();
            let x = p.right[(k, j)];
            for d in 0..w.dim {
                diff[d] = nk[d] - n[d];
            }
            let gap = hbar * f.dot_int(&diff);
            num += y * (x * gap + vx[(k, j)] * eps);
            den += y * x;
        }
        out.push(num / den);
    }
    Ok(out)
}

/// Largest `|Im lambda|` over the interior tracks of `H(eps)`; needs no
/// normal form, so it also serves potentials without PT symmetry.
pub fn oracle_interior_imag(
    v: &Symbol,
    eps: f64,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
) -> Result<f64> {
    let cont = continue_spectrum(v, eps, hbar, w, f)?;
    let shifts = refined_shifts(&cont, v, eps, hbar, w, f)?;
    Ok(shifts
        .iter()
        .enumerate()
        .filter(|(i, _)| w.is_interior(&w.multi_index(*i)))
        .map(|(_, s)| s.im.abs())
        .fold(0.0, f64::max))
}

/// Compares the quantization formula with the oracle on every basis index.
pub fn match_spectra(
    r: &NormalFormResult,
    v: &Symbol,
    eps: f64,
    w: &BasisWindow,
    pairing_tol: f64,
) -> Result<SpectralTable> {
    if r.mode != Mode::Quantum {
        return Err(Error::ModeMismatch(
            "spectral comparison needs a quantum normal form".into(),
        ));
    }
    let f = &r.frequency;
    let cont = continue_spectrum(v, eps, r.hbar, w, f)?;
    let shifts = refined_shifts(&cont, v, eps, r.hbar, w, f)?;
    let mut rows = Vec::with_capacity(w.size());
    let mut summary = SpectralSummary {
        interior_rows: 0,
        max_interior_residual: 0.0,
        max_interior_imag: 0.0,
        flagged_rows: 0,
        continuation_steps: cont.solves,
    };
    for (i, shift) in shifts.iter().enumerate() {
        let n = w.multi_index(i);
        let interior = w.is_interior(&n);
        let base = r.hbar * f.dot_int(&n);
        let qnf_shift = qnf_shift(r, &n, eps)?;
        let lambda_qnf = base + qnf_shift;
        let lambda_oracle = Complex64::new(base, 0.0) + shift;
        // the raw values are a permutation of the final spectrum
        let close = cont
            .values
            .iter()
            .filter(|e| (*e - lambda_qnf).norm() <= pairing_tol)
            .count();
        let flagged = cont.ambiguous[i] || close >= 2;
        let residual = (shift - qnf_shift).norm();
        if interior {
            summary.interior_rows += 1;
            summary.max_interior_residual = summary.max_interior_residual.max(residual);
            summary.max_interior_imag = summary.max_interior_imag.max(shift.im.abs());
            summary.flagged_rows += flagged as usize;
        }
        rows.push(SpectralRow {
            n,
            lambda_qnf,
            lambda_oracle,
            residual,
            interior,
            flagged,
        });
    }
    Ok(SpectralTable {
        eps,
        hbar: r.hbar,
        order: r.order,
        ncut: w.ncut,
        margin: w.margin,
        rows,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub eps: f64,
    pub residual_eps: f64,
    pub residual_half: f64,
    pub ratio: f64,
    pub target: f64,
    pub lower: f64,
    pub upper: f64,
    pub status: CheckStatus,
}

/// Two-point order test from `R(eps)` and `R(eps/2)`; vacuous when both sit
/// below [`RESIDUAL_FLOOR`].
pub fn scaling_from_residuals(eps: f64, order: usize, r_eps: f64, r_half: f64) -> ScalingRecord {
    scaling_with_floor(eps, order, r_eps, r_half, RESIDUAL_FLOOR)
}

pub fn scaling_with_floor(
    eps: f64,
    order: usize,
    r_eps: f64,
    r_half: f64,
    floor: f64,
) -> ScalingRecord {
    let target = f64::powi(2.0, order as i32 + 1);
    let (lower, upper) = (target / 3.0, 3.0 * target);
    let ratio = r_eps / r_half;
    let status = if r_eps.max(r_half) < floor {
        CheckStatus::Vacuous
    } else if (lower..=upper).contains(&ratio) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    ScalingRecord {
        eps,
        residual_eps: r_eps,
        residual_half: r_half,
        ratio,
        target,
        lower,
        upper,
        status,
    }
}

/// Max interior residuals at `eps` and `eps/2` and their ratio against
/// `2^(K+1)`, accepted within a factor of three.
pub fn order_scaling_test(
    r: &NormalFormResult,
    v: &Symbol,
    eps: f64,
    w: &BasisWindow,
) -> Result<ScalingRecord> {
    let full = match_spectra(r, v, eps, w, DEFAULT_PAIRING_TOL)?;
    let half = match_spectra(r, v, eps / 2.0, w, DEFAULT_PAIRING_TOL)?;
    Ok(scaling_from_residuals(
        eps,
        r.order,
        full.summary.max_interior_residual,
        half.summary.max_interior_residual,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOrder {
    pub k: usize,
    /// `||B_k(hbar)||_rho` per swept `hbar`.
    pub norms: Vec<f64>,
    /// `||B_k(hbar) - b_k||_rho` per swept `hbar`.
    pub deviations: Vec<f64>,
    /// `||b_k||_rho`.
    pub classical_norm: f64,
    /// Least-squares slope of `log deviation` against `log hbar`; `None`
    /// when every deviation is at the floor.
    pub exponent: Option<f64>,
    /// Deviation of the `O(hbar^2)` Richardson extrapolation from `b_k`.
    pub extrapolated_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub hbars: Vec<f64>,
    pub orders: Vec<SweepOrder>,
}

pub fn hbar_sweep(
    v: &Symbol,
    f: &Frequency,
    order: usize,
    hbars: &[f64],
    policy: &TruncationPolicy,
) -> Result<SweepRecord> {
    if hbars.is_empty() {
        return Err(Error::InvalidOrder(
            "hbar sweep needs at least one value".into(),
        ));
    }
    let classical = cnf(v, f, order, policy)?;
    let quantum = hbars
        .iter()
        .map(|&h| qnf(v, f, h, order, policy))
        .collect::<Result<Vec<_>>>()?;
    sweep_from_results(&classical, &quantum)
}

/// Sweep statistics from precomputed normal forms.
pub fn sweep_from_results(
    classical: &NormalFormResult,
    quantum: &[NormalFormResult],
) -> Result<SweepRecord> {
    if classical.mode != Mode::Classical || quantum.iter().any(|q| q.mode != Mode::Quantum) {
        return Err(Error::ModeMismatch(
            "sweep needs one classical and several quantum results".into(),
        ));
    }
    let rho = classical.policy.rho;
    let hbars: Vec<f64> = quantum.iter().map(|q| q.hbar).collect();
    let mut orders = Vec::with_capacity(classical.order);
    for k in 1..=classical.order {
        let bk = classical.b_k(k);
        let classical_norm = bk.rho_norm(rho);
        let norms: Vec<f64> = quantum.iter().map(|q| q.b_k(k).rho_norm(rho)).collect();
        let deviations = quantum
            .iter()
            .map(|q| Ok(q.b_k(k).sub(bk)?.rho_norm(rho)))
            .collect::<Result<Vec<f64>>>()?;
        let scale = classical_norm.max(norms.iter().copied().fold(0.0, f64::max));
        let floor = 1e-12 * scale.max(1e-300);
        let usable: Vec<(f64, f64)> = hbars
            .iter()
            .zip(&deviations)
            .filter(|(_, &d)| d > floor)
            .map(|(&h, &d)| (h.ln(), d.ln()))
            .collect();
        let exponent = if usable.len() >= 2 && usable.len() == deviations.len() {
            Some(slope(&usable))
        } else {
            None
        };
        let extrapolated_deviation = if quantum.len() >= 2 {
            let (a, b) = (&quantum[quantum.len() - 2], &quantum[quantum.len() - 1]);
            let ratio = a.hbar / b.hbar;
            let w = ratio * ratio;
            let ext = b
                .b_k(k)
                .scale_real(w / (w - 1.0))
                .sub(&a.b_k(k).scale_real(1.0 / (w - 1.0)))?;
            Some(ext.sub(bk)?.rho_norm(rho))
        } else {
            None
        };
        orders.push(SweepOrder {
            k,
            norms,
            deviations,
            classical_norm,
            exponent,
            extrapolated_deviation,
        });
    }
    Ok(SweepRecord { hbars, orders })
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
