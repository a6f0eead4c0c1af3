//! Named verification checks, each reduced to a numeric residual and a
//! pass/fail/vacuous status.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{DiophantineReport, Frequency};
use crate::nf::{
    expected_parity, literal_normal_form, sequence_defects, vk_literal, NormalFormResult,
};
use crate::spectra::{match_spectra, CheckStatus, SpectralTable};
use crate::symbol::{
    bracket, bracket_with_l, build_potential, BracketKind, Generator, LSymbol, PotentialSpec,
    Symbol, TruncationPolicy,
};
use crate::weyl::{
    commutator_symbol_check, l_commutator_check, matrix_of_symbol, pt_symmetry_check, BasisWindow,
    OperatorMatrix,
};

/// Every check a run can emit, grouped by the module whose invariant it tests.
pub const CHECK_NAMES: &[&str] = &[
    "diophantine_gamma",
    "small_divisor_inverse",
    "potential_reality",
    "potential_parity",
    "bracket_antisymmetry",
    "bracket_bilinearity",
    "bracket_zero_x_independent",
    "bracket_imaginary_closure",
    "bracket_parity_rule",
    "poisson_limit",
    "l_bracket_oracle",
    "reality_B",
    "imaginary_W",
    "odd_vanishing",
    "parity_ladder",
    "homological_residual",
    "literal_vs_graded",
    "classical_lie_transform",
    "classical_limit",
    "sweep_uniform_bound",
    "commutator_oracle",
    "pt_matrix",
    "midpoint_rule",
    "operator_norm_bound",
    "multiplicative_reduction",
    "real_even_hermitian",
    "window_stability",
    "qnf_reality",
    "oracle_reality",
    "eps_parity",
    "pairing",
    "spectral_residual",
    "order_scaling",
    "x_independent_consistency",
    "radius_stability",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Parameters the check was evaluated at, e.g. `hbar=1`.
    pub scope: String,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Accepted interval for ratio-type checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `residual <= tolerance`; NaN fails.
    pub fn at_most(name: &str, scope: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let status = if residual <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            scope: scope.into(),
            residual,
            tolerance: Some(tolerance),
            range: None,
            status,
            note: None,
        }
    }

    pub fn within(name: &str, scope: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        let status = if (lo..=hi).contains(&value) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            scope: scope.into(),
            residual: value,
            tolerance: None,
            range: Some([lo, hi]),
            status,
            note: None,
        }
    }

    pub fn vacuous(name: &str, scope: impl Into<String>, residual: f64, note: &str) -> Self {
        Self {
            name: name.into(),
            scope: scope.into(),
            residual,
            tolerance: None,
            range: None,
            status: CheckStatus::Vacuous,
            note: Some(note.into()),
        }
    }

    pub fn failed(name: &str, scope: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            scope: scope.into(),
            residual: f64::NAN,
            tolerance: None,
            range: None,
            status: CheckStatus::Fail,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn hbar_scope(hbar: f64) -> String {
    format!("hbar={hbar}")
}

pub fn job_scope(eps: f64, hbar: f64) -> String {
    format!("eps={eps},hbar={hbar}")
}

/// Max atom difference scaled by `max(1, max|c|)`.
pub fn relative_diff(a: &Symbol, b: &Symbol) -> Result<f64> {
    Ok(a.max_abs_diff(b)? / a.max_abs().max(b.max_abs()).max(1.0))
}

/// Inputs for the bracket-algebra checks derived from a potential.
///
/// `odd` is the potential with every broken generator made regular (real,
/// odd in `x`); `even = i {odd, L}` is real and even. `flat` and `flat2` are
/// x-independent symbols built from the same amplitudes.
#[derive(Debug, Clone)]
pub struct Probes {
    pub odd: Symbol,
    pub even: Symbol,
    pub flat: Symbol,
    pub flat2: Symbol,
}

impl Probes {
    pub fn from_spec(spec: &PotentialSpec, f: &Frequency) -> Result<Self> {
        let mut gens: Vec<Generator> = spec
            .generators
            .iter()
            .filter(|g| g.q.iter().any(|&k| k != 0))
            .map(|g| Generator::new(g.q.clone(), g.m, g.amplitude))
            .collect();
        if gens.iter().all(|g| g.amplitude == 0.0) {
            let mut q = vec![0; spec.dim];
            q[0] = 1;
            gens = vec![Generator::new(q, 1, 1.0)];
        }
        let odd = build_potential(&PotentialSpec::new(spec.dim, spec.pstep, gens))?;
        let even = bracket_with_l(&odd, &LSymbol::new(f.clone()))?.scale(Complex64::new(0.0, 1.0));
        let zero = vec![0; spec.dim];
        let mut flat_terms = Vec::new();
        let mut flat2_terms = Vec::new();
        for (_, m, c) in odd.terms() {
            let a = c.norm();
            flat_terms.push((zero.clone(), m, Complex64::new(a / 2.0, 0.0)));
            flat_terms.push((zero.clone(), -m, Complex64::new(a / 2.0, 0.0)));
            flat2_terms.push((zero.clone(), m + 1, Complex64::new(0.0, a)));
        }
        let flat = Symbol::from_terms(spec.dim, spec.pstep, flat_terms)?;
        let flat2 = Symbol::from_terms(spec.dim, spec.pstep, flat2_terms)?;
        Ok(Self {
            odd,
            even,
            flat,
            flat2,
        })
    }
}

pub fn diophantine_gamma(d: &DiophantineReport) -> Check {
    let ratio = d.implied_gamma / d.declared_gamma;
    Check::at_most("diophantine_gamma", format!("qmax={}", d.qmax), ratio, 1.0)
}

/// `|i <q,omega> * small_divisor(q) - 1|` over `0 < |q|_inf <= qmax`.
pub fn small_divisor_inverse(f: &Frequency, qmax: i32, tol: f64) -> Result<Check> {
    let dim = f.dim();
    let mut worst: f64 = 0.0;
    let mut q = vec![-qmax; dim];
    loop {
        if q.iter().any(|&k| k != 0) {
            let a = f.dot_int(&q);
            match f.small_divisor(&q) {
                Ok(d) => worst = worst.max((Complex64::new(0.0, a) * d - 1.0).norm()),
                Err(Error::Resonance { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let mut carry = true;
        for k in q.iter_mut().rev() {
            if *k < qmax {
                *k += 1;
                carry = false;
                break;
            }
            *k = -qmax;
        }
        if carry {
            break;
        }
    }
    Ok(Check::at_most(
        "small_divisor_inverse",
        format!("qmax={qmax}"),
        worst,
        tol,
    ))
}

/// Round trip: `V` has real coefficient functions and `i V` imaginary ones.
pub fn potential_reality(v: &Symbol, tol: f64) -> Check {
    let iv = v.scale(Complex64::new(0.0, 1.0));
    Check::at_most(
        "potential_reality",
        "potential",
        v.reality_defect().max(iv.imaginary_defect()),
        tol,
    )
}

pub fn potential_parity(v: &Symbol, tol: f64) -> Check {
    Check::at_most("potential_parity", "potential", v.parity_defect(-1), tol)
}

fn kinds(hbar: f64) -> Result<[BracketKind; 2]> {
    Ok([BracketKind::moyal(hbar)?, BracketKind::Poisson])
}

pub fn bracket_antisymmetry(p: &Probes, hbar: f64, f: &Frequency, tol: f64) -> Result<Check> {
    let exact = TruncationPolicy::exact();
    let mut worst: f64 = 0.0;
    for kind in kinds(hbar)? {
        for (a, b) in [(&p.odd, &p.even), (&p.even, &p.odd), (&p.odd, &p.flat)] {
            let fg = bracket(a, b, kind, f, &exact)?.symbol;
            let gf = bracket(b, a, kind, f, &exact)?.symbol;
            worst = worst.max(relative_diff(&fg, &gf.neg())?);
        }
    }
    Ok(Check::at_most(
        "bracket_antisymmetry",
        hbar_scope(hbar),
        worst,
        tol,
    ))
}

pub fn bracket_bilinearity(p: &Probes, hbar: f64, f: &Frequency, tol: f64) -> Result<Check> {
    let exact = TruncationPolicy::exact();
    let (a, b) = (Complex64::new(0.7, -0.3), Complex64::new(-1.1, 0.4));
    let h = p.even.add(&p.flat)?;
    let mut worst: f64 = 0.0;
    for kind in kinds(hbar)? {
        let lhs = bracket(&p.odd.scale(a).add(&p.even.scale(b))?, &h, kind, f, &exact)?.symbol;
        let rhs = bracket(&p.odd, &h, kind, f, &exact)?
            .symbol
            .scale(a)
            .add(&bracket(&p.even, &h, kind, f, &exact)?.symbol.scale(b))?;
        worst = worst.max(relative_diff(&lhs, &rhs)?);
    }
    Ok(Check::at_most(
        "bracket_bilinearity",
        hbar_scope(hbar),
        worst,
        tol,
    ))
}

/// Brackets of two x-independent symbols vanish identically.
pub fn bracket_zero_x_independent(p: &Probes, hbar: f64, f: &Frequency) -> Result<Check> {
    let exact = TruncationPolicy::exact();
    let mut worst: f64 = 0.0;
    for kind in kinds(hbar)? {
        worst = worst.max(
            bracket(&p.flat, &p.flat2, kind, f, &exact)?
                .symbol
                .max_abs(),
        );
    }
    Ok(Check::at_most(
        "bracket_zero_x_independent",
        hbar_scope(hbar),
        worst,
        0.0,
    ))
}

/// Real inputs give a bracket with purely imaginary coefficient functions.
pub fn bracket_imaginary_closure(p: &Probes, hbar: f64, f: &Frequency, tol: f64) -> Result<Check> {
    let exact = TruncationPolicy::exact();
    let mut worst = p.odd.reality_defect().max(p.even.reality_defect());
    for kind in kinds(hbar)? {
        for (a, b) in [(&p.odd, &p.even), (&p.odd, &p.flat), (&p.even, &p.flat)] {
            worst = worst.max(bracket(a, b, kind, f, &exact)?.symbol.imaginary_defect());
        }
    }
    Ok(Check::at_most(
        "bracket_imaginary_closure",
        hbar_scope(hbar),
        worst,
        tol,
    ))
}

/// `J{F,G} = -(JF)(JG)` on odd/even, odd/odd and even/even input pairs.
pub fn bracket_parity_rule(p: &Probes, hbar: f64, f: &Frequency, tol: f64) -> Result<Check> {
    let exact = TruncationPolicy::exact();
    let mut worst: f64 = 0.0;
    for kind in kinds(hbar)? {
        for (a, sa, b, sb) in [
            (&p.odd, -1, &p.even, 1),
            (&p.odd, -1, &p.odd, -1),
            (&p.even, 1, &p.flat, 1),
        ] {
            let br = bracket(a, b, kind, f, &exact)?.symbol;
            worst = worst.max(br.parity_defect(-sa * sb));
        }
    }
    Ok(Check::at_most(
        "bracket_parity_rule",
        hbar_scope(hbar),
        worst,
        tol,
    ))
}

/// `||M(h) - P|| / ||M(h/2) - P||` at `h = 0.1`; near 4 for an `O(h^2)` gap.
pub fn poisson_limit(p: &Probes, f: &Frequency, rho: f64, lo: f64, hi: f64) -> Result<Check> {
    let exact = TruncationPolicy::exact();
    let h = 0.1;
    let pb = bracket(&p.odd, &p.even, BracketKind::Poisson, f, &exact)?.symbol;
    let gap = |hbar: f64| -> Result<f64> {
        let m = bracket(&p.odd, &p.even, BracketKind::moyal(hbar)?, f, &exact)?.symbol;
        Ok(m.sub(&pb)?.rho_norm(rho))
    };
    let (g1, g2) = (gap(h)?, gap(h / 2.0)?);
    let scope = format!("hbar={h},{}", h / 2.0);
    if g2 == 0.0 {
        return Ok(Check::vacuous(
            "poisson_limit",
            scope,
            g1,
            "moyal and poisson brackets coincide",
        ));
    }
    Ok(Check::within("poisson_limit", scope, g1 / g2, lo, hi))
}

pub fn l_bracket_oracle(
    v: &Symbol,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
    tol: f64,
) -> Result<Check> {
    match l_commutator_check(v, hbar, w, f) {
        Ok(r) => Ok(Check::at_most("l_bracket_oracle", hbar_scope(hbar), r, tol)),
        Err(Error::MarginTooSmall { margin, spread }) => Ok(Check::vacuous(
            "l_bracket_oracle",
            hbar_scope(hbar),
            f64::NAN,
            &format!("margin {margin} below q-spread {spread}"),
        )),
        Err(e) => Err(e),
    }
}

pub fn commutator_oracle(
    p: &Probes,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
    tol: f64,
) -> Result<Check> {
    match commutator_symbol_check(&p.odd, &p.even, hbar, w, f) {
        Ok(r) => Ok(Check::at_most(
            "commutator_oracle",
            hbar_scope(hbar),
            r,
            tol,
        )),
        Err(Error::MarginTooSmall { margin, spread }) => Ok(Check::vacuous(
            "commutator_oracle",
            hbar_scope(hbar),
            f64::NAN,
            &format!("margin {margin} below combined q-spread {spread}"),
        )),
        Err(e) => Err(e),
    }
}

fn scope_of(r: &NormalFormResult) -> String {
    match r.mode {
        crate::nf::Mode::Quantum => hbar_scope(r.hbar),
        crate::nf::Mode::Classical => "classical".into(),
    }
}

fn worst(defects: Vec<f64>) -> f64 {
    defects.into_iter().fold(0.0, f64::max)
}

/// Reality defects of `B_k`, each relative to the largest `B_j`.
pub fn reality_b(r: &NormalFormResult, tol: f64) -> Check {
    let worst = worst(sequence_defects(&r.b, |s, _| s.reality_defect()));
    Check::at_most("reality_B", scope_of(r), worst, tol)
}

pub fn imaginary_w(r: &NormalFormResult, tol: f64) -> Check {
    let worst = worst(sequence_defects(&r.w, |s, _| s.imaginary_defect()));
    Check::at_most("imaginary_W", scope_of(r), worst, tol)
}

/// Largest odd-order `||B_k||_rho` against `max(floor, ledger)`.
pub fn odd_vanishing(r: &NormalFormResult, floor: f64) -> Check {
    let rho = r.policy.rho;
    let worst =
        r.b.iter()
            .step_by(2)
            .map(|b| b.rho_norm(rho))
            .fold(0.0, f64::max);
    Check::at_most(
        "odd_vanishing",
        scope_of(r),
        worst,
        floor.max(r.cumulative_dropped()),
    )
}

/// Largest parity defect of `V_k` against `(-1)^k` and `W_k` against
/// `(-1)^(k+1)`, each relative to the largest member of its sequence.
pub fn parity_ladder(r: &NormalFormResult, tol: f64) -> Check {
    let v = worst(sequence_defects(&r.v, |s, k| {
        s.parity_defect(expected_parity(k).0)
    }));
    let w = worst(sequence_defects(&r.w, |s, k| {
        s.parity_defect(expected_parity(k).1)
    }));
    Check::at_most("parity_ladder", scope_of(r), v.max(w), tol)
}

/// `max_k ||{W_k,L} + V_k - B_k||_rho / ||V_k||_rho`.
pub fn homological_residual(r: &NormalFormResult, tol: f64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 1..=r.order {
        let abs = r.homological_residual(k)?;
        let scale = r.v_k(k).rho_norm(r.policy.rho);
        worst = worst.max(if scale > 0.0 { abs / scale } else { abs });
    }
    Ok(Check::at_most(
        "homological_residual",
        scope_of(r),
        worst,
        tol,
    ))
}

pub fn literal_vs_graded(
    r: &NormalFormResult,
    v: &Symbol,
    max_order: usize,
    tol: f64,
) -> Result<Check> {
    let top = r.order.min(max_order);
    if top < 2 {
        return Ok(Check::vacuous(
            "literal_vs_graded",
            scope_of(r),
            0.0,
            "order below 2",
        ));
    }
    let mut worst: f64 = 0.0;
    for k in 2..=top {
        let lit = vk_literal(&r.w, v, &r.frequency, k, r.bracket_kind(), &r.policy)?;
        worst = worst.max(relative_diff(&lit, r.v_k(k))?);
    }
    Ok(Check::at_most(
        "literal_vs_graded",
        format!("{},k=2..{top}", scope_of(r)),
        worst,
        tol,
    ))
}

/// Classical `b_k` against the literal Lie-transform recursion.
pub fn classical_lie_transform(
    c: &NormalFormResult,
    v: &Symbol,
    max_order: usize,
    tol: f64,
) -> Result<Check> {
    let top = c.order.min(max_order);
    let (b, _) = literal_normal_form(v, &c.frequency, BracketKind::Poisson, top, &c.policy)?;
    let mut worst: f64 = 0.0;
    for (k, bk) in b.iter().enumerate() {
        worst = worst.max(relative_diff(bk, c.b_k(k + 1))?);
    }
    Ok(Check::at_most(
        "classical_lie_transform",
        format!("k=1..{top}"),
        worst,
        tol,
    ))
}

/// `||Mat(V) PT - PT Mat(V)||_F`.
pub fn pt_matrix(v: &Symbol, hbar: f64, w: &BasisWindow, f: &Frequency, tol: f64) -> Result<Check> {
    Ok(Check::at_most(
        "pt_matrix",
        hbar_scope(hbar),
        pt_symmetry_check(v, hbar, w, f)?,
        tol,
    ))
}

/// Diagonal entries of an x-independent symbol's matrix equal `F_0` at
/// `hbar <omega, n>`; off-diagonal entries vanish.
pub fn midpoint_rule(
    flat: &Symbol,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
    tol: f64,
) -> Result<Check> {
    let m = matrix_of_symbol(flat, hbar, w, f)?;
    let zero = vec![0; w.dim];
    let mut worst: f64 = 0.0;
    for i in 0..w.size() {
        let t = hbar * f.dot_int(&w.multi_index(i));
        for j in 0..w.size() {
            let expect = if i == j {
                flat.fourier_coeff_at(&zero, t)
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((m.get(i, j) - expect).norm());
        }
    }
    Ok(Check::at_most(
        "midpoint_rule",
        hbar_scope(hbar),
        worst,
        tol,
    ))
}

/// `max(0, sigma_max(Mat V) - ||V||_0) / ||V||_0`.
pub fn operator_norm_bound(
    v: &Symbol,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
    tol: f64,
) -> Result<Check> {
    let mass = v.l1_mass();
    let sigma = matrix_of_symbol(v, hbar, w, f)?.spectral_norm()?;
    let excess = if mass > 0.0 {
        (sigma - mass).max(0.0) / mass
    } else {
        sigma
    };
    Ok(Check::at_most(
        "operator_norm_bound",
        hbar_scope(hbar),
        excess,
        tol,
    ))
}

/// The `m = 0` collapse of `V` against the multiplication operator built by
/// trapezoidal quadrature on a grid fine enough to be exact.
///
/// In the row `n` / column `n+q` orientation the multiplication operator
/// appears transposed.
pub fn multiplicative_reduction(v: &Symbol, f: &Frequency, tol: f64) -> Result<Check> {
    let dim = v.dim();
    let collapsed = Symbol::from_terms(dim, v.pstep(), v.terms().map(|(q, _, c)| (q, 0, c)))?;
    let ncut = 3;
    let w = BasisWindow::new(dim, ncut, 0)?;
    let grid = (2 * ncut + collapsed.q_spread() + 1) as usize;
    let m = match matrix_of_symbol(&collapsed, 1.0, &w, f) {
        Ok(m) => m,
        Err(Error::SupportOverflow { .. }) => {
            return Ok(Check::vacuous(
                "multiplicative_reduction",
                "N=3",
                f64::NAN,
                "support wider than the test window",
            ))
        }
        Err(e) => return Err(e),
    };
    let points = grid.pow(dim as u32);
    let step = std::f64::consts::TAU / grid as f64;
    let xi = vec![0.0; dim];
    let mut samples = Vec::with_capacity(points);
    for p in 0..points {
        let x = grid_point(p, grid, dim, step);
        samples.push((collapsed.evaluate(&xi, &x, f)?, x));
    }
    let mut worst: f64 = 0.0;
    for i in 0..w.size() {
        let ni = w.multi_index(i);
        for j in 0..w.size() {
            let nj = w.multi_index(j);
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, x) in &samples {
                let phase: f64 = (0..dim)
                    .map(|d| (nj[d] - ni[d]) as f64 * x[d])
                    .fold(0.0, |s, t| s + t);
                acc += a * Complex64::from_polar(1.0, -phase);
            }
            acc /= points as f64;
            worst = worst.max((m.get(i, j) - acc).norm());
        }
    }
    Ok(Check::at_most(
        "multiplicative_reduction",
        format!("N={ncut},grid={grid}"),
        worst,
        tol,
    ))
}

fn grid_point(mut p: usize, grid: usize, dim: usize, step: f64) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for d in (0..dim).rev() {
        x[d] = (p % grid) as f64 * step;
        p /= grid;
    }
    x
}

/// Relative Hermiticity residual of a real, x-even symbol's matrix.
pub fn real_even_hermitian(
    even: &Symbol,
    hbar: f64,
    w: &BasisWindow,
    f: &Frequency,
    tol: f64,
) -> Result<Check> {
    let m: OperatorMatrix = matrix_of_symbol(even, hbar, w, f)?;
    let scale = m.frobenius();
    let r = if scale > 0.0 {
        m.hermiticity_residual() / scale
    } else {
        0.0
    };
    Ok(Check::at_most(
        "real_even_hermitian",
        hbar_scope(hbar),
        r,
        tol,
    ))
}

/// `max |Im B_k(n hbar)| / (1 + |Re|)` over the interior indices and orders.
pub fn qnf_reality(r: &NormalFormResult, w: &BasisWindow, tol: f64) -> Check {
    let zero = vec![0; w.dim];
    let mut worst: f64 = 0.0;
    for i in w.interior_indices() {
        let t = r.hbar * r.frequency.dot_int(&w.multi_index(i));
        for b in &r.b {
            let z = b.fourier_coeff_at(&zero, t);
            worst = worst.max(z.im.abs() / (1.0 + z.re.abs()));
        }
    }
    Check::at_most("qnf_reality", hbar_scope(r.hbar), worst, tol)
}

/// `sum_k eps^k B_k(n hbar)` without the reality requirement.
pub fn series_value(r: &NormalFormResult, n: &[i32], eps: f64) -> Complex64 {
    let t = r.hbar * r.frequency.dot_int(n);
    let zero = vec![0; n.len()];
    let mut acc = Complex64::new(0.0, 0.0);
    let mut power = 1.0;
    for b in &r.b {
        power *= eps;
        acc += b.fourier_coeff_at(&zero, t) * power;
    }
    acc
}

/// `max |lambda(n, eps) - lambda(n, -eps)|` over the interior.
pub fn eps_parity(r: &NormalFormResult, w: &BasisWindow, eps: f64, tol: f64) -> Check {
    let worst = w
        .interior_indices()
        .into_iter()
        .map(|i| {
            let n = w.multi_index(i);
            (series_value(r, &n, eps) - series_value(r, &n, -eps)).norm()
        })
        .fold(0.0, f64::max);
    Check::at_most("eps_parity", job_scope(eps, r.hbar), worst, tol)
}

/// Interior oracle eigenvalues on `N` against `N + 2` with the same interior.
pub fn window_stability(
    r: &NormalFormResult,
    v: &Symbol,
    eps: f64,
    w: &BasisWindow,
    small: &SpectralTable,
    tol: f64,
) -> Result<Check> {
    let wide = BasisWindow::new(w.dim, w.ncut + 2, w.margin + 2)?;
    let big = match_spectra(r, v, eps, &wide, crate::spectra::DEFAULT_PAIRING_TOL)?;
    let mut worst: f64 = 0.0;
    for row in small.rows.iter().filter(|row| row.interior) {
        let j = wide.flat(&row.n).expect("interior of N lies inside N+2");
        worst = worst.max((big.rows[j].lambda_oracle - row.lambda_oracle).norm());
    }
    Ok(Check::at_most(
        "window_stability",
        format!("{},N={}->{}", job_scope(eps, r.hbar), w.ncut, wide.ncut),
        worst,
        tol,
    ))
}

/// An x-independent perturbation `X`: `B_1 = X`, higher orders vanish, and
/// `Mat(L + eps X)` is diagonal with the quantization formula on it.
pub fn x_independent_consistency(
    flat: &Symbol,
    f: &Frequency,
    hbar: f64,
    eps: f64,
    w: &BasisWindow,
    policy: &TruncationPolicy,
    tol: f64,
) -> Result<Check> {
    let r = crate::nf::qnf(flat, f, hbar, 3, policy)?;
    let mut worst = relative_diff(r.b_k(1), flat)?;
    for k in 2..=3 {
        worst = worst.max(r.b_k(k).max_abs()).max(r.w_k(k).max_abs());
    }
    worst = worst.max(r.w_k(1).max_abs());
    let h = crate::weyl::assemble_h(flat, eps, hbar, w, f)?;
    for i in 0..w.size() {
        let n = w.multi_index(i);
        let lam = crate::spectra::eigen_qnf(&r, &n, eps)?;
        for j in 0..w.size() {
            let expect = if i == j {
                Complex64::new(lam, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((h.get(i, j) - expect).norm() / (1.0 + lam.abs()));
        }
    }
    Ok(Check::at_most(
        "x_independent_consistency",
        job_scope(eps, hbar),
        worst,
        tol,
    ))
}
