//! Weyl quantization on a truncated Fourier basis of the torus.
//!
//! Basis vectors are indexed by `n` with `|n|_inf <= N`, flattened
//! lexicographically in `(n_1, ..., n_l)` with `n_1` slowest:
//! `idx = sum_i (n_i + N) (2N+1)^(l-1-i)`.
//!
//! A symbol atom with Fourier index `q` places `F_q` at row `n`, column
//! `n + q`, evaluated at the midpoint action `<omega, xi> = hbar <omega, n + q/2>`.
//! `L` is `diag(hbar <omega, n>)`. With this orientation
//! `(Mat F Mat G - Mat G Mat F) / (i hbar)` is the matrix of `{F, G}_M`.

use std::collections::BTreeMap;
use std::io::Write;

use faer::{c64, Mat, Par, Scale};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::Frequency;
use crate::symbol::{bracket_with_l, moyal_bracket, LSymbol, Symbol, TruncationPolicy};

pub const DUMP_MAGIC: &[u8; 8] = b"QNFMAT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisWindow {
    pub dim: usize,
    pub ncut: i32,
    pub margin: i32,
}

impl BasisWindow {
    pub fn new(dim: usize, ncut: i32, margin: i32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if ncut < 1 {
            return Err(Error::InvalidWindow(format!(
                "N must be at least 1, got {ncut}"
            )));
        }
        if !(0..ncut).contains(&margin) {
            return Err(Error::InvalidWindow(format!(
                "margin must lie in 0..{ncut}, got {margin}"
            )));
        }
        let side = (2 * ncut + 1) as u64;
        if side.checked_pow(dim as u32).is_none_or(|s| s > 20_000) {
            return Err(Error::InvalidWindow(format!(
                "basis of size {side}^{dim} is too large for a dense solve"
            )));
        }
        Ok(Self { dim, ncut, margin })
    }

    pub fn side(&self) -> usize {
        (2 * self.ncut + 1) as usize
    }

    pub fn size(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<i32> {
        let side = self.side();
        let mut n = vec![0; self.dim];
        for slot in n.iter_mut().rev() {
            *slot = (idx % side) as i32 - self.ncut;
            idx /= side;
        }
        n
    }

    pub fn flat(&self, n: &[i32]) -> Option<usize> {
        if n.len() != self.dim || n.iter().any(|v| v.abs() > self.ncut) {
            return None;
        }
        Some(
            n.iter()
                .fold(0, |acc, &v| acc * self.side() + (v + self.ncut) as usize),
        )
    }

    /// `|n|_inf <= N - margin`.
    pub fn is_interior(&self, n: &[i32]) -> bool {
        n.iter().all(|v| v.abs() <= self.ncut - self.margin)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| self.is_interior(&self.multi_index(i)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub window: BasisWindow,
    pub entries: Mat<c64>,
}

impl OperatorMatrix {
    fn zeros(window: BasisWindow) -> Self {
        let n = window.size();
        Self {
            window,
            entries: Mat::zeros(n, n),
        }
    }

    pub fn size(&self) -> usize {
        self.window.size()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Entry at row `n`, column `n2` (multi-indices).
    pub fn at(&self, n: &[i32], n2: &[i32]) -> Option<Complex64> {
        Some(self.get(self.window.flat(n)?, self.window.flat(n2)?))
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.norm_l2()
    }

    /// `||M - M^H||_F`.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).norm_l2()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        seq();
        let sv = self
            .entries
            .singular_values()
            .map_err(|e| Error::Eigen(format!("singular values: {e:?}")))?;
        Ok(sv.into_iter().fold(0.0, f64::max))
    }

    /// Frobenius norm of the interior block.
    pub fn interior_frobenius(&self) -> f64 {
        let idx = self.window.interior_indices();
        let mut s = 0.0;
        for &i in &idx {
            for &j in &idx {
                s += self.get(i, j).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn add_scaled(&self, other: &OperatorMatrix, a: f64) -> OperatorMatrix {
        OperatorMatrix {
            window: self.window,
            entries: &self.entries + Scale(c64::new(a, 0.0)) * &other.entries,
        }
    }

    /// Binary dump: magic, `l` and `N` as little-endian `u32`, `hbar`, `eps`,
    /// `omega_1..omega_l` as `f64`, then row-major `(re, im)` pairs.
    pub fn write_dump<W: Write>(
        &self,
        out: &mut W,
        hbar: f64,
        eps: f64,
        f: &Frequency,
    ) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&(self.window.dim as u32).to_le_bytes())?;
        out.write_all(&(self.window.ncut as u32).to_le_bytes())?;
        out.write_all(&hbar.to_le_bytes())?;
        out.write_all(&eps.to_le_bytes())?;
        for w in f.omega() {
            out.write_all(&w.to_le_bytes())?;
        }
        let n = self.size();
        let mut buf = Vec::with_capacity(16 * n);
        for i in 0..n {
            buf.clear();
            for j in 0..n {
                let z = self.get(i, j);
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }
}

fn seq() {
    faer::set_global_parallelism(Par::Seq);
}

fn check_dims(f: &Symbol, w: &BasisWindow, freq: &Frequency) -> Result<()> {
    if f.dim() != w.dim || freq.dim() != w.dim {
        return Err(Error::Mismatch(format!(
            "symbol dimension {}, window dimension {}, frequency dimension {}",
            f.dim(),
            w.dim,
            freq.dim()
        )));
    }
    Ok(())
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&hbar) {
        return Err(Error::InvalidWindow(format!(
            "hbar must lie in [0, 1], got {hbar}"
        )));
    }
    Ok(())
}

/// Weyl matrix of `F` on the window.
pub fn matrix_of_symbol(
    f: &Symbol,
    hbar: f64,
    w: &BasisWindow,
    freq: &Frequency,
) -> Result<OperatorMatrix> {
    check_dims(f, w, freq)?;
    check_hbar(hbar)?;
    let dim = w.dim;
    let mut by_q: BTreeMap<Vec<i32>, Vec<(i32, Complex64)>> = BTreeMap::new();
    for (q, m, c) in f.terms() {
        if q.iter().any(|v| v.abs() > 2 * w.ncut) {
            return Err(Error::SupportOverflow { q, ncut: w.ncut });
        }
        by_q.entry(q).or_default().push((m, c));
    }
    let mut out = OperatorMatrix::zeros(*w);
    let scale = hbar * f.pstep();
    let mut target = vec![0; dim];
    for row in 0..w.size() {
        let n = w.multi_index(row);
        let nu = freq.dot_int(&n);
        for (q, atoms) in &by_q {
            for i in 0..dim {
                target[i] = n[i] + q[i];
            }
            let Some(col) = w.flat(&target) else { continue };
            let t = nu + 0.5 * freq.dot_int(q);
            let z: Complex64 = atoms
                .iter()
                .map(|&(m, c)| c * Complex64::from_polar(1.0, m as f64 * scale * t))
                .sum();
            out.entries[(row, col)] = z;
        }
    }
    Ok(out)
}

/// `diag(hbar <omega, n>)`.
pub fn matrix_of_l(hbar: f64, w: &BasisWindow, freq: &Frequency) -> Result<OperatorMatrix> {
    if freq.dim() != w.dim {
        return Err(Error::Mismatch(format!(
            "frequency dimension {} vs window dimension {}",
            freq.dim(),
            w.dim
        )));
    }
    check_hbar(hbar)?;
    let mut out = OperatorMatrix::zeros(*w);
    for i in 0..w.size() {
        out.entries[(i, i)] = Complex64::new(hbar * freq.dot_int(&w.multi_index(i)), 0.0);
    }
    Ok(out)
}

/// `Mat(L) + eps Mat(V)`.
pub fn assemble_h(
    v: &Symbol,
    eps: f64,
    hbar: f64,
    w: &BasisWindow,
    freq: &Frequency,
) -> Result<OperatorMatrix> {
    let l = matrix_of_l(hbar, w, freq)?;
    let mv = matrix_of_symbol(v, hbar, w, freq)?;
    Ok(l.add_scaled(&mv, eps))
}

/// All eigenvalues, in solver order.
pub fn eigenvalues(m: &OperatorMatrix) -> Result<Vec<Complex64>> {
    if m.entries.nrows() == 0 {
        return Ok(Vec::new());
    }
    if (0..m.size())
        .any(|i| (0..m.size()).any(|j| !m.get(i, j).re.is_finite() || !m.get(i, j).im.is_finite()))
    {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    seq();
    m.entries
        .eigenvalues()
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Eigenvalues with left and right eigenvectors, column `j` of each
/// belonging to `values[j]`. Left vectors satisfy `y^H M = lambda y^H`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<Complex64>,
    pub left: Mat<c64>,
    pub right: Mat<c64>,
}

pub fn eigenpairs(m: &OperatorMatrix) -> Result<EigenPairs> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::evd::{self, ComputeEigenvectors};

    let n = m.size();
    if (0..n).any(|i| (0..n).any(|j| !m.get(i, j).re.is_finite() || !m.get(i, j).im.is_finite())) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    seq();
    let mut s = faer::diag::Diag::<c64>::zeros(n);
    let mut left = Mat::<c64>::zeros(n, n);
    let mut right = Mat::<c64>::zeros(n, n);
    let req = evd::evd_scratch::<c64>(
        n,
        ComputeEigenvectors::Yes,
        ComputeEigenvectors::Yes,
        Par::Seq,
        Default::default(),
    );
    let mut buf = MemBuffer::new(req);
    evd::evd_cplx(
        m.entries.as_ref(),
        s.as_mut(),
        Some(left.as_mut()),
        Some(right.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = (0..n).map(|i| s[i]).collect();
    Ok(EigenPairs {
        values,
        left,
        right,
    })
}

fn interior_relative(diff: &Mat<c64>, reference: &Mat<c64>, w: &BasisWindow) -> f64 {
    let idx = w.interior_indices();
    let (mut num, mut den) = (0.0, 0.0);
    for &i in &idx {
        for &j in &idx {
            num += diff[(i, j)].norm_sqr();
            den += reference[(i, j)].norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Dense product accumulated over the nonzero entries only; products of
/// commuting diagonal matrices come out bitwise equal.
fn product(x: &OperatorMatrix, y: &OperatorMatrix) -> Mat<c64> {
    let n = x.size();
    let rows = |m: &OperatorMatrix| -> Vec<Vec<(usize, c64)>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .filter_map(|j| {
                        let z = m.entries[(i, j)];
                        (z != c64::new(0.0, 0.0)).then_some((j, z))
                    })
                    .collect()
            })
            .collect()
    };
    let (rx, ry) = (rows(x), rows(y));
    let mut out = Mat::<c64>::zeros(n, n);
    for (i, row) in rx.iter().enumerate() {
        for &(k, a) in row {
            for &(j, b) in &ry[k] {
                out[(i, j)] += a * b;
            }
        }
    }
    out
}

/// Relative interior Frobenius distance between `Mat({F, G}_M)` and
/// `(Mat F Mat G - Mat G Mat F) / (i hbar)`.
pub fn commutator_symbol_check(
    f: &Symbol,
    g: &Symbol,
    hbar: f64,
    w: &BasisWindow,
    freq: &Frequency,
) -> Result<f64> {
    if !(hbar > 0.0) {
        return Err(Error::NonPositiveHbar(hbar));
    }
    let spread = f.q_spread() + g.q_spread();
    if w.margin < spread {
        return Err(Error::MarginTooSmall {
            margin: w.margin,
            spread,
        });
    }
    let mf = matrix_of_symbol(f, hbar, w, freq)?;
    let mg = matrix_of_symbol(g, hbar, w, freq)?;
    let br = moyal_bracket(f, g, hbar, freq, &TruncationPolicy::exact())?.symbol;
    let mb = matrix_of_symbol(&br, hbar, w, freq)?;
    let (a, b) = (product(&mf, &mg), product(&mg, &mf));
    // (AB - BA) / (i hbar)
    let k = c64::new(0.0, -1.0 / hbar);
    let comm = Mat::<c64>::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] - b[(i, j)]) * k);
    Ok(interior_relative(&(&mb.entries - &comm), &comm, w))
}

/// Relative interior Frobenius distance between `Mat({F, L})` and the
/// commutator with the diagonal `Mat(L)`.
pub fn l_commutator_check(f: &Symbol, hbar: f64, w: &BasisWindow, freq: &Frequency) -> Result<f64> {
    if !(hbar > 0.0) {
        return Err(Error::NonPositiveHbar(hbar));
    }
    let spread = f.q_spread();
    if w.margin < spread {
        return Err(Error::MarginTooSmall {
            margin: w.margin,
            spread,
        });
    }
    let mf = matrix_of_symbol(f, hbar, w, freq)?;
    let ml = matrix_of_l(hbar, w, freq)?;
    let mb = matrix_of_symbol(
        &bracket_with_l(f, &LSymbol::new(freq.clone()))?,
        hbar,
        w,
        freq,
    )?;
    let n = w.size();
    // (F D - D F)_{ij} = F_ij (d_j - d_i)
    let comm = Mat::<c64>::from_fn(n, n, |i, j| {
        let d = ml.get(j, j) - ml.get(i, i);
        mf.get(i, j) * d * c64::new(0.0, -1.0 / hbar)
    });
    Ok(interior_relative(&(&mb.entries - &comm), &comm, w))
}

/// `||Mat(V) PT - PT Mat(V)||_F` over the basis vectors.
///
/// `P` sends the coefficient of `n` to `-n`; `T` conjugates and also flips
/// `n`, so `PT` acts on coefficient vectors as plain conjugation.
pub fn pt_symmetry_check(v: &Symbol, hbar: f64, w: &BasisWindow, freq: &Frequency) -> Result<f64> {
    let m = matrix_of_symbol(v, hbar, w, freq)?;
    let n = w.size();
    let flip: Vec<usize> = (0..n)
        .map(|i| {
            let neg: Vec<i32> = w.multi_index(i).iter().map(|k| -k).collect();
            w.flat(&neg).expect("window is symmetric")
        })
        .collect();
    let p = |x: &[Complex64]| -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (i, xi) in x.iter().enumerate() {
            y[flip[i]] = *xi;
        }
        y
    };
    let t = |x: &[Complex64]| -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (i, xi) in x.iter().enumerate() {
            y[flip[i]] = xi.conj();
        }
        y
    };
    let pt = |x: &[Complex64]| p(&t(x));
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j) * x[j]).sum())
            .collect()
    };
    let mut total = 0.0;
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let lhs = apply(&pt(&e));
        let rhs = pt(&apply(&e));
        total += lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    }
    Ok(total.sqrt())
}
