//! Diophantine frequency vectors, their finite verification and the
//! homological small divisors `1/(i<q,omega>)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default scan range for [`Frequency::golden`] and config validation.
pub const DEFAULT_QMAX: i32 = 50;

/// Default floor on `|<q,omega>|` below which a divisor is treated as resonant.
pub const DEFAULT_RESONANCE_FLOOR: f64 = 1e-12;

/// Diophantine exponent declared for the golden frequency.
pub const GOLDEN_TAU: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    omega: Vec<f64>,
    gamma: f64,
    tau: f64,
    #[serde(default = "default_floor")]
    resonance_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_RESONANCE_FLOOR
}

impl Frequency {
    pub fn new(omega: Vec<f64>, gamma: f64, tau: f64) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidFrequency(
                "dimension must be at least 1".into(),
            ));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidFrequency("frequencies must be finite".into()));
        }
        if omega.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidFrequency("frequency vector is zero".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidFrequency(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(tau > omega.len() as f64) || !tau.is_finite() {
            return Err(Error::InvalidFrequency(format!(
                "tau must exceed the dimension {}, got {tau}",
                omega.len()
            )));
        }
        Ok(Self {
            omega,
            gamma,
            tau,
            resonance_floor: DEFAULT_RESONANCE_FLOOR,
        })
    }

    /// `omega = (1, (1+sqrt 5)/2)`, `tau = 3`, and `gamma` set to the smallest
    /// value compatible with every `0 < |q|_inf <= DEFAULT_QMAX`.
    pub fn golden() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut f = Self::new(vec![1.0, phi], 1.0, GOLDEN_TAU).expect("golden frequency is valid");
        let report = f.verify_diophantine(DEFAULT_QMAX).expect("qmax >= 1");
        f.gamma = report.implied_gamma;
        f
    }

    pub fn with_resonance_floor(mut self, floor: f64) -> Self {
        self.resonance_floor = floor;
        self
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn resonance_floor(&self) -> f64 {
        self.resonance_floor
    }

    /// `<omega, q>` for an integer vector.
    pub fn dot_int(&self, q: &[i32]) -> f64 {
        self.omega
            .iter()
            .zip(q)
            .map(|(w, &k)| w * k as f64)
            .fold(0.0, |a, b| a + b)
    }

    /// `<omega, xi>` for a real vector.
    pub fn dot(&self, xi: &[f64]) -> f64 {
        self.omega
            .iter()
            .zip(xi)
            .map(|(w, x)| w * x)
            .fold(0.0, |a, b| a + b)
    }

    /// Exhaustive scan over `0 < |q|_inf <= qmax`.
    ///
    /// Only one representative of each `{q, -q}` pair is visited (first nonzero
    /// component positive); ties keep the lexicographically first vector.
    pub fn verify_diophantine(&self, qmax: i32) -> Result<DiophantineReport> {
        if qmax < 1 {
            return Err(Error::InvalidScanRange(qmax as i64));
        }
        let dim = self.dim();
        let mut q = vec![-qmax; dim];
        let mut best = f64::INFINITY;
        let mut worst_q = vec![0; dim];
        loop {
            if is_canonical(&q) {
                let norm = q.iter().map(|k| k.abs()).max().unwrap_or(0) as f64;
                let product = self.dot_int(&q).abs() * norm.powf(self.tau);
                if product < best {
                    best = product;
                    worst_q.clone_from(&q);
                }
            }
            if !advance(&mut q, qmax) {
                break;
            }
        }
        let implied_gamma = if best > 0.0 {
            1.0 / best
        } else {
            f64::INFINITY
        };
        let smallness_value = smallness_constant(self.gamma, self.tau);
        Ok(DiophantineReport {
            qmax,
            worst_q,
            min_product: best,
            implied_gamma,
            declared_gamma: self.gamma,
            gamma_valid: implied_gamma <= self.gamma,
            smallness_ok: smallness_value < 0.5,
            smallness_value,
        })
    }

    /// The homological divisor `1/(i<q,omega>)`.
    pub fn small_divisor(&self, q: &[i32]) -> Result<Complex64> {
        if q.iter().all(|&k| k == 0) {
            return Err(Error::ZeroDivisor);
        }
        let a = self.dot_int(q);
        if a.abs() < self.resonance_floor {
            return Err(Error::Resonance {
                q: q.to_vec(),
                value: a.abs(),
                floor: self.resonance_floor,
            });
        }
        Ok(Complex64::new(0.0, -1.0 / a))
    }
}

/// `gamma tau^tau (tau+2)^(4(tau+2))`, evaluated in log space.
pub fn smallness_constant(gamma: f64, tau: f64) -> f64 {
    (gamma.ln() + tau * tau.ln() + 4.0 * (tau + 2.0) * (tau + 2.0).ln()).exp()
}

fn is_canonical(q: &[i32]) -> bool {
    q.iter().find(|&&k| k != 0).is_some_and(|&k| k > 0)
}

fn advance(q: &mut [i32], qmax: i32) -> bool {
    for k in q.iter_mut().rev() {
        if *k < qmax {
            *k += 1;
            return true;
        }
        *k = -qmax;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineReport {
    pub qmax: i32,
    pub worst_q: Vec<i32>,
    /// `min |<omega,q>| |q|_inf^tau` over the scan.
    pub min_product: f64,
    pub implied_gamma: f64,
    pub declared_gamma: f64,
    /// False when some scanned `q` violates the declared `gamma`.
    pub gamma_valid: bool,
    pub smallness_ok: bool,
    pub smallness_value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn golden_components() {
        let f = Frequency::golden();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.omega()[0], 1.0);
        assert!((f.omega()[1] - PHI).abs() < 1e-15);
        assert!((f.dot_int(&[1, -1]).abs() - 0.618_033_988_749_895).abs() < 1e-15);
    }

    #[test]
    fn golden_implied_gamma_matches_brute_force() {
        // independent scan over the full cube, both signs, no canonical halving
        let mut min = f64::INFINITY;
        for a in -50i32..=50 {
            for b in -50i32..=50 {
                if a == 0 && b == 0 {
                    continue;
                }
                let norm = a.abs().max(b.abs()) as f64;
                let v = (a as f64 + b as f64 * PHI).abs() * norm.powi(3);
                min = min.min(v);
            }
        }
        let f = Frequency::golden();
        assert!((f.gamma() - 1.0 / min).abs() <= 1e-12 * f.gamma());
        let report = f.verify_diophantine(50).unwrap();
        assert!(report.gamma_valid);
    }

    #[test]
    fn golden_unit_scan() {
        let r = Frequency::golden().verify_diophantine(1).unwrap();
        assert_eq!(r.worst_q, vec![1, -1]);
        assert!((r.min_product - 0.618_033_988_749_895).abs() < 1e-14);
    }

    #[test]
    fn resonant_frequency_is_flagged() {
        let f = Frequency::new(vec![1.0, 1.0], 0.5, 3.0).unwrap();
        for qmax in 1..4 {
            let r = f.verify_diophantine(qmax).unwrap();
            assert_eq!(r.min_product, 0.0);
            assert_eq!(r.worst_q, vec![1, -1]);
            assert!(!r.gamma_valid);
        }
    }

    #[test]
    fn smallness_constant_reference() {
        let f = Frequency::new(vec![1.0, PHI], 0.01, 3.0).unwrap();
        let r = f.verify_diophantine(3).unwrap();
        let expected = 0.01 * 27.0 * 5f64.powi(20);
        assert!((r.smallness_value - expected).abs() < 1e-9 * expected);
        assert!((r.smallness_value - 2.58e13).abs() < 0.01e13);
        assert!(!r.smallness_ok);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Frequency::golden().verify_diophantine(0).is_err());
        assert!(Frequency::new(vec![], 1.0, 3.0).is_err());
        assert!(Frequency::new(vec![0.0, 0.0], 1.0, 3.0).is_err());
        assert!(Frequency::new(vec![1.0, 2.0], 1.0, 2.0).is_err());
        assert!(Frequency::new(vec![1.0, f64::NAN], 1.0, 3.0).is_err());
    }

    #[test]
    fn small_divisor_examples() {
        let f = Frequency::golden();
        let d = f.small_divisor(&[1, 0]).unwrap();
        assert_eq!(d, Complex64::new(0.0, -1.0));
        let d = f.small_divisor(&[1, -1]).unwrap();
        assert!((d.im - PHI).abs() < 1e-12 && d.re == 0.0);
        assert!(matches!(f.small_divisor(&[0, 0]), Err(Error::ZeroDivisor)));
        let resonant = Frequency::new(vec![1.0, 1.0], 0.5, 3.0).unwrap();
        match resonant.small_divisor(&[1, -1]) {
            Err(Error::Resonance { q, .. }) => assert_eq!(q, vec![1, -1]),
            other => panic!("expected resonance error, got {other:?}"),
        }
    }

    #[test]
    fn divisor_inverts_on_scan_range() {
        let f = Frequency::golden();
        for a in -6..=6 {
            for b in -6..=6 {
                if a == 0 && b == 0 {
                    continue;
                }
                let q = [a, b];
                let d = f.small_divisor(&q).unwrap();
                let prod = d * Complex64::new(0.0, f.dot_int(&q));
                assert!((prod - 1.0).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn scan_is_monotone_and_never_zero_for_golden() {
        let f = Frequency::golden();
        let mut prev = f64::INFINITY;
        for qmax in 1..=30 {
            let r = f.verify_diophantine(qmax).unwrap();
            assert!(r.min_product <= prev);
            assert!(r.min_product > 0.0);
            prev = r.min_product;
        }
    }
}
