mod common;

use common::*;
use proptest::prelude::*;
use qnf_core::nf::{cnf, expected_parity, literal_normal_form, qnf, vk_literal};
use qnf_core::spectra::eigen_qnf;
use qnf_core::symbol::{build_potential, BracketKind, Symbol, TruncationPolicy};
use qnf_core::weyl::{matrix_of_symbol, BasisWindow};
use qnf_core::Frequency;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact() -> TruncationPolicy {
    TruncationPolicy::exact()
}

fn rel(a: &Symbol, b: &Symbol) -> f64 {
    a.max_abs_diff(b).unwrap() / a.max_abs().max(b.max_abs()).max(1.0)
}

/// Hand-derived second order for `V = i sin(x1) cos(t)`:
/// `b_2(t) = -sin(2t)/4`, scaled by `sin(hbar)/hbar` in the quantum case.
fn b2_closed_form(hbar: f64) -> Symbol {
    let s = if hbar == 0.0 { 1.0 } else { hbar.sin() / hbar };
    Symbol::from_terms(
        2,
        1.0,
        [
            (vec![0, 0], 2, c(0.0, s / 8.0)),
            (vec![0, 0], -2, c(0.0, -s / 8.0)),
        ],
    )
    .unwrap()
}

#[test]
fn reference_second_order_classical() {
    let w = Frequency::golden();
    let r = cnf(&reference_potential(), &w, 4, &exact()).unwrap();
    assert!(r.b_k(1).is_zero());
    assert!(rel(r.b_k(2), &b2_closed_form(0.0)) <= 1e-14);
    assert!(r.b_k(3).max_abs() <= 1e-14);
}

#[test]
fn reference_second_order_quantum() {
    let w = Frequency::golden();
    for hbar in [1.0, 0.5, 0.1] {
        let r = qnf(&reference_potential(), &w, hbar, 4, &exact()).unwrap();
        assert!(r.b_k(1).is_zero());
        let d = rel(r.b_k(2), &b2_closed_form(hbar));
        assert!(d <= 1e-14, "hbar={hbar}: {d}");
        assert!(r.b_k(3).max_abs() <= 1e-14);
    }
}

/// Second-order Rayleigh-Schroedinger coefficient
/// `sum_{k != n} V_nk V_kn / (E_n - E_k)` on the matrix of the potential.
fn rs_second_order(v: &Symbol, hbar: f64, w: &Frequency, win: &BasisWindow, n: &[i32]) -> f64 {
    let m = matrix_of_symbol(v, hbar, win, w).unwrap();
    let i = win.flat(n).unwrap();
    let en = hbar * w.dot_int(n);
    let mut acc = c(0.0, 0.0);
    for j in 0..win.size() {
        if j == i {
            continue;
        }
        let ek = hbar * w.dot_int(&win.multi_index(j));
        acc += m.get(i, j) * m.get(j, i) / (en - ek);
    }
    assert!(acc.im.abs() <= 1e-14);
    acc.re
}

#[test]
fn second_order_matches_matrix_perturbation_theory() {
    let w = Frequency::golden();
    let win = BasisWindow::new(2, 5, 2).unwrap();
    let mut potentials = vec![reference_potential()];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..4 {
        potentials.push(build_potential(&random_pt_spec(&mut rng, 3, 1)).unwrap());
    }
    for v in &potentials {
        for hbar in [1.0, 0.5, 0.1] {
            let r = qnf(v, &w, hbar, 2, &exact()).unwrap();
            for n in [[0, 0], [1, -2], [-2, 1], [3, 0]] {
                let b2 = r.b_k(2).fourier_coeff_at(&[0, 0], hbar * w.dot_int(&n));
                let rs = rs_second_order(v, hbar, &w, &win, &n);
                assert!(b2.im.abs() <= 1e-14);
                assert!(
                    (b2.re - rs).abs() <= 1e-12 * (1.0 + rs.abs()),
                    "n={n:?} hbar={hbar}: {} vs {rs}",
                    b2.re
                );
                // the quantization formula carries the same coefficient
                let lam = eigen_qnf(&r, &n, 0.1).unwrap();
                let expect = hbar * w.dot_int(&n) + 0.01 * rs;
                assert!((lam - expect).abs() <= 1e-13);
            }
        }
    }
}

#[test]
fn reference_eigenvalue_formula() {
    let w = Frequency::golden();
    let eps = 0.05;
    for hbar in [1.0, 0.5] {
        let r = qnf(&reference_potential(), &w, hbar, 2, &exact()).unwrap();
        for n in [[0, 0], [1, 1], [-3, 2]] {
            let t = hbar * w.dot_int(&n);
            let expect = t - eps * eps * (hbar.sin() / hbar) * (2.0 * t).sin() / 4.0;
            assert!((eigen_qnf(&r, &n, eps).unwrap() - expect).abs() <= 1e-15);
        }
    }
}

#[test]
fn literal_recursion_agrees_through_order_four() {
    let w = Frequency::golden();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..6 {
        let v = build_potential(&random_pt_spec(&mut rng, 3, 1)).unwrap();
        for kind in [BracketKind::Poisson, BracketKind::moyal(0.7).unwrap()] {
            let r = qnf_core::nf::normal_form(&v, &w, kind, 4, &exact()).unwrap();
            let (b, wl) = literal_normal_form(&v, &w, kind, 4, &exact()).unwrap();
            for k in 1..=4 {
                assert!(rel(r.b_k(k), &b[k - 1]) <= 1e-12, "B_{k}");
                assert!(rel(r.w_k(k), &wl[k - 1]) <= 1e-12, "W_{k}");
            }
            for k in 2..=4 {
                let vk = vk_literal(&r.w, &v, &w, k, kind, &exact()).unwrap();
                assert!(rel(r.v_k(k), &vk) <= 1e-12, "V_{k}");
            }
        }
    }
}

#[test]
fn classical_limit_is_quadratic() {
    let w = Frequency::golden();
    let v = reference_potential();
    let c0 = cnf(&v, &w, 4, &exact()).unwrap();
    let gap = |h: f64| {
        let r = qnf(&v, &w, h, 4, &exact()).unwrap();
        r.b_k(4).sub(c0.b_k(4)).unwrap().rho_norm(3.0)
    };
    let ratio = gap(0.02) / gap(0.01);
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn homological_equation_holds(seed in 0u64..10_000, hbar in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = build_potential(&random_pt_spec(&mut rng, 3, 1)).unwrap();
        let r = qnf(&v, &Frequency::golden(), hbar, 5, &TruncationPolicy::default()).unwrap();
        for k in 1..=5 {
            let scale = r.v_k(k).rho_norm(r.policy.rho).max(1.0);
            prop_assert!(r.homological_residual(k).unwrap() <= 1e-12 * scale);
            prop_assert!(r.w_k(k).q0_slice().is_zero());
        }
    }

    #[test]
    fn pt_input_gives_real_b_imaginary_w_and_parity_ladder(seed in 0u64..10_000, hbar in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = build_potential(&random_pt_spec(&mut rng, 2, 1)).unwrap();
        let w = Frequency::golden();
        for r in [qnf(&v, &w, hbar, 5, &exact()).unwrap(), cnf(&v, &w, 5, &exact()).unwrap()] {
            // defects are measured against the largest member of each sequence
            let top = |s: &[Symbol]| s.iter().map(Symbol::l1_mass).fold(0.0, f64::max);
            let (tb, tv, tw) = (top(&r.b), top(&r.v), top(&r.w));
            for k in 1..=5 {
                let (b, vk, wk) = (r.b_k(k), r.v_k(k), r.w_k(k));
                let (sv, sw) = expected_parity(k);
                prop_assert!(b.reality_defect() * b.l1_mass() <= 1e-12 * tb);
                prop_assert!(wk.imaginary_defect() * wk.l1_mass() <= 1e-12 * tw);
                prop_assert!(vk.parity_defect(sv) * vk.l1_mass() <= 1e-12 * tv);
                prop_assert!(wk.parity_defect(sw) * wk.l1_mass() <= 1e-12 * tw);
                if k % 2 == 1 {
                    prop_assert!(b.max_abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn x_independent_potential_is_its_own_normal_form(f in flat_symbol(), hbar in 0.05f64..1.0) {
        let r = qnf(&f, &Frequency::golden(), hbar, 3, &exact()).unwrap();
        prop_assert_eq!(r.b_k(1), &f);
        prop_assert!(r.b_k(2).is_zero() && r.b_k(3).is_zero());
        prop_assert!(r.w.iter().all(Symbol::is_zero));
    }
}
