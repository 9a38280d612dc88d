mod common;

use common::bilinear;
use mwion_core::basis::{build_operators, dilated_bound_state, OperatorSet, SturmianBasis};
use mwion_core::eigensolve::{dense_eigs, shift_invert_eigs, EigenPair, EigenRequest};
use mwion_core::floquet::{assemble, FloquetConfig, FloquetProblem};
use mwion_core::pipeline::{Pipeline, Settings, SolverKind, SHIFT_OFFSET};
use mwion_core::units::{unscale, ScaledParams};
use num_complex::Complex64;
use proptest::prelude::*;

const N0: u32 = 5;
const NB: usize = 60;
const OMEGA0: f64 = 1.5;
const F0: f64 = 0.03;

fn omega() -> f64 {
    OMEGA0 / (N0 as f64).powi(3)
}

fn field() -> f64 {
    F0 / (N0 as f64).powi(4)
}

fn ops() -> OperatorSet {
    build_operators(&SturmianBasis::for_level(N0, NB).unwrap()).unwrap()
}

fn problem(ops: &OperatorSet, theta: f64, k_min: i32, k_max: i32, field: f64) -> FloquetProblem {
    assemble(ops, &FloquetConfig { theta, k_min, k_max, field, omega: omega() }).unwrap()
}

fn e0() -> f64 {
    -0.5 / (N0 as f64).powi(2)
}

fn shift(re: f64) -> Complex64 {
    Complex64::new(re, -SHIFT_OFFSET * omega())
}

fn nearest(pairs: &[EigenPair], eps: Complex64) -> &EigenPair {
    pairs.iter().min_by(|p, q| (p.epsilon - eps).norm().total_cmp(&(q.epsilon - eps).norm())).unwrap()
}

fn solve(p: &FloquetProblem, sigma: Complex64, n: usize) -> Vec<EigenPair> {
    shift_invert_eigs(&p.a, &p.b, &EigenRequest::new(sigma, n)).unwrap()
}

#[test]
fn iterative_matches_dense() {
    let ops = ops();
    let p = problem(&ops, 0.15, -3, 3, field()).narrowest();
    let dense = dense_eigs(&p.a, &p.b).unwrap();
    let iter = solve(&p, shift(e0()), 12);
    assert!(iter.len() >= 10);
    for q in &iter {
        let d = nearest(&dense, q.epsilon);
        assert!((d.epsilon - q.epsilon).norm() <= 1e-8, "{} vs {}", q.epsilon, d.epsilon);
    }
}

#[test]
fn residuals_and_c_orthogonality() {
    let ops = ops();
    let p = problem(&ops, 0.15, -3, 3, field()).narrowest();
    let pairs = solve(&p, shift(e0()), 16);
    for q in &pairs {
        let av = p.a.matvec(&q.vector);
        let bv = p.b.matvec(&q.vector);
        let r: f64 = av.iter().zip(&bv).map(|(x, y)| (x - q.epsilon * y).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = av.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(r / scale <= 1e-10, "residual {}", r / scale);
        assert!((bilinear(&q.vector, &p.b, &q.vector) - 1.0).norm() <= 1e-8);
    }
    for (i, u) in pairs.iter().enumerate() {
        for v in pairs.iter().skip(i + 1) {
            if u.degenerate || v.degenerate {
                continue;
            }
            let c = bilinear(&u.vector, &p.b, &v.vector).norm();
            assert!(c <= 1e-8, "{} / {}: {c}", u.epsilon, v.epsilon);
        }
    }
}

#[test]
fn eigenvalues_do_not_depend_on_the_shift() {
    let ops = ops();
    let p = problem(&ops, 0.15, -3, 3, field()).narrowest();
    let a = solve(&p, shift(e0()), 16);
    let b = solve(&p, shift(e0() + 0.3 * omega()), 16);
    let mut common = 0;
    for q in &a {
        let r = nearest(&b, q.epsilon);
        if (r.epsilon - q.epsilon).norm() < 1e-6 {
            assert!((r.epsilon - q.epsilon).norm() <= 1e-9);
            common += 1;
        }
    }
    assert!(common >= 4, "only {common} eigenvalues in common");
}

/// Block `k` carries `−kω`, so moving the window up by one block lowers every
/// quasi-energy by `ω`.
#[test]
fn photon_block_periodicity() {
    let ops = ops();
    let low = problem(&ops, 0.15, -3, 3, field()).narrowest();
    let high = problem(&ops, 0.15, -2, 4, field()).narrowest();
    let a = dense_eigs(&low.a, &low.b).unwrap();
    let b = dense_eigs(&high.a, &high.b).unwrap();
    for q in a.iter().filter(|q| (q.epsilon.re - e0()).abs() < 2.0 * omega()) {
        let moved = q.epsilon - omega();
        let r = nearest(&b, moved);
        assert!((r.epsilon - moved).norm() <= 1e-8, "{} vs {}", moved, r.epsilon);
    }
}

/// Resonance carrying most of the initial state, at rotation angle `theta`.
fn dominant(theta: f64, margin: usize, solver: SolverKind) -> Complex64 {
    let params = unscale(&ScaledParams { omega0: OMEGA0, f0: F0, t_cycles: 10.0 }, N0, f64::INFINITY).unwrap();
    let settings = Settings { theta, margin, solver, basis_size: Some(NB), ..Settings::default() };
    let pipe = Pipeline::new(&params, &settings).unwrap();
    let (d, _, _) = pipe.decompose(params.field).unwrap();
    d.entries.iter().max_by(|a, b| a.w2.total_cmp(&b.w2)).unwrap().epsilon
}

#[test]
fn resonances_are_rotation_invariant() {
    let a = dominant(0.15, 4, SolverKind::Iterative);
    let b = dominant(0.225, 4, SolverKind::Iterative);
    assert!((a - b).norm() <= 1e-6, "{a} vs {b}");
    assert!(a.im <= 0.0);
}

#[test]
fn doubling_the_margin_leaves_resonances_fixed() {
    let a = dominant(0.15, 4, SolverKind::Iterative);
    let b = dominant(0.15, 8, SolverKind::Iterative);
    assert!((a - b).norm() <= 1e-8, "{a} vs {b}");
}

#[test]
fn initial_state_is_captured() {
    let params = unscale(&ScaledParams { omega0: OMEGA0, f0: F0, t_cycles: 10.0 }, N0, f64::INFINITY).unwrap();
    let pipe = Pipeline::new(&params, &Settings::default()).unwrap();
    let (d, _, _) = pipe.decompose(params.field).unwrap();
    assert!(d.captured_weight >= 0.99, "captured {}", d.captured_weight);
}

#[test]
fn field_free_replicas_are_real_and_periodic() {
    let ops = ops();
    let p = problem(&ops, 0.2, -2, 2, 0.0).narrowest();
    let pairs = solve(&p, shift(e0()), 12);
    for k in -2..=2 {
        let target = Complex64::new(e0() + k as f64 * omega(), 0.0);
        let r = nearest(&pairs, target);
        if (r.epsilon - target).norm() < 1e-4 {
            assert!((r.epsilon - target).norm() <= 1e-8, "k {k}: {}", r.epsilon);
        }
    }
    assert!((nearest(&pairs, Complex64::new(e0(), 0.0)).epsilon - e0()).norm() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bound_levels_do_not_depend_on_rotation(theta in 0.02f64..0.5, n in 1u32..=4) {
        let ops = build_operators(&SturmianBasis::for_level(n, 40 * n as usize).unwrap()).unwrap();
        let e = dilated_bound_state(&ops, n, theta).unwrap().energy;
        let exact = -0.5 / (n as f64).powi(2);
        prop_assert!((e - exact).norm() <= 1e-8, "theta {} n {}: {}", theta, n, e);
    }

    #[test]
    fn floquet_pencil_is_complex_symmetric(theta in 0.0f64..0.6, f0 in 0.0f64..0.1, kmin in -3i32..=0, nk in 0i32..4) {
        let ops = build_operators(&SturmianBasis::for_level(3, 16).unwrap()).unwrap();
        let cfg = FloquetConfig { theta, k_min: kmin, k_max: kmin + nk, field: f0 / 81.0, omega: 1.0 / 27.0 };
        let p = assemble(&ops, &cfg).unwrap();
        prop_assert!(p.a.asymmetry() == 0.0);
        prop_assert!(p.b.asymmetry() == 0.0);
    }
}
