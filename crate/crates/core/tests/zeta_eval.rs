use parazeta::cantor_atoms::CantorSchedule;
use parazeta::prescriber::{construct, ConstructionOptions};
use parazeta::string_core::{lift, scale, CoefficientFamily, StringExpr};
use parazeta::zeta_eval::{epsilon_bound, eval_constructed, eval_zeta, Disk};
use parazeta::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples() -> Vec<StringExpr> {
    vec![
        StringExpr::gen_cantor(2, 1.0 / 3.0).unwrap(),
        StringExpr::infinite_order(2, 0.3).unwrap(),
        StringExpr::infinite_order(3, 0.2).unwrap(),
        StringExpr::power(StringExpr::gen_cantor(3, 0.2).unwrap(), 2).unwrap(),
        lift(CoefficientFamily::ExpMinusOne, StringExpr::explicit(&[(0.5, 1), (0.25, 1)]).unwrap()).unwrap(),
        lift(CoefficientFamily::Cosh, StringExpr::gen_cantor(2, 0.25).unwrap()).unwrap(),
        construct(0.2, 0.5, 0.5, ConstructionOptions::default()).unwrap().expr,
        construct(0.0, 0.3, 0.7, ConstructionOptions::default()).unwrap().expr,
    ]
}

#[test]
fn reported_bounds_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let exprs = samples();
    let mut checked = 0;
    while checked < 100 {
        let e = &exprs[checked % exprs.len()];
        let tol = if rng.random::<bool>() { 1e-4 } else { 1e-8 };
        let s = Complex64::new(rng.random_range(1.0..2.5), rng.random_range(-15.0..15.0));
        let (coarse, fine) = match (eval_zeta(e, s, tol), eval_zeta(e, s, tol / 100.0)) {
            (Ok(c), Ok(f)) => (c, f),
            (Err(Error::SingularityProximity { .. }), _) => continue,
            (Err(err), _) | (_, Err(err)) => panic!("{err}"),
        };
        assert!(coarse.error_bound <= tol * 1.0001 + 1e-12, "bound {} above tol {tol}", coarse.error_bound);
        assert!(
            (coarse.value - fine.value).norm() <= coarse.error_bound + fine.error_bound,
            "{s} tol {tol}: {} vs {} (bound {})",
            coarse.value,
            fine.value,
            coarse.error_bound
        );
        checked += 1;
    }
}

#[test]
fn homomorphisms() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let a = StringExpr::gen_cantor(2, 0.3).unwrap();
    let b = StringExpr::infinite_order(3, 0.2).unwrap();
    let rel = |x: Complex64, y: Complex64| (x - y).norm() / y.norm();
    for _ in 0..40 {
        let s = Complex64::new(rng.random_range(0.9..2.0), rng.random_range(-10.0..10.0));
        let tol = 1e-13;
        let (za, zb) = (eval_zeta(&a, s, tol).unwrap().value, eval_zeta(&b, s, tol).unwrap().value);
        let u = eval_zeta(&StringExpr::union(vec![a.clone(), b.clone()]).unwrap(), s, tol).unwrap().value;
        assert!(rel(u, za + zb) < 1e-8);
        for n in 1..=3 {
            let p = eval_zeta(&StringExpr::power(b.clone(), n).unwrap(), s, tol).unwrap().value;
            assert!(rel(p, zb.powu(n)) < 1e-8, "n={n} {s}");
        }
        for gamma in [0.1, 3.0] {
            let sc = eval_zeta(&scale(gamma, b.clone()).unwrap(), s, tol).unwrap().value;
            assert!(rel(sc, (s * f64::ln(gamma)).exp() * zb) < 1e-8);
        }
    }
}

#[test]
fn certificates_hold_on_sampled_points() {
    let schedule = CantorSchedule::new(0.2, 0.5, 0.5, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut issued = 0;
    let mut cases = std::collections::HashSet::new();
    while issued < 10 {
        let r = rng.random_range(0.005..0.1);
        let center = Complex64::new(rng.random_range(0.2 + r + 1e-3..0.8), rng.random_range(-30.0..30.0));
        let Ok(cert) = epsilon_bound(&schedule, Disk { center, radius: r }) else { continue };
        cases.insert(cert.case_tag);
        for _ in 0..10_000 {
            let s = center + Complex64::from_polar(r * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
            for _ in 0..50 {
                let k = rng.random_range(1..200u32);
                let value = schedule.params(k).denominator(s).norm();
                assert!(value >= cert.epsilon, "k={k} s={s}: {value} < {}", cert.epsilon);
            }
        }
        issued += 1;
    }
    assert!(cases.len() >= 2, "{cases:?}");
}

#[test]
fn constructed_zeta_right_of_d_is_finite() {
    let p = construct(0.2, 0.5, 0.8, ConstructionOptions::default()).unwrap();
    let v = eval_constructed(&p, Complex64::new(1.0, 0.0), 1e-10).unwrap();
    // at s = 1 the zeta function is the total length
    let total = p.expr.total_length().unwrap();
    assert!((v.value.re - total).abs() < 1e-8 * total);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conjugate_symmetry(i in 0usize..8, re in 0.9f64..2.0, im in -15.0f64..15.0) {
        let e = &samples()[i];
        let s = Complex64::new(re, im);
        if let (Ok(z), Ok(w)) = (eval_zeta(e, s, 1e-12), eval_zeta(e, s.conj(), 1e-12)) {
            prop_assert!((z.value.conj() - w.value).norm() <= 4.0 * f64::EPSILON * z.value.norm().max(1.0) + z.error_bound.min(1e-12));
        }
    }
}
