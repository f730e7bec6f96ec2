use parazeta::cantor_atoms::{
    cantor_string_zeta, closed_form_zeta, laurent_principal, numeric_laurent_limit, singularity_lattice, CantorParams,
};
use parazeta::string_core::{enumerate_lengths, ln_biguint, EnumerationCutoff, StringExpr};
use parazeta::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ATOMS: [(u32, f64); 2] = [(2, 1.0 / 3.0), (3, 0.2)];

/// Partial Dirichlet sum over the first `levels` coalesced lengths.
fn dirichlet(e: &StringExpr, s: Complex64, levels: usize) -> Complex64 {
    enumerate_lengths(e, EnumerationCutoff::MaxTerms(levels))
        .unwrap()
        .map(|t| (s * t.length.ln() + ln_biguint(&t.multiplicity)).exp())
        .sum()
}

#[test]
fn closed_form_matches_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..200 {
        let (m, a) = ATOMS[i % 2];
        let n = 1 + (i / 2 % 3) as u32;
        let p = CantorParams::new(m, a).unwrap();
        let s = Complex64::new(p.dimension() + 0.1 + rng.random::<f64>(), rng.random_range(-20.0..20.0));
        let e = StringExpr::power(StringExpr::GenCantor(p), n).unwrap();
        let exact = closed_form_zeta(&p, n, s).unwrap();
        let series = dirichlet(&e, s, 600);
        assert!((series - exact).norm() <= 1e-8 * exact.norm(), "{m} {a} n={n} s={s}: {series} vs {exact}");
    }
}

#[test]
fn cantor_string_form() {
    for s in [Complex64::new(1.0, 0.0), Complex64::new(0.8, 5.0)] {
        let direct = 1.0 / ((s * 3f64.ln()).exp() - 2.0);
        assert!((cantor_string_zeta(s).unwrap() - direct).norm() < 1e-14 * direct.norm());
    }
    assert!((cantor_string_zeta(Complex64::new(1.0, 0.0)).unwrap().re - 1.0).abs() < 1e-15);
}

#[test]
fn powers_are_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (m, a) in ATOMS {
        let p = CantorParams::new(m, a).unwrap();
        for _ in 0..20 {
            let s = Complex64::new(rng.random_range(0.8..3.0), rng.random_range(-20.0..20.0));
            let one = closed_form_zeta(&p, 1, s).unwrap();
            for n in 1..=4 {
                assert_eq!(closed_form_zeta(&p, n, s).unwrap(), one.powu(n));
            }
            let e = StringExpr::power(StringExpr::GenCantor(p), 2).unwrap();
            let series = dirichlet(&e, s, 600);
            assert!((series - one * one).norm() <= 1e-8 * (one * one).norm());
        }
    }
}

#[test]
fn periodic_in_imaginary_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..50 {
        let (m, a) = ATOMS[i % 2];
        let p = CantorParams::new(m, a).unwrap();
        let s = Complex64::new(rng.random_range(0.1..3.0), rng.random_range(-20.0..20.0));
        let shifted = s + Complex64::new(0.0, p.period());
        for n in 1..=3 {
            let (z0, z1) = (closed_form_zeta(&p, n, s).unwrap(), closed_form_zeta(&p, n, shifted).unwrap());
            assert!((z0 - z1).norm() <= 1e-10 * z0.norm().max(1.0), "{s}: {z0} vs {z1}");
        }
    }
}

#[test]
fn laurent_limit_along_four_directions() {
    let directions = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, -1.0)];
    for (m, a) in ATOMS {
        let p = CantorParams::new(m, a).unwrap();
        for n in 1..=3 {
            for j in [0i64, 1, 7, -3] {
                let expected = laurent_principal(&p, n, j).unwrap();
                for dir in directions {
                    let got = numeric_laurent_limit(&p, n, j, dir).unwrap();
                    assert!((got - expected).norm() <= 1e-6 * expected.norm(), "{m} {a} n={n} j={j}: {got} vs {expected}");
                }
            }
        }
    }
}

#[test]
fn lattice_points_are_zeros_of_the_denominator() {
    for (m, a) in ATOMS {
        let p = CantorParams::new(m, a).unwrap();
        let lattice = singularity_lattice(&p, Some(1));
        assert!((lattice.real_part - p.dimension()).abs() < 1e-15);
        for j in -5..=5 {
            assert!(p.denominator(lattice.point(j)).norm() < 1e-13);
            assert!(closed_form_zeta(&p, 1, lattice.point(j)).is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conjugate_symmetric(m in 2u32..6, t in 0.05f64..0.95, re in 0.05f64..3.0, im in -30.0f64..30.0) {
        let p = CantorParams::new(m, t / m as f64).unwrap();
        let s = Complex64::new(re, im);
        if let (Ok(z), Ok(w)) = (closed_form_zeta(&p, 1, s), closed_form_zeta(&p, 1, s.conj())) {
            prop_assert!((z.conj() - w).norm() <= 1e-14 * z.norm().max(1.0));
        }
    }

    #[test]
    fn dimension_round_trip(m in 2u32..50, d in 0.01f64..0.99) {
        let p = CantorParams::from_dimension(m, d).unwrap();
        prop_assert!((p.dimension() - d).abs() < 1e-14);
        prop_assert!(p.ma() < 1.0);
    }
}
