use std::collections::BTreeMap;

use num_bigint::BigUint;
use parazeta::string_core::{enumerate_lengths, lift, scale, CoefficientFamily, EnumerationCutoff, StringExpr};
use proptest::prelude::*;

fn atom() -> impl Strategy<Value = StringExpr> {
    prop_oneof![
        (2u32..5, 0.05f64..0.9).prop_map(|(m, t)| StringExpr::gen_cantor(m, t / m as f64).unwrap()),
        prop::collection::vec(0.05f64..0.3, 1..4).prop_map(|r| StringExpr::self_similar(r).unwrap()),
        prop::collection::vec((0.01f64..1.0, 1u64..4), 1..5).prop_map(|t| StringExpr::explicit(&t).unwrap()),
    ]
}

/// Exponentially decaying strings built from atoms by the string operations.
fn expr() -> impl Strategy<Value = StringExpr> {
    atom().prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            (0.1f64..3.0, inner.clone()).prop_map(|(g, e)| scale(g, e).unwrap()),
            prop::collection::vec(inner.clone(), 2..3).prop_map(|p| StringExpr::union(p).unwrap()),
            (inner.clone(), 1u32..3).prop_map(|(e, n)| StringExpr::power(e, n).unwrap()),
        ]
    })
}

fn multiset(e: &StringExpr, terms: usize) -> BTreeMap<u64, BigUint> {
    let mut out = BTreeMap::new();
    for t in enumerate_lengths(e, EnumerationCutoff::MaxTerms(terms)).unwrap() {
        *out.entry(t.length.to_bits()).or_insert_with(BigUint::default) += t.multiplicity;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn emitted_mass_never_exceeds_total(e in expr(), terms in 1usize..2000) {
        let total = e.total_length().unwrap();
        let mass: f64 = enumerate_lengths(&e, EnumerationCutoff::MaxTerms(terms)).unwrap().map(|t| t.mass()).sum();
        prop_assert!(mass <= total * (1.0 + 1e-12), "{mass} > {total}");
    }

    #[test]
    fn stream_is_nonincreasing(e in expr()) {
        let lengths: Vec<f64> = enumerate_lengths(&e, EnumerationCutoff::MaxTerms(3000)).unwrap().map(|t| t.length).collect();
        prop_assert!(lengths.windows(2).all(|w| w[0] > w[1]), "not strictly decreasing after coalescing");
    }

    #[test]
    fn union_and_power_totals(a in atom(), b in atom(), n in 1u32..4) {
        let (ta, tb) = (a.total_length().unwrap(), b.total_length().unwrap());
        let u = StringExpr::union(vec![a.clone(), b]).unwrap().total_length().unwrap();
        prop_assert!((u - (ta + tb)).abs() <= 1e-14 * (ta + tb));
        let p = StringExpr::power(a, n).unwrap().total_length().unwrap();
        prop_assert!((p - ta.powi(n as i32)).abs() <= 1e-13 * ta.powi(n as i32));
    }

    #[test]
    fn lift_total_is_family_value(e in atom(), k in 0usize..4) {
        let family = [CoefficientFamily::Exp, CoefficientFamily::ExpMinusOne, CoefficientFamily::Cosh, CoefficientFamily::Sinh][k].clone();
        let total = e.total_length().unwrap();
        let lifted = lift(family.clone(), e).unwrap().total_length().unwrap();
        let expected = family.value(total);
        prop_assert!((lifted - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn json_round_trip(e in expr()) {
        let back = StringExpr::from_json(&e.to_json()).unwrap();
        prop_assert_eq!(&back, &e);
    }
}

#[test]
fn mass_converges_to_total() {
    let cases = [
        StringExpr::gen_cantor(2, 0.3).unwrap(),
        StringExpr::self_similar(vec![0.5, 0.2]).unwrap(),
        StringExpr::power(StringExpr::gen_cantor(3, 0.2).unwrap(), 2).unwrap(),
        StringExpr::union(vec![StringExpr::cantor_string(), scale(0.5, StringExpr::gen_cantor(2, 0.25).unwrap()).unwrap()]).unwrap(),
    ];
    for e in cases {
        let total = e.total_length().unwrap();
        let mass: f64 = enumerate_lengths(&e, EnumerationCutoff::MaxTerms(100_000)).unwrap().map(|t| t.mass()).sum();
        assert!((total - mass).abs() <= 1e-6 * total, "{e:?}: {mass} vs {total}");
    }
}

#[test]
fn tensor_distributes_over_union() {
    let e1 = StringExpr::gen_cantor(2, 0.3).unwrap();
    let e2 = StringExpr::explicit(&[(0.5, 1), (0.125, 2)]).unwrap();
    let e3 = StringExpr::self_similar(vec![0.5, 0.25]).unwrap();
    let left = StringExpr::tensor(vec![StringExpr::union(vec![e1.clone(), e2.clone()]).unwrap(), e3.clone()]).unwrap();
    let right = StringExpr::union(vec![
        StringExpr::tensor(vec![e1, e3.clone()]).unwrap(),
        StringExpr::tensor(vec![e2, e3]).unwrap(),
    ])
    .unwrap();
    let (l, r) = (multiset(&left, 1000), multiset(&right, 1000));
    assert_eq!(l, r);
}

#[test]
fn min_length_cutoff_and_errors() {
    let e = StringExpr::cantor_string();
    let terms: Vec<_> = enumerate_lengths(&e, EnumerationCutoff::MinLength(1e-3)).unwrap().collect();
    assert_eq!(terms.len(), 6);
    assert_eq!(terms[0].length, 1.0 / 3.0);
    assert_eq!(terms[5].multiplicity, BigUint::from(32u32));
    assert!(enumerate_lengths(&e, EnumerationCutoff::MinLength(0.0)).is_err());
}
