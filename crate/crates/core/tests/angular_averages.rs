use num_traits::ToPrimitive;
use polaron_core::angular::{angular_average, AngularCache, DotMonomial, EliminationOrder};
use polaron_core::oracle::angular_average_mc;
use proptest::prelude::*;

#[test]
fn low_order_examples_against_monte_carlo() {
    let cases = [
        (vec![(0, 1)], 0.0),
        (vec![(0, 1), (0, 1)], 1.0 / 3.0),
        (vec![(0, 1); 4], 0.2),
    ];
    for (i, (pairs, expected)) in cases.into_iter().enumerate() {
        let m = DotMonomial::from_pairs(pairs);
        let exact = angular_average(&m).to_f64().unwrap();
        assert!((exact - expected).abs() < 1e-15);
        let (est, se) = angular_average_mc(&m, 40_000, 99 + i as u64);
        assert!((est - exact).abs() < 4.0 * se.max(1e-4), "{est} ± {se} vs {exact}");
    }
}

fn arb_monomial() -> impl Strategy<Value = Vec<(u16, u16)>> {
    prop::collection::vec((0u16..4, 0u16..4).prop_filter("distinct", |(a, b)| a != b), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn elimination_order_does_not_matter(pairs in arb_monomial()) {
        let m = DotMonomial::from_pairs(pairs);
        let a = AngularCache::with_order(EliminationOrder::LowestDegree).average(&m);
        let b = AngularCache::with_order(EliminationOrder::HighestDegree).average(&m);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn relabelling_is_harmless(pairs in arb_monomial(), shift in 1u16..20) {
        let m = DotMonomial::from_pairs(pairs.clone());
        let r = DotMonomial::from_pairs(pairs.into_iter().map(|(a, b)| (a + shift, b + shift)));
        prop_assert_eq!(angular_average(&m), angular_average(&r));
    }

    #[test]
    fn averages_are_bounded_by_one(pairs in arb_monomial()) {
        let v = angular_average(&DotMonomial::from_pairs(pairs)).to_f64().unwrap();
        prop_assert!(v.abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn monte_carlo_agrees(pairs in prop::collection::vec((0u16..3, 0u16..3).prop_filter("distinct", |(a, b)| a != b), 1..4), seed in any::<u64>()) {
        let m = DotMonomial::from_pairs(pairs);
        let exact = angular_average(&m).to_f64().unwrap();
        let (est, se) = angular_average_mc(&m, 20_000, seed);
        prop_assert!((est - exact).abs() < 5.0 * se.max(2e-3), "{} ± {} vs {}", est, se, exact);
    }
}
