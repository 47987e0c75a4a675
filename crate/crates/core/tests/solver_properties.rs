use polaron_core::solver::{bound_at_order, hankel_system, polynomial_roots};
use polaron_core::{bound_sequence, MomentTable, SolverError};
use proptest::prelude::*;

fn spectrum_table(levels: &[(f64, f64)], max: usize) -> MomentTable {
    let raw = (0..=max).map(|m| levels.iter().map(|(e, w)| w * e.powi(m as i32)).sum()).collect();
    MomentTable::from_raw(raw).unwrap()
}

#[test]
fn two_point_spectrum_is_recovered() {
    let t = spectrum_table(&[(-1.25, 0.7), (2.0, 0.3)], 3);
    let r = bound_at_order(&t, 2).unwrap();
    assert!((r.roots[0] + 1.25).abs() < 1e-9 && (r.roots[1] - 2.0).abs() < 1e-9, "{:?}", r.roots);
}

#[test]
fn three_point_spectrum_is_recovered() {
    let t = spectrum_table(&[(-3.0, 0.2), (0.5, 0.5), (4.0, 0.3)], 5);
    let r = bound_at_order(&t, 3).unwrap();
    for (got, want) in r.roots.iter().zip([-3.0, 0.5, 4.0]) {
        assert!((got - want).abs() < 1e-9, "{:?}", r.roots);
    }
    assert_eq!(r.bound, r.roots[0]);
}

#[test]
fn characteristic_polynomial_of_known_roots() {
    // (x−1)(x−2)(x+3) = x³ − 7x + 6
    let roots = polynomial_roots(&[1.0, 0.0, -7.0, 6.0]).unwrap();
    for (got, want) in roots.iter().zip([-3.0, 1.0, 2.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn hankel_system_needs_enough_moments() {
    assert!(matches!(hankel_system(&[1.0, 0.0, 1.0], 2), Err(SolverError::NotEnoughMoments { .. })));
}

fn arb_spectrum() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 4..8).prop_map(|v| {
        let total: f64 = v.iter().map(|(_, w)| w).sum();
        v.into_iter().map(|(e, w)| (e, w / total)).collect()
    })
}

fn well_separated(levels: &[(f64, f64)]) -> bool {
    let mut e: Vec<f64> = levels.iter().map(|l| l.0).collect();
    e.sort_by(f64::total_cmp);
    e.windows(2).all(|w| w[1] - w[0] > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shift_equivariance(levels in arb_spectrum(), c in -10.0f64..10.0) {
        prop_assume!(well_separated(&levels));
        let t = spectrum_table(&levels, 5);
        let shifted = t.shifted(c);
        for n in 1..=3 {
            let a = bound_at_order(&t, n).unwrap().bound;
            let b = bound_at_order(&shifted, n).unwrap().bound;
            prop_assert!((a + c - b).abs() <= 1e-10 * (1.0 + b.abs()), "n={}: {} + {} vs {}", n, a, c, b);
        }
    }

    #[test]
    fn scale_equivariance(levels in arb_spectrum(), s in 0.1f64..10.0) {
        prop_assume!(well_separated(&levels));
        let t = spectrum_table(&levels, 5);
        let scaled = t.scaled(s);
        for n in 1..=3 {
            let a = bound_at_order(&t, n).unwrap().bound;
            let b = bound_at_order(&scaled, n).unwrap().bound;
            prop_assert!((a * s - b).abs() <= 1e-10 * (1.0 + b.abs()), "n={}: {}·{} vs {}", n, a, s, b);
        }
    }

    #[test]
    fn bounds_lie_above_the_lowest_level_and_decrease(levels in arb_spectrum()) {
        prop_assume!(well_separated(&levels));
        let lowest = levels.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
        let seq = bound_sequence(&spectrum_table(&levels, 7), 4);
        prop_assert!(seq.failure.is_none(), "{:?}", seq.failure);
        for b in &seq.bounds {
            prop_assert!(b.bound >= lowest - 1e-9);
        }
        for w in seq.bounds.windows(2) {
            prop_assert!(w[1].bound <= w[0].bound + 1e-12 * w[0].bound.abs());
        }
    }

    #[test]
    fn central_moments_are_shift_invariant(levels in arb_spectrum(), c in -10.0f64..10.0) {
        let t = spectrum_table(&levels, 6);
        let s = t.shifted(c);
        prop_assert!((s.mean() - t.mean() - c).abs() < 1e-12 * (1.0 + c.abs()));
        for (a, b) in t.central().iter().zip(polaron_core::central_moments(&s)) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{} vs {}", a, b);
        }
    }
}
