use polaron_core::oracle::quadrature_radial;
use polaron_core::{radial_integral, ClosedForm};
use proptest::prelude::*;

#[test]
fn full_grid_agrees_with_quadrature() {
    for k0 in [0.5, 1.0, 2.0, 3.0] {
        for p in 0..=12u32 {
            for q in 0..=p.min(6) {
                let cf = radial_integral(p, q).unwrap().evaluate(k0);
                let quad = quadrature_radial(p, q, k0).unwrap();
                let rel = (cf - quad).abs() / quad.abs();
                assert!(rel <= 1e-12, "p={p} q={q} k0={k0}: {cf} vs {quad} ({rel:e})");
            }
        }
    }
}

#[test]
fn divergent_integrals_are_rejected() {
    assert!(radial_integral(2, 3).is_err());
    assert!(quadrature_radial(2, 3, 1.0).is_err());
}

#[test]
fn batch_evaluation_matches_single() {
    let forms: Vec<ClosedForm> = (0..=6).map(|q| radial_integral(9, q).unwrap()).collect();
    let batch = ClosedForm::evaluate_many(&forms, 1.7);
    for (cf, b) in forms.iter().zip(batch) {
        assert_eq!(cf.evaluate(1.7), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_points_agree(p in 0u32..=12, dq in 0u32..=6, k0 in 0.05f64..6.0) {
        let q = dq.min(p);
        let cf = radial_integral(p, q).unwrap().evaluate(k0);
        let quad = quadrature_radial(p, q, k0).unwrap();
        prop_assert!((cf - quad).abs() <= 1e-11 * quad.abs(), "{} vs {}", cf, quad);
    }

    #[test]
    fn integrals_are_increasing_in_cutoff(p in 0u32..=10, dq in 0u32..=5, a in 0.1f64..3.0, d in 0.01f64..1.0) {
        let q = dq.min(p);
        let cf = radial_integral(p, q).unwrap();
        prop_assert!(cf.evaluate(a + d) > cf.evaluate(a));
    }
}
