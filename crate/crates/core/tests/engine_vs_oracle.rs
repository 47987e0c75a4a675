use polaron_core::oracle::{
    build_discrete_model, continuum_discretization, describe_kernel, discrete_k2_k3, oracle_ground_energy,
    oracle_moments, random_discrete_kernel, Truncation,
};
use polaron_core::polaron::{central_moments_closed, FSource};
use polaron_core::{
    bound_sequence, build_discrete_hamiltonian, build_hamiltonian, FChoice, MomentEngine, PolaronParams,
};
use proptest::prelude::*;

#[test]
fn twenty_seeded_models_match_the_fock_oracle() {
    let engine = MomentEngine::default();
    for seed in 0..20u64 {
        let kernel = random_discrete_kernel(1000 + seed, 2 + (seed as usize % 2));
        let spec = build_discrete_hamiltonian(kernel.clone());
        let model = build_discrete_model(kernel.clone(), Truncation::PerMode(4)).unwrap();
        let oracle = oracle_moments(&model, 5).unwrap();
        let engine_table = engine.moment_table(&spec, 5).unwrap();
        for m in 1..=5 {
            let (a, b) = (engine_table.raw()[m], oracle.raw()[m]);
            assert!((a - b).abs() <= 1e-10 * b.abs(), "M_{m}: {a} vs {b}\n{}", describe_kernel(&kernel));
        }
    }
}

#[test]
fn bounds_sit_above_the_truncated_ground_state() {
    let engine = MomentEngine::default();
    for seed in 0..6u64 {
        let kernel = random_discrete_kernel(2000 + seed, 2);
        let spec = build_discrete_hamiltonian(kernel.clone());
        let (ground, _) = polaron_core::oracle::converged_ground_energy(&kernel, 6, 1e-11).unwrap();
        let seq = bound_sequence(&engine.moment_table(&spec, 5).unwrap(), 3);
        assert_eq!(seq.bounds.len(), 3, "{:?}", seq.failure);
        for b in &seq.bounds {
            assert!(b.bound >= ground - 1e-8, "order {}: {} < {ground}", b.order, b.bound);
        }
    }
}

#[test]
fn truncated_models_are_hermitian() {
    for seed in 0..5 {
        let model = build_discrete_model(random_discrete_kernel(seed, 3), Truncation::PerMode(3)).unwrap();
        assert!(model.matrix().asymmetry() < 1e-14);
        assert!(oracle_ground_energy(&model).unwrap() <= oracle_moments(&model, 1).unwrap().raw()[1]);
    }
}

#[test]
fn cumulant_route_reproduces_direct_moments_in_the_continuum() {
    let engine = MomentEngine::default();
    for (alpha, k0) in [(0.5, 0.5), (1.0, 1.0), (3.0, 2.0)] {
        let spec = build_hamiltonian(&PolaronParams::new(alpha, k0), FChoice::OptimalRest).unwrap();
        let direct = engine.moment_table(&spec, 5).unwrap();
        let via = engine.moment_table_from_cumulants(&spec, 5).unwrap();
        for m in 2..=5 {
            let (a, b) = (direct.central()[m], via.central()[m]);
            assert!((a - b).abs() <= 1e-11 * a.abs(), "alpha={alpha} k0={k0} m={m}: {a} vs {b}");
        }
    }
}

#[test]
fn discretised_continuum_matches_engine_cumulants() {
    let engine = MomentEngine::default();
    for (alpha, k0) in [(1.0, 0.5), (1.0, 1.0), (2.0, 3.0)] {
        let spec = build_hamiltonian(&PolaronParams::new(alpha, k0), FChoice::OptimalRest).unwrap();
        let t = engine.moment_table(&spec, 3).unwrap();
        let (k2, k3) = discrete_k2_k3(&continuum_discretization(alpha, k0, 14)).unwrap();
        assert!((k2 - t.central()[2]).abs() <= 1e-9 * k2.abs(), "K2 {k2} vs {}", t.central()[2]);
        assert!((k3 - t.central()[3]).abs() <= 1e-9 * k3.abs(), "K3 {k3} vs {}", t.central()[3]);
        let (k2d, k3d) = central_moments_closed(alpha, k0, FSource::Derived);
        assert!((k2d - k2).abs() <= 1e-9 * k2.abs());
        assert!((k3d - k3).abs() <= 1e-9 * k3.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_models_agree_up_to_fourth_moment(seed in any::<u64>(), modes in 1usize..=3) {
        let kernel = random_discrete_kernel(seed, modes);
        let spec = build_discrete_hamiltonian(kernel.clone());
        let model = build_discrete_model(kernel.clone(), Truncation::PerMode(4)).unwrap();
        let oracle = oracle_moments(&model, 4).unwrap();
        let engine = MomentEngine::default().moment_table(&spec, 4).unwrap();
        for m in 1..=4 {
            let (a, b) = (engine.raw()[m], oracle.raw()[m]);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs(), "seed {} M_{}: {} vs {}", seed, m, a, b);
        }
    }

    #[test]
    fn variance_is_positive(alpha in 0.05f64..6.0, k0 in 0.2f64..4.0) {
        let spec = build_hamiltonian(&PolaronParams::new(alpha, k0), FChoice::OptimalRest).unwrap();
        let t = MomentEngine::default().moment_table(&spec, 2).unwrap();
        prop_assert!(t.central()[2] > 0.0);
    }
}
