//! Fixtures shared by the benchmarks.

use polaron_core::oracle::random_discrete_kernel;
use polaron_core::{build_discrete_hamiltonian, build_hamiltonian, FChoice, HamiltonianSpec, MomentTable, PolaronParams};

/// Continuum Hamiltonian at rest with the optimal amplitudes.
pub fn rest_spec(alpha: f64, k0: f64) -> HamiltonianSpec {
    build_hamiltonian(&PolaronParams::new(alpha, k0), FChoice::OptimalRest).expect("valid parameters")
}

/// A seeded three-mode discrete Hamiltonian with every term family present.
pub fn discrete_spec(seed: u64) -> HamiltonianSpec {
    build_discrete_hamiltonian(random_discrete_kernel(seed, 3))
}

/// Moments of an evenly weighted spectrum on `levels` points in `[-1, 1]`.
pub fn spectrum_table(levels: usize, max_order: usize) -> MomentTable {
    let points: Vec<f64> = (0..levels).map(|i| -1.0 + 2.0 * i as f64 / (levels - 1) as f64 + 0.01 * i as f64).collect();
    let w = 1.0 / levels as f64;
    let raw = (0..=max_order).map(|m| points.iter().map(|x| w * x.powi(m as i32)).sum()).collect();
    MomentTable::from_raw(raw).expect("finite moments")
}
