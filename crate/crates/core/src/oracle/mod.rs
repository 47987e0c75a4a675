//! Independent reference computations: adaptive quadrature of the radial
//! integrals, Monte-Carlo angular averages, and truncated Fock-space models
//! whose moments and ground energies check the contraction engine and the
//! upper-bound property.

mod fock;

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::angular::{DotMonomial, VectorId};
use crate::closed_form::ClosedFormError;
use crate::moments::{MomentTable, MomentTableError};
use crate::quadrature::{AdaptiveIntegrator, GaussLegendre};
use crate::solver::{bound_sequence, SolverError};
use crate::wick::{build_discrete_hamiltonian, DiscreteKernel, DiscreteMode, EngineConfig, EngineError, MomentEngine};

pub use fock::{
    build_discrete_model, converged_ground_energy, dense_ground_energy, dense_reference_matrix, lanczos_ground_energy,
    normal_ordered_matrix, oracle_ground_energy, oracle_moments, DiscreteModel, FockBasis, SparseMatrix, Truncation,
    DENSE_LIMIT, MAX_DIMENSION,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("basis dimension {dimension} exceeds the limit {limit}")]
    DimensionOverflow { dimension: usize, limit: usize },
    #[error("eigensolver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Radial(#[from] ClosedFormError),
    #[error(transparent)]
    Table(#[from] MomentTableError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `∫₀^{k0} k^p/(k+k²)^q dk` by adaptive Gauss–Legendre quadrature.
pub fn quadrature_radial(p: u32, q: u32, k0: f64) -> Result<f64, ClosedFormError> {
    if p < q {
        return Err(ClosedFormError::Divergent { p, q });
    }
    let e = (p - q) as i32;
    let r = AdaptiveIntegrator::new(1e-14).integrate(0.0, k0, |k| k.powi(e) / (1.0 + k).powi(q as i32));
    Ok(r.value)
}

/// Monte-Carlo estimate of an isotropic average and its standard error.
pub fn angular_average_mc(m: &DotMonomial, samples: usize, seed: u64) -> (f64, f64) {
    let mut ids: Vec<VectorId> = m.factors().flat_map(|((a, b), _)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut vectors = vec![[0.0f64; 3]; ids.len()];
    for _ in 0..samples {
        for v in vectors.iter_mut() {
            let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            *v = g.map(|x| x / n);
        }
        let pos = |id: VectorId| ids.binary_search(&id).expect("collected above");
        let mut x = 1.0;
        for ((a, b), mult) in m.factors() {
            let (u, w) = (vectors[pos(a)], vectors[pos(b)]);
            x *= (u[0] * w[0] + u[1] * w[1] + u[2] * w[2]).powi(mult as i32);
        }
        sum += x;
        sum_sq += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

const DIRECTIONS: [[f64; 3]; 7] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, -1.0, 1.0],
    [-1.0, 2.0, 2.0],
    [0.0, 1.0, -3.0],
];

/// Seeded model with `n_modes` modes: `|k| ∈ [0.3, 1.5]`, `V ∈ [0.1, 0.6]`,
/// `f ∈ [−0.4, 0.4]`, directions drawn from the axes and a few oblique vectors,
/// and `|P| ≤ 0.3` along an oblique direction.
pub fn random_discrete_kernel(seed: u64, n_modes: usize) -> DiscreteKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = (0..n_modes)
        .map(|_| {
            let dir = DIRECTIONS[rng.random_range(0..DIRECTIONS.len())];
            DiscreteMode::new(dir, rng.random_range(0.3..1.5), rng.random_range(0.1..0.6), rng.random_range(-0.4..0.4))
        })
        .collect();
    let p = rng.random_range(0.0..0.3);
    let raw: [f64; 3] = [rng.random_range(0.2..1.0), rng.random_range(-1.0..-0.2), rng.random_range(0.2..1.0)];
    let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    DiscreteKernel { modes, momentum: raw.map(|x| p * x / n) }
}

/// Plain-text description for reproducing a failure.
pub fn describe_kernel(kernel: &DiscreteKernel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "P = [{:.17e}, {:.17e}, {:.17e}]", kernel.momentum[0], kernel.momentum[1], kernel.momentum[2]);
    for (i, m) in kernel.modes.iter().enumerate() {
        let _ = writeln!(
            s,
            "mode {i}: |k| = {:.17e}, dir = [{:.6}, {:.6}, {:.6}], V = {:.17e}, f = {:.17e}",
            m.magnitude, m.direction[0], m.direction[1], m.direction[2], m.coupling, m.displacement
        );
    }
    s
}

/// The six octahedral directions; averaging a polynomial of degree ≤ 3 in one
/// direction over them reproduces the isotropic average.
pub const OCTAHEDRON: [[f64; 3]; 6] =
    [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];

/// Finite-mode surrogate of the continuum at rest with the optimal amplitudes:
/// Gauss–Legendre radial nodes times octahedral directions, with the quadrature
/// weights folded into `V` so that `Σ_i V_i² g(k_i) ≈ (8α/π)∫ k³ g dk`.
pub fn continuum_discretization(alpha: f64, k0: f64, radial_nodes: usize) -> DiscreteKernel {
    let g = 8.0 * alpha / PI;
    let rule = GaussLegendre::new(radial_nodes);
    let mut modes = Vec::with_capacity(radial_nodes * OCTAHEDRON.len());
    for (k, w) in rule.on_interval(0.0, k0) {
        let v = (g * w * k * k * k / OCTAHEDRON.len() as f64).sqrt();
        for dir in OCTAHEDRON {
            modes.push(DiscreteMode::new(dir, k, v, -v / (k + k * k)));
        }
    }
    DiscreteKernel { modes, momentum: [0.0; 3] }
}

/// `K_2` and `K_3` at rest with the optimal amplitudes, the three radial integrals
/// `∫₀^{k0} k^{3,4,5}/(1+k)² dk` done by adaptive quadrature.
pub fn quadrature_k2_k3(alpha: f64, k0: f64) -> Result<(f64, f64), ClosedFormError> {
    let f1 = quadrature_radial(5, 2, k0)?;
    let f2 = quadrature_radial(6, 2, k0)?;
    let f3 = quadrature_radial(7, 2, k0)?;
    let a2 = alpha * alpha / (PI * PI);
    let a3 = a2 * alpha / PI;
    let k2 = 128.0 / 3.0 * a2 * f1 * f1;
    let k3 = 256.0 / 3.0 * a2 * f1 * (f2 + f3) + 4096.0 / 9.0 * a3 * f1.powi(3);
    Ok((k2, k3))
}

/// `K_2` and `K_3` of a discretised continuum from the Fock-space path.
pub fn discrete_k2_k3(kernel: &DiscreteKernel) -> Result<(f64, f64), OracleError> {
    let model = build_discrete_model(kernel.clone(), Truncation::TotalNumber(2))?;
    let t = oracle_moments(&model, 3)?;
    Ok((t.central()[2], t.central()[3]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    /// Distance to the failure threshold; negative when failed.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub seed: u64,
    pub checks: Vec<OracleCheck>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OracleCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryConfig {
    pub seed: u64,
    pub models: usize,
    /// Highest moment compared between engine and oracle.
    pub max_moment: usize,
    /// Highest bound order checked.
    pub max_order: usize,
    /// Per-mode cap of the moment oracle; `2⌊max_moment/2⌋` keeps every moment exact.
    pub moment_cap: u8,
    /// Multiplies the engine's raw `M_3` before any check (fault injection).
    pub tamper_m3: Option<f64>,
    pub workers: Option<usize>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig { seed: 20_240_601, models: 20, max_moment: 5, max_order: 3, moment_cap: 4, tamper_m3: None, workers: None }
    }
}

pub const MOMENT_TOLERANCE: f64 = 1e-10;
pub const BOUND_TOLERANCE: f64 = 1e-8;
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

fn model_checks(cfg: &BatteryConfig, index: usize) -> Vec<OracleCheck> {
    let seed = cfg.seed.wrapping_add(index as u64);
    let n_modes = 2 + index % 2;
    let kernel = random_discrete_kernel(seed, n_modes);
    let tag = format!("model {index} (seed {seed}, {n_modes} modes)");
    let mut checks = Vec::new();
    let fail = |name: &str, detail: String| OracleCheck {
        name: format!("{tag}: {name}"),
        passed: false,
        margin: f64::NEG_INFINITY,
        detail: format!("{detail}\n{}", describe_kernel(&kernel)),
    };

    let engine = MomentEngine::new(EngineConfig { max_order: cfg.max_moment.max(2 * cfg.max_order - 1), ..EngineConfig::default() });
    let spec = build_discrete_hamiltonian(kernel.clone());
    let top = cfg.max_moment.max(2 * cfg.max_order - 1);
    let table = match engine.moment_table(&spec, top).map_err(OracleError::from).and_then(|t| match cfg.tamper_m3 {
        Some(f) => {
            let mut raw = t.raw().to_vec();
            raw[3] *= f;
            Ok(MomentTable::from_raw(raw)?)
        }
        None => Ok(t),
    }) {
        Ok(t) => t,
        Err(e) => return vec![fail("engine moments", e.to_string())],
    };
    let oracle = build_discrete_model(kernel.clone(), Truncation::PerMode(cfg.moment_cap))
        .and_then(|m| oracle_moments(&m, cfg.max_moment));
    match oracle {
        Ok(o) => {
            let mut worst: f64 = 0.0;
            let mut where_ = 0;
            for m in 1..=cfg.max_moment {
                let (a, b) = (table.raw()[m], o.raw()[m]);
                let rel = (a - b).abs() / b.abs().max(1e-300);
                if rel > worst || rel.is_nan() {
                    worst = rel;
                    where_ = m;
                }
            }
            checks.push(OracleCheck {
                name: format!("{tag}: moments M_1..M_{}", cfg.max_moment),
                passed: worst <= MOMENT_TOLERANCE,
                margin: MOMENT_TOLERANCE - worst,
                detail: format!("worst relative difference {worst:.3e} at M_{where_}"),
            });
        }
        Err(e) => checks.push(fail("oracle moments", e.to_string())),
    }

    let ground = match converged_ground_energy(&kernel, 6, 1e-11) {
        Ok((e, _)) => e,
        Err(e) => return [checks, vec![fail("ground energy", e.to_string())]].concat(),
    };
    let seq = bound_sequence(&table, cfg.max_order);
    let complete = seq.bounds.len() == cfg.max_order;
    let monotone_failure = matches!(seq.failure, Some(SolverError::NonMonotone { .. }));
    let detail = match &seq.failure {
        Some(e) => format!("solver stopped after order {}: {e}", seq.bounds.len()),
        None => format!("bounds {:?}", seq.values()),
    };
    checks.push(OracleCheck {
        name: format!("{tag}: bound orders 1..{} available", cfg.max_order),
        passed: complete,
        margin: if complete { 0.0 } else { -1.0 },
        detail: detail.clone(),
    });
    let margin = seq.bounds.iter().map(|b| b.bound - (ground - BOUND_TOLERANCE)).fold(f64::INFINITY, f64::min);
    checks.push(OracleCheck {
        name: format!("{tag}: bounds >= ground energy"),
        passed: margin >= 0.0,
        margin,
        detail: format!("ground {ground:.15e}; {detail}"),
    });
    let mut mono = if monotone_failure { -1.0 } else { f64::INFINITY };
    for w in seq.bounds.windows(2) {
        let slack = MONOTONE_TOLERANCE * w[0].bound.abs();
        mono = mono.min(w[0].bound + slack - w[1].bound);
    }
    checks.push(OracleCheck {
        name: format!("{tag}: bounds non-increasing"),
        passed: mono >= 0.0,
        margin: mono,
        detail,
    });
    checks
}

/// Runs moment agreement, the upper-bound property and monotonicity on seeded models.
pub fn run_battery(cfg: &BatteryConfig) -> BatteryReport {
    let work = || (0..cfg.models).into_par_iter().map(|i| model_checks(cfg, i)).collect::<Vec<_>>();
    let per_model = match cfg.workers.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()) {
        Some(pool) => pool.install(work),
        None => work(),
    };
    let mut checks: Vec<OracleCheck> = per_model.into_iter().flatten().collect();
    checks.push(zero_coupling_check());
    BatteryReport { seed: cfg.seed, checks }
}

/// With `V = f = 0` the vacuum is an eigenstate and every bound is the constant `P²`.
fn zero_coupling_check() -> OracleCheck {
    let mut kernel = random_discrete_kernel(7, 2);
    for m in &mut kernel.modes {
        m.coupling = 0.0;
        m.displacement = 0.0;
    }
    let constant = kernel.momentum.iter().map(|x| x * x).sum::<f64>();
    let spec = build_discrete_hamiltonian(kernel);
    let result = MomentEngine::default().moment_table(&spec, 5).map(|t| bound_sequence(&t, 3));
    match result {
        Ok(seq) => {
            let worst = seq.bounds.iter().map(|b| (b.bound - constant).abs()).fold(0.0, f64::max);
            let passed = !seq.bounds.is_empty() && worst == 0.0;
            OracleCheck {
                name: "zero coupling: bounds equal the constant term".into(),
                passed,
                margin: -worst,
                detail: format!(
                    "constant {constant:.17e}, bounds {:?}, stop: {}",
                    seq.values(),
                    seq.failure.map(|e| e.to_string()).unwrap_or_else(|| "none".into())
                ),
            }
        }
        Err(e) => OracleCheck {
            name: "zero coupling: bounds equal the constant term".into(),
            passed: false,
            margin: f64::NEG_INFINITY,
            detail: e.to_string(),
        },
    }
}
