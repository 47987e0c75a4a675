//! Acoustical polaron model in dimensionless units.
//!
//! Energies are measured in `2ms²`, lengths in `ħ/2ms` and wave vectors in
//! `2ms/ħ`. In these units the phonon dispersion is `ω_k = k`, the coupling is
//! `V_k = 2(4πα/V)^{1/2} k^{1/2}` and a continuum sum `Σ_k V_k² g(k⃗)` becomes
//! `(4α/π) ∫₀^{k0} dk ∫₋₁¹ dμ k³ g(k, μ)` with `μ` the cosine between `k⃗` and
//! the total momentum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::closed_form::{radial_integral, ClosedForm};
use crate::quadrature::{GaussLegendre, NeumaierSum};
use crate::solver::second_order_bound_closed;

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Largest relative misfit tolerated by [`effective_mass_estimate`].
pub const EFFECTIVE_MASS_FIT_TOLERANCE: f64 = 1e-4;

const RADIAL_NODES: usize = 256;
const ANGULAR_NODES: usize = 64;
const QUADRATURE_AGREEMENT: f64 = 1e-10;
const ETA_RESIDUAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("subsonic condition violated: 2P(1-eta) = {value} >= 1")]
    Subsonic { value: f64 },
    #[error("no self-consistent eta in the subsonic range for P = {momentum}")]
    NoSolution { momentum: f64 },
    #[error("eta iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("quadrature not converged: {coarse} vs {fine} with doubled nodes")]
    Quadrature { coarse: f64, fine: f64 },
    #[error("quadratic fit residual {residual:e} exceeds {tolerance:e}; grid too coarse or P too large")]
    FitResidual { residual: f64, tolerance: f64 },
    #[error("{0} is not a moving-polaron trial function")]
    NotMoving(FChoice),
}

/// How moments are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// Exact closed forms with rational coefficients, converted to floats at the end.
    Exact,
    #[default]
    Float,
}

impl FromStr for EvalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(EvalMode::Exact),
            "float" => Ok(EvalMode::Float),
            other => Err(format!("unknown mode '{other}' (expected exact|float)")),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Exact => "exact",
            EvalMode::Float => "float",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaronParams {
    pub alpha: f64,
    pub k0: f64,
    /// Magnitude of the total momentum; the model is isotropic.
    pub momentum: f64,
    pub mode: EvalMode,
}

impl PolaronParams {
    pub fn new(alpha: f64, k0: f64) -> Self {
        PolaronParams { alpha, k0, momentum: 0.0, mode: EvalMode::Float }
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ModelError::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(ModelError::InvalidParameter(format!("k0 must be positive, got {}", self.k0)));
        }
        if !(self.momentum.is_finite() && self.momentum >= 0.0) {
            return Err(ModelError::InvalidParameter(format!("P must be non-negative, got {}", self.momentum)));
        }
        Ok(())
    }

    /// Per-phonon weight `8α/π` that every integrated wave vector contributes to a moment.
    pub fn class_weight(&self) -> f64 {
        8.0 * self.alpha / PI
    }
}

/// Displacement amplitudes `f_k` of the coherent-state transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FChoice {
    Zero,
    /// `f_k = −V_k/(k+k²)` used at non-zero momentum.
    Simplest,
    /// `f_k = −V_k/(k+k²)`, the optimum at rest.
    OptimalRest,
    /// `f_k = −V_k/[k − 2k⃗·P⃗(1−η) + k²]`.
    OptimalMoving { eta: f64 },
    /// `f_k = −[V_k + 2η g k⃗·P⃗]/[k − 2k⃗·P⃗ + k²]` with `g = V_k/√k` the coupling amplitude.
    Compromise { eta: f64 },
}

impl FChoice {
    /// Spherically symmetric choices, for which every odd angular integral vanishes.
    pub fn is_spherical(&self) -> bool {
        matches!(self, FChoice::Zero | FChoice::Simplest | FChoice::OptimalRest)
    }

    /// `f_k / g` at wave number `k` and cosine `mu` to the momentum.
    fn reduced(&self, k: f64, mu: f64, momentum: f64) -> f64 {
        match *self {
            FChoice::Zero => 0.0,
            FChoice::Simplest | FChoice::OptimalRest => -k.sqrt() / (k + k * k),
            FChoice::OptimalMoving { eta } => {
                -k.sqrt() / (k + k * k - 2.0 * k * momentum * mu * (1.0 - eta))
            }
            FChoice::Compromise { eta } => {
                -(k.sqrt() + 2.0 * eta * k * momentum * mu) / (k + k * k - 2.0 * k * momentum * mu)
            }
        }
    }
}

impl fmt::Display for FChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FChoice::Zero => write!(f, "zero"),
            FChoice::Simplest => write!(f, "simplest"),
            FChoice::OptimalRest => write!(f, "optimal-rest"),
            FChoice::OptimalMoving { eta } => write!(f, "optimal-moving(eta={eta})"),
            FChoice::Compromise { eta } => write!(f, "compromise(eta={eta})"),
        }
    }
}

impl FromStr for FChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(FChoice::Zero),
            "simplest" => Ok(FChoice::Simplest),
            "optimal-rest" | "optimal" => Ok(FChoice::OptimalRest),
            other => Err(format!("unknown f choice '{other}' (expected zero|simplest|optimal-rest)")),
        }
    }
}

/// α from material constants in SI units: `α = D²m²/(8πρħ³s)`.
pub fn coupling_from_material(
    deformation_potential: f64,
    density: f64,
    sound_velocity: f64,
    band_mass: f64,
) -> Result<f64, ModelError> {
    for (name, v) in [
        ("deformation potential", deformation_potential),
        ("density", density),
        ("sound velocity", sound_velocity),
        ("band mass", band_mass),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ModelError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let d = deformation_potential;
    let m = band_mass;
    Ok(d * d * m * m / (8.0 * PI * density * HBAR.powi(3) * sound_velocity))
}

/// The energy unit `2ms²` in joules.
pub fn energy_unit_joules(band_mass: f64, sound_velocity: f64) -> f64 {
    2.0 * band_mass * sound_velocity * sound_velocity
}

/// Weak-coupling bound `−(4α/π)[2ln(1+k0) + k0² − 2k0]`.
pub fn e_weak(alpha: f64, k0: f64) -> f64 {
    // ln_1p keeps the small-k0 cancellation under control
    -(4.0 * alpha / PI) * (2.0 * k0.ln_1p() + k0 * k0 - 2.0 * k0)
}

/// Strong-coupling bound `−(8α/3π)k0³ + 2√2 (3α/5π)^{1/2} k0^{5/2}`.
pub fn e_strong(alpha: f64, k0: f64) -> f64 {
    -(8.0 * alpha / (3.0 * PI)) * k0.powi(3)
        + 2.0 * 2f64.sqrt() * (3.0 * alpha / (5.0 * PI)).sqrt() * k0.powf(2.5)
}

/// Advisory strong-coupling classification `α > 15π/(32 k0)`.
pub fn strong_coupling_region(alpha: f64, k0: f64) -> bool {
    alpha > 15.0 * PI / (32.0 * k0)
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// The three bracketed functions in their commonly quoted form.
pub fn f_functions_printed() -> [ClosedForm; 3] {
    let k = ClosedForm::k0_power;
    let l = ClosedForm::log;
    let w = ClosedForm::inverse_power;
    let one = ClosedForm::one;
    let f1 = -k(1) + k(2).scale(&rational(1, 2)) + l().scale(&rational(3, 1)) + w(1) - one();
    let f2 = k(1).scale(&rational(3, 1)) - k(2) + k(3).scale(&rational(1, 3))
        - l().scale(&rational(4, 1))
        - w(1)
        + one();
    let f3 = k(1).scale(&rational(-4, 1))
        + k(2).scale(&rational(3, 2))
        - k(3).scale(&rational(2, 3))
        + k(4).scale(&rational(1, 4))
        + l().scale(&rational(5, 1))
        + w(1)
        - one();
    [f1, f2, f3]
}

/// The same three functions obtained from the contraction integrals
/// `∫₀^{k0} k^{3,4,5}/(1+k)² dk`.
pub fn f_functions_derived() -> [ClosedForm; 3] {
    [5, 6, 7].map(|p| radial_integral(p, 2).expect("p >= q"))
}

/// Which closed forms feed the second-order bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FSource {
    /// `K₂ = (128α²/3π²)F₁²`, `K₃ = (256α²/3π²)F₁F₂ + (4096α³/9π³)F₃³` with the quoted F functions.
    Printed,
    /// `K₂ = (128α²/3π²)F₁²`, `K₃ = (256α²/3π²)F₁(F₂+F₃) + (4096α³/9π³)F₁³` with the
    /// contraction-integral F's; this is what the moment engine reproduces.
    Derived,
}

/// Second and third central moments of the transformed Hamiltonian in the phonon vacuum.
pub fn central_moments_closed(alpha: f64, k0: f64, source: FSource) -> (f64, f64) {
    let a2 = alpha * alpha / (PI * PI);
    let a3 = a2 * alpha / PI;
    match source {
        FSource::Printed => {
            let [f1, f2, f3] = ClosedForm::evaluate_many(f_functions_printed().iter(), k0)
                .try_into()
                .expect("three values");
            let k2 = 128.0 / 3.0 * a2 * f1 * f1;
            let k3 = 256.0 / 3.0 * a2 * f1 * f2 + 4096.0 / 9.0 * a3 * f3.powi(3);
            (k2, k3)
        }
        FSource::Derived => {
            let [f1, f2, f3] = ClosedForm::evaluate_many(f_functions_derived().iter(), k0)
                .try_into()
                .expect("three values");
            let k2 = 128.0 / 3.0 * a2 * f1 * f1;
            let k3 = 256.0 / 3.0 * a2 * f1 * (f2 + f3) + 4096.0 / 9.0 * a3 * f1.powi(3);
            (k2, k3)
        }
    }
}

fn second_order(alpha: f64, k0: f64, source: FSource) -> f64 {
    let ew = e_weak(alpha, k0);
    let (k2, k3) = central_moments_closed(alpha, k0, source);
    second_order_bound_closed(ew, k2, k3).map(|b| b.lower).unwrap_or(ew)
}

/// Second-order bound from the commonly quoted closed forms.
pub fn e_var2(alpha: f64, k0: f64) -> f64 {
    second_order(alpha, k0, FSource::Printed)
}

/// Second-order bound from the contraction-integral closed forms.
pub fn e_var2_derived(alpha: f64, k0: f64) -> f64 {
    second_order(alpha, k0, FSource::Derived)
}

/// Tensor-product Gauss rule over `k ∈ [0, k0]` and `μ ∈ [−1, 1]`.
struct MovingGrid {
    points: Vec<(f64, f64, f64)>,
}

impl MovingGrid {
    fn new(k0: f64, radial: &GaussLegendre, angular: &GaussLegendre) -> Self {
        let mut points = Vec::with_capacity(radial.len() * angular.len());
        for (k, wk) in radial.on_interval(0.0, k0) {
            for (mu, wm) in angular.on_interval(-1.0, 1.0) {
                points.push((k, mu, wk * wm));
            }
        }
        MovingGrid { points }
    }

    /// `(4α/π) ∫∫ k² g(k, μ)`, i.e. `Σ_k g² · (...)` in coupling units.
    fn integrate<F: Fn(f64, f64) -> f64>(&self, alpha: f64, g: F) -> f64 {
        let s: NeumaierSum = self.points.iter().map(|&(k, mu, w)| w * k * k * g(k, mu)).collect();
        4.0 * alpha / PI * s.value()
    }
}

fn rules() -> &'static [(GaussLegendre, GaussLegendre); 2] {
    static RULES: OnceLock<[(GaussLegendre, GaussLegendre); 2]> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            (GaussLegendre::new(RADIAL_NODES), GaussLegendre::new(ANGULAR_NODES)),
            (GaussLegendre::new(2 * RADIAL_NODES), GaussLegendre::new(2 * ANGULAR_NODES)),
        ]
    })
}

fn grids(k0: f64) -> (MovingGrid, MovingGrid) {
    let [(r, a), (r2, a2)] = rules();
    (MovingGrid::new(k0, r, a), MovingGrid::new(k0, r2, a2))
}

fn converged(coarse: f64, fine: f64) -> Result<f64, ModelError> {
    if (coarse - fine).abs() <= QUADRATURE_AGREEMENT * fine.abs().max(1.0) {
        Ok(fine)
    } else {
        Err(ModelError::Quadrature { coarse, fine })
    }
}

fn check_subsonic(params: &PolaronParams, choice: FChoice) -> Result<(), ModelError> {
    let value = match choice {
        FChoice::OptimalMoving { eta } => 2.0 * params.momentum * (1.0 - eta),
        FChoice::Compromise { .. } => 2.0 * params.momentum,
        _ => 0.0,
    };
    if value >= 1.0 {
        Err(ModelError::Subsonic { value })
    } else {
        Ok(())
    }
}

/// `Σ_k f_k² k⃗·P̂`, the phonon momentum carried by the displaced vacuum.
fn vacuum_momentum(grid: &MovingGrid, params: &PolaronParams, choice: FChoice) -> f64 {
    let p = params.momentum;
    grid.integrate(params.alpha, |k, mu| {
        let f = choice.reduced(k, mu, p);
        f * f * k * mu
    })
}

/// `ηP² − Σ_k f_k² k⃗·P⃗` for the moving trial functions.
fn eta_residual(grid: &MovingGrid, params: &PolaronParams, choice: FChoice) -> f64 {
    let eta = match choice {
        FChoice::OptimalMoving { eta } | FChoice::Compromise { eta } => eta,
        _ => 0.0,
    };
    let p = params.momentum;
    eta * p * p - p * vacuum_momentum(grid, params, choice)
}

fn with_eta(choice: FChoice, eta: f64) -> Result<FChoice, ModelError> {
    match choice {
        FChoice::OptimalMoving { .. } => Ok(FChoice::OptimalMoving { eta }),
        FChoice::Compromise { .. } => Ok(FChoice::Compromise { eta }),
        other => Err(ModelError::NotMoving(other)),
    }
}

/// Strategy for the scalar self-consistency equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMethod {
    Bisection,
    /// `η ← (1−λ)η + λ Σf²k⃗·P⃗ / P²`, started from the choice's own η.
    Damped { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSolution {
    pub eta: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `ηP² = Σ_k f_k² k⃗·P⃗` for [`FChoice::OptimalMoving`] or [`FChoice::Compromise`].
pub fn solve_eta(params: &PolaronParams, choice: FChoice) -> Result<EtaSolution, ModelError> {
    solve_eta_with(params, choice, EtaMethod::Bisection)
}

pub fn solve_eta_with(
    params: &PolaronParams,
    choice: FChoice,
    method: EtaMethod,
) -> Result<EtaSolution, ModelError> {
    params.validate()?;
    with_eta(choice, 0.0)?;
    let p = params.momentum;
    if p <= 0.0 {
        return Err(ModelError::InvalidParameter("the eta equation needs P > 0".into()));
    }
    let (grid, fine) = grids(params.k0);
    let residual = |eta: f64| -> Result<f64, ModelError> {
        let c = with_eta(choice, eta)?;
        check_subsonic(params, c)?;
        Ok(eta_residual(&grid, params, c))
    };

    let (eta, iterations) = match method {
        EtaMethod::Bisection => {
            let mut lo = match choice {
                FChoice::OptimalMoving { .. } => (1.0 - 0.5 / p).max(0.0),
                _ => 0.0,
            };
            if lo > 0.0 {
                lo += 1e-9;
            }
            let mut hi = 1.0;
            let r_lo = residual(lo)?;
            let r_hi = residual(hi)?;
            if r_lo > 0.0 || r_hi < 0.0 {
                return Err(ModelError::NoSolution { momentum: p });
            }
            let mut it = 0;
            while hi - lo > 4.0 * f64::EPSILON && it < 200 {
                let mid = 0.5 * (lo + hi);
                if residual(mid)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                it += 1;
            }
            (0.5 * (lo + hi), it)
        }
        EtaMethod::Damped { factor } => {
            let mut eta = match choice {
                FChoice::OptimalMoving { eta } | FChoice::Compromise { eta } => eta,
                _ => 0.0,
            };
            let mut it = 0;
            loop {
                let r = residual(eta)?;
                if r.abs() < 0.01 * ETA_RESIDUAL_TOLERANCE {
                    break;
                }
                if it >= 10_000 {
                    return Err(ModelError::NoConvergence { iterations: it, residual: r });
                }
                // ηP² − r = Σf²k⃗·P⃗
                let target = (eta * p * p - r) / (p * p);
                eta = (1.0 - factor) * eta + factor * target;
                it += 1;
            }
            (eta, it)
        }
    };

    let solved = with_eta(choice, eta)?;
    let r = converged(eta_residual(&grid, params, solved), eta_residual(&fine, params, solved))?;
    if r.abs() >= ETA_RESIDUAL_TOLERANCE {
        return Err(ModelError::NoConvergence { iterations, residual: r });
    }
    Ok(EtaSolution { eta, residual: r, iterations })
}

/// Closed solution of the compromise self-consistency condition, which is a quadratic
/// `ηP² = a + bη + cη²` once the η-independent integrals are done.
pub fn compromise_eta_analytic(params: &PolaronParams) -> Result<f64, ModelError> {
    params.validate()?;
    let p = params.momentum;
    if p <= 0.0 {
        return Err(ModelError::InvalidParameter("the eta equation needs P > 0".into()));
    }
    check_subsonic(params, FChoice::Compromise { eta: 0.0 })?;
    let (grid, _) = grids(params.k0);
    let denom = |k: f64, mu: f64| k + k * k - 2.0 * k * p * mu;
    let a = grid.integrate(params.alpha, |k, mu| {
        let d = denom(k, mu);
        k * p * mu * k / (d * d)
    });
    let b = grid.integrate(params.alpha, |k, mu| {
        let d = denom(k, mu);
        k * p * mu * 4.0 * k.powf(1.5) * p * mu / (d * d)
    });
    let c = grid.integrate(params.alpha, |k, mu| {
        let d = denom(k, mu);
        k * p * mu * 4.0 * k * k * p * p * mu * mu / (d * d)
    });
    // c η² + (b − P²) η + a = 0
    let bb = b - p * p;
    let roots = if c.abs() < 1e-300 {
        vec![-a / bb]
    } else {
        let disc = bb * bb - 4.0 * c * a;
        if disc < 0.0 {
            return Err(ModelError::NoSolution { momentum: p });
        }
        let q = -0.5 * (bb + bb.signum() * disc.sqrt());
        vec![q / c, a / q]
    };
    roots
        .into_iter()
        .filter(|r| (0.0..1.0).contains(r))
        .min_by(|x, y| x.total_cmp(y))
        .ok_or(ModelError::NoSolution { momentum: p })
}

/// Upper bound `P²(1−η)² − Σ_k V_k² (k+k²−4k⃗·P⃗(1−η)) / [k−2k⃗·P⃗(1−η)+k²]²`.
pub fn bound_moving(params: &PolaronParams, eta: f64) -> Result<f64, ModelError> {
    params.validate()?;
    let p = params.momentum;
    check_subsonic(params, FChoice::OptimalMoving { eta })?;
    let s = 1.0 - eta;
    let eval = |grid: &MovingGrid| {
        let sum = grid.integrate(params.alpha, |k, mu| {
            let d = k + k * k - 2.0 * k * p * mu * s;
            k * (k + k * k - 4.0 * k * p * mu * s) / (d * d)
        });
        p * p * s * s - sum
    };
    let (grid, fine) = grids(params.k0);
    converged(eval(&grid), eval(&fine))
}

/// `⟨0|𝓗(f)|0⟩ = P² + 2Σ V_k f_k + Σ (k+k²−2k⃗·P⃗) f_k² + (Σ f_k² k⃗)²` for any choice.
pub fn vacuum_energy_moving(params: &PolaronParams, choice: FChoice) -> Result<f64, ModelError> {
    params.validate()?;
    check_subsonic(params, choice)?;
    let p = params.momentum;
    let eval = |grid: &MovingGrid| {
        let linear_and_quadratic = grid.integrate(params.alpha, |k, mu| {
            let f = choice.reduced(k, mu, p);
            2.0 * k.sqrt() * f + (k + k * k - 2.0 * k * p * mu) * f * f
        });
        let carried = vacuum_momentum(grid, params, choice);
        p * p + linear_and_quadratic + carried * carried
    };
    let (grid, fine) = grids(params.k0);
    converged(eval(&grid), eval(&fine))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMassFit {
    pub m_eff: f64,
    pub rest_energy: f64,
    /// `(P, η, E(P))` per grid point.
    pub points: Vec<(f64, f64, f64)>,
    /// `max |E(P) − E(0) − P²/(2m_eff)| / |E(P)|` over the grid.
    pub max_relative_residual: f64,
}

/// Least-squares fit of `E(P) ≈ E(0) + P²/(2m_eff)` on the moving-polaron bound.
pub fn effective_mass_estimate(alpha: f64, k0: f64, p_grid: &[f64]) -> Result<EffectiveMassFit, ModelError> {
    let grid: Vec<f64> = p_grid.iter().copied().filter(|p| *p > 0.0).collect();
    if grid.len() < 3 {
        return Err(ModelError::InvalidParameter(
            "the effective mass needs at least three positive momenta".into(),
        ));
    }
    let rest = PolaronParams::new(alpha, k0);
    let rest_energy = bound_moving(&rest, 0.0)?;
    let mut points = Vec::with_capacity(grid.len());
    for &p in &grid {
        let params = rest.with_momentum(p);
        let sol = solve_eta(&params, FChoice::OptimalMoving { eta: 0.0 })?;
        points.push((p, sol.eta, bound_moving(&params, sol.eta)?));
    }
    let num: f64 = points.iter().map(|(p, _, e)| (e - rest_energy) * p * p).sum();
    let den: f64 = points.iter().map(|(p, _, _)| p.powi(4)).sum();
    let curvature = num / den;
    let max_relative_residual = points
        .iter()
        .map(|(p, _, e)| (e - rest_energy - curvature * p * p).abs() / e.abs())
        .fold(0.0, f64::max);
    if max_relative_residual >= EFFECTIVE_MASS_FIT_TOLERANCE {
        return Err(ModelError::FitResidual {
            residual: max_relative_residual,
            tolerance: EFFECTIVE_MASS_FIT_TOLERANCE,
        });
    }
    Ok(EffectiveMassFit { m_eff: 0.5 / curvature, rest_energy, points, max_relative_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::AdaptiveIntegrator;

    fn quad(f: impl Fn(f64) -> f64, k0: f64) -> f64 {
        AdaptiveIntegrator::new(1e-14).integrate(0.0, k0, f).value
    }

    #[test]
    fn weak_bound_values() {
        let v = e_weak(1.0, 1.0);
        assert!((v + 4.0 / PI * (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((v - -0.491_845_256_486_050).abs() < 1e-12);
        assert!((e_weak(2.0, 0.7) - 2.0 * e_weak(1.0, 0.7)).abs() < 1e-15);
        assert!(e_weak(1.0, 1e-9).abs() < 1e-20);
        // direct quadrature of −Σ V_k²/(k+k²)
        let direct = -8.0 / PI * quad(|k| k * k / (1.0 + k), 1.0);
        assert!((v - direct).abs() < 1e-13);
    }

    #[test]
    fn strong_bound_two_ways() {
        let a: f64 = 1.0;
        let k0: f64 = 1.0;
        let direct = -8.0 / (3.0 * PI) + 2.0 * 2f64.sqrt() * (3.0 / (5.0 * PI)).sqrt();
        // second path: factor √α k0^{5/2} out
        let factored = a.sqrt() * k0.powf(2.5)
            * (-(8.0 / (3.0 * PI)) * a.sqrt() * k0.sqrt() + (24.0 / (5.0 * PI)).sqrt());
        assert!((e_strong(a, k0) - direct).abs() < 1e-15);
        assert!((e_strong(a, k0) - factored).abs() < 1e-14);
        assert!(e_strong(1.0, 1e-8).abs() < 1e-18);
        assert!(e_strong(1e4, 1.0) < 0.0);
        let ratio = e_strong(2e6, 1.0) / e_strong(1e6, 1.0);
        assert!((ratio - 2.0).abs() < 1e-2);
    }

    #[test]
    fn material_coupling_scaling() {
        let (d, rho, s, m) = (1.6e-18, 5.3e3, 5.0e3, 0.07 * 9.109e-31);
        let a = coupling_from_material(d, rho, s, m).unwrap();
        let a2 = coupling_from_material(2.0 * d, rho, s, m).unwrap();
        let a3 = coupling_from_material(d, 2.0 * rho, s, m).unwrap();
        assert!((a2 / a - 4.0).abs() < 1e-12);
        assert!((a3 / a - 0.5).abs() < 1e-12);
        let identity = a * 8.0 * PI * rho * HBAR.powi(3) * s / (d * d * m * m);
        assert!((identity - 1.0).abs() < 1e-14);
        assert!(coupling_from_material(0.0, rho, s, m).is_err());
    }

    #[test]
    fn printed_f_functions() {
        let [f1, f2, f3] = f_functions_printed();
        let ln2 = 2f64.ln();
        assert!((f1.evaluate(1.0) - (3.0 * ln2 - 1.0)).abs() < 1e-15);
        assert!((f3.evaluate(1.0) - (-4.0 + 1.5 - 2.0 / 3.0 + 0.25 + 5.0 * ln2 + 0.5 - 1.0)).abs() < 1e-15);
        assert!((f3.evaluate(1.0) - 0.049_069_236).abs() < 1e-8);
        assert!(f2.limit_at_zero() == BigRational::from_integer(0.into()));
    }

    #[test]
    fn printed_and_derived_f1_differ_by_k0() {
        let [p1, p2, p3] = f_functions_printed();
        let [d1, d2, d3] = f_functions_derived();
        assert_eq!(p1 - d1, ClosedForm::k0_power(1));
        assert_eq!(p2, d2);
        assert_eq!(p3, d3);
    }

    #[test]
    fn second_order_below_weak() {
        for &k0 in &[0.5, 1.0, 2.0, 3.0] {
            for &a in &[0.1, 1.0, 5.0] {
                assert!(e_var2(a, k0) <= e_weak(a, k0));
                assert!(e_var2_derived(a, k0) <= e_weak(a, k0));
            }
        }
        assert!(e_var2(1.0, 0.5) < e_strong(1.0, 0.5));
    }

    #[test]
    fn strong_coupling_threshold() {
        assert!(strong_coupling_region(10.0, 1.0));
        assert!(!strong_coupling_region(0.5, 1.0));
        assert!(!strong_coupling_region(15.0 * PI / 32.0, 1.0));
    }

    #[test]
    fn rest_limit_of_moving_bound() {
        for &(a, k0) in &[(1.0, 1.0), (0.3, 0.5), (2.0, 3.0)] {
            let params = PolaronParams::new(a, k0);
            let b = bound_moving(&params, 0.0).unwrap();
            assert!((b - e_weak(a, k0)).abs() < 1e-12 * e_weak(a, k0).abs());
        }
    }

    fn dressing(alpha: f64, k0: f64) -> f64 {
        32.0 * alpha / (3.0 * PI) * quad(|k| k * k / (1.0 + k).powi(3), k0)
    }

    #[test]
    fn eta_small_momentum_limit() {
        // linearising the condition in P gives η = A/(1+A)
        let a = dressing(1.0, 1.0);
        let params = PolaronParams::new(1.0, 1.0).with_momentum(1e-4);
        let sol = solve_eta(&params, FChoice::OptimalMoving { eta: 0.0 }).unwrap();
        assert!((sol.eta - a / (1.0 + a)).abs() < 1e-6);
    }

    #[test]
    fn eta_in_unit_interval() {
        let params = PolaronParams::new(1.0, 1.0).with_momentum(0.1);
        let sol = solve_eta(&params, FChoice::OptimalMoving { eta: 0.0 }).unwrap();
        assert!((0.0..1.0).contains(&sol.eta));
        assert!(sol.residual.abs() < 1e-12);
    }

    #[test]
    fn damped_iteration_matches_bisection() {
        let params = PolaronParams::new(1.0, 1.0).with_momentum(0.2);
        let choice = FChoice::OptimalMoving { eta: 0.0 };
        let b = solve_eta(&params, choice).unwrap();
        let d1 = solve_eta_with(&params, choice, EtaMethod::Damped { factor: 0.5 }).unwrap();
        let d2 = solve_eta_with(&params, choice, EtaMethod::Damped { factor: 0.25 }).unwrap();
        assert!((b.eta - d1.eta).abs() < 1e-11);
        assert!((d1.eta - d2.eta).abs() < 1e-11);
    }

    #[test]
    fn compromise_two_paths() {
        for &p in &[0.05, 0.1, 0.2] {
            let params = PolaronParams::new(1.0, 1.0).with_momentum(p);
            let analytic = compromise_eta_analytic(&params).unwrap();
            let iterative = solve_eta(&params, FChoice::Compromise { eta: 0.0 }).unwrap();
            assert!((analytic - iterative.eta).abs() < 1e-10, "P={p}: {analytic} vs {}", iterative.eta);
            assert!((0.0..1.0).contains(&analytic));
        }
    }

    #[test]
    fn optimal_bound_matches_vacuum_energy() {
        let params = PolaronParams::new(1.0, 1.0).with_momentum(0.15);
        let sol = solve_eta(&params, FChoice::OptimalMoving { eta: 0.0 }).unwrap();
        let b = bound_moving(&params, sol.eta).unwrap();
        let e = vacuum_energy_moving(&params, FChoice::OptimalMoving { eta: sol.eta }).unwrap();
        assert!((b - e).abs() < 1e-11);
    }

    #[test]
    fn optimal_dominates_other_choices() {
        let params = PolaronParams::new(1.0, 1.0).with_momentum(0.2);
        let sol = solve_eta(&params, FChoice::OptimalMoving { eta: 0.0 }).unwrap();
        let b = bound_moving(&params, sol.eta).unwrap();
        let eta_c = compromise_eta_analytic(&params).unwrap();
        for choice in [FChoice::Zero, FChoice::Simplest, FChoice::Compromise { eta: eta_c }] {
            let e = vacuum_energy_moving(&params, choice).unwrap();
            assert!(b <= e, "{choice}: {b} > {e}");
        }
        assert!((vacuum_energy_moving(&params, FChoice::Zero).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn effective_mass_from_curvature() {
        let fit = effective_mass_estimate(1.0, 1.0, &[0.05, 0.1, 0.2]).unwrap();
        let expected = 0.5 * (1.0 + dressing(1.0, 1.0));
        assert!(fit.m_eff > 0.5);
        assert!((fit.m_eff - expected).abs() < 0.01 * expected);
        assert!(fit.max_relative_residual < EFFECTIVE_MASS_FIT_TOLERANCE);
        let weak = effective_mass_estimate(1e-6, 1.0, &[0.05, 0.1, 0.2]).unwrap();
        assert!((weak.m_eff - 0.5).abs() < 1e-5);
    }

    #[test]
    fn subsonic_guard() {
        let params = PolaronParams::new(1.0, 1.0).with_momentum(0.6);
        assert!(matches!(bound_moving(&params, 0.0), Err(ModelError::Subsonic { .. })));
    }
}
