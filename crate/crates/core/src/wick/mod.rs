//! Symbolic Wick contraction of the transformed Hamiltonian in the phonon vacuum.
//!
//! After the coherent-state shift `a_k → a_k + f_k` the Hamiltonian is a sum of
//! normal-ordered [`OperatorMonomial`]s. Each monomial sums over one to three
//! wave-vector labels; its labels carry powers of `V_k`, `f_k` and `|k|`, and it
//! may contain dot products between unit vectors `k̂` and `P̂`. Vacuum moments are
//! sums over full contractions of products of such monomials.
//!
//! Two kernels are supported. The continuum kernel (`V_k`, `f_k` spherically
//! symmetric, integration over `0 ≤ k ≤ k0`) reduces every term to a product of
//! radial integrals `∫ k^p/(k+k²)^q` and an angular average. The discrete kernel
//! holds a finite set of modes with explicit vectors and amplitudes and is what
//! the Fock-space oracle diagonalises.

mod contract;
mod engine;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::closed_form::ClosedFormError;
use crate::moments::MomentTableError;
use crate::polaron::{EvalMode, FChoice, ModelError, PolaronParams};

pub use contract::{enumerate_contractions, Contractions, TermShape};
pub use engine::{dump_terms, table_from_expansions, EngineConfig, MomentEngine, MomentExpansion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("moment order {order} exceeds the configured maximum {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("a term of M_{order} scales as V^{exponent}/2 with the volume; the operator algebra is inconsistent")]
    VolumeMismatch { order: usize, exponent: i32 },
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("Hamiltonian is not Hermitian: {0}")]
    NotHermitian(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Table(#[from] MomentTableError),
    #[error(transparent)]
    Radial(#[from] ClosedFormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LadderKind {
    Create,
    Annihilate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LadderOp {
    pub kind: LadderKind,
    pub label: u8,
}

impl LadderOp {
    pub fn create(label: u8) -> Self {
        LadderOp { kind: LadderKind::Create, label }
    }

    pub fn annihilate(label: u8) -> Self {
        LadderOp { kind: LadderKind::Annihilate, label }
    }
}

/// One side of a dot product between unit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DotArg {
    Label(u8),
    Momentum,
}

/// Powers of the label-dependent factors: `V_k^coupling f_k^displacement L_k^linear |k|^k_pow`
/// where `L_k = (k+k²)f_k + V_k` is the combined linear amplitude.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelWeight {
    pub coupling: u8,
    pub displacement: u8,
    pub linear: u8,
    pub k_pow: u8,
}

impl LabelWeight {
    pub const fn new(coupling: u8, displacement: u8, linear: u8, k_pow: u8) -> Self {
        LabelWeight { coupling, displacement, linear, k_pow }
    }

    pub fn combine(self, o: LabelWeight) -> Self {
        LabelWeight {
            coupling: self.coupling + o.coupling,
            displacement: self.displacement + o.displacement,
            linear: self.linear + o.linear,
            k_pow: self.k_pow + o.k_pow,
        }
    }

    /// Number of volume-carrying amplitudes (`V`, `f` or `L`).
    pub fn amplitude_count(&self) -> u8 {
        self.coupling + self.displacement + self.linear
    }
}

/// Which piece of the Hamiltonian a monomial comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Number,
    RecoilPair,
    RecoilSelf,
    Linear,
    PairCreate,
    PairAnnihilate,
    Hop,
    CubicCreate,
    CubicAnnihilate,
    RecoilShift,
    LinearRecoilShift,
    MomentumNumber,
    MomentumLinear,
    Constant,
}

/// `coeff · Σ_labels ∏ weights · ∏ dots · P^p_pow · (ladder operators)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorMonomial {
    pub coeff: i64,
    /// Creators first, then annihilators.
    pub ladder: Vec<LadderOp>,
    pub labels: Vec<LabelWeight>,
    pub dots: Vec<(DotArg, DotArg)>,
    pub p_pow: u8,
    pub family: Family,
}

impl OperatorMonomial {
    fn new(family: Family, coeff: i64, ladder: Vec<LadderOp>, labels: Vec<LabelWeight>) -> Self {
        OperatorMonomial { coeff, ladder, labels, dots: Vec::new(), p_pow: 0, family }
    }

    fn with_dot(mut self, a: DotArg, b: DotArg) -> Self {
        self.dots.push((a, b));
        if a == DotArg::Momentum || b == DotArg::Momentum {
            self.p_pow += 1;
        }
        self
    }

    fn with_p_pow(mut self, p: u8) -> Self {
        self.p_pow += p;
        self
    }

    pub fn creators(&self) -> impl Iterator<Item = u8> + '_ {
        self.ladder.iter().filter(|o| o.kind == LadderKind::Create).map(|o| o.label)
    }

    pub fn annihilators(&self) -> impl Iterator<Item = u8> + '_ {
        self.ladder.iter().filter(|o| o.kind == LadderKind::Annihilate).map(|o| o.label)
    }

    /// Twice the power of the volume this monomial scales with once each label sum
    /// becomes `V/(2π)³ ∫d³k` and each amplitude carries `V^{-1/2}`.
    pub fn volume_half_exponent(&self) -> i32 {
        2 * self.labels.len() as i32 - self.labels.iter().map(|w| w.amplitude_count() as i32).sum::<i32>()
    }

    pub fn is_constant(&self) -> bool {
        self.ladder.is_empty()
    }

    /// Label-permutation-invariant key of the monomial or of its adjoint.
    fn canonical_key(&self, adjoint: bool) -> CanonicalKey {
        let n = self.labels.len();
        let mut best: Option<CanonicalKey> = None;
        for perm in permutations(n) {
            let map = |l: u8| perm[l as usize] as u8;
            let (mut cre, mut ann): (Vec<u8>, Vec<u8>) =
                (self.creators().map(map).collect(), self.annihilators().map(map).collect());
            if adjoint {
                std::mem::swap(&mut cre, &mut ann);
            }
            cre.sort_unstable();
            ann.sort_unstable();
            let mut labels = vec![LabelWeight::default(); n];
            for (i, w) in self.labels.iter().enumerate() {
                labels[perm[i]] = *w;
            }
            let remap = |a: DotArg| match a {
                DotArg::Label(l) => DotArg::Label(map(l)),
                DotArg::Momentum => DotArg::Momentum,
            };
            let mut dots: Vec<(DotArg, DotArg)> = self
                .dots
                .iter()
                .map(|&(a, b)| {
                    let (a, b) = (remap(a), remap(b));
                    (a.min(b), a.max(b))
                })
                .collect();
            dots.sort_unstable();
            let key = (self.coeff, cre, ann, labels, dots, self.p_pow);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
        best.expect("at least the identity permutation")
    }
}

type CanonicalKey = (i64, Vec<u8>, Vec<u8>, Vec<LabelWeight>, Vec<(DotArg, DotArg)>, u8);

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteMode {
    /// Unit vector along `k⃗`.
    pub direction: [f64; 3],
    pub magnitude: f64,
    pub coupling: f64,
    pub displacement: f64,
}

impl DiscreteMode {
    pub fn new(direction: [f64; 3], magnitude: f64, coupling: f64, displacement: f64) -> Self {
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        DiscreteMode { direction: direction.map(|x| x / n), magnitude, coupling, displacement }
    }

    pub fn wave_vector(&self) -> [f64; 3] {
        self.direction.map(|x| x * self.magnitude)
    }

    /// `(k+k²)f + V`.
    pub fn linear(&self) -> f64 {
        (self.magnitude + self.magnitude * self.magnitude) * self.displacement + self.coupling
    }

    pub fn weight(&self, w: &LabelWeight) -> f64 {
        self.coupling.powi(w.coupling as i32)
            * self.displacement.powi(w.displacement as i32)
            * self.linear().powi(w.linear as i32)
            * self.magnitude.powi(w.k_pow as i32)
    }
}

/// A finite set of phonon modes with explicit amplitudes and a total momentum vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub modes: Vec<DiscreteMode>,
    pub momentum: [f64; 3],
}

impl DiscreteKernel {
    pub fn momentum_magnitude(&self) -> f64 {
        self.momentum.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn momentum_direction(&self) -> [f64; 3] {
        let p = self.momentum_magnitude();
        if p == 0.0 {
            [0.0; 3]
        } else {
            self.momentum.map(|x| x / p)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSet {
    Continuum { params: PolaronParams, choice: FChoice },
    Discrete(DiscreteKernel),
}

/// The transformed Hamiltonian split into its c-number part and its ladder part.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub ladder: Vec<OperatorMonomial>,
    pub constant: Vec<OperatorMonomial>,
    pub kernel: KernelSet,
}

#[derive(Debug, Clone, Copy)]
struct Families {
    displacement: bool,
    linear: LinearForm,
    shift_terms: bool,
    momentum: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LinearForm {
    None,
    Coupling,
    Combined,
}

const K1: LabelWeight = LabelWeight::new(0, 0, 0, 1);
const FK1: LabelWeight = LabelWeight::new(0, 1, 0, 1);
const FFK1: LabelWeight = LabelWeight::new(0, 2, 0, 1);

fn families(opts: Families) -> (Vec<OperatorMonomial>, Vec<OperatorMonomial>) {
    use DotArg::{Label, Momentum};
    use Family::*;
    let c = LadderOp::create;
    let a = LadderOp::annihilate;
    let mut ladder = vec![
        OperatorMonomial::new(Number, 1, vec![c(0), a(0)], vec![K1]),
        OperatorMonomial::new(RecoilPair, 1, vec![c(0), c(1), a(0), a(1)], vec![K1, K1])
            .with_dot(Label(0), Label(1)),
        OperatorMonomial::new(RecoilSelf, 1, vec![c(0), a(0)], vec![LabelWeight::new(0, 0, 0, 2)]),
    ];
    let mut constant = Vec::new();
    let lin = match opts.linear {
        LinearForm::None => None,
        LinearForm::Coupling => Some(LabelWeight::new(1, 0, 0, 0)),
        LinearForm::Combined => Some(LabelWeight::new(0, 0, 1, 0)),
    };
    if let Some(w) = lin {
        ladder.push(OperatorMonomial::new(Linear, 1, vec![c(0)], vec![w]));
        ladder.push(OperatorMonomial::new(Linear, 1, vec![a(0)], vec![w]));
    }
    if opts.displacement {
        ladder.extend([
            OperatorMonomial::new(PairCreate, 1, vec![c(0), c(1)], vec![FK1, FK1]).with_dot(Label(0), Label(1)),
            OperatorMonomial::new(PairAnnihilate, 1, vec![a(0), a(1)], vec![FK1, FK1])
                .with_dot(Label(0), Label(1)),
            OperatorMonomial::new(Hop, 2, vec![c(0), a(1)], vec![FK1, FK1]).with_dot(Label(0), Label(1)),
            OperatorMonomial::new(CubicCreate, 2, vec![c(0), c(1), a(0)], vec![K1, FK1])
                .with_dot(Label(0), Label(1)),
            OperatorMonomial::new(CubicAnnihilate, 2, vec![c(0), a(0), a(1)], vec![K1, FK1])
                .with_dot(Label(0), Label(1)),
        ]);
        constant.extend([
            OperatorMonomial::new(Constant, 2, vec![], vec![LabelWeight::new(1, 1, 0, 0)]),
            OperatorMonomial::new(Constant, 1, vec![], vec![FFK1]),
            OperatorMonomial::new(Constant, 1, vec![], vec![LabelWeight::new(0, 2, 0, 2)]),
        ]);
        if opts.shift_terms {
            ladder.extend([
                OperatorMonomial::new(RecoilShift, 2, vec![c(0), a(0)], vec![K1, FFK1]).with_dot(Label(0), Label(1)),
                OperatorMonomial::new(LinearRecoilShift, 2, vec![c(0)], vec![FK1, FFK1])
                    .with_dot(Label(0), Label(1)),
                OperatorMonomial::new(LinearRecoilShift, 2, vec![a(0)], vec![FK1, FFK1])
                    .with_dot(Label(0), Label(1)),
            ]);
            constant.push(
                OperatorMonomial::new(Constant, 1, vec![], vec![FFK1, FFK1]).with_dot(Label(0), Label(1)),
            );
        }
    }
    if opts.momentum {
        ladder.push(OperatorMonomial::new(MomentumNumber, -2, vec![c(0), a(0)], vec![K1]).with_dot(Momentum, Label(0)));
        if opts.displacement {
            ladder.push(OperatorMonomial::new(MomentumLinear, -2, vec![c(0)], vec![FK1]).with_dot(Momentum, Label(0)));
            ladder.push(OperatorMonomial::new(MomentumLinear, -2, vec![a(0)], vec![FK1]).with_dot(Momentum, Label(0)));
            if opts.shift_terms {
                constant.push(OperatorMonomial::new(Constant, -2, vec![], vec![FFK1]).with_dot(Momentum, Label(0)));
            }
        }
        constant.push(OperatorMonomial::new(Constant, 1, vec![], vec![]).with_p_pow(2));
    }
    (ladder, constant)
}

/// Transformed Hamiltonian for the isotropic continuum model.
///
/// For the spherically symmetric choices every term containing `Σ_k f_k² k⃗`
/// vanishes identically and is omitted; with the optimal rest amplitudes the
/// linear term `[(k+k²)f_k + V_k](a†+a)` vanishes as well.
pub fn build_hamiltonian(params: &PolaronParams, f: FChoice) -> Result<HamiltonianSpec, EngineError> {
    params.validate()?;
    let momentum = params.momentum > 0.0;
    let opts = match f {
        FChoice::Zero => Families { displacement: false, linear: LinearForm::Coupling, shift_terms: false, momentum },
        FChoice::Simplest | FChoice::OptimalRest => {
            Families { displacement: true, linear: LinearForm::None, shift_terms: false, momentum }
        }
        other => {
            return Err(EngineError::UnsupportedKernel(format!(
                "{other} is anisotropic; the continuum engine handles spherically symmetric f only"
            )))
        }
    };
    let (ladder, constant) = families(opts);
    Ok(HamiltonianSpec { ladder, constant, kernel: KernelSet::Continuum { params: *params, choice: f } })
}

/// Transformed Hamiltonian over an explicit finite set of modes, with every term kept.
pub fn build_discrete_hamiltonian(kernel: DiscreteKernel) -> HamiltonianSpec {
    let momentum = kernel.momentum_magnitude() > 0.0;
    let (ladder, constant) = families(Families {
        displacement: true,
        linear: LinearForm::Combined,
        shift_terms: true,
        momentum,
    });
    HamiltonianSpec { ladder, constant, kernel: KernelSet::Discrete(kernel) }
}

impl HamiltonianSpec {
    pub fn mode(&self) -> EvalMode {
        match &self.kernel {
            KernelSet::Continuum { params, .. } => params.mode,
            KernelSet::Discrete(_) => EvalMode::Float,
        }
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        if let KernelSet::Continuum { params, .. } = &mut self.kernel {
            params.mode = mode;
        }
        self
    }

    /// Stable within a process; used as the engine's cache key.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        format!("{self:?}").hash(&mut h);
        h.finish()
    }

    /// Hash of the operator structure alone, shared by every kernel with the same families.
    pub fn ladder_fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        format!("{:?}", self.ladder).hash(&mut h);
        h.finish()
    }

    /// Checks that the ladder part equals its adjoint up to relabelling of the sums.
    pub fn check_hermitian(&self) -> Result<(), EngineError> {
        let mut direct: Vec<CanonicalKey> = self.ladder.iter().map(|m| m.canonical_key(false)).collect();
        let mut adjoint: Vec<CanonicalKey> = self.ladder.iter().map(|m| m.canonical_key(true)).collect();
        direct.sort();
        adjoint.sort();
        if direct == adjoint {
            return Ok(());
        }
        let missing = self
            .ladder
            .iter()
            .find(|m| !direct.contains(&m.canonical_key(true)))
            .map(|m| format!("{:?} has no adjoint partner", m.family))
            .unwrap_or_else(|| "multiplicities differ".into());
        Err(EngineError::NotHermitian(missing))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel() -> DiscreteKernel {
        DiscreteKernel {
            modes: vec![DiscreteMode::new([1.0, 0.0, 0.0], 0.5, 0.3, -0.2)],
            momentum: [0.0, 0.1, 0.0],
        }
    }

    #[test]
    fn hamiltonians_are_hermitian() {
        let p = PolaronParams::new(1.0, 1.0);
        for f in [FChoice::Zero, FChoice::OptimalRest] {
            build_hamiltonian(&p, f).unwrap().check_hermitian().unwrap();
            build_hamiltonian(&p.with_momentum(0.1), f).unwrap().check_hermitian().unwrap();
        }
        build_discrete_hamiltonian(kernel()).check_hermitian().unwrap();
    }

    #[test]
    fn dropping_an_adjoint_breaks_hermiticity() {
        let mut h = build_discrete_hamiltonian(kernel());
        let i = h.ladder.iter().position(|m| m.family == Family::CubicAnnihilate).unwrap();
        h.ladder.remove(i);
        assert!(matches!(h.check_hermitian(), Err(EngineError::NotHermitian(_))));
    }

    #[test]
    fn volume_exponents() {
        let h = build_discrete_hamiltonian(kernel());
        let get = |f: Family| h.ladder.iter().find(|m| m.family == f).unwrap().volume_half_exponent();
        assert_eq!(get(Family::Number), 2);
        assert_eq!(get(Family::RecoilPair), 4);
        assert_eq!(get(Family::PairCreate), 2);
        assert_eq!(get(Family::LinearRecoilShift), 1);
    }

    #[test]
    fn continuum_rejects_anisotropic_choices() {
        let p = PolaronParams::new(1.0, 1.0).with_momentum(0.1);
        assert!(matches!(
            build_hamiltonian(&p, FChoice::OptimalMoving { eta: 0.2 }),
            Err(EngineError::UnsupportedKernel(_))
        ));
    }

    #[test]
    fn optimal_rest_has_no_linear_term() {
        let h = build_hamiltonian(&PolaronParams::new(1.0, 1.0), FChoice::OptimalRest).unwrap();
        assert!(h.ladder.iter().all(|m| m.family != Family::Linear));
        assert_eq!(h.constant.len(), 3);
        let z = build_hamiltonian(&PolaronParams::new(1.0, 1.0), FChoice::Zero).unwrap();
        assert_eq!(z.ladder.iter().filter(|m| m.family == Family::Linear).count(), 2);
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
    }
}
