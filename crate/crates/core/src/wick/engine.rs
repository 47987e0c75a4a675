//! Evaluation of contracted terms and assembly of moment tables.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use parking_lot::RwLock;
use rayon::prelude::*;

use super::contract::{enumerate_contractions, Contractions, TermShape};
use super::{DiscreteKernel, DotArg, EngineError, HamiltonianSpec, KernelSet, LabelWeight};
use crate::angular::{AngularCache, DotMonomial, VectorId};
use crate::closed_form::{radial_integral, ClosedForm};
use crate::moments::MomentTable;
use crate::polaron::EvalMode;
use crate::quadrature::NeumaierSum;

const MOMENTUM_VECTOR: VectorId = VectorId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub max_order: usize,
    /// Highest order assembled in exact arithmetic when the Hamiltonian asks for [`EvalMode::Exact`].
    pub exact_max_order: usize,
    /// Size of a private thread pool; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { max_order: 5, exact_max_order: 3, workers: None }
    }
}

type ExpansionKey = (u32, u32);

/// A moment as a polynomial `Σ c_{C,p} g^C P^p` with `g = 8α/π`.
///
/// Continuum coefficients depend on `k0` only, so one expansion serves every α.
/// Discrete kernels fold all amplitudes into a single `(0, 0)` coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentExpansion {
    exact: Option<BTreeMap<ExpansionKey, ClosedForm>>,
    float: BTreeMap<ExpansionKey, f64>,
    k0: Option<f64>,
}

impl MomentExpansion {
    pub fn unit(k0: Option<f64>) -> Self {
        let mut exact = BTreeMap::new();
        exact.insert((0, 0), ClosedForm::one());
        let mut float = BTreeMap::new();
        float.insert((0, 0), 1.0);
        MomentExpansion { exact: Some(exact), float, k0 }
    }

    pub fn zero(k0: Option<f64>) -> Self {
        MomentExpansion { exact: Some(BTreeMap::new()), float: BTreeMap::new(), k0 }
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_terms(&self) -> Option<&BTreeMap<ExpansionKey, ClosedForm>> {
        self.exact.as_ref()
    }

    pub fn float_terms(&self) -> &BTreeMap<ExpansionKey, f64> {
        &self.float
    }

    pub fn evaluate(&self, alpha: f64, momentum: f64) -> f64 {
        let g = 8.0 * alpha / PI;
        let s: NeumaierSum = self
            .float
            .iter()
            .map(|(&(c, p), v)| v * g.powi(c as i32) * momentum.powi(p as i32))
            .collect();
        s.value()
    }

    fn from_exact(exact: BTreeMap<ExpansionKey, ClosedForm>, k0: f64) -> Self {
        let float = exact.iter().map(|(k, v)| (*k, v.evaluate(k0))).collect();
        MomentExpansion { exact: Some(exact), float, k0: Some(k0) }
    }

    fn add(&self, o: &Self) -> Self {
        let mut float = self.float.clone();
        for (k, v) in &o.float {
            *float.entry(*k).or_insert(0.0) += v;
        }
        let exact = match (&self.exact, &o.exact) {
            (Some(a), Some(b)) => {
                let mut out = a.clone();
                for (k, v) in b {
                    *out.entry(*k).or_insert_with(ClosedForm::zero) += v;
                }
                Some(out)
            }
            _ => None,
        };
        MomentExpansion { exact, float, k0: self.k0.or(o.k0) }
    }

    fn mul(&self, o: &Self, factor: u64) -> Self {
        let mut float = BTreeMap::new();
        for (ka, a) in &self.float {
            for (kb, b) in &o.float {
                *float.entry((ka.0 + kb.0, ka.1 + kb.1)).or_insert(0.0) += factor as f64 * a * b;
            }
        }
        let exact = match (&self.exact, &o.exact) {
            (Some(ea), Some(eb)) => {
                let f = BigRational::from_integer(BigInt::from(factor));
                let mut out: BTreeMap<ExpansionKey, ClosedForm> = BTreeMap::new();
                for (ka, a) in ea {
                    for (kb, b) in eb {
                        let prod = (a * b).scale(&f);
                        *out.entry((ka.0 + kb.0, ka.1 + kb.1)).or_insert_with(ClosedForm::zero) += prod;
                    }
                }
                Some(out)
            }
            _ => None,
        };
        MomentExpansion { exact, float, k0: self.k0.or(o.k0) }
    }

    /// Drops the exact part, e.g. to combine with a float-only expansion.
    pub fn into_float(mut self) -> Self {
        self.exact = None;
        self
    }
}

fn radial_cache() -> &'static RwLock<HashMap<(u32, u32), ClosedForm>> {
    static CACHE: OnceLock<RwLock<HashMap<(u32, u32), ClosedForm>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn radial(p: u32, q: u32) -> Result<ClosedForm, EngineError> {
    if let Some(v) = radial_cache().read().get(&(p, q)) {
        return Ok(v.clone());
    }
    let v = radial_integral(p, q)?;
    radial_cache().write().insert((p, q), v.clone());
    Ok(v)
}

/// `∫₀^{k0} k^p (k+k²)^{−q} dk` indices and sign of one continuum class.
fn class_radial(w: &LabelWeight, order: usize) -> Result<(u32, u32, bool), EngineError> {
    if w.linear > 0 {
        return Err(EngineError::UnsupportedKernel("the combined linear amplitude has no continuum form".into()));
    }
    if w.amplitude_count() != 2 {
        return Err(EngineError::UnsupportedKernel(format!(
            "a class of M_{order} carries {} amplitudes; the continuum limit needs exactly two",
            w.amplitude_count()
        )));
    }
    // V → √k and f → −√k/(k+k²) per class, times k² dk from the measure
    let p = 3 + w.k_pow as u32;
    let q = w.displacement as u32;
    Ok((p, q, w.displacement % 2 == 1))
}

fn dot_monomial(shape: &TermShape) -> DotMonomial {
    let id = |d: DotArg| match d {
        DotArg::Label(c) => c as VectorId,
        DotArg::Momentum => MOMENTUM_VECTOR,
    };
    DotMonomial::from_pairs(shape.dots.iter().map(|&(a, b)| (id(a), id(b))))
}

type RadialKey = (u32, u32, Vec<(u32, u32)>);

fn continuum_terms(
    terms: &[(TermShape, i128)],
    order: usize,
) -> Result<BTreeMap<RadialKey, BigRational>, EngineError> {
    for (shape, _) in terms {
        let e = shape.volume_half_exponent();
        if e != 0 {
            return Err(EngineError::VolumeMismatch { order, exponent: e });
        }
    }
    let mapped: Result<Vec<(RadialKey, BigRational)>, EngineError> = terms
        .par_iter()
        .map_init(AngularCache::new, |cache, (shape, mult)| {
            let mut radials = Vec::with_capacity(shape.classes.len());
            let mut negative = false;
            for w in &shape.classes {
                let (p, q, neg) = class_radial(w, order)?;
                radials.push((p, q));
                negative ^= neg;
            }
            radials.sort_unstable();
            let mut value = cache.average(&dot_monomial(shape)) * BigRational::from_integer(BigInt::from(*mult));
            if negative {
                value = -value;
            }
            Ok(((shape.classes.len() as u32, shape.p_pow as u32, radials), value))
        })
        .collect();
    let mut grouped: BTreeMap<RadialKey, BigRational> = BTreeMap::new();
    for (k, v) in mapped? {
        if v.is_zero() {
            continue;
        }
        *grouped.entry(k).or_insert_with(BigRational::zero) += v;
    }
    grouped.retain(|_, v| !v.is_zero());
    Ok(grouped)
}

fn continuum_expansion(
    terms: &[(TermShape, i128)],
    order: usize,
    k0: f64,
    exact: bool,
) -> Result<MomentExpansion, EngineError> {
    let grouped = continuum_terms(terms, order)?;
    if exact {
        let mut out: BTreeMap<ExpansionKey, ClosedForm> = BTreeMap::new();
        for ((c, p, radials), coeff) in grouped {
            let mut prod = ClosedForm::constant(coeff);
            for (pp, qq) in radials {
                prod = &prod * &radial(pp, qq)?;
            }
            *out.entry((c, p)).or_insert_with(ClosedForm::zero) += prod;
        }
        out.retain(|_, v| !v.is_zero());
        return Ok(MomentExpansion::from_exact(out, k0));
    }
    let mut values: HashMap<(u32, u32), f64> = HashMap::new();
    let mut sums: BTreeMap<ExpansionKey, NeumaierSum> = BTreeMap::new();
    for ((c, p, radials), coeff) in grouped {
        let mut v = coeff.to_f64().unwrap_or(f64::NAN);
        for rq in radials {
            let r = match values.get(&rq) {
                Some(r) => *r,
                None => {
                    let r = radial(rq.0, rq.1)?.evaluate(k0);
                    values.insert(rq, r);
                    r
                }
            };
            v *= r;
        }
        sums.entry((c, p)).or_default().add(v);
    }
    Ok(MomentExpansion {
        exact: None,
        float: sums.into_iter().map(|(k, s)| (k, s.value())).collect(),
        k0: Some(k0),
    })
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn discrete_shape_value(kernel: &DiscreteKernel, shape: &TermShape, mult: i128) -> f64 {
    let modes = &kernel.modes;
    let n = modes.len();
    let c = shape.classes.len();
    let p_mag = kernel.momentum_magnitude();
    let p_hat = kernel.momentum_direction();
    let prefactor = mult as f64 * p_mag.powi(shape.p_pow as i32);
    if prefactor == 0.0 {
        return 0.0;
    }
    if c == 0 {
        return prefactor;
    }
    if n == 0 {
        return 0.0;
    }
    let weights: Vec<Vec<f64>> = shape.classes.iter().map(|w| modes.iter().map(|m| m.weight(w)).collect()).collect();
    let mut assign = vec![0usize; c];
    let mut sum = NeumaierSum::default();
    loop {
        let mut v = 1.0;
        for (ci, &mi) in assign.iter().enumerate() {
            v *= weights[ci][mi];
        }
        if v != 0.0 {
            for &(a, b) in &shape.dots {
                let dir = |d: DotArg| match d {
                    DotArg::Label(l) => &modes[assign[l as usize]].direction,
                    DotArg::Momentum => &p_hat,
                };
                v *= dot3(dir(a), dir(b));
            }
            sum.add(v);
        }
        let mut i = 0;
        loop {
            if i == c {
                return prefactor * sum.value();
            }
            assign[i] += 1;
            if assign[i] < n {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

fn discrete_expansion(kernel: &DiscreteKernel, terms: &[(TermShape, i128)]) -> MomentExpansion {
    let values: Vec<f64> = terms.par_iter().map(|(s, m)| discrete_shape_value(kernel, s, *m)).collect();
    let total: NeumaierSum = values.into_iter().collect();
    let mut float = BTreeMap::new();
    float.insert((0, 0), total.value());
    MomentExpansion { exact: None, float, k0: None }
}

fn binomial_u64(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Computes and caches vacuum moments of a [`HamiltonianSpec`].
pub struct MomentEngine {
    config: EngineConfig,
    pool: Option<rayon::ThreadPool>,
    cache: RwLock<HashMap<(u64, usize, bool), MomentExpansion>>,
    shapes: RwLock<HashMap<(u64, usize, bool), Arc<Vec<(TermShape, i128)>>>>,
}

impl Default for MomentEngine {
    fn default() -> Self {
        Self::new(EngineConfig::default())
    }
}

impl MomentEngine {
    pub fn new(config: EngineConfig) -> Self {
        let pool = config
            .workers
            .and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok());
        MomentEngine { config, pool, cache: RwLock::new(HashMap::new()), shapes: RwLock::new(HashMap::new()) }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    fn check_order(&self, m: usize) -> Result<(), EngineError> {
        if m > self.config.max_order {
            Err(EngineError::OrderTooHigh { order: m, max: self.config.max_order })
        } else {
            Ok(())
        }
    }

    fn k0(spec: &HamiltonianSpec) -> Option<f64> {
        match &spec.kernel {
            KernelSet::Continuum { params, .. } => Some(params.k0),
            KernelSet::Discrete(_) => None,
        }
    }

    fn evaluate_terms(
        &self,
        spec: &HamiltonianSpec,
        terms: &[(TermShape, i128)],
        order: usize,
    ) -> Result<MomentExpansion, EngineError> {
        match &spec.kernel {
            KernelSet::Continuum { params, .. } => {
                let exact = spec.mode() == EvalMode::Exact && order <= self.config.exact_max_order;
                self.run(|| continuum_expansion(terms, order, params.k0, exact))
            }
            KernelSet::Discrete(kernel) => Ok(self.run(|| discrete_expansion(kernel, terms))),
        }
    }

    /// The c-number part `⟨0|𝓗|0⟩`.
    pub fn constant(&self, spec: &HamiltonianSpec) -> Result<MomentExpansion, EngineError> {
        let terms: Vec<(TermShape, i128)> =
            spec.constant.iter().map(|m| (TermShape::of_constant(m), m.coeff as i128)).collect();
        self.evaluate_terms(spec, &terms, 1)
    }

    /// Contracted terms of `⟨0|L^m|0⟩` for the ladder part `L`.
    pub fn contractions(&self, spec: &HamiltonianSpec, m: usize, connected: bool) -> Result<Contractions, EngineError> {
        self.check_order(m)?;
        Ok(self.run(|| enumerate_contractions(&spec.ladder, m, connected)))
    }

    fn shapes(&self, spec: &HamiltonianSpec, m: usize, connected: bool) -> Result<Arc<Vec<(TermShape, i128)>>, EngineError> {
        let key = (spec.ladder_fingerprint(), m, connected);
        if let Some(t) = self.shapes.read().get(&key) {
            return Ok(Arc::clone(t));
        }
        let c = self.contractions(spec, m, connected)?;
        let terms = Arc::new(c.terms.into_iter().collect::<Vec<_>>());
        self.shapes.write().insert(key, Arc::clone(&terms));
        Ok(terms)
    }

    fn ladder(&self, spec: &HamiltonianSpec, m: usize, connected: bool) -> Result<MomentExpansion, EngineError> {
        self.check_order(m)?;
        let key = (spec.fingerprint(), m, connected);
        if let Some(e) = self.cache.read().get(&key) {
            return Ok(e.clone());
        }
        let terms = self.shapes(spec, m, connected)?;
        let e = if terms.is_empty() {
            MomentExpansion::zero(Self::k0(spec))
        } else {
            self.evaluate_terms(spec, &terms, m)?
        };
        self.cache.write().insert(key, e.clone());
        Ok(e)
    }

    /// `K_m = ⟨0|(𝓗 − ⟨𝓗⟩)^m|0⟩`, which is `⟨0|L^m|0⟩` since the ladder part has zero mean.
    pub fn central_moment_expansion(&self, spec: &HamiltonianSpec, m: usize) -> Result<MomentExpansion, EngineError> {
        match m {
            0 => Ok(MomentExpansion::unit(Self::k0(spec))),
            1 => Ok(MomentExpansion::zero(Self::k0(spec))),
            _ => self.ladder(spec, m, false),
        }
    }

    /// The `m`-th cumulant as a sum of connected diagrams; the first is the c-number part.
    pub fn connected_expansion(&self, spec: &HamiltonianSpec, m: usize) -> Result<MomentExpansion, EngineError> {
        match m {
            0 => Ok(MomentExpansion::zero(Self::k0(spec))),
            1 => self.constant(spec),
            _ => self.ladder(spec, m, true),
        }
    }

    /// `M_m = ⟨0|𝓗^m|0⟩` as an expansion.
    pub fn vacuum_moment_expansion(&self, spec: &HamiltonianSpec, m: usize) -> Result<MomentExpansion, EngineError> {
        self.check_order(m)?;
        let c = self.constant(spec)?;
        let mut total = MomentExpansion::zero(Self::k0(spec));
        let mut power = MomentExpansion::unit(Self::k0(spec));
        let mut powers = vec![power.clone()];
        for _ in 1..=m {
            power = power.mul(&c, 1);
            powers.push(power.clone());
        }
        for j in 0..=m {
            if j == 1 {
                continue;
            }
            let k = self.central_moment_expansion(spec, j)?;
            total = total.add(&k.mul(&powers[m - j], binomial_u64(m, j)));
        }
        Ok(total)
    }

    fn params(spec: &HamiltonianSpec) -> (f64, f64) {
        match &spec.kernel {
            KernelSet::Continuum { params, .. } => (params.alpha, params.momentum),
            KernelSet::Discrete(_) => (0.0, 0.0),
        }
    }

    pub fn vacuum_moment(&self, spec: &HamiltonianSpec, m: usize) -> Result<f64, EngineError> {
        let (a, p) = Self::params(spec);
        Ok(self.vacuum_moment_expansion(spec, m)?.evaluate(a, p))
    }

    pub fn connected_vacuum_moment(&self, spec: &HamiltonianSpec, m: usize) -> Result<f64, EngineError> {
        let (a, p) = Self::params(spec);
        Ok(self.connected_expansion(spec, m)?.evaluate(a, p))
    }

    /// The c-number part followed by `K_2..K_max_order`; index 1 holds the mean.
    pub fn expansions(&self, spec: &HamiltonianSpec, max_order: usize) -> Result<Vec<MomentExpansion>, EngineError> {
        self.check_order(max_order)?;
        let mut out = vec![MomentExpansion::unit(Self::k0(spec))];
        if max_order >= 1 {
            out.push(self.constant(spec)?);
        }
        for m in 2..=max_order {
            out.push(self.central_moment_expansion(spec, m)?);
        }
        Ok(out)
    }

    /// Moments `M_0..M_max_order` with central moments summed directly.
    pub fn moment_table(&self, spec: &HamiltonianSpec, max_order: usize) -> Result<MomentTable, EngineError> {
        let (a, p) = Self::params(spec);
        table_from_expansions(&self.expansions(spec, max_order)?, a, p)
    }

    /// The same table assembled from connected parts, `K_m = Σ_j C(m−1, j−1) κ_j K_{m−j}`.
    pub fn moment_table_from_cumulants(&self, spec: &HamiltonianSpec, max_order: usize) -> Result<MomentTable, EngineError> {
        self.check_order(max_order)?;
        let mean = self.connected_vacuum_moment(spec, 1)?;
        let kappa: Vec<f64> = (0..=max_order)
            .map(|j| if j < 2 { Ok(0.0) } else { self.connected_vacuum_moment(spec, j) })
            .collect::<Result<_, _>>()?;
        let mut central = vec![1.0];
        for m in 1..=max_order {
            let v = (1..=m).map(|j| binomial_u64(m - 1, j - 1) as f64 * kappa[j] * central[m - j]).sum();
            central.push(v);
        }
        Ok(MomentTable::from_central(mean, central)?)
    }
}

/// Evaluates the output of [`MomentEngine::expansions`] at one coupling and momentum.
pub fn table_from_expansions(exps: &[MomentExpansion], alpha: f64, momentum: f64) -> Result<MomentTable, EngineError> {
    let values: Vec<f64> = exps.iter().map(|e| e.evaluate(alpha, momentum)).collect();
    if values.len() < 2 {
        return Ok(MomentTable::from_raw(values)?);
    }
    let mean = values[1];
    let mut central = values;
    central[1] = 0.0;
    Ok(MomentTable::from_central(mean, central)?)
}

fn format_class(w: &LabelWeight) -> String {
    let mut s = String::new();
    for (tag, n) in [("V", w.coupling), ("f", w.displacement), ("L", w.linear), ("k", w.k_pow)] {
        if n > 0 {
            if !s.is_empty() {
                s.push('*');
            }
            if n == 1 {
                s.push_str(tag);
            } else {
                s.push_str(&format!("{tag}^{n}"));
            }
        }
    }
    if s.is_empty() {
        s.push('1');
    }
    s
}

fn format_dot(d: DotArg) -> String {
    match d {
        DotArg::Label(c) => format!("q{c}"),
        DotArg::Momentum => "P".into(),
    }
}

/// Writes the contracted terms of `⟨0|L^m|0⟩`, one per line.
///
/// Header `# M_<m> shapes=<n> diagrams=<d>`, then tab-separated
/// `multiplicity`, per-class weights joined by `;` (e.g. `V*f;f^2*k`), dot
/// products joined by `;` (e.g. `q0.q1;P.q0`, or `-`), and the power of `P`.
/// Class `q<i>` is the `i`-th entry of the weight list.
pub fn dump_terms<W: Write>(spec: &HamiltonianSpec, m: usize, connected: bool, out: &mut W) -> io::Result<()> {
    let c = enumerate_contractions(&spec.ladder, m, connected);
    writeln!(out, "# M_{m} shapes={} diagrams={}", c.terms.len(), c.diagrams)?;
    for (shape, mult) in &c.terms {
        let classes: Vec<String> = shape.classes.iter().map(format_class).collect();
        let dots: Vec<String> =
            shape.dots.iter().map(|&(a, b)| format!("{}.{}", format_dot(a), format_dot(b))).collect();
        let dots = if dots.is_empty() { "-".to_string() } else { dots.join(";") };
        writeln!(out, "{mult}\t{}\t{dots}\t{}", classes.join(";"), shape.p_pow)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polaron::{e_weak, FChoice, PolaronParams};
    use crate::wick::{build_hamiltonian, DiscreteMode, Family, LadderOp, OperatorMonomial};

    fn rest(alpha: f64, k0: f64) -> HamiltonianSpec {
        build_hamiltonian(&PolaronParams::new(alpha, k0), FChoice::OptimalRest).unwrap()
    }

    #[test]
    fn mean_is_weak_coupling_energy() {
        let engine = MomentEngine::default();
        for &(a, k0) in &[(1.0, 1.0), (0.3, 2.5), (4.0, 0.5)] {
            let m1 = engine.vacuum_moment(&rest(a, k0), 1).unwrap();
            assert!((m1 - e_weak(a, k0)).abs() < 1e-13 * e_weak(a, k0).abs().max(1.0), "{m1}");
        }
    }

    #[test]
    fn exact_mean_is_closed_form() {
        let engine = MomentEngine::default();
        let spec = rest(1.0, 1.0).with_mode(EvalMode::Exact);
        let e = engine.constant(&spec).unwrap();
        let exact = e.exact_terms().unwrap();
        let expected = radial_integral(3, 1).unwrap().scale(&BigRational::from_integer((-1).into()));
        assert_eq!(exact.get(&(1, 0)), Some(&expected));
    }

    #[test]
    fn zero_displacement_second_moment() {
        // ⟨(Σ V(a†+a))²⟩ = Σ V_k²
        let engine = MomentEngine::default();
        let spec = build_hamiltonian(&PolaronParams::new(1.0, 1.0), FChoice::Zero).unwrap();
        let k2 = engine.central_moment_expansion(&spec, 2).unwrap().evaluate(1.0, 0.0);
        assert!((k2 - 8.0 / PI * 0.25).abs() < 1e-14);
    }

    #[test]
    fn exact_and_float_agree() {
        let engine = MomentEngine::default();
        let f = rest(1.3, 1.7);
        let e = f.clone().with_mode(EvalMode::Exact);
        for m in 2..=3 {
            let a = engine.central_moment_expansion(&f, m).unwrap();
            let b = engine.central_moment_expansion(&e, m).unwrap();
            assert!(b.is_exact());
            let (x, y) = (a.evaluate(1.3, 0.0), b.evaluate(1.3, 0.0));
            assert!((x - y).abs() < 1e-13 * y.abs(), "m={m}: {x} vs {y}");
        }
    }

    #[test]
    fn cumulants_reproduce_moments() {
        let engine = MomentEngine::default();
        let spec = rest(1.0, 1.0);
        let direct = engine.moment_table(&spec, 5).unwrap();
        let linked = engine.moment_table_from_cumulants(&spec, 5).unwrap();
        for (a, b) in direct.central().iter().zip(linked.central()) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn order_limit() {
        let engine = MomentEngine::new(EngineConfig { max_order: 3, ..EngineConfig::default() });
        assert!(matches!(engine.vacuum_moment(&rest(1.0, 1.0), 4), Err(EngineError::OrderTooHigh { .. })));
    }

    #[test]
    fn volume_inconsistent_term_is_reported() {
        // 2Σ(k⃗·m⃗) f_m² (a†_k + a_k) without the f_k factor
        let mut spec = rest(1.0, 1.0);
        let w_k = LabelWeight::new(0, 0, 0, 1);
        let w_m = LabelWeight::new(0, 2, 0, 1);
        for op in [LadderOp::create(0), LadderOp::annihilate(0)] {
            spec.ladder.push(OperatorMonomial {
                coeff: 2,
                ladder: vec![op],
                labels: vec![w_k, w_m],
                dots: vec![(DotArg::Label(0), DotArg::Label(1))],
                p_pow: 0,
                family: Family::LinearRecoilShift,
            });
        }
        let engine = MomentEngine::default();
        assert!(matches!(engine.vacuum_moment(&spec, 2), Err(EngineError::VolumeMismatch { .. })));
    }

    #[test]
    fn discrete_single_mode_by_hand() {
        let mode = DiscreteMode::new([0.0, 0.0, 1.0], 0.5, 0.3, 0.0);
        let spec = super::super::build_discrete_hamiltonian(DiscreteKernel { modes: vec![mode], momentum: [0.0; 3] });
        let engine = MomentEngine::default();
        // f = 0: 𝓗 = (k+k²)a†a + k²(a†a)² − k²a†a + ... reduces to ω n + k² n² + V(a†+a)
        assert_eq!(engine.vacuum_moment(&spec, 1).unwrap(), 0.0);
        assert!((engine.vacuum_moment(&spec, 2).unwrap() - 0.09).abs() < 1e-15);
        // ⟨V(a†+a) (k+k²) a†a V(a†+a)⟩ = V²(k+k²)
        assert!((engine.vacuum_moment(&spec, 3).unwrap() - 0.09 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn dump_format() {
        let mut buf = Vec::new();
        dump_terms(&rest(1.0, 1.0), 2, false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# M_2 shapes=1"));
        assert_eq!(lines.next().unwrap(), "2\tf^2*k^2;f^2*k^2\tq0.q1;q0.q1\t0");
    }
}
