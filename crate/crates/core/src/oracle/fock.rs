//! Truncated Fock-space models of a finite set of phonon modes.
//!
//! The operator is applied from its unexpanded form
//! `𝓗 = Σ_x (P_x − N_x)² + Σ_i k_i b†_i b_i + Σ_i V_i (b_i + b†_i)` with
//! `b_i = a_i + f_i` and `N⃗ = Σ_i k⃗_i b†_i b_i`, so nothing here shares the
//! normal-ordering algebra of the contraction engine.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use nalgebra::{DMatrix, SymmetricEigen};

use super::OracleError;
use crate::moments::MomentTable;
use crate::quadrature::NeumaierSum;
use crate::wick::{DiscreteKernel, DotArg, HamiltonianSpec, LadderKind};

/// Largest number of basis states a model may have.
pub const MAX_DIMENSION: usize = 1 << 20;

/// Dimension below which [`oracle_ground_energy`] diagonalises densely.
pub const DENSE_LIMIT: usize = 4096;
/// Largest dimension diagonalised densely when only the ground energy is wanted.
const DENSE_EIGEN_LIMIT: usize = 600;

const RESIDUAL_TOLERANCE: f64 = 1e-10;

type Occupation = Vec<u8>;
type Sparse = HashMap<Occupation, f64, BuildHasherDefault<DefaultHasher>>;

fn add(v: &mut Sparse, s: Occupation, c: f64) {
    if c != 0.0 {
        *v.entry(s).or_insert(0.0) += c;
    }
}

fn dot(u: &Sparse, v: &Sparse) -> f64 {
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let mut keys: Vec<&Occupation> = small.keys().collect();
    keys.sort_unstable();
    keys.into_iter()
        .filter_map(|k| large.get(k).map(|b| small[k] * b))
        .collect::<NeumaierSum>()
        .value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// At most `n` quanta in every mode.
    PerMode(u8),
    /// At most `n` quanta in total.
    TotalNumber(u8),
}

impl Truncation {
    fn admits(&self, s: &[u8]) -> bool {
        match *self {
            Truncation::PerMode(n) => s.iter().all(|&k| k <= n),
            Truncation::TotalNumber(n) => s.iter().map(|&k| k as u32).sum::<u32>() <= n as u32,
        }
    }

    fn dimension(&self, modes: usize) -> Option<usize> {
        match *self {
            Truncation::PerMode(n) => (0..modes).try_fold(1usize, |acc, _| acc.checked_mul(n as usize + 1)),
            Truncation::TotalNumber(n) => {
                // C(modes + n, n)
                let mut acc: u128 = 1;
                for i in 0..n as u128 {
                    acc = acc * (modes as u128 + n as u128 - i) / (i + 1);
                }
                usize::try_from(acc).ok()
            }
        }
    }
}

/// Occupation-number states in lexicographic order, mode 0 most significant.
#[derive(Debug, Clone)]
pub struct FockBasis {
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize, BuildHasherDefault<DefaultHasher>>,
    truncation: Truncation,
}

impl FockBasis {
    pub fn new(modes: usize, truncation: Truncation) -> Result<Self, OracleError> {
        let dim = truncation.dimension(modes).unwrap_or(usize::MAX);
        if dim > MAX_DIMENSION {
            return Err(OracleError::DimensionOverflow { dimension: dim, limit: MAX_DIMENSION });
        }
        let cap = match truncation {
            Truncation::PerMode(n) | Truncation::TotalNumber(n) => n,
        };
        let mut states = Vec::with_capacity(dim);
        let mut current = vec![0u8; modes];
        fill(&mut states, &mut current, 0, cap, &truncation);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockBasis { states, index, truncation })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, s: &[u8]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    fn project(&self, v: &Sparse) -> Sparse {
        v.iter().filter(|(s, _)| self.truncation.admits(s)).map(|(s, c)| (s.clone(), *c)).collect()
    }
}

fn fill(out: &mut Vec<Occupation>, cur: &mut Occupation, mode: usize, cap: u8, t: &Truncation) {
    if mode == cur.len() {
        out.push(cur.clone());
        return;
    }
    for n in 0..=cap {
        cur[mode] = n;
        if t.admits(&cur[..=mode]) {
            fill(out, cur, mode + 1, cap, t);
        }
    }
    cur[mode] = 0;
}

/// Row-compressed symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub dimension: usize,
    row_start: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dimension)
            .map(|r| {
                (self.row_start[r]..self.row_start[r + 1])
                    .map(|k| self.values[k] * x[self.columns[k]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for r in 0..self.dimension {
            for k in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.columns[k])] = self.values[k];
            }
        }
        m
    }

    pub fn nonzeros(&self) -> usize {
        self.values.len()
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.transpose()).amax()
    }
}

/// A discrete kernel set together with a truncated Fock basis.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub kernel: DiscreteKernel,
    pub basis: FockBasis,
}

/// Sets up the model; fails when the basis exceeds [`MAX_DIMENSION`].
pub fn build_discrete_model(kernel: DiscreteKernel, truncation: Truncation) -> Result<DiscreteModel, OracleError> {
    let basis = FockBasis::new(kernel.modes.len(), truncation)?;
    Ok(DiscreteModel { kernel, basis })
}

impl DiscreteModel {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    fn vacuum(&self) -> Sparse {
        let mut v = Sparse::default();
        v.insert(vec![0; self.kernel.modes.len()], 1.0);
        v
    }

    /// `Σ_i w_i b†_i b_i v` with `b†b = a†a + f(a† + a) + f²`.
    fn number_like(&self, w: &[f64], v: &Sparse) -> Sparse {
        let mut out = Sparse::default();
        for (s, &c) in v {
            let mut diag = 0.0;
            for (i, m) in self.kernel.modes.iter().enumerate() {
                diag += w[i] * (s[i] as f64 + m.displacement * m.displacement);
            }
            add(&mut out, s.clone(), c * diag);
            for (i, m) in self.kernel.modes.iter().enumerate() {
                let a = c * w[i] * m.displacement;
                if a == 0.0 {
                    continue;
                }
                let mut up = s.clone();
                up[i] += 1;
                add(&mut out, up, a * ((s[i] + 1) as f64).sqrt());
                if s[i] > 0 {
                    let mut down = s.clone();
                    down[i] -= 1;
                    add(&mut out, down, a * (s[i] as f64).sqrt());
                }
            }
        }
        out
    }

    /// `(P_x − N_x) v`.
    fn recoil_component(&self, x: usize, v: &Sparse) -> Sparse {
        let w: Vec<f64> = self.kernel.modes.iter().map(|m| m.magnitude * m.direction[x]).collect();
        let mut out = self.number_like(&w, v);
        for c in out.values_mut() {
            *c = -*c;
        }
        let p = self.kernel.momentum[x];
        if p != 0.0 {
            for (s, c) in v {
                add(&mut out, s.clone(), p * c);
            }
        }
        out
    }

    /// `Σ k_i b†_i b_i + Σ V_i (b_i + b†_i)`, the part that is not a square.
    fn phonon_and_coupling(&self, v: &Sparse) -> Sparse {
        let w: Vec<f64> = self.kernel.modes.iter().map(|m| m.magnitude).collect();
        let mut out = self.number_like(&w, v);
        let shift: f64 = self.kernel.modes.iter().map(|m| 2.0 * m.coupling * m.displacement).sum();
        for (s, &c) in v {
            add(&mut out, s.clone(), shift * c);
            for (i, m) in self.kernel.modes.iter().enumerate() {
                let a = c * m.coupling;
                if a == 0.0 {
                    continue;
                }
                let mut up = s.clone();
                up[i] += 1;
                add(&mut out, up, a * ((s[i] + 1) as f64).sqrt());
                if s[i] > 0 {
                    let mut down = s.clone();
                    down[i] -= 1;
                    add(&mut out, down, a * (s[i] as f64).sqrt());
                }
            }
        }
        out
    }

    /// `𝓗 v` without truncation.
    fn apply_full(&self, v: &Sparse) -> Sparse {
        let mut out = self.phonon_and_coupling(v);
        for x in 0..3 {
            let once = self.recoil_component(x, v);
            for (s, c) in self.recoil_component(x, &once) {
                add(&mut out, s, c);
            }
        }
        out
    }

    /// `⟨u|𝓗|v⟩` using `⟨u|(P−N)²|v⟩ = ⟨(P−N)u|(P−N)v⟩`.
    fn bilinear(&self, u: &Sparse, v: &Sparse) -> f64 {
        let mut acc = NeumaierSum::default();
        acc.add(dot(u, &self.phonon_and_coupling(v)));
        for x in 0..3 {
            acc.add(dot(&self.recoil_component(x, u), &self.recoil_component(x, v)));
        }
        acc.value()
    }

    fn to_sparse(&self, x: &[f64]) -> Sparse {
        x.iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (self.basis.states[i].clone(), *c))
            .collect()
    }

    fn to_dense(&self, v: &Sparse) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        for (s, c) in v {
            if let Some(i) = self.basis.index_of(s) {
                out[i] += c;
            }
        }
        out
    }

    /// The truncated operator applied to a vector in the basis.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.to_dense(&self.apply_full(&self.to_sparse(x)))
    }

    /// The truncated matrix, assembled column by column.
    pub fn matrix(&self) -> SparseMatrix {
        let n = self.dimension();
        let columns: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|j| {
                let mut e = Sparse::default();
                e.insert(self.basis.states[j].clone(), 1.0);
                let mut col: Vec<(usize, f64)> = self
                    .apply_full(&e)
                    .into_iter()
                    .filter_map(|(s, c)| self.basis.index_of(&s).map(|i| (i, c)))
                    .filter(|(_, c)| *c != 0.0)
                    .collect();
                col.sort_unstable_by_key(|(i, _)| *i);
                col
            })
            .collect();
        // the matrix is symmetric, so columns serve as rows
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for col in columns {
            for (i, c) in col {
                cols.push(i);
                values.push(c);
            }
            row_start.push(cols.len());
        }
        SparseMatrix { dimension: n, row_start, columns: cols, values }
    }

    /// `⟨0|𝓗|0⟩`.
    pub fn constant(&self) -> f64 {
        let v = self.vacuum();
        self.bilinear(&v, &v)
    }
}

/// `M_0..M_{m_max}` and the central moments of the truncated matrix in the vacuum.
///
/// With `v_j = (P𝓗P)^j|0⟩` the even moments are `⟨v_j|v_j⟩` and the odd ones
/// `⟨v_j|𝓗|v_j⟩`; they coincide with the untruncated moments as long as the
/// truncation holds every state reached by `⌊m/2⌋` applications.
pub fn oracle_moments(model: &DiscreteModel, m_max: usize) -> Result<MomentTable, OracleError> {
    let half = m_max / 2;
    let vacuum = model.vacuum();
    let mean = model.bilinear(&vacuum, &vacuum);

    let run = |shift: f64| -> Vec<f64> {
        let mut out = vec![0.0; m_max + 1];
        out[0] = 1.0;
        let mut v = vacuum.clone();
        for j in 0..=half {
            if j > 0 {
                let mut next = model.apply_full(&v);
                if shift != 0.0 {
                    for (s, c) in &v {
                        add(&mut next, s.clone(), -shift * c);
                    }
                }
                v = model.basis.project(&next);
                out[2 * j] = dot(&v, &v);
            }
            if 2 * j + 1 <= m_max {
                out[2 * j + 1] = model.bilinear(&v, &v) - shift * dot(&v, &v);
            }
        }
        out
    };
    let raw = run(0.0);
    let central = if m_max >= 1 { run(mean) } else { vec![1.0] };
    Ok(MomentTable::from_parts(raw, central)?)
}

/// Lowest eigenvalue by dense diagonalisation.
pub fn dense_ground_energy(model: &DiscreteModel) -> f64 {
    let m = model.matrix().to_dense();
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Lowest eigenvalue by Lanczos iteration with full reorthogonalisation and restarts.
pub fn lanczos_ground_energy(model: &DiscreteModel) -> Result<f64, OracleError> {
    let a = model.matrix();
    lanczos(&a, 300, 20)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn lanczos(a: &SparseMatrix, max_krylov: usize, max_restarts: usize) -> Result<f64, OracleError> {
    let n = a.dimension;
    if n == 0 {
        return Err(OracleError::NoConvergence { residual: f64::NAN });
    }
    // deterministic start with weight on every basis state
    let mut start: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..=max_restarts {
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let kmax = max_krylov.min(n);
        let mut ritz = (0.0, Vec::new());
        for k in 0..kmax {
            let mut w = a.matvec(&basis[k]);
            let alpha: f64 = w.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
            alphas.push(alpha);
            for _ in 0..2 {
                for q in &basis {
                    let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = norm(&w);
            let m = alphas.len();
            if m % 8 != 0 && beta >= 1e-14 && k + 1 < kmax {
                betas.push(beta);
                basis.push(w.into_iter().map(|x| x / beta).collect());
                continue;
            }
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let imin = eig.eigenvalues.imin();
            let theta = eig.eigenvalues[imin];
            let y: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            ritz = (theta, y);
            let estimate = beta * ritz.1[m - 1].abs();
            if estimate < 0.1 * RESIDUAL_TOLERANCE * theta.abs().max(1.0) || beta < 1e-14 || k + 1 == kmax {
                break;
            }
            betas.push(beta);
            basis.push(w.into_iter().map(|x| x / beta).collect());
        }
        let (theta, y) = ritz;
        let mut x = vec![0.0; n];
        for (q, c) in basis.iter().zip(&y) {
            x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += c * qi);
        }
        let s = norm(&x);
        x.iter_mut().for_each(|v| *v /= s);
        let ax = a.matvec(&x);
        residual = norm(&ax.iter().zip(&x).map(|(p, q)| p - theta * q).collect::<Vec<_>>());
        if residual < RESIDUAL_TOLERANCE * theta.abs().max(1.0) {
            return Ok(theta);
        }
        start = x;
    }
    Err(OracleError::NoConvergence { residual })
}

/// Lowest eigenvalue of the truncated matrix: dense for small bases, Lanczos above.
pub fn oracle_ground_energy(model: &DiscreteModel) -> Result<f64, OracleError> {
    if model.dimension() < DENSE_EIGEN_LIMIT {
        Ok(dense_ground_energy(model))
    } else {
        lanczos_ground_energy(model)
    }
}

/// Ground energy of the untruncated model: the per-mode cap is raised until the
/// lowest eigenvalue changes by less than `tol`.
pub fn converged_ground_energy(kernel: &DiscreteKernel, start_cap: u8, tol: f64) -> Result<(f64, u8), OracleError> {
    let mut cap = start_cap.max(1);
    let mut previous = oracle_ground_energy(&build_discrete_model(kernel.clone(), Truncation::PerMode(cap))?)?;
    loop {
        let next_cap = cap + 2;
        let model = build_discrete_model(kernel.clone(), Truncation::PerMode(next_cap))?;
        let e = oracle_ground_energy(&model)?;
        if (e - previous).abs() < tol {
            return Ok((e, next_cap));
        }
        if next_cap >= 40 {
            return Err(OracleError::NoConvergence { residual: (e - previous).abs() });
        }
        previous = e;
        cap = next_cap;
    }
}

/// Matrix of `𝓗` built from dense Kronecker products of single-mode ladder
/// matrices in a space with two extra quanta per mode, then restricted to the
/// per-mode basis of `model`. Slow; meant for cross-checking small models.
pub fn dense_reference_matrix(model: &DiscreteModel) -> Result<DMatrix<f64>, OracleError> {
    let cap = match model.basis.truncation() {
        Truncation::PerMode(n) => n as usize,
        Truncation::TotalNumber(_) => {
            return Err(OracleError::Unsupported("the dense reference needs a per-mode truncation".into()))
        }
    };
    let modes = &model.kernel.modes;
    let d = cap + 3;
    let big = d.checked_pow(modes.len() as u32).unwrap_or(usize::MAX);
    if big > DENSE_LIMIT {
        return Err(OracleError::DimensionOverflow { dimension: big, limit: DENSE_LIMIT });
    }
    let single = DMatrix::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
    let lift = |op: &DMatrix<f64>, which: usize| {
        let mut m = DMatrix::<f64>::identity(1, 1);
        for i in 0..modes.len() {
            let factor = if i == which { op.clone() } else { DMatrix::identity(d, d) };
            m = m.kronecker(&factor);
        }
        m
    };
    let id = DMatrix::<f64>::identity(big, big);
    let b: Vec<DMatrix<f64>> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| lift(&single, i) + &id * m.displacement)
        .collect();
    let number: Vec<DMatrix<f64>> = b.iter().map(|bi| bi.transpose() * bi).collect();
    let mut h = DMatrix::<f64>::zeros(big, big);
    for x in 0..3 {
        let mut a = &id * model.kernel.momentum[x];
        for (i, m) in modes.iter().enumerate() {
            a -= &number[i] * (m.magnitude * m.direction[x]);
        }
        h += &a * &a;
    }
    for (i, m) in modes.iter().enumerate() {
        h += &number[i] * m.magnitude;
        h += (&b[i] + b[i].transpose()) * m.coupling;
    }
    let big_index = |s: &[u8]| s.iter().fold(0usize, |acc, &n| acc * d + n as usize);
    let n = model.dimension();
    let idx: Vec<usize> = (0..n).map(|i| big_index(model.basis.state(i))).collect();
    Ok(DMatrix::from_fn(n, n, |r, c| h[(idx[r], idx[c])]))
}

/// Matrix of the normal-ordered monomials of `spec` on the basis of `model`.
pub fn normal_ordered_matrix(spec: &HamiltonianSpec, model: &DiscreteModel) -> DMatrix<f64> {
    let kernel = &model.kernel;
    let modes = &kernel.modes;
    let p = kernel.momentum_magnitude();
    let p_hat = kernel.momentum_direction();
    let n = model.dimension();
    let mut out = DMatrix::zeros(n, n);
    let constant: f64 = spec
        .constant
        .iter()
        .map(|m| {
            let mut total = 0.0;
            for_each_assignment(m.labels.len(), modes.len(), |assign| {
                total += monomial_amplitude(m, assign, kernel, p, &p_hat);
            });
            total
        })
        .sum();
    for col in 0..n {
        out[(col, col)] += constant;
        let s = model.basis.state(col);
        for m in &spec.ladder {
            for_each_assignment(m.labels.len(), modes.len(), |assign| {
                let amp = monomial_amplitude(m, assign, kernel, p, &p_hat);
                if amp == 0.0 {
                    return;
                }
                let mut state = s.to_vec();
                let mut c = amp;
                for op in m.ladder.iter().rev() {
                    let i = assign[op.label as usize];
                    match op.kind {
                        LadderKind::Annihilate => {
                            if state[i] == 0 {
                                return;
                            }
                            c *= (state[i] as f64).sqrt();
                            state[i] -= 1;
                        }
                        LadderKind::Create => {
                            state[i] += 1;
                            c *= (state[i] as f64).sqrt();
                        }
                    }
                }
                if let Some(row) = model.basis.index_of(&state) {
                    out[(row, col)] += c;
                }
            });
        }
    }
    out
}

fn for_each_assignment(labels: usize, modes: usize, mut f: impl FnMut(&[usize])) {
    let mut assign = vec![0usize; labels];
    loop {
        f(&assign);
        let mut i = 0;
        loop {
            if i == labels {
                return;
            }
            assign[i] += 1;
            if assign[i] < modes {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

fn monomial_amplitude(
    m: &crate::wick::OperatorMonomial,
    assign: &[usize],
    kernel: &DiscreteKernel,
    p: f64,
    p_hat: &[f64; 3],
) -> f64 {
    let modes = &kernel.modes;
    let mut v = m.coeff as f64 * p.powi(m.p_pow as i32);
    for (l, w) in m.labels.iter().enumerate() {
        v *= modes[assign[l]].weight(w);
    }
    for &(a, b) in &m.dots {
        let dir = |d: DotArg| match d {
            DotArg::Label(l) => modes[assign[l as usize]].direction,
            DotArg::Momentum => *p_hat,
        };
        let (x, y) = (dir(a), dir(b));
        v *= x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    }
    v
}
