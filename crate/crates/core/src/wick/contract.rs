//! Enumeration of full vacuum contractions of a product of ladder monomials.
//!
//! A product `L_{i_1} … L_{i_m}` is processed right to left. Creators of
//! factors already placed stay open until an annihilator further left closes
//! them; the vacuum expectation keeps only placements where every annihilator
//! closes an open creator and nothing is open at the end. Labels joined by
//! contractions form one wave vector (a class), so each diagram reduces to a
//! [`TermShape`]: per-class weights, dot products between classes, and a power
//! of `P`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{DotArg, LabelWeight, OperatorMonomial};

/// A contracted term up to its integer multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermShape {
    /// Combined weights of each class, numbered by first appearance from the left.
    pub classes: Vec<LabelWeight>,
    /// Sorted dot products between class directions (or `P̂`).
    pub dots: Vec<(DotArg, DotArg)>,
    pub p_pow: u8,
}

impl TermShape {
    /// The shape of a c-number monomial.
    pub fn of_constant(m: &OperatorMonomial) -> Self {
        let mut dots: Vec<(DotArg, DotArg)> = m.dots.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        dots.sort_unstable();
        TermShape { classes: m.labels.clone(), dots, p_pow: m.p_pow }
    }

    /// `2 · #classes − #amplitudes`; zero for every term of an intensive quantity.
    pub fn volume_half_exponent(&self) -> i32 {
        self.classes.iter().map(|c| 2 - c.amplitude_count() as i32).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Contractions {
    pub terms: BTreeMap<TermShape, i128>,
    /// Number of diagrams visited, before merging equal shapes.
    pub diagrams: u64,
}

impl Contractions {
    fn merge(&mut self, other: Contractions) {
        for (k, v) in other.terms {
            *self.terms.entry(k).or_insert(0) += v;
        }
        self.diagrams += other.diagrams;
        self.terms.retain(|_, v| *v != 0);
    }
}

struct Prepared {
    creators: Vec<u8>,
    annihilators: Vec<u8>,
}

struct Search<'a> {
    monomials: &'a [OperatorMonomial],
    prepared: Vec<Prepared>,
    order: usize,
    connected: bool,
    max_annihilators: usize,
}

#[derive(Clone, Default)]
struct State {
    /// Monomial index at each position.
    choice: Vec<usize>,
    /// First global label of each position.
    offset: Vec<usize>,
    next_label: usize,
    /// Open creators as `(global label, position)`.
    open: Vec<(usize, usize)>,
    /// Contracted `(annihilator label, creator label, annihilator pos, creator pos)`.
    pairs: Vec<(usize, usize, usize, usize)>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

impl<'a> Search<'a> {
    fn new(monomials: &'a [OperatorMonomial], order: usize, connected: bool) -> Self {
        let prepared: Vec<Prepared> = monomials
            .iter()
            .map(|m| Prepared { creators: m.creators().collect(), annihilators: m.annihilators().collect() })
            .collect();
        let max_annihilators = prepared.iter().map(|p| p.annihilators.len()).max().unwrap_or(0);
        Search { monomials, prepared, order, connected, max_annihilators }
    }

    fn feasible(&self, idx: usize, pos: usize, open: usize) -> bool {
        let p = &self.prepared[idx];
        if p.annihilators.len() > open {
            return false;
        }
        let after = open - p.annihilators.len() + p.creators.len();
        if pos == 0 {
            after == 0
        } else {
            after <= pos * self.max_annihilators
        }
    }

    /// Places monomial `idx` at `pos`, visiting each way its annihilators can close open creators.
    fn place(&self, st: &mut State, pos: usize, idx: usize, out: &mut Contractions, then: &dyn Fn(&Self, &mut State, &mut Contractions)) {
        let offset = st.next_label;
        st.choice[pos] = idx;
        st.offset[pos] = offset;
        st.next_label += self.monomials[idx].labels.len();
        self.assign(st, pos, idx, 0, out, then);
        st.next_label = offset;
    }

    fn assign(
        &self,
        st: &mut State,
        pos: usize,
        idx: usize,
        j: usize,
        out: &mut Contractions,
        then: &dyn Fn(&Self, &mut State, &mut Contractions),
    ) {
        let prep = &self.prepared[idx];
        if j == prep.annihilators.len() {
            let before = st.open.len();
            for &c in &prep.creators {
                st.open.push((st.offset[pos] + c as usize, pos));
            }
            then(self, st, out);
            st.open.truncate(before);
            return;
        }
        let label = st.offset[pos] + prep.annihilators[j] as usize;
        for i in 0..st.open.len() {
            let (cl, cp) = st.open.remove(i);
            st.pairs.push((label, cl, pos, cp));
            self.assign(st, pos, idx, j + 1, out, then);
            st.pairs.pop();
            st.open.insert(i, (cl, cp));
        }
    }

    fn descend(&self, st: &mut State, pos: usize, out: &mut Contractions) {
        for idx in 0..self.monomials.len() {
            if self.feasible(idx, pos, st.open.len()) {
                self.place(st, pos, idx, out, &|s, st, out| s.next(st, pos, out));
            }
        }
    }

    fn next(&self, st: &mut State, pos: usize, out: &mut Contractions) {
        if pos == 0 {
            self.leaf(st, out);
        } else {
            self.descend(st, pos - 1, out);
        }
    }

    fn leaf(&self, st: &State, out: &mut Contractions) {
        out.diagrams += 1;
        if self.connected {
            let mut parent: Vec<usize> = (0..self.order).collect();
            for &(_, _, a, c) in &st.pairs {
                union(&mut parent, a, c);
            }
            if (0..self.order).any(|p| find(&mut parent, p) != 0) {
                return;
            }
        }
        let mut parent: Vec<usize> = (0..st.next_label).collect();
        for &(a, c, _, _) in &st.pairs {
            union(&mut parent, a, c);
        }
        let mut class_of_root = vec![usize::MAX; st.next_label];
        let mut class_of = vec![0u8; st.next_label];
        let mut classes: Vec<LabelWeight> = Vec::new();
        let mut dots = Vec::new();
        let mut p_pow = 0u8;
        let mut coeff: i128 = 1;
        for pos in 0..self.order {
            let m = &self.monomials[st.choice[pos]];
            coeff *= m.coeff as i128;
            p_pow += m.p_pow;
            for (l, w) in m.labels.iter().enumerate() {
                let g = st.offset[pos] + l;
                let r = find(&mut parent, g);
                if class_of_root[r] == usize::MAX {
                    class_of_root[r] = classes.len();
                    classes.push(LabelWeight::default());
                }
                let c = class_of_root[r];
                class_of[g] = c as u8;
                classes[c] = classes[c].combine(*w);
            }
        }
        for pos in 0..self.order {
            let m = &self.monomials[st.choice[pos]];
            for &(a, b) in &m.dots {
                let map = |d: DotArg| match d {
                    DotArg::Label(l) => DotArg::Label(class_of[st.offset[pos] + l as usize]),
                    DotArg::Momentum => DotArg::Momentum,
                };
                let (a, b) = (map(a), map(b));
                dots.push((a.min(b), a.max(b)));
            }
        }
        dots.sort_unstable();
        *out.terms.entry(TermShape { classes, dots, p_pow }).or_insert(0) += coeff;
    }
}

/// All full contractions of `⟨0|L^order|0⟩` with `L = Σ monomials`, merged by shape.
///
/// With `connected` only diagrams whose factors are linked into one component are
/// kept; these sum to the `order`-th cumulant. The work is split over the choices
/// for the two rightmost factors and run on the current rayon pool; the merge is
/// an exact integer sum, so the result does not depend on scheduling.
pub fn enumerate_contractions(monomials: &[OperatorMonomial], order: usize, connected: bool) -> Contractions {
    let mut total = Contractions::default();
    if order == 0 {
        total.terms.insert(TermShape { classes: Vec::new(), dots: Vec::new(), p_pow: 0 }, 1);
        total.diagrams = 1;
        return total;
    }
    let search = Search::new(monomials, order, connected);
    let fresh = || State {
        choice: vec![0; order],
        offset: vec![0; order],
        ..State::default()
    };
    let last = order - 1;
    let mut seeds: Vec<(usize, Option<usize>)> = Vec::new();
    for i in 0..monomials.len() {
        if !search.feasible(i, last, 0) {
            continue;
        }
        if order == 1 {
            seeds.push((i, None));
            continue;
        }
        for j in 0..monomials.len() {
            seeds.push((i, Some(j)));
        }
    }
    let parts: Vec<Contractions> = seeds
        .par_iter()
        .map(|&(i, j)| {
            let mut out = Contractions::default();
            let mut st = fresh();
            search.place(&mut st, last, i, &mut out, &|s, st, out| match j {
                None => s.leaf(st, out),
                Some(j) => {
                    if s.feasible(j, last - 1, st.open.len()) {
                        s.place(st, last - 1, j, out, &|s, st, out| s.next(st, last - 1, out));
                    }
                }
            });
            out
        })
        .collect();
    for p in parts {
        total.merge(p);
    }
    total
}
