//! Isotropic averages of products of dot products between unit vectors.
//!
//! A [`DotMonomial`] is a product `∏ (û·v̂)` over labelled unit vectors. Its
//! average over independent uniform orientations of every vector is computed
//! by eliminating one vector at a time: a vector that occurs in `2n` factors
//! `(û·x₁)…(û·x₂ₙ)` averages to `Σ_pairings ∏(x_a·x_b) / (2n+1)!!`, and any
//! vector of odd degree makes the whole average vanish.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type VectorId = u16;

/// Product of dot products `(û·v̂)`, stored as a multiset of unordered pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DotMonomial {
    factors: BTreeMap<(VectorId, VectorId), u32>,
}

impl DotMonomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (VectorId, VectorId)>>(pairs: I) -> Self {
        let mut m = Self::new();
        for (u, v) in pairs {
            m.push(u, v);
        }
        m
    }

    pub fn push(&mut self, u: VectorId, v: VectorId) {
        *self.factors.entry((u.min(v), u.max(v))).or_insert(0) += 1;
    }

    pub fn factors(&self) -> impl Iterator<Item = ((VectorId, VectorId), u32)> + '_ {
        self.factors.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Number of factor slots occupied by `v`; a self pair `(v̂·v̂)` counts twice.
    pub fn degree(&self, v: VectorId) -> u32 {
        self.factors
            .iter()
            .map(|(&(a, b), &m)| m * ((a == v) as u32 + (b == v) as u32))
            .sum()
    }

    fn degrees(&self) -> BTreeMap<VectorId, u32> {
        let mut d = BTreeMap::new();
        for (&(a, b), &m) in &self.factors {
            *d.entry(a).or_insert(0) += m;
            *d.entry(b).or_insert(0) += m;
        }
        d
    }

    /// Drops `(v̂·v̂) = 1` factors.
    fn without_self_pairs(mut self) -> Self {
        self.factors.retain(|&(a, b), _| a != b);
        self
    }

    /// Relabels vectors in order of first appearance so equivalent monomials share a cache key.
    fn relabelled(&self) -> Self {
        let mut map: BTreeMap<VectorId, VectorId> = BTreeMap::new();
        let mut next = 0;
        let mut out = DotMonomial::new();
        for (&(a, b), &m) in &self.factors {
            for v in [a, b] {
                map.entry(v).or_insert_with(|| {
                    next += 1;
                    next - 1
                });
            }
            for _ in 0..m {
                out.push(map[&a], map[&b]);
            }
        }
        out
    }
}

/// Which vector [`AngularCache`] eliminates next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// Smallest even degree first; keeps the pairing sums short.
    #[default]
    LowestDegree,
    HighestDegree,
}

/// Memo table for repeated averages; the contraction engine keeps one per worker.
#[derive(Debug, Default)]
pub struct AngularCache {
    memo: HashMap<DotMonomial, BigRational>,
    order: EliminationOrder,
}

impl AngularCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_order(order: EliminationOrder) -> Self {
        AngularCache { memo: HashMap::new(), order }
    }

    pub fn average(&mut self, m: &DotMonomial) -> BigRational {
        let m = m.clone().without_self_pairs();
        if m.is_empty() {
            return BigRational::one();
        }
        let key = m.relabelled();
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let v = self.reduce(&key);
        self.memo.insert(key, v.clone());
        v
    }

    fn reduce(&mut self, m: &DotMonomial) -> BigRational {
        let degrees = m.degrees();
        if degrees.values().any(|d| d % 2 == 1) {
            return BigRational::zero();
        }
        let pick = match self.order {
            EliminationOrder::LowestDegree => degrees.iter().min_by_key(|(v, d)| (**d, **v)),
            EliminationOrder::HighestDegree => {
                degrees.iter().max_by_key(|(v, d)| (**d, std::cmp::Reverse(**v)))
            }
        };
        let (&u, &deg) = pick.expect("non-empty monomial");
        let mut partners = Vec::with_capacity(deg as usize);
        let mut rest = DotMonomial::new();
        for (&(a, b), &mult) in &m.factors {
            if a == u || b == u {
                let other = if a == u { b } else { a };
                partners.extend(std::iter::repeat_n(other, mult as usize));
            } else {
                for _ in 0..mult {
                    rest.push(a, b);
                }
            }
        }
        let mut total = BigRational::zero();
        self.sum_pairings(&mut partners, &rest, &mut total);
        total / BigRational::from_integer(double_factorial(deg + 1))
    }

    fn sum_pairings(&mut self, pending: &mut Vec<VectorId>, acc: &DotMonomial, total: &mut BigRational) {
        if pending.is_empty() {
            *total += self.average(acc);
            return;
        }
        let first = pending.remove(0);
        for i in 0..pending.len() {
            let partner = pending.remove(i);
            let mut next = acc.clone();
            next.push(first, partner);
            self.sum_pairings(pending, &next, total);
            pending.insert(i, partner);
        }
        pending.insert(0, first);
    }
}

fn double_factorial(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    let mut k = n;
    while k > 1 {
        acc *= BigInt::from(k);
        k -= 2;
    }
    acc
}

/// Exact average of `m` over independent uniform orientations of all its vectors.
pub fn angular_average(m: &DotMonomial) -> BigRational {
    AngularCache::new().average(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn odd_parity_vanishes() {
        assert!(angular_average(&DotMonomial::from_pairs([(0, 1)])).is_zero());
        assert!(angular_average(&DotMonomial::from_pairs([(0, 1), (0, 1), (0, 1)])).is_zero());
    }

    #[test]
    fn squared_cosine() {
        assert_eq!(angular_average(&DotMonomial::from_pairs([(0, 1), (0, 1)])), q(1, 3));
    }

    #[test]
    fn fourth_power_of_cosine() {
        let m = DotMonomial::from_pairs([(0, 1); 4]);
        assert_eq!(angular_average(&m), q(1, 5));
    }

    #[test]
    fn triangle() {
        let m = DotMonomial::from_pairs([(0, 1), (1, 2), (2, 0)]);
        assert_eq!(angular_average(&m), q(1, 9));
    }

    #[test]
    fn self_pairs_are_one() {
        let m = DotMonomial::from_pairs([(3, 3), (0, 1), (1, 0)]);
        assert_eq!(angular_average(&m), q(1, 3));
        assert_eq!(angular_average(&DotMonomial::new()), BigRational::one());
    }

    #[test]
    fn elimination_order_does_not_matter() {
        let cases = [
            vec![(0, 1), (0, 1), (1, 2), (1, 2)],
            vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)],
            vec![(0, 1), (0, 1), (0, 2), (0, 2), (1, 2), (1, 2)],
            vec![(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (3, 4)],
        ];
        for pairs in cases {
            let m = DotMonomial::from_pairs(pairs);
            let low = AngularCache::with_order(EliminationOrder::LowestDegree).average(&m);
            let high = AngularCache::with_order(EliminationOrder::HighestDegree).average(&m);
            assert_eq!(low, high, "{m:?}");
        }
        let m = DotMonomial::from_pairs([(0, 1), (0, 1), (1, 2), (1, 2)]);
        assert_eq!(angular_average(&m), q(1, 9));
    }
}
