//! Upper bounds on the lowest eigenvalue from a finite moment sequence.
//!
//! The `n`-th order bound is the smallest root of `P_n(x) = Σ_i X_i x^{n−i}`
//! with `X_0 = 1` and `X_1..X_n` solving `𝓜X + Y = 0`, where
//! `𝓜_ij = M_{2n−(i+j)}` and `Y_i = M_{2n−i}` for `i, j = 1..n`. Those roots
//! are the nodes of the `n`-point Gauss rule of the spectral measure of the trial
//! state, so the smallest one never lies below the ground-state energy and
//! decreases with `n`.
//!
//! The system is assembled from central moments normalised by `σ = K_2^{1/2}`,
//! which keeps the matrix close to the identity for moderate orders.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::moments::MomentTable;

/// Largest accepted 2-norm condition number of the normalised Hankel matrix.
pub const MAX_CONDITION: f64 = 1e13;

/// Relative slack allowed when checking that bounds decrease with the order.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("order {order} needs moments up to M_{needed}, only M_{available} available")]
    NotEnoughMoments { order: usize, needed: usize, available: usize },
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("the variance is {0:e}; the trial state is an eigenstate or the moments are invalid")]
    Degenerate(f64),
    #[error("Hankel matrix at order {order} is singular (the spectral measure has fewer points)")]
    Singular { order: usize },
    #[error("Hankel matrix at order {order} has condition number {condition:e}")]
    IllConditioned { order: usize, condition: f64 },
    #[error("order {order} produced a complex root {re} + {im}i")]
    ComplexRoot { order: usize, re: f64, im: f64 },
    #[error("bound at order {order} ({bound}) lies above order {previous_order} ({previous})")]
    NonMonotone { order: usize, bound: f64, previous_order: usize, previous: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    /// The reference point the moments were centred on (`M_1`).
    pub shift: f64,
    /// The scale they were divided by (`K_2^{1/2}`).
    pub scale: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub order: usize,
    /// `X_0..X_n` of `P_n(x) = Σ_i X_i x^{n−i}` in the original energy variable; `X_0 = 1`.
    pub coefficients: Vec<f64>,
    /// All roots in increasing order.
    pub roots: Vec<f64>,
    pub bound: f64,
    /// Distance to the next root, if there is one.
    pub gap: Option<f64>,
    pub conditioning: Conditioning,
}

/// Solves `𝓜X + Y = 0` of order `n` and returns `X_0..X_n` (with `X_0 = 1`) and the
/// 2-norm condition number of `𝓜`; `moments` must hold `M_0..M_{2n−1}`.
pub fn hankel_system(moments: &[f64], n: usize) -> Result<(Vec<f64>, f64), SolverError> {
    if n == 0 {
        return Err(SolverError::ZeroOrder);
    }
    if moments.len() < 2 * n {
        return Err(SolverError::NotEnoughMoments { order: n, needed: 2 * n - 1, available: moments.len().saturating_sub(1) });
    }
    let h = DMatrix::from_fn(n, n, |i, j| moments[2 * n - (i + 1) - (j + 1)]);
    let y = DVector::from_fn(n, |i, _| -moments[2 * n - (i + 1)]);
    let sv = h.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= smax * f64::EPSILON * n as f64 {
        return Err(SolverError::Singular { order: n });
    }
    let condition = smax / smin;
    if condition > MAX_CONDITION {
        return Err(SolverError::IllConditioned { order: n, condition });
    }
    let x = h.lu().solve(&y).ok_or(SolverError::Singular { order: n })?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    out.extend(x.iter().copied());
    Ok((out, condition))
}

/// The same system solved in exact rational arithmetic; rank deficiency is detected exactly.
pub fn hankel_system_exact(moments: &[BigRational], n: usize) -> Result<Vec<BigRational>, SolverError> {
    if n == 0 {
        return Err(SolverError::ZeroOrder);
    }
    if moments.len() < 2 * n {
        return Err(SolverError::NotEnoughMoments { order: n, needed: 2 * n - 1, available: moments.len().saturating_sub(1) });
    }
    let mut a: Vec<Vec<BigRational>> = (1..=n)
        .map(|i| {
            let mut row: Vec<BigRational> = (1..=n).map(|j| moments[2 * n - i - j].clone()).collect();
            row.push(-moments[2 * n - i].clone());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(SolverError::Singular { order: n })?;
        a.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = &a[r][col] / &a[col][col];
                for k in col..=n {
                    let delta = &factor * &a[col][k];
                    a[r][k] -= delta;
                }
            }
        }
    }
    let mut out = vec![BigRational::from_integer(1.into())];
    out.extend((0..n).map(|i| &a[i][n] / &a[i][i]));
    Ok(out)
}

fn horner(x_coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut d = 0.0;
    for c in x_coeffs {
        d = d * x + p;
        p = p * x + c;
    }
    (p, d)
}

/// Real roots of `Σ_i X_i x^{n−i}` (with `X_0 = 1`), increasing.
///
/// Eigenvalues of the companion matrix, each refined by a few Newton steps.
/// Fails when a root has an imaginary part above `1e−8 · max|root|`.
pub fn polynomial_roots(x_coeffs: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = x_coeffs.len().saturating_sub(1);
    let order = n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = x_coeffs[0];
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -x_coeffs[j + 1] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = companion.complex_eigenvalues();
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-8 * scale;
    let mut roots = Vec::with_capacity(n);
    for z in eig.iter() {
        if z.im.abs() > tol {
            return Err(SolverError::ComplexRoot { order, re: z.re, im: z.im });
        }
        let mut x = z.re;
        for _ in 0..4 {
            let (p, d) = horner(x_coeffs, x);
            if d == 0.0 {
                break;
            }
            let step = p / d;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `X` of `σ^n q((x−s)/σ)` given `X` of `q` in the scaled variable.
fn unscale(x_coeffs: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    let n = x_coeffs.len() - 1;
    // ascending powers: a_j multiplies y^j
    let mut ascending = vec![0.0; n + 1];
    for (i, c) in x_coeffs.iter().enumerate() {
        let j = n - i;
        let w = c * scale.powi((n - j) as i32);
        for k in 0..=j {
            ascending[k] += w * binomial(j, k) * (-shift).powi((j - k) as i32);
        }
    }
    ascending.reverse();
    ascending
}

/// Bound of order `n` from a moment table holding at least `M_0..M_{2n−1}`.
pub fn bound_at_order(table: &MomentTable, n: usize) -> Result<BoundResult, SolverError> {
    if n == 0 {
        return Err(SolverError::ZeroOrder);
    }
    let needed = 2 * n - 1;
    if table.max_order() < needed {
        return Err(SolverError::NotEnoughMoments { order: n, needed, available: table.max_order() });
    }
    let shift = table.mean();
    if n == 1 {
        return Ok(BoundResult {
            order: 1,
            coefficients: vec![1.0, -shift],
            roots: vec![shift],
            bound: shift,
            gap: None,
            conditioning: Conditioning { shift, scale: 1.0, condition: 1.0 },
        });
    }
    let var = table.variance();
    if !(var > 0.0) {
        return Err(SolverError::Degenerate(var));
    }
    let sigma = var.sqrt();
    let mu: Vec<f64> = table.central()[..=needed]
        .iter()
        .enumerate()
        .map(|(j, k)| k / sigma.powi(j as i32))
        .collect();
    let (x, condition) = hankel_system(&mu, n)?;
    let scaled_roots = polynomial_roots(&x)?;
    let roots: Vec<f64> = scaled_roots.iter().map(|y| shift + sigma * y).collect();
    Ok(BoundResult {
        order: n,
        coefficients: unscale(&x, shift, sigma),
        bound: roots[0],
        gap: roots.get(1).map(|r| r - roots[0]),
        roots,
        conditioning: Conditioning { shift, scale: sigma, condition },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequence {
    /// Bounds of order `1..=bounds.len()`.
    pub bounds: Vec<BoundResult>,
    /// Why the sequence stopped before the requested order, if it did.
    pub failure: Option<SolverError>,
}

impl BoundSequence {
    pub fn values(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.bound).collect()
    }

    pub fn best(&self) -> Option<&BoundResult> {
        self.bounds.last()
    }
}

/// Bounds of order `1..=max_order`, stopping at the first order that fails.
pub fn bound_sequence(table: &MomentTable, max_order: usize) -> BoundSequence {
    let mut bounds: Vec<BoundResult> = Vec::with_capacity(max_order);
    let mut failure = None;
    for n in 1..=max_order {
        match bound_at_order(table, n) {
            Ok(b) => {
                if let Some(prev) = bounds.last() {
                    let slack = MONOTONICITY_SLACK * prev.bound.abs().max(1.0);
                    if b.bound > prev.bound + slack {
                        failure = Some(SolverError::NonMonotone {
                            order: n,
                            bound: b.bound,
                            previous_order: prev.order,
                            previous: prev.bound,
                        });
                        break;
                    }
                }
                bounds.push(b);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    BoundSequence { bounds, failure }
}

/// Moments of `H + c`.
pub fn shift_spectrum(table: &MomentTable, c: f64) -> MomentTable {
    table.shifted(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub lower: f64,
    pub upper: f64,
}

/// Both Gauss nodes of the two-point rule from `M_1`, `K_2` and `K_3`:
/// `M_1 + [K_3/K_2 ∓ ((K_3/K_2)² + 4K_2)^{1/2}]/2`.
pub fn second_order_bound_closed(m1: f64, k2: f64, k3: f64) -> Result<SecondOrder, SolverError> {
    if !(k2 > 0.0) {
        return Err(SolverError::Degenerate(k2));
    }
    let r = k3 / k2;
    let root = (r * r + 4.0 * k2).sqrt();
    // avoid cancellation in the smaller-magnitude root
    let (a, b) = if r >= 0.0 {
        let big = 0.5 * (r + root);
        (-k2 / big, big)
    } else {
        let small = 0.5 * (r - root);
        (small, -k2 / small)
    };
    Ok(SecondOrder { lower: m1 + a, upper: m1 + b })
}

/// `true` when all leading principal minors of the exact Hankel matrix of order `n` are positive.
pub fn is_positive_definite_exact(moments: &[BigRational], n: usize) -> bool {
    if moments.len() < 2 * n - 1 {
        return false;
    }
    let mut a: Vec<Vec<BigRational>> =
        (0..n).map(|i| (0..n).map(|j| moments[i + j].clone()).collect()).collect();
    for col in 0..n {
        if !a[col][col].is_positive() {
            return false;
        }
        for r in col + 1..n {
            let factor = &a[r][col] / &a[col][col];
            for k in col..n {
                let delta = &factor * &a[col][k];
                a[r][k] -= delta;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn discrete(points: &[(f64, f64)], max: usize) -> MomentTable {
        let raw = (0..=max).map(|m| points.iter().map(|(w, x)| w * x.powi(m as i32)).sum()).collect();
        MomentTable::from_raw(raw).unwrap()
    }

    #[test]
    fn recovers_discrete_spectrum() {
        let pts = [(0.5, -2.0), (0.3, 0.5), (0.2, 3.0)];
        let t = discrete(&pts, 5);
        let b = bound_at_order(&t, 3).unwrap();
        for (r, (_, x)) in b.roots.iter().zip(pts) {
            assert!((r - x).abs() < 1e-10, "{r} vs {x}");
        }
        assert!((b.gap.unwrap() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn coefficients_in_original_variable() {
        let t = discrete(&[(0.5, 1.0), (0.5, 3.0)], 3);
        let b = bound_at_order(&t, 2).unwrap();
        // (x−1)(x−3) = x² − 4x + 3
        assert_eq!(b.coefficients[0], 1.0);
        assert!((b.coefficients[1] + 4.0).abs() < 1e-12);
        assert!((b.coefficients[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn order_one_hankel() {
        let (x, _) = hankel_system(&[1.0, 0.7], 1).unwrap();
        assert_eq!(x, vec![1.0, -0.7]);
        let two_point: Vec<f64> = (0..4).map(|m| 0.75 * (-1f64).powi(m) + 0.25 * 2f64.powi(m)).collect();
        let (x, _) = hankel_system(&two_point, 2).unwrap();
        let r = polynomial_roots(&x).unwrap();
        assert!((r[0] + 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn order_one_is_mean() {
        let t = discrete(&[(0.25, -1.0), (0.75, 2.0)], 1);
        assert_eq!(bound_at_order(&t, 1).unwrap().bound, t.mean());
    }

    #[test]
    fn closed_second_order_matches_hankel() {
        let t = discrete(&[(0.6, -1.0), (0.3, 0.2), (0.1, 2.0)], 3);
        let c = t.central();
        let closed = second_order_bound_closed(t.mean(), c[2], c[3]).unwrap();
        let h = bound_at_order(&t, 2).unwrap();
        assert!((closed.lower - h.roots[0]).abs() < 1e-13);
        assert!((closed.upper - h.roots[1]).abs() < 1e-13);
        assert!(matches!(second_order_bound_closed(0.0, 0.0, 1.0), Err(SolverError::Degenerate(_))));
    }

    #[test]
    fn sequence_decreases_and_stops_on_support() {
        let t = discrete(&[(0.6, -1.0), (0.4, 2.0)], 5);
        let s = bound_sequence(&t, 3);
        assert_eq!(s.bounds.len(), 2);
        assert!(matches!(s.failure, Some(SolverError::Singular { order: 3 })));
        assert!(s.bounds[1].bound < s.bounds[0].bound);
        assert!((s.bounds[1].bound + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenstate_is_degenerate() {
        let t = discrete(&[(1.0, -0.7)], 3);
        let s = bound_sequence(&t, 2);
        assert_eq!(s.bounds.len(), 1);
        assert!(matches!(s.failure, Some(SolverError::Degenerate(_))));
    }

    #[test]
    fn missing_moments() {
        let t = discrete(&[(0.5, 0.0), (0.5, 1.0)], 2);
        assert!(matches!(bound_at_order(&t, 2), Err(SolverError::NotEnoughMoments { .. })));
    }

    #[test]
    fn exact_system_agrees() {
        let q = |n: i64| BigRational::from_integer(BigInt::from(n));
        // equal weights at 0 and 2: M = 1, 1, 2, 4
        let m = [q(1), q(1), q(2), q(4)];
        // x(x−2) = x² − 2x
        let x = hankel_system_exact(&m, 2).unwrap();
        assert_eq!(x, vec![q(1), q(-2), q(0)]);
        let f: Vec<f64> = [1.0, 1.0, 2.0, 4.0].to_vec();
        let (xf, _) = hankel_system(&f, 2).unwrap();
        assert!((xf[1] + 2.0).abs() < 1e-14 && xf[2].abs() < 1e-14);
        assert!(is_positive_definite_exact(&m, 2));
        assert!(!is_positive_definite_exact(&[q(1), q(1), q(1)], 2));
    }

    #[test]
    fn complex_roots_are_rejected() {
        // x² + 1
        assert!(matches!(polynomial_roots(&[1.0, 0.0, 1.0]), Err(SolverError::ComplexRoot { .. })));
        assert_eq!(polynomial_roots(&[1.0, -3.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let r = polynomial_roots(&[1.0, -6.0, 11.0, -6.0]).unwrap();
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
