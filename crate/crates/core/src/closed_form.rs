//! Exact closed forms for the radial phonon integrals.
//!
//! Every radial integral that appears in the vacuum moments has the shape
//! `∫₀^{k0} k^p / (k + k²)^q dk`. After the substitution `u = 1 + k` and a
//! binomial expansion the result lives in the span of `k0^a`, `ln(1 + k0)` and
//! `(1 + k0)^(-j)` with rational coefficients. Products of such integrals (as
//! they appear in multi-phonon contraction terms) stay polynomial in those three
//! atoms, so [`ClosedForm`] is a sparse polynomial over them.
//!
//! The representation is kept canonical: a monomial never carries both a
//! positive power of `k0` and a positive power of `w = 1/(1+k0)`, because
//! `k0·w = 1 − w` is applied eagerly. Two closed forms are therefore equal as
//! functions iff they are equal as maps.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Fractional bits carried by the fixed-point logarithm.
const LOG_BITS: u64 = 384;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosedFormError {
    #[error("divergent radial integral: p = {p} < q = {q} leaves k^(p-q) singular at the origin")]
    Divergent { p: u32, q: u32 },
}

/// One monomial `k0^k0_pow · ln(1+k0)^log_pow · (1+k0)^(-inv_pow)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Basis {
    pub k0_pow: u32,
    pub log_pow: u32,
    pub inv_pow: u32,
}

impl Basis {
    pub const ONE: Basis = Basis { k0_pow: 0, log_pow: 0, inv_pow: 0 };

    pub fn power(a: u32) -> Self {
        Basis { k0_pow: a, ..Self::ONE }
    }

    pub fn log() -> Self {
        Basis { log_pow: 1, ..Self::ONE }
    }

    pub fn inverse_power(j: u32) -> Self {
        Basis { inv_pow: j, ..Self::ONE }
    }

    fn times(self, other: Basis) -> Basis {
        Basis {
            k0_pow: self.k0_pow + other.k0_pow,
            log_pow: self.log_pow + other.log_pow,
            inv_pow: self.inv_pow + other.inv_pow,
        }
    }
}

/// Exact value in the `{k0^a, ln(1+k0), (1+k0)^(-j)}` algebra with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClosedForm {
    terms: BTreeMap<Basis, BigRational>,
}

impl ClosedForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::monomial(Basis::ONE, c)
    }

    pub fn monomial(basis: Basis, coeff: BigRational) -> Self {
        let mut cf = Self::zero();
        cf.add_term(basis, coeff);
        cf
    }

    /// `k0^a`.
    pub fn k0_power(a: u32) -> Self {
        Self::monomial(Basis::power(a), BigRational::one())
    }

    /// `ln(1 + k0)`.
    pub fn log() -> Self {
        Self::monomial(Basis::log(), BigRational::one())
    }

    /// `(1 + k0)^(-j)`.
    pub fn inverse_power(j: u32) -> Self {
        Self::monomial(Basis::inverse_power(j), BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Basis, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, basis: &Basis) -> BigRational {
        self.terms.get(basis).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Adds `coeff · basis`, reducing mixed `k0^a w^j` products with `k0·w = 1 − w`.
    pub fn add_term(&mut self, basis: Basis, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        if basis.k0_pow > 0 && basis.inv_pow > 0 {
            let lower = Basis { k0_pow: basis.k0_pow - 1, inv_pow: basis.inv_pow - 1, ..basis };
            let same = Basis { k0_pow: basis.k0_pow - 1, ..basis };
            self.add_term(lower, coeff.clone());
            self.add_term(same, -coeff);
            return;
        }
        let slot = self.terms.entry(basis).or_insert_with(BigRational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&basis);
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        ClosedForm { terms: self.terms.iter().map(|(b, v)| (*b, v * c)).collect() }
    }

    /// Limit as `k0 → 0⁺`: powers of `k0` and the logarithm vanish, `(1+k0)^(-j) → 1`.
    pub fn limit_at_zero(&self) -> BigRational {
        self.terms
            .iter()
            .filter(|(b, _)| b.k0_pow == 0 && b.log_pow == 0)
            .fold(BigRational::zero(), |acc, (_, v)| acc + v)
    }

    fn max_powers(&self) -> (u32, u32, u32) {
        self.terms.keys().fold((0, 0, 0), |(a, b, c), t| {
            (a.max(t.k0_pow), b.max(t.log_pow), c.max(t.inv_pow))
        })
    }

    /// Evaluates at `k0 > 0`. The sum is formed exactly (with the logarithm carried
    /// to several hundred bits) and rounded to `f64` once at the end, so heavy
    /// cancellation between binomial terms does not cost accuracy.
    pub fn evaluate(&self, k0: f64) -> f64 {
        assert!(k0.is_finite() && k0 > 0.0, "closed forms are evaluated at k0 > 0, got {k0}");
        let atoms = Atoms::new(k0, self.max_powers());
        atoms.sum(self).to_f64().unwrap_or(f64::NAN)
    }

    /// Evaluates a batch of closed forms at the same `k0`, sharing the atom powers.
    pub fn evaluate_many<'a, I>(items: I, k0: f64) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a ClosedForm>,
    {
        let items: Vec<&ClosedForm> = items.into_iter().collect();
        let maxima = items.iter().fold((0, 0, 0), |acc, cf| {
            let m = cf.max_powers();
            (acc.0.max(m.0), acc.1.max(m.1), acc.2.max(m.2))
        });
        let atoms = Atoms::new(k0, maxima);
        items.iter().map(|cf| atoms.sum(cf).to_f64().unwrap_or(f64::NAN)).collect()
    }
}

struct Atoms {
    k0: Vec<BigRational>,
    log: Vec<BigRational>,
    inv: Vec<BigRational>,
}

impl Atoms {
    fn new(k0: f64, (max_k, max_l, max_w): (u32, u32, u32)) -> Self {
        let x = BigRational::from_float(k0).expect("finite k0");
        let y = &x + BigRational::one();
        let w = y.recip();
        let l = ln_rational(&y);
        Atoms { k0: powers(&x, max_k), log: powers(&l, max_l), inv: powers(&w, max_w) }
    }

    fn sum(&self, cf: &ClosedForm) -> BigRational {
        cf.terms.iter().fold(BigRational::zero(), |acc, (b, c)| {
            acc + c
                * &self.k0[b.k0_pow as usize]
                * &self.log[b.log_pow as usize]
                * &self.inv[b.inv_pow as usize]
        })
    }
}

fn powers(x: &BigRational, n: u32) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(BigRational::one());
    for i in 1..=n as usize {
        let next = &out[i - 1] * x;
        out.push(next);
    }
    out
}

/// `2·atanh(z)` for a fixed-point `z` (scaled by `2^LOG_BITS`), `|z|` well below one.
fn two_atanh_fixed(z: &BigInt) -> BigInt {
    if z.is_negative() {
        return -two_atanh_fixed(&-z);
    }
    let z2 = (z * z) >> LOG_BITS;
    let mut term = z.clone();
    let mut sum = BigInt::zero();
    let mut n: u32 = 0;
    while !term.is_zero() {
        sum += &term / BigInt::from(2 * n + 1);
        term = (&term * &z2) >> LOG_BITS;
        n += 1;
    }
    sum << 1
}

fn ln2_fixed() -> &'static BigInt {
    static LN2: OnceLock<BigInt> = OnceLock::new();
    LN2.get_or_init(|| {
        // ln 2 = 2 atanh(1/3)
        let z = (BigInt::one() << LOG_BITS) / BigInt::from(3);
        two_atanh_fixed(&z)
    })
}

fn to_fixed(x: &BigRational) -> BigInt {
    let scaled = x.numer() << LOG_BITS;
    let (q, _) = scaled.div_rem(x.denom());
    q
}

/// Natural logarithm of a positive rational, accurate to roughly `2^-380`.
pub(crate) fn ln_rational(y: &BigRational) -> BigRational {
    assert!(y.is_positive(), "logarithm of a non-positive value");
    let approx = y.to_f64().unwrap_or(f64::MAX);
    let e = if approx.is_finite() && approx > 0.0 { approx.log2().round() as i64 } else { 0 };
    let two = BigRational::from_integer(BigInt::from(2));
    let reduced = if e >= 0 {
        y / num_traits::pow(two, e as usize)
    } else {
        y * num_traits::pow(two, (-e) as usize)
    };
    let z = (&reduced - BigRational::one()) / (&reduced + BigRational::one());
    let mut fixed = two_atanh_fixed(&to_fixed(&z));
    fixed += ln2_fixed() * BigInt::from(e);
    BigRational::new(fixed, BigInt::one() << LOG_BITS)
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `(1 + k0)^s` in the canonical basis, for any integer `s`.
fn one_plus_k0_pow(s: i64) -> ClosedForm {
    match s.cmp(&0) {
        std::cmp::Ordering::Equal => ClosedForm::one(),
        std::cmp::Ordering::Less => ClosedForm::inverse_power((-s) as u32),
        std::cmp::Ordering::Greater => {
            let s = s as u32;
            let mut cf = ClosedForm::zero();
            for i in 0..=s {
                cf.add_term(Basis::power(i), BigRational::from_integer(binomial(s, i)));
            }
            cf
        }
    }
}

/// Exact `∫₀^{k0} k^p / (k + k²)^q dk`.
pub fn radial_integral(p: u32, q: u32) -> Result<ClosedForm, ClosedFormError> {
    if p < q {
        return Err(ClosedFormError::Divergent { p, q });
    }
    let n = p - q;
    let q = q as i64;
    let mut out = ClosedForm::zero();
    // (u-1)^n u^{-q} = Σ_i C(n,i) (-1)^{n-i} u^{i-q}
    for i in 0..=n {
        let mut c = BigRational::from_integer(binomial(n, i));
        if (n - i) % 2 == 1 {
            c = -c;
        }
        let e = i as i64 - q;
        if e == -1 {
            out.add_term(Basis::log(), c);
        } else {
            // ∫₁^{1+k0} u^e du = ((1+k0)^{e+1} − 1)/(e+1)
            let c = c / BigRational::from_integer(BigInt::from(e + 1));
            out = out + one_plus_k0_pow(e + 1).scale(&c);
            out.add_term(Basis::ONE, -c);
        }
    }
    Ok(out)
}

impl Add for ClosedForm {
    type Output = ClosedForm;
    fn add(mut self, rhs: ClosedForm) -> ClosedForm {
        self += rhs;
        self
    }
}

impl AddAssign for ClosedForm {
    fn add_assign(&mut self, rhs: ClosedForm) {
        for (b, c) in rhs.terms {
            self.add_term(b, c);
        }
    }
}

impl<'a> AddAssign<&'a ClosedForm> for ClosedForm {
    fn add_assign(&mut self, rhs: &'a ClosedForm) {
        for (b, c) in &rhs.terms {
            self.add_term(*b, c.clone());
        }
    }
}

impl Neg for ClosedForm {
    type Output = ClosedForm;
    fn neg(self) -> ClosedForm {
        ClosedForm { terms: self.terms.into_iter().map(|(b, c)| (b, -c)).collect() }
    }
}

impl Sub for ClosedForm {
    type Output = ClosedForm;
    fn sub(self, rhs: ClosedForm) -> ClosedForm {
        self + (-rhs)
    }
}

impl<'a> Mul<&'a ClosedForm> for &'a ClosedForm {
    type Output = ClosedForm;
    fn mul(self, rhs: &'a ClosedForm) -> ClosedForm {
        let mut out = ClosedForm::zero();
        for (b1, c1) in &self.terms {
            for (b2, c2) in &rhs.terms {
                out.add_term(b1.times(*b2), c1 * c2);
            }
        }
        out
    }
}

impl Mul for ClosedForm {
    type Output = ClosedForm;
    fn mul(self, rhs: ClosedForm) -> ClosedForm {
        &self * &rhs
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (b, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            if i == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if negative { '-' } else { '+' })?;
            }
            let mag = c.abs();
            let mut factors: Vec<String> = Vec::new();
            if b.k0_pow == 1 {
                factors.push("k0".into());
            } else if b.k0_pow > 1 {
                factors.push(format!("k0^{}", b.k0_pow));
            }
            if b.log_pow == 1 {
                factors.push("ln(1+k0)".into());
            } else if b.log_pow > 1 {
                factors.push(format!("ln(1+k0)^{}", b.log_pow));
            }
            if b.inv_pow > 0 {
                factors.push(format!("(1+k0)^-{}", b.inv_pow));
            }
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{mag}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn trivial_integral_is_k0() {
        assert_eq!(radial_integral(0, 0).unwrap(), ClosedForm::k0_power(1));
    }

    #[test]
    fn p3_q1_closed_form() {
        // ln(1+k0) − k0 + k0²/2
        let expected = ClosedForm::log() - ClosedForm::k0_power(1)
            + ClosedForm::k0_power(2).scale(&q(1, 2));
        assert_eq!(radial_integral(3, 1).unwrap(), expected);
        let v = radial_integral(3, 1).unwrap().evaluate(1.0);
        assert!((v - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn divergent_integral_rejected() {
        assert_eq!(radial_integral(1, 2), Err(ClosedFormError::Divergent { p: 1, q: 2 }));
    }

    #[test]
    fn evaluate_atoms() {
        assert_eq!(ClosedForm::k0_power(1).evaluate(2.0), 2.0);
        assert!((ClosedForm::log().evaluate(1.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert!((ClosedForm::inverse_power(2).evaluate(1.0) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn radial_integrals_vanish_at_origin() {
        for p in 0..10 {
            for q in 0..=p.min(6) {
                assert!(radial_integral(p, q).unwrap().limit_at_zero().is_zero(), "p={p} q={q}");
            }
        }
    }

    #[test]
    fn k0_times_w_is_reduced() {
        // k0/(1+k0) = 1 − 1/(1+k0)
        let prod = &ClosedForm::k0_power(1) * &ClosedForm::inverse_power(1);
        assert_eq!(prod, ClosedForm::one() - ClosedForm::inverse_power(1));
    }

    #[test]
    fn high_precision_log() {
        let l = ln_rational(&BigRational::from_integer(10.into()));
        assert!((l.to_f64().unwrap() - 10f64.ln()).abs() < 1e-15);
        let l = ln_rational(&q(3, 2));
        assert!((l.to_f64().unwrap() - 1.5f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn display_is_readable() {
        let s = radial_integral(3, 1).unwrap().to_string();
        assert_eq!(s, "ln(1+k0) - k0 + 1/2*k0^2");
    }
}
