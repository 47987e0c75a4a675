//! Raw and central moment tables.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentTableError {
    #[error("a moment table needs M_0 and M_1, got {0} entries")]
    TooShort(usize),
    #[error("M_0 must be 1, got {0}")]
    Normalisation(f64),
    #[error("raw and central tables differ in length ({raw} vs {central})")]
    LengthMismatch { raw: usize, central: usize },
    #[error("non-finite moment M_{0}")]
    NonFinite(usize),
}

/// `M_m = ⟨φ|H^m|φ⟩` together with `K_m = ⟨φ|(H − M_1)^m|φ⟩` for `m = 0..=max_order`.
///
/// Both lists are kept because the central moments are usually computed directly
/// and are more accurate than what the binomial transform of the raw ones gives.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    raw: Vec<f64>,
    central: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check(values: &[f64]) -> Result<(), MomentTableError> {
    if values.len() < 2 {
        return Err(MomentTableError::TooShort(values.len()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MomentTableError::NonFinite(i));
    }
    if (values[0] - 1.0).abs() > 1e-12 {
        return Err(MomentTableError::Normalisation(values[0]));
    }
    Ok(())
}

/// `Σ_j C(m,j) x_j c^{m−j}`: moments about a point shifted by `c`.
fn recentre(values: &[f64], c: f64) -> Vec<f64> {
    (0..values.len())
        .map(|m| (0..=m).map(|j| binomial(m, j) * values[j] * c.powi((m - j) as i32)).sum())
        .collect()
}

impl MomentTable {
    pub fn from_raw(raw: Vec<f64>) -> Result<Self, MomentTableError> {
        check(&raw)?;
        let central = recentre(&raw, -raw[1]);
        Ok(MomentTable { raw, central })
    }

    /// Builds the table from the mean and the central moments `K_0 = 1, K_1 = 0, K_2, …`.
    pub fn from_central(mean: f64, mut central: Vec<f64>) -> Result<Self, MomentTableError> {
        check(&central)?;
        central[1] = 0.0;
        let raw = recentre(&central, mean);
        Ok(MomentTable { raw, central })
    }

    pub fn from_parts(raw: Vec<f64>, central: Vec<f64>) -> Result<Self, MomentTableError> {
        check(&raw)?;
        check(&central)?;
        if raw.len() != central.len() {
            return Err(MomentTableError::LengthMismatch { raw: raw.len(), central: central.len() });
        }
        Ok(MomentTable { raw, central })
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn central(&self) -> &[f64] {
        &self.central
    }

    pub fn mean(&self) -> f64 {
        self.raw[1]
    }

    pub fn max_order(&self) -> usize {
        self.raw.len() - 1
    }

    pub fn variance(&self) -> f64 {
        self.central.get(2).copied().unwrap_or(0.0)
    }

    /// The spectrum of `H + c`: central moments are unchanged.
    pub fn shifted(&self, c: f64) -> Self {
        MomentTable { raw: recentre(&self.raw, c), central: self.central.clone() }
    }

    /// The spectrum of `sH`.
    pub fn scaled(&self, s: f64) -> Self {
        let scale = |v: &[f64]| v.iter().enumerate().map(|(m, x)| x * s.powi(m as i32)).collect();
        MomentTable { raw: scale(&self.raw), central: scale(&self.central) }
    }

    pub fn truncated(&self, max_order: usize) -> Self {
        let n = (max_order + 1).min(self.raw.len());
        MomentTable { raw: self.raw[..n].to_vec(), central: self.central[..n].to_vec() }
    }
}

/// Central moments recomputed from the raw ones by the binomial transform.
pub fn central_moments(t: &MomentTable) -> Vec<f64> {
    recentre(t.raw(), -t.mean())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_distribution() {
        // equal weights at −1 and 3: mean 1, central moments ±2
        let raw: Vec<f64> = (0..6).map(|m| 0.5 * ((-1f64).powi(m) + 3f64.powi(m))).collect();
        let t = MomentTable::from_raw(raw).unwrap();
        assert_eq!(t.mean(), 1.0);
        let expected = [1.0, 0.0, 4.0, 0.0, 16.0, 0.0];
        for (a, b) in t.central().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_through_central() {
        let t = MomentTable::from_central(-0.5, vec![1.0, 0.0, 0.3, -0.1, 0.4]).unwrap();
        let back = MomentTable::from_raw(t.raw().to_vec()).unwrap();
        for (a, b) in back.central().iter().zip(t.central()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_keeps_central_moments() {
        let t = MomentTable::from_central(0.2, vec![1.0, 0.0, 0.3, 0.05, 0.4]).unwrap();
        let s = t.shifted(1.5);
        assert!((s.mean() - 1.7).abs() < 1e-15);
        assert_eq!(s.central(), t.central());
        let recomputed = central_moments(&s);
        for (a, b) in recomputed.iter().zip(t.central()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(MomentTable::from_raw(vec![1.0]).is_err());
        assert!(MomentTable::from_raw(vec![2.0, 1.0]).is_err());
        assert!(MomentTable::from_raw(vec![1.0, f64::NAN]).is_err());
    }
}
