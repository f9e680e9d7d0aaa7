//! Box-constrained design spaces. Everything downstream of the oracles works
//! in the unit cube; [`DesignBox`] converts at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DesignBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameter("design box has no dimensions".into()));
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "bounds of dimension {d} must be finite with lower < upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dims: usize) -> Self {
        Self {
            lower: vec![0.0; dims],
            upper: vec![1.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| lo + v * (hi - lo))
            .collect()
    }
}

/// Clamp every coordinate into `[0, 1]`.
pub fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_round_trip() {
        let b = DesignBox::new(vec![-1.0, 10.0], vec![1.0, 20.0]).unwrap();
        let x = vec![0.5, 12.5];
        let u = b.to_unit(&x);
        assert_eq!(u, vec![0.75, 0.25]);
        assert_eq!(b.from_unit(&u), x);
        assert!(b.contains(&x));
        assert!(!b.contains(&[2.0, 12.0]));
    }

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(DesignBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(DesignBox::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(DesignBox::new(vec![], vec![]).is_err());
    }
}
