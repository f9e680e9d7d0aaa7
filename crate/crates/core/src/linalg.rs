use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative jitter levels tried in order before giving up.
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Lower Cholesky factor of a symmetric PD matrix.
#[derive(Debug, Clone)]
pub struct Factor {
    pub l: DMatrix<f64>,
    pub jitter: f64,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve `L x = b`.
    pub fn solve_l(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn solve_l_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    /// Solve `(L L^T) x = b`.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.solve_l_vec(b);
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Factor `k + jitter * scale * I`, walking up [`JITTER_LADDER`] on failure.
pub fn cholesky_jittered(k: &DMatrix<f64>, scale: f64) -> Result<Factor> {
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let mut last = 0.0;
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        last = jitter;
        if let Some(l) = cholesky_with(k, jitter) {
            return Ok(Factor { l, jitter });
        }
    }
    Err(Error::Factorization { jitter: last })
}

/// Factor `k + jitter * I` at exactly the given jitter.
pub fn cholesky_with(k: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let mut a = k.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += jitter;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    a.cholesky().map(|c| c.unpack())
}

pub fn min_eigenvalue_sym(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escalates_jitter_for_singular_matrix() {
        // rank-one matrix; plain factorization fails, jitter rescues it
        let k = DMatrix::from_element(3, 3, 1.0);
        let f = cholesky_jittered(&k, 1.0).unwrap();
        assert!(f.jitter > 0.0);
        let rebuilt = &f.l * f.l.transpose();
        assert!((rebuilt[(0, 1)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_jittered(&k, 1.0),
            Err(Error::Factorization { .. })
        ));
    }

    #[test]
    fn solves_and_log_det() {
        let k = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = cholesky_jittered(&k, 1.0).unwrap();
        let x = f.solve_vec(&DVector::from_vec(vec![1.0, 2.0]));
        let back = &k * &x;
        assert!((back[0] - 1.0).abs() < 1e-8 && (back[1] - 2.0).abs() < 1e-8);
        assert!((f.log_det() - 8f64.ln()).abs() < 1e-8);
    }
}
