//! Stationary kernels, Gram-matrix assembly, and the two-fidelity
//! coregionalization (ICM) kernel.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    #[default]
    SquaredExponential,
    #[serde(rename = "matern-5/2")]
    Matern52,
}

impl KernelKind {
    /// Unit-variance correlation as a function of the scaled squared distance.
    #[inline]
    pub fn correlation(self, r2: f64) -> f64 {
        match self {
            KernelKind::SquaredExponential => (-0.5 * r2).exp(),
            KernelKind::Matern52 => {
                let r = r2.sqrt();
                let s5r = 5f64.sqrt() * r;
                (1.0 + s5r + 5.0 * r2 / 3.0) * (-s5r).exp()
            }
        }
    }

    /// Returns the correlation and `c` such that
    /// `d corr / d log(lengthscale_d) = c * diff_d^2 / lengthscale_d^2`.
    #[inline]
    pub fn correlation_and_slope(self, r2: f64) -> (f64, f64) {
        match self {
            KernelKind::SquaredExponential => {
                let k = (-0.5 * r2).exp();
                (k, k)
            }
            KernelKind::Matern52 => {
                let r = r2.sqrt();
                let s5r = 5f64.sqrt() * r;
                let e = (-s5r).exp();
                ((1.0 + s5r + 5.0 * r2 / 3.0) * e, 5.0 / 3.0 * (1.0 + s5r) * e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub kind: KernelKind,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, kind: KernelKind) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidParameter("at least one lengthscale required".into()));
        }
        if lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("lengthscales must be positive".into()));
        }
        if !(signal_variance > 0.0 && signal_variance.is_finite()) {
            return Err(Error::InvalidParameter("signal variance must be positive".into()));
        }
        Ok(Self {
            lengthscales,
            signal_variance,
            kind,
        })
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    #[inline]
    pub(crate) fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum()
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * self.kind.correlation(self.scaled_sq_dist(a, b))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub fn kernel_eval(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    params.check(a)?;
    params.check(b)?;
    Ok(params.eval_unchecked(a, b))
}

pub fn kernel_matrix<A, B>(a: &[A], b: &[B], params: &KernelParams) -> Result<DMatrix<f64>>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    for x in a.iter().map(AsRef::as_ref).chain(b.iter().map(AsRef::as_ref)) {
        params.check(x)?;
    }
    Ok(kernel_matrix_unchecked(a, b, params))
}

pub(crate) fn kernel_matrix_unchecked<A, B>(a: &[A], b: &[B], params: &KernelParams) -> DMatrix<f64>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        params.eval_unchecked(a[i].as_ref(), b[j].as_ref())
    })
}

/// Symmetric Gram matrix, computing each off-diagonal pair once.
pub(crate) fn gram_unchecked<A: AsRef<[f64]>>(a: &[A], params: &KernelParams) -> DMatrix<f64> {
    let n = a.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = params.signal_variance;
        for i in j + 1..n {
            let v = params.eval_unchecked(a[i].as_ref(), a[j].as_ref());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Fidelity level of an observation. The ordering matches the rows of the
/// coregionalization matrix: high fidelity first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Hf,
    Lf,
}

impl Fidelity {
    pub fn index(self) -> usize {
        match self {
            Fidelity::Hf => 0,
            Fidelity::Lf => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoregMatrix {
    pub sigma_hf: f64,
    pub sigma_lf: f64,
    pub rho: f64,
}

impl CoregMatrix {
    pub fn new(sigma_hf: f64, sigma_lf: f64, rho: f64) -> Result<Self> {
        if !(sigma_hf > 0.0 && sigma_lf > 0.0 && sigma_hf.is_finite() && sigma_lf.is_finite()) {
            return Err(Error::InvalidParameter("coregionalization scales must be positive".into()));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
        }
        Ok(Self {
            sigma_hf,
            sigma_lf,
            rho,
        })
    }

    #[inline]
    pub fn entry(&self, a: Fidelity, b: Fidelity) -> f64 {
        match (a, b) {
            (Fidelity::Hf, Fidelity::Hf) => self.sigma_hf * self.sigma_hf,
            (Fidelity::Lf, Fidelity::Lf) => self.sigma_lf * self.sigma_lf,
            _ => self.rho * self.sigma_hf * self.sigma_lf,
        }
    }
}

pub fn coreg_b(c: &CoregMatrix) -> Result<Matrix2<f64>> {
    let c = CoregMatrix::new(c.sigma_hf, c.sigma_lf, c.rho)?;
    Ok(Matrix2::new(
        c.entry(Fidelity::Hf, Fidelity::Hf),
        c.entry(Fidelity::Hf, Fidelity::Lf),
        c.entry(Fidelity::Lf, Fidelity::Hf),
        c.entry(Fidelity::Lf, Fidelity::Lf),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedInput {
    pub xi: Vec<f64>,
    pub fidelity: Fidelity,
}

impl AugmentedInput {
    pub fn new(xi: Vec<f64>, fidelity: Fidelity) -> Self {
        Self { xi, fidelity }
    }
}

pub fn icm_kernel(
    a: &AugmentedInput,
    b: &AugmentedInput,
    c: &CoregMatrix,
    params: &KernelParams,
) -> Result<f64> {
    Ok(c.entry(a.fidelity, b.fidelity) * kernel_eval(&a.xi, &b.xi, params)?)
}

pub fn icm_matrix(
    a: &[AugmentedInput],
    b: &[AugmentedInput],
    c: &CoregMatrix,
    params: &KernelParams,
) -> Result<DMatrix<f64>> {
    for x in a.iter().chain(b) {
        params.check(&x.xi)?;
    }
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        c.entry(a[i].fidelity, b[j].fidelity) * params.eval_unchecked(&a[i].xi, &b[j].xi)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue_sym;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(ls: &[f64], var: f64) -> KernelParams {
        KernelParams::new(ls.to_vec(), var, KernelKind::SquaredExponential).unwrap()
    }

    /// Matérn-5/2 straight from its closed form, one coordinate at a time.
    fn matern52_reference(a: &[f64], b: &[f64], ls: &[f64], var: f64) -> f64 {
        let mut r2 = 0.0;
        for i in 0..a.len() {
            r2 += ((a[i] - b[i]) / ls[i]).powi(2);
        }
        let r = r2.sqrt();
        var * (1.0 + 5f64.sqrt() * r + 5.0 / 3.0 * r * r) * (-(5f64.sqrt()) * r).exp()
    }

    #[test]
    fn self_covariance_is_signal_variance() {
        let p = se(&[0.3, 0.7], 2.0);
        assert_eq!(kernel_eval(&[0.1, 0.2], &[0.1, 0.2], &p).unwrap(), 2.0);
    }

    #[test]
    fn squared_exponential_at_one_lengthscale() {
        let p = se(&[0.4], 1.0);
        let v = kernel_eval(&[0.0], &[0.4], &p).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn matern_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let ls: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
            let p = KernelParams::new(ls.clone(), 1.7, KernelKind::Matern52).unwrap();
            let v = kernel_eval(&a, &b, &p).unwrap();
            assert!((v - matern52_reference(&a, &b, &ls, 1.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = se(&[0.3, 0.3], 1.0);
        assert!(matches!(
            kernel_eval(&[0.0], &[0.0, 1.0], &p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(kernel_matrix(&[vec![0.0]], &[vec![0.0, 1.0]], &p).is_err());
    }

    #[test]
    fn matrix_shapes_and_entries() {
        let p = se(&[0.5, 0.2], 1.3);
        let single = kernel_matrix(&[vec![0.3, 0.3]], &[vec![0.3, 0.3]], &p).unwrap();
        assert_eq!(single.shape(), (1, 1));
        assert_eq!(single[(0, 0)], 1.3);
        let a = vec![vec![0.1, 0.2], vec![0.5, 0.9]];
        let b = vec![vec![0.0, 0.0], vec![0.3, 0.1], vec![1.0, 1.0]];
        let k = kernel_matrix(&a, &b, &p).unwrap();
        assert_eq!(k.shape(), (2, 3));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(k[(i, j)], kernel_eval(&a[i], &b[j], &p).unwrap());
            }
        }
    }

    #[test]
    fn five_random_points_give_psd_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random(), rng.random()]).collect();
        let k = kernel_matrix(&pts, &pts, &se(&[0.3, 0.6], 1.0)).unwrap();
        assert!(min_eigenvalue_sym(&k) >= -1e-8);
    }

    #[test]
    fn coregionalization_examples() {
        let b = coreg_b(&CoregMatrix::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(b, Matrix2::identity());
        let b = coreg_b(&CoregMatrix::new(1.0, 1.0, 0.5).unwrap()).unwrap();
        assert_eq!(b, Matrix2::new(1.0, 0.5, 0.5, 1.0));

        // eigenvalues of [[4, 0.9], [0.9, 0.25]] from the characteristic polynomial
        let b = coreg_b(&CoregMatrix::new(2.0, 0.5, 0.9).unwrap()).unwrap();
        let (tr, det): (f64, f64) = (4.25, 4.0 * 0.25 - 0.81);
        let disc = (tr * tr - 4.0 * det).sqrt();
        let (lo, hi) = ((tr - disc) / 2.0, (tr + disc) / 2.0);
        assert!(lo > 0.0 && hi > 0.0);
        let eig = b.symmetric_eigenvalues();
        let (mut e0, mut e1) = (eig[0], eig[1]);
        if e0 > e1 {
            std::mem::swap(&mut e0, &mut e1);
        }
        assert!((e0 - lo).abs() < 1e-12 && (e1 - hi).abs() < 1e-12);
    }

    #[test]
    fn coregionalization_rejects_rho_outside_range() {
        assert!(CoregMatrix::new(1.0, 1.0, 1.0).is_err());
        assert!(CoregMatrix::new(1.0, 1.0, -0.1).is_err());
        let raw = CoregMatrix {
            sigma_hf: 1.0,
            sigma_lf: 1.0,
            rho: 1.2,
        };
        assert!(coreg_b(&raw).is_err());
    }

    #[test]
    fn coregionalization_positive_definite_on_rho_grid() {
        for step in 0..=99 {
            let rho = step as f64 / 100.0;
            for (h, l) in [(1.0, 1.0), (2.0, 0.5), (0.1, 3.0)] {
                let b = coreg_b(&CoregMatrix::new(h, l, rho).unwrap()).unwrap();
                let eig = b.symmetric_eigenvalues();
                assert!(eig.iter().all(|e| *e > 0.0), "rho={rho}");
            }
        }
    }

    #[test]
    fn icm_kernel_examples() {
        let p = se(&[0.3], 1.0);
        let x = vec![0.4];
        let hf = AugmentedInput::new(x.clone(), Fidelity::Hf);
        let lf = AugmentedInput::new(x.clone(), Fidelity::Lf);
        let c = CoregMatrix::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(icm_kernel(&hf, &hf, &c, &p).unwrap(), 1.0);
        let far = AugmentedInput::new(vec![0.9], Fidelity::Lf);
        assert_eq!(icm_kernel(&hf, &lf, &c, &p).unwrap(), 0.0);
        assert_eq!(icm_kernel(&hf, &far, &c, &p).unwrap(), 0.0);
        let c = CoregMatrix::new(1.0, 1.0, 0.8).unwrap();
        assert!((icm_kernel(&hf, &lf, &c, &p).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(
            icm_kernel(&hf, &far, &c, &p).unwrap(),
            icm_kernel(&far, &hf, &c, &p).unwrap()
        );
    }

    fn params_strategy() -> impl Strategy<Value = (KernelParams, Vec<Vec<f64>>)> {
        (1usize..4, 1usize..12, any::<bool>()).prop_flat_map(|(d, n, matern)| {
            (
                prop::collection::vec(0.05f64..2.0, d),
                0.1f64..5.0,
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), n),
            )
                .prop_map(move |(ls, var, pts)| {
                    let kind = if matern {
                        KernelKind::Matern52
                    } else {
                        KernelKind::SquaredExponential
                    };
                    (KernelParams::new(ls, var, kind).unwrap(), pts)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn gram_is_psd_and_symmetric((p, pts) in params_strategy()) {
            let mut k = kernel_matrix(&pts, &pts, &p).unwrap();
            for i in 0..k.nrows() {
                for j in 0..k.ncols() {
                    prop_assert_eq!(k[(i, j)], k[(j, i)]);
                }
                k[(i, i)] += 1e-10 * p.signal_variance;
            }
            prop_assert!(min_eigenvalue_sym(&k) >= -1e-8);
        }

        #[test]
        fn icm_gram_is_entrywise_composition(
            (p, pts) in params_strategy(),
            rho_step in 0usize..100,
            sh in 0.1f64..3.0,
            sl in 0.1f64..3.0,
            fid_bits in prop::collection::vec(any::<bool>(), 12),
        ) {
            let c = CoregMatrix::new(sh, sl, rho_step as f64 / 100.0).unwrap();
            let b = coreg_b(&c).unwrap();
            let aug: Vec<AugmentedInput> = pts.iter().zip(&fid_bits).map(|(x, f)| {
                AugmentedInput::new(x.clone(), if *f { Fidelity::Hf } else { Fidelity::Lf })
            }).collect();
            let k = icm_matrix(&aug, &aug, &c, &p).unwrap();
            let base = kernel_matrix(&pts, &pts, &p).unwrap();
            for i in 0..aug.len() {
                for j in 0..aug.len() {
                    let expect = b[(aug[i].fidelity.index(), aug[j].fidelity.index())] * base[(i, j)];
                    prop_assert!((k[(i, j)] - expect).abs() <= 1e-14 * (1.0 + expect.abs()));
                }
            }
        }
    }
}
