//! Exact Gaussian-process regression: closed-form posterior under Gaussian
//! noise, noise-free conditioning on latent values, log evidence, and
//! multistart evidence maximization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram_unchecked, kernel_matrix, kernel_matrix_unchecked, KernelKind, KernelParams};
use crate::linalg::{cholesky_jittered, Factor};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrediction {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPrediction {
    pub fn variance(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub noise_sd: f64,
}

impl NumericalDataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if !(noise_sd > 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidParameter("noise_sd must be positive".into()));
        }
        Ok(Self {
            inputs,
            targets,
            noise_sd,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

fn mean_vector(mean_fn: &dyn Fn(&[f64]) -> f64, xs: &[Vec<f64>]) -> DVector<f64> {
    DVector::from_iterator(xs.len(), xs.iter().map(|x| mean_fn(x)))
}

fn prior(params: &KernelParams, mean_fn: &dyn Fn(&[f64]) -> f64, test: &[Vec<f64>]) -> Result<GaussianPrediction> {
    Ok(GaussianPrediction {
        mean: mean_vector(mean_fn, test),
        covariance: kernel_matrix(test, test, params)?,
    })
}

/// Posterior at `test` given a factor of the training covariance and the
/// centred training values.
fn condition_on_factor(
    factor: &Factor,
    train: &[Vec<f64>],
    centred: &DVector<f64>,
    params: &KernelParams,
    mean_fn: &dyn Fn(&[f64]) -> f64,
    test: &[Vec<f64>],
) -> GaussianPrediction {
    let cross = kernel_matrix_unchecked(train, test, params);
    let alpha = factor.solve_vec(centred);
    let mean = mean_vector(mean_fn, test) + cross.transpose() * alpha;
    let v = factor.solve_l(&cross);
    let mut covariance = gram_unchecked(test, params) - v.transpose() * &v;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    GaussianPrediction { mean, covariance }
}

pub fn condition_closed_form(
    data: &NumericalDataset,
    params: &KernelParams,
    mean_fn: &dyn Fn(&[f64]) -> f64,
    test: &[Vec<f64>],
) -> Result<GaussianPrediction> {
    if data.is_empty() {
        return prior(params, mean_fn, test);
    }
    kernel_matrix(&data.inputs[..1], test, params)?;
    let mut k = kernel_matrix(&data.inputs, &data.inputs, params)?;
    let noise = data.noise_sd * data.noise_sd;
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    let factor = cholesky_jittered(&k, params.signal_variance)?;
    let centred = DVector::from_vec(data.targets.clone()) - mean_vector(mean_fn, &data.inputs);
    Ok(condition_on_factor(&factor, &data.inputs, &centred, params, mean_fn, test))
}

pub fn conditional_at_test(
    train: &[Vec<f64>],
    latents: &[f64],
    params: &KernelParams,
    mean_fn: &dyn Fn(&[f64]) -> f64,
    test: &[Vec<f64>],
) -> Result<GaussianPrediction> {
    if train.len() != latents.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            found: latents.len(),
        });
    }
    if train.is_empty() {
        return prior(params, mean_fn, test);
    }
    kernel_matrix(&train[..1], test, params)?;
    let k = kernel_matrix(train, train, params)?;
    let factor = cholesky_jittered(&k, params.signal_variance)?;
    let centred = DVector::from_column_slice(latents) - mean_vector(mean_fn, train);
    Ok(condition_on_factor(&factor, train, &centred, params, mean_fn, test))
}

/// Gaussian log evidence of the targets under a zero-mean prior.
pub fn log_marginal_likelihood(data: &NumericalDataset, params: &KernelParams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidData("log evidence needs at least one observation".into()));
    }
    let mut k = kernel_matrix(&data.inputs, &data.inputs, params)?;
    let noise = data.noise_sd * data.noise_sd;
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    let factor = cholesky_jittered(&k, params.signal_variance)?;
    let y = DVector::from_vec(data.targets.clone());
    let alpha = factor.solve_vec(&y);
    Ok(-0.5 * y.dot(&alpha) - 0.5 * factor.log_det() - 0.5 * data.len() as f64 * LN_2PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSearch {
    pub starts: usize,
    pub max_iters: usize,
    pub kind: KernelKind,
    pub seed: u64,
}

impl Default for EvidenceSearch {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iters: 400,
            kind: KernelKind::SquaredExponential,
            seed: 0,
        }
    }
}

/// Search bounds in log space (standardized targets, unit-box inputs).
const LOG_LENGTHSCALE: (f64, f64) = (-4.605_170_185_988_091, 2.302_585_092_994_046); // 0.01 .. 10
const LOG_SIGNAL_SD: (f64, f64) = (-6.907_755_278_982_137, 3.401_197_381_662_155); // 1e-3 .. 30
const LOG_NOISE_SD: (f64, f64) = (-9.210_340_371_976_182, 2.302_585_092_994_046); // 1e-4 .. 10

/// Point estimate returned by [`fit_point_estimate`], in the original target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub params: KernelParams,
    pub noise_sd: f64,
    /// Best standardized log evidence found.
    pub log_evidence: f64,
    /// Standardized log evidence at each multistart initialization.
    pub start_log_evidence: Vec<f64>,
    pub target_mean: f64,
    pub target_sd: f64,
}

fn standardize(targets: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    (targets.iter().map(|y| (y - mean) / sd).collect(), mean, sd)
}

fn unpack(theta: &[f64], dims: usize, kind: KernelKind) -> (KernelParams, f64) {
    let ls = theta[..dims].iter().map(|t| t.exp()).collect();
    let params = KernelParams {
        lengthscales: ls,
        signal_variance: (2.0 * theta[dims]).exp(),
        kind,
    };
    (params, theta[dims + 1].exp())
}

fn clamp_theta(theta: &mut [f64], dims: usize) {
    for (i, t) in theta.iter_mut().enumerate() {
        let (lo, hi) = if i < dims {
            LOG_LENGTHSCALE
        } else if i == dims {
            LOG_SIGNAL_SD
        } else {
            LOG_NOISE_SD
        };
        *t = t.clamp(lo, hi);
    }
}

/// Evidence maximization over log lengthscales, log signal SD and log noise SD
/// from several starts; the targets are standardized first.
pub fn fit_point_estimate(data: &NumericalDataset, search: &EvidenceSearch) -> Result<PointEstimate> {
    if data.len() < 2 {
        return Err(Error::InvalidData("evidence maximization needs at least two observations".into()));
    }
    let dims = data.inputs[0].len();
    if data.inputs.iter().any(|x| x.len() != dims) {
        return Err(Error::InvalidData("inputs have inconsistent dimensions".into()));
    }
    let (y, target_mean, target_sd) = standardize(&data.targets);
    let objective = |theta: &[f64]| -> f64 {
        let mut t = theta.to_vec();
        clamp_theta(&mut t, dims);
        let (params, noise_sd) = unpack(&t, dims, search.kind);
        let ds = NumericalDataset {
            inputs: data.inputs.clone(),
            targets: y.clone(),
            noise_sd,
        };
        match log_marginal_likelihood(&ds, &params) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut start_log_evidence = Vec::with_capacity(search.starts);
    for s in 0..search.starts.max(1) {
        let mut start: Vec<f64> = if s == 0 {
            let mut t = vec![0.3f64.ln(); dims];
            t.push(0.0);
            t.push(0.1f64.ln());
            t
        } else {
            let mut t: Vec<f64> = (0..dims).map(|_| rng.random_range(0.05f64.ln()..2f64.ln())).collect();
            t.push(rng.random_range(0.3f64.ln()..3f64.ln()));
            t.push(rng.random_range(1e-3f64.ln()..0.5f64.ln()));
            t
        };
        clamp_theta(&mut start, dims);
        start_log_evidence.push(-objective(&start));
        let (mut theta, value) = nelder_mead(&objective, &start, 0.5, search.max_iters);
        clamp_theta(&mut theta, dims);
        if value.is_finite() && best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((theta, value));
        }
    }
    let (theta, value) = best.ok_or_else(|| Error::Evidence("every start failed to factorize".into()))?;
    let (mut params, noise_sd) = unpack(&theta, dims, search.kind);
    let log_evidence = -value;
    params.signal_variance *= target_sd * target_sd;
    Ok(PointEstimate {
        params,
        noise_sd: noise_sd * target_sd,
        log_evidence,
        start_log_evidence,
        target_mean,
        target_sd,
    })
}

/// Derivative-free simplex minimization.
pub(crate) fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iters: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    for _ in 0..max_iters {
        order(&mut simplex);
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if best.is_finite() && (worst - best).abs() <= 1e-9 * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|(x, _)| x[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for (v, b) in vertex.0.iter_mut().zip(&x0) {
                        *v = b + 0.5 * (*v - b);
                    }
                    vertex.1 = f(&vertex.0);
                }
            }
        }
    }
    order(&mut simplex);
    simplex.swap_remove(0)
}

/// A fitted closed-form GP on standardized targets, ready for repeated
/// prediction.
#[derive(Debug, Clone)]
pub struct GpRegressor {
    inputs: Vec<Vec<f64>>,
    /// Kernel in standardized units.
    params: KernelParams,
    noise_sd: f64,
    factor: Factor,
    alpha: DVector<f64>,
    target_mean: f64,
    target_sd: f64,
}

impl GpRegressor {
    /// Build from data and a point estimate reported in original units.
    pub fn new(inputs: Vec<Vec<f64>>, targets: &[f64], estimate: &PointEstimate) -> Result<Self> {
        let sd = estimate.target_sd;
        let params = KernelParams {
            signal_variance: estimate.params.signal_variance / (sd * sd),
            ..estimate.params.clone()
        };
        let noise_sd = estimate.noise_sd / sd;
        let y: Vec<f64> = targets.iter().map(|t| (t - estimate.target_mean) / sd).collect();
        let mut k = kernel_matrix(&inputs, &inputs, &params)?;
        for i in 0..k.nrows() {
            k[(i, i)] += noise_sd * noise_sd;
        }
        let factor = cholesky_jittered(&k, params.signal_variance)?;
        let alpha = factor.solve_vec(&DVector::from_vec(y));
        Ok(Self {
            inputs,
            params,
            noise_sd,
            factor,
            alpha,
            target_mean: estimate.target_mean,
            target_sd: sd,
        })
    }

    pub fn fit(inputs: Vec<Vec<f64>>, targets: &[f64], search: &EvidenceSearch) -> Result<Self> {
        let data = NumericalDataset::new(inputs.clone(), targets.to_vec(), 1.0)?;
        let est = fit_point_estimate(&data, search)?;
        Self::new(inputs, targets, &est)
    }

    pub fn standardized_params(&self) -> &KernelParams {
        &self.params
    }

    pub fn standardized_noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_sd(&self) -> f64 {
        self.target_sd
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Latent posterior in standardized units.
    pub fn predict_standardized(&self, test: &[Vec<f64>]) -> GaussianPrediction {
        let cross = kernel_matrix_unchecked(&self.inputs, test, &self.params);
        let mean = cross.transpose() * &self.alpha;
        let v = self.factor.solve_l(&cross);
        let mut covariance = gram_unchecked(test, &self.params) - v.transpose() * &v;
        covariance = (&covariance + covariance.transpose()) * 0.5;
        GaussianPrediction { mean, covariance }
    }

    /// Marginal latent mean and variance in standardized units.
    pub fn predict_marginal_standardized(&self, test: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let cross = kernel_matrix_unchecked(&self.inputs, test, &self.params);
        let mean = cross.transpose() * &self.alpha;
        let v = self.factor.solve_l(&cross);
        let var = (0..test.len())
            .map(|j| (self.params.signal_variance - v.column(j).norm_squared()).max(0.0))
            .collect();
        (mean.iter().cloned().collect(), var)
    }

    /// Latent posterior in the original target units.
    pub fn predict(&self, test: &[Vec<f64>]) -> GaussianPrediction {
        let p = self.predict_standardized(test);
        GaussianPrediction {
            mean: p.mean.map(|m| m * self.target_sd + self.target_mean),
            covariance: p.covariance * (self.target_sd * self.target_sd),
        }
    }

    /// Factor-based helper: `L^{-1} k(train, test)` columns.
    pub(crate) fn whitened_cross(&self, test: &[Vec<f64>]) -> DMatrix<f64> {
        let cross = kernel_matrix_unchecked(&self.inputs, test, &self.params);
        self.factor.solve_l(&cross)
    }
}
