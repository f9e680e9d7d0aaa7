//! Whitened GP posteriors: latents `g = L z` with `K(theta) = L L^T`, so the
//! sampler moves over `z ~ N(0, I)` and the hyperparameters jointly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LogDensity;
use crate::kernel::{gram_unchecked, AugmentedInput, Fidelity, KernelKind, KernelParams};
use crate::likelihood::Comparison;
use crate::normal;

/// Absolute diagonal jitter added to every latent covariance.
pub const MODEL_JITTER: f64 = 1e-8;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `log x ~ N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalPrior {
    /// Density of `t = log x` (Jacobian included) and its derivative.
    fn log_density(&self, t: f64) -> (f64, f64) {
        let r = (t - self.mu) / self.sigma;
        (-0.5 * r * r - self.sigma.ln() - LN_SQRT_2PI, -r / self.sigma)
    }

    fn init(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.mu + rng.random_range(-0.5..0.5) * self.sigma.min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPrior {
    /// Unnormalized density of `u = logit(rho)` (Jacobian included) and its derivative.
    fn log_density(&self, u: f64) -> (f64, f64) {
        let log_rho = -softplus(-u);
        let log_1m = -softplus(u);
        let rho = logistic(u);
        (
            self.alpha * log_rho + self.beta * log_1m,
            self.alpha * (1.0 - rho) - self.beta * rho,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperPriors {
    pub lengthscale: LogNormalPrior,
    pub signal_sd: LogNormalPrior,
    pub noise_sd: LogNormalPrior,
    pub rho: BetaPrior,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            lengthscale: LogNormalPrior {
                mu: 0.3f64.ln(),
                sigma: 0.7,
            },
            signal_sd: LogNormalPrior { mu: 0.0, sigma: 1.0 },
            noise_sd: LogNormalPrior {
                mu: 0.1f64.ln(),
                sigma: 0.5,
            },
            rho: BetaPrior { alpha: 5.0, beta: 2.0 },
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Prior covariance of the latent vector as a function of its hyperparameters.
pub trait CovarianceStructure: Sync {
    fn n_points(&self) -> usize;
    fn n_params(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    fn constrain(&self, theta: &[f64]) -> Vec<f64>;
    fn covariance(&self, theta: &[f64]) -> DMatrix<f64>;
    /// `out[k] += sum_ij w_ij dK_ij / dtheta_k` for symmetric `w`.
    fn contract(&self, theta: &[f64], w: &DMatrix<f64>, out: &mut [f64]);
    fn log_prior(&self, theta: &[f64], grad: &mut [f64]) -> f64;
    fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// Observation model over latent values.
pub trait LatentLikelihood: Sync {
    fn n_params(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    fn constrain(&self, theta: &[f64]) -> Vec<f64>;
    /// Log likelihood; gradients are written (not accumulated) into the slices.
    fn log_lik(&self, g: &[f64], theta: &[f64], grad_g: &mut [f64], grad_theta: &mut [f64]) -> f64;
    fn log_prior(&self, theta: &[f64], grad: &mut [f64]) -> f64;
    fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// Single-output stationary kernel over `[log lengthscale_1..d, log signal_sd]`,
/// or a fixed kernel with no free parameters.
#[derive(Debug, Clone)]
pub struct StationaryCov {
    inputs: Vec<Vec<f64>>,
    kind: KernelKind,
    dims: usize,
    fixed: Option<KernelParams>,
    priors: HyperPriors,
}

impl StationaryCov {
    pub fn new(inputs: Vec<Vec<f64>>, dims: usize, kind: KernelKind, priors: HyperPriors) -> Self {
        Self {
            inputs,
            kind,
            dims,
            fixed: None,
            priors,
        }
    }

    pub fn fixed(inputs: Vec<Vec<f64>>, params: KernelParams) -> Self {
        Self {
            inputs,
            kind: params.kind,
            dims: params.dims(),
            fixed: Some(params),
            priors: HyperPriors::default(),
        }
    }

    fn params(&self, theta: &[f64]) -> KernelParams {
        match &self.fixed {
            Some(p) => p.clone(),
            None => KernelParams {
                lengthscales: theta[..self.dims].iter().map(|t| t.exp()).collect(),
                signal_variance: (2.0 * theta[self.dims]).exp(),
                kind: self.kind,
            },
        }
    }
}

impl CovarianceStructure for StationaryCov {
    fn n_points(&self) -> usize {
        self.inputs.len()
    }

    fn n_params(&self) -> usize {
        if self.fixed.is_some() {
            0
        } else {
            self.dims + 1
        }
    }

    fn param_names(&self) -> Vec<String> {
        if self.fixed.is_some() {
            return Vec::new();
        }
        let mut names: Vec<String> = (0..self.dims).map(|d| format!("lengthscale_{d}")).collect();
        names.push("signal_sd".into());
        names
    }

    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| t.exp()).collect()
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        gram_unchecked(&self.inputs, &self.params(theta))
    }

    fn contract(&self, theta: &[f64], w: &DMatrix<f64>, out: &mut [f64]) {
        if self.fixed.is_some() {
            return;
        }
        let p = self.params(theta);
        let var = p.signal_variance;
        let inv_l2: Vec<f64> = p.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let n = self.inputs.len();
        let sig = self.dims;
        for j in 0..n {
            out[sig] += w[(j, j)] * 2.0 * var;
            for i in j + 1..n {
                let ww = 2.0 * w[(i, j)];
                let (a, b) = (&self.inputs[i], &self.inputs[j]);
                let r2 = p.scaled_sq_dist(a, b);
                let (c, slope) = self.kind.correlation_and_slope(r2);
                out[sig] += ww * 2.0 * var * c;
                let s = ww * var * slope;
                for d in 0..self.dims {
                    let diff = a[d] - b[d];
                    out[d] += s * diff * diff * inv_l2[d];
                }
            }
        }
    }

    fn log_prior(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        if self.fixed.is_some() {
            return 0.0;
        }
        let mut lp = 0.0;
        for d in 0..self.dims {
            let (v, g) = self.priors.lengthscale.log_density(theta[d]);
            lp += v;
            grad[d] += g;
        }
        let (v, g) = self.priors.signal_sd.log_density(theta[self.dims]);
        grad[self.dims] += g;
        lp + v
    }

    fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.fixed.is_some() {
            return Vec::new();
        }
        let mut t: Vec<f64> = (0..self.dims).map(|_| self.priors.lengthscale.init(rng)).collect();
        t.push(self.priors.signal_sd.init(rng));
        t
    }
}

/// Two-fidelity ICM covariance over
/// `[log lengthscale_1..d, log sigma_hf, log sigma_lf, logit rho]` with a
/// unit-variance base kernel.
#[derive(Debug, Clone)]
pub struct IcmCov {
    inputs: Vec<AugmentedInput>,
    kind: KernelKind,
    dims: usize,
    priors: HyperPriors,
}

impl IcmCov {
    pub fn new(inputs: Vec<AugmentedInput>, dims: usize, kind: KernelKind, priors: HyperPriors) -> Self {
        Self {
            inputs,
            kind,
            dims,
            priors,
        }
    }

    fn unpack(&self, theta: &[f64]) -> (Vec<f64>, f64, f64, f64) {
        let ls = theta[..self.dims].iter().map(|t| t.exp()).collect();
        let d = self.dims;
        (ls, theta[d].exp(), theta[d + 1].exp(), logistic(theta[d + 2]))
    }
}

impl CovarianceStructure for IcmCov {
    fn n_points(&self) -> usize {
        self.inputs.len()
    }

    fn n_params(&self) -> usize {
        self.dims + 3
    }

    fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.dims).map(|d| format!("lengthscale_{d}")).collect();
        names.extend(["sigma_hf".into(), "sigma_lf".into(), "rho".into()]);
        names
    }

    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        let (mut out, s_hf, s_lf, rho) = self.unpack(theta);
        out.extend([s_hf, s_lf, rho]);
        out
    }

    fn covariance(&self, theta: &[f64]) -> DMatrix<f64> {
        let (ls, s_hf, s_lf, rho) = self.unpack(theta);
        let base = KernelParams {
            lengthscales: ls,
            signal_variance: 1.0,
            kind: self.kind,
        };
        let b = |a: Fidelity, c: Fidelity| match (a, c) {
            (Fidelity::Hf, Fidelity::Hf) => s_hf * s_hf,
            (Fidelity::Lf, Fidelity::Lf) => s_lf * s_lf,
            _ => rho * s_hf * s_lf,
        };
        let n = self.inputs.len();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            let xj = &self.inputs[j];
            k[(j, j)] = b(xj.fidelity, xj.fidelity);
            for i in j + 1..n {
                let xi = &self.inputs[i];
                let v = b(xi.fidelity, xj.fidelity) * base.eval_unchecked(&xi.xi, &xj.xi);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn contract(&self, theta: &[f64], w: &DMatrix<f64>, out: &mut [f64]) {
        let (ls, s_hf, s_lf, rho) = self.unpack(theta);
        let base = KernelParams {
            lengthscales: ls,
            signal_variance: 1.0,
            kind: self.kind,
        };
        let inv_l2: Vec<f64> = base.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let d0 = self.dims;
        let cross = rho * s_hf * s_lf;
        // (B, dB/dlog s_hf, dB/dlog s_lf, dB/dlogit rho)
        let parts = |a: Fidelity, c: Fidelity| match (a, c) {
            (Fidelity::Hf, Fidelity::Hf) => (s_hf * s_hf, 2.0 * s_hf * s_hf, 0.0, 0.0),
            (Fidelity::Lf, Fidelity::Lf) => (s_lf * s_lf, 0.0, 2.0 * s_lf * s_lf, 0.0),
            _ => (cross, cross, cross, s_hf * s_lf * rho * (1.0 - rho)),
        };
        let n = self.inputs.len();
        for j in 0..n {
            let xj = &self.inputs[j];
            let (_, dh, dl, dr) = parts(xj.fidelity, xj.fidelity);
            let wjj = w[(j, j)];
            out[d0] += wjj * dh;
            out[d0 + 1] += wjj * dl;
            out[d0 + 2] += wjj * dr;
            for i in j + 1..n {
                let xi = &self.inputs[i];
                let ww = 2.0 * w[(i, j)];
                let (bv, dh, dl, dr) = parts(xi.fidelity, xj.fidelity);
                let r2 = base.scaled_sq_dist(&xi.xi, &xj.xi);
                let (c, slope) = self.kind.correlation_and_slope(r2);
                out[d0] += ww * dh * c;
                out[d0 + 1] += ww * dl * c;
                out[d0 + 2] += ww * dr * c;
                let s = ww * bv * slope;
                for d in 0..self.dims {
                    let diff = xi.xi[d] - xj.xi[d];
                    out[d] += s * diff * diff * inv_l2[d];
                }
            }
        }
    }

    fn log_prior(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = 0.0;
        let d0 = self.dims;
        for d in 0..d0 {
            let (v, g) = self.priors.lengthscale.log_density(theta[d]);
            lp += v;
            grad[d] += g;
        }
        for k in [d0, d0 + 1] {
            let (v, g) = self.priors.signal_sd.log_density(theta[k]);
            lp += v;
            grad[k] += g;
        }
        let (v, g) = self.priors.rho.log_density(theta[d0 + 2]);
        grad[d0 + 2] += g;
        lp + v
    }

    fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut t: Vec<f64> = (0..self.dims).map(|_| self.priors.lengthscale.init(rng)).collect();
        t.push(self.priors.signal_sd.init(rng));
        t.push(self.priors.signal_sd.init(rng));
        // logit of the Beta(5, 2) mode, 0.8
        t.push(4f64.ln() + rng.random_range(-0.5..0.5));
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    Fixed(f64),
    Inferred(LogNormalPrior),
}

/// Probit comparisons between latents plus Gaussian observations of latents,
/// sharing one noise SD. Either part may be empty.
#[derive(Debug, Clone)]
pub struct MixedLik {
    comparisons: Vec<Comparison>,
    numeric: Vec<(usize, f64)>,
    noise: NoiseSpec,
}

impl MixedLik {
    pub fn new(comparisons: Vec<Comparison>, numeric: Vec<(usize, f64)>, noise: NoiseSpec) -> Self {
        Self {
            comparisons,
            numeric,
            noise,
        }
    }

    fn sd(&self, theta: &[f64]) -> f64 {
        match self.noise {
            NoiseSpec::Fixed(s) => s,
            NoiseSpec::Inferred(_) => theta[0].exp(),
        }
    }
}

impl LatentLikelihood for MixedLik {
    fn n_params(&self) -> usize {
        match self.noise {
            NoiseSpec::Fixed(_) => 0,
            NoiseSpec::Inferred(_) => 1,
        }
    }

    fn param_names(&self) -> Vec<String> {
        match self.noise {
            NoiseSpec::Fixed(_) => Vec::new(),
            NoiseSpec::Inferred(_) => vec!["noise_sd".into()],
        }
    }

    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| t.exp()).collect()
    }

    fn log_lik(&self, g: &[f64], theta: &[f64], grad_g: &mut [f64], grad_theta: &mut [f64]) -> f64 {
        grad_g.iter_mut().for_each(|v| *v = 0.0);
        let sd = self.sd(theta);
        let mut dlog_sd = 0.0;
        let mut ll = 0.0;
        let scale = 1.0 / (std::f64::consts::SQRT_2 * sd);
        for c in &self.comparisons {
            let u = (g[c.winner] - g[c.loser]) * scale;
            ll += normal::log_cdf(u);
            let lambda = normal::dlog_cdf(u);
            grad_g[c.winner] += lambda * scale;
            grad_g[c.loser] -= lambda * scale;
            dlog_sd -= lambda * u;
        }
        let inv_var = 1.0 / (sd * sd);
        for &(i, y) in &self.numeric {
            let r = y - g[i];
            ll -= 0.5 * r * r * inv_var + sd.ln() + LN_SQRT_2PI;
            grad_g[i] += r * inv_var;
            dlog_sd += r * r * inv_var - 1.0;
        }
        if let Some(t) = grad_theta.first_mut() {
            *t = dlog_sd;
        }
        ll
    }

    fn log_prior(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        match self.noise {
            NoiseSpec::Fixed(_) => 0.0,
            NoiseSpec::Inferred(p) => {
                let (v, g) = p.log_density(theta[0]);
                grad[0] += g;
                v
            }
        }
    }

    fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.noise {
            NoiseSpec::Fixed(_) => Vec::new(),
            NoiseSpec::Inferred(p) => vec![p.init(rng)],
        }
    }
}

/// Comparisons of `delta + g_lf` with the low-fidelity GP integrated out:
/// `log Phi((d_w + m_w - d_l - m_l) / sqrt(v + 2 sigma^2))`.
#[derive(Debug, Clone)]
pub struct Ar1Lik {
    comparisons: Vec<Comparison>,
    shift: Vec<f64>,
    var_diff: Vec<f64>,
    prior: LogNormalPrior,
}

impl Ar1Lik {
    /// `lf_mean` and `lf_cov` are the low-fidelity posterior at the hf inputs.
    pub fn new(comparisons: Vec<Comparison>, lf_mean: &DVector<f64>, lf_cov: &DMatrix<f64>, prior: LogNormalPrior) -> Self {
        let shift = comparisons.iter().map(|c| lf_mean[c.winner] - lf_mean[c.loser]).collect();
        let var_diff = comparisons
            .iter()
            .map(|c| {
                (lf_cov[(c.winner, c.winner)] + lf_cov[(c.loser, c.loser)] - 2.0 * lf_cov[(c.winner, c.loser)]).max(0.0)
            })
            .collect();
        Self {
            comparisons,
            shift,
            var_diff,
            prior,
        }
    }
}

impl LatentLikelihood for Ar1Lik {
    fn n_params(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["noise_sd".into()]
    }

    fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        vec![theta[0].exp()]
    }

    fn log_lik(&self, g: &[f64], theta: &[f64], grad_g: &mut [f64], grad_theta: &mut [f64]) -> f64 {
        grad_g.iter_mut().for_each(|v| *v = 0.0);
        let var = (2.0 * theta[0]).exp();
        let mut ll = 0.0;
        let mut dlog_sd = 0.0;
        for ((c, shift), v) in self.comparisons.iter().zip(&self.shift).zip(&self.var_diff) {
            let denom = v + 2.0 * var;
            let s = 1.0 / denom.sqrt();
            let u = (g[c.winner] - g[c.loser] + shift) * s;
            ll += normal::log_cdf(u);
            let lambda = normal::dlog_cdf(u);
            grad_g[c.winner] += lambda * s;
            grad_g[c.loser] -= lambda * s;
            dlog_sd -= lambda * u * 2.0 * var / denom;
        }
        grad_theta[0] = dlog_sd;
        ll
    }

    fn log_prior(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = self.prior.log_density(theta[0]);
        grad[0] += g;
        v
    }

    fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![self.prior.init(rng)]
    }
}

/// Joint posterior over whitened latents, covariance and likelihood parameters.
/// Coordinates are `[z (n), theta_cov, theta_lik]`.
#[derive(Debug, Clone)]
pub struct WhitenedModel<C, L> {
    pub cov: C,
    pub lik: L,
}

pub type PreferenceGpDensity = WhitenedModel<StationaryCov, MixedLik>;
pub type GaussianGpDensity = WhitenedModel<StationaryCov, MixedLik>;
pub type IcmDensity = WhitenedModel<IcmCov, MixedLik>;
pub type Ar1DeltaDensity = WhitenedModel<StationaryCov, Ar1Lik>;

impl<C: CovarianceStructure, L: LatentLikelihood> WhitenedModel<C, L> {
    pub fn new(cov: C, lik: L) -> Self {
        Self { cov, lik }
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let n = self.cov.n_points();
        let pc = self.cov.n_params();
        (&x[..n], &x[n..n + pc], &x[n + pc..])
    }

    fn factor(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let mut k = self.cov.covariance(theta);
        for i in 0..k.nrows() {
            k[(i, i)] += MODEL_JITTER;
        }
        k.cholesky().map(|c| c.unpack())
    }
}

impl<C: CovarianceStructure, L: LatentLikelihood> LogDensity for WhitenedModel<C, L> {
    fn dim(&self) -> usize {
        self.cov.n_points() + self.cov.n_params() + self.lik.n_params()
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if x.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let n = self.cov.n_points();
        let pc = self.cov.n_params();
        let (z, tc, tl) = self.split(x);
        let Some(l) = self.factor(tc) else {
            return f64::NEG_INFINITY;
        };
        let zv = DVector::from_column_slice(z);
        let g = &l * &zv;

        let (gz, rest) = grad.split_at_mut(n);
        let (gc, gl) = rest.split_at_mut(pc);
        let mut a = vec![0.0; n];
        let ll = self.lik.log_lik(g.as_slice(), tl, &mut a, gl);
        if !ll.is_finite() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::NEG_INFINITY;
        }
        let lp = ll - 0.5 * zv.norm_squared() + self.cov.log_prior(tc, gc) + self.lik.log_prior(tl, gl);

        let av = DVector::from_vec(a);
        let b = l.tr_mul(&av);
        for i in 0..n {
            gz[i] = b[i] - z[i];
        }
        if pc > 0 && n > 0 {
            // reverse-mode Cholesky: dL = tril(a z^T), P = Phi(L^T dL), S = L^-T P L^-1
            let mut lbar = &av * zv.transpose();
            lbar.fill_upper_triangle(0.0, 1);
            let mut p = l.tr_mul(&lbar);
            p.fill_upper_triangle(0.0, 1);
            for i in 0..n {
                p[(i, i)] *= 0.5;
            }
            let x1 = l.tr_solve_lower_triangular(&p).expect("triangular factor");
            let st = l.tr_solve_lower_triangular(&x1.transpose()).expect("triangular factor");
            let w = (&st + st.transpose()) * 0.5;
            self.cov.contract(tc, &w, gc);
        }
        lp
    }

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.cov.n_points()).map(|_| rng.random_range(-0.5..0.5)).collect();
        x.extend(self.cov.init(rng));
        x.extend(self.lik.init(rng));
        x
    }

    fn n_latent(&self) -> usize {
        self.cov.n_points()
    }

    fn hyper_names(&self) -> Vec<String> {
        let mut names = self.cov.param_names();
        names.extend(self.lik.param_names());
        names
    }

    fn constrain(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (z, tc, tl) = self.split(x);
        let g = match self.factor(tc) {
            Some(l) => (l * DVector::from_column_slice(z)).as_slice().to_vec(),
            None => vec![f64::NAN; z.len()],
        };
        let mut h = self.cov.constrain(tc);
        h.extend(self.lik.constrain(tl));
        (g, h)
    }
}

/// GP with fixed kernel and known Gaussian noise on every latent.
pub fn fixed_gaussian_density(inputs: Vec<Vec<f64>>, targets: &[f64], params: KernelParams, noise_sd: f64) -> GaussianGpDensity {
    let numeric = targets.iter().copied().enumerate().collect();
    WhitenedModel::new(
        StationaryCov::fixed(inputs, params),
        MixedLik::new(Vec::new(), numeric, NoiseSpec::Fixed(noise_sd)),
    )
}

/// Preference GP with inferred kernel hyperparameters and noise.
pub fn preference_density(
    inputs: Vec<Vec<f64>>,
    comparisons: Vec<Comparison>,
    dims: usize,
    kind: KernelKind,
    priors: HyperPriors,
) -> PreferenceGpDensity {
    WhitenedModel::new(
        StationaryCov::new(inputs, dims, kind, priors),
        MixedLik::new(comparisons, Vec::new(), NoiseSpec::Inferred(priors.noise_sd)),
    )
}

/// ICM posterior over hf latents (first) and lf latents (after), with hf
/// comparisons and lf numerical targets sharing one noise SD.
pub fn icm_density(
    hf_inputs: &[Vec<f64>],
    comparisons: Vec<Comparison>,
    lf_inputs: &[Vec<f64>],
    lf_targets: &[f64],
    kind: KernelKind,
    priors: HyperPriors,
) -> IcmDensity {
    let dims = hf_inputs.first().or(lf_inputs.first()).map_or(0, Vec::len);
    let n_hf = hf_inputs.len();
    let inputs = hf_inputs
        .iter()
        .map(|x| AugmentedInput::new(x.clone(), Fidelity::Hf))
        .chain(lf_inputs.iter().map(|x| AugmentedInput::new(x.clone(), Fidelity::Lf)))
        .collect();
    let numeric = lf_targets.iter().enumerate().map(|(i, y)| (n_hf + i, *y)).collect();
    WhitenedModel::new(
        IcmCov::new(inputs, dims, kind, priors),
        MixedLik::new(comparisons, numeric, NoiseSpec::Inferred(priors.noise_sd)),
    )
}

/// AR1 discrepancy posterior at the hf inputs given the lf posterior there.
pub fn ar1_delta_density(
    hf_inputs: Vec<Vec<f64>>,
    comparisons: Vec<Comparison>,
    lf_mean: &DVector<f64>,
    lf_cov: &DMatrix<f64>,
    dims: usize,
    kind: KernelKind,
    priors: HyperPriors,
) -> Ar1DeltaDensity {
    WhitenedModel::new(
        StationaryCov::new(hf_inputs, dims, kind, priors),
        Ar1Lik::new(comparisons, lf_mean, lf_cov, priors.noise_sd),
    )
}
