//! Gradient-based MCMC over latent function values and hyperparameters.
//!
//! The sampler is static-trajectory HMC with dual-averaging step-size
//! adaptation and a windowed diagonal metric, run over independent chains.

mod models;
mod predictive;

pub use models::{
    ar1_delta_density, fixed_gaussian_density, icm_density, preference_density, Ar1DeltaDensity, Ar1Lik,
    BetaPrior, CovarianceStructure, GaussianGpDensity, HyperPriors, IcmCov, IcmDensity, LatentLikelihood,
    LogNormalPrior, MixedLik, NoiseSpec, PreferenceGpDensity, StationaryCov, WhitenedModel, MODEL_JITTER,
};
pub(crate) use predictive::kernel_from_hypers;
pub use predictive::{draw_mvn, posterior_predictive, PredictiveDraws, PredictiveKernel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix;

/// A differentiable log density over an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density at `x` (up to a constant); the gradient is written into
    /// `grad`. Returns `f64::NEG_INFINITY` where the density is undefined.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    /// Number of latent function values produced by [`LogDensity::constrain`].
    fn n_latent(&self) -> usize {
        0
    }

    fn hyper_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    /// Map an unconstrained point to latent values and constrained hyperparameters.
    fn constrain(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (Vec::new(), x.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub leapfrog_steps: usize,
    pub max_divergence_rate: f64,
    pub seed: u64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 500,
            draws: 500,
            target_accept: 0.8,
            leapfrog_steps: 32,
            max_divergence_rate: 0.25,
            seed: 0,
        }
    }
}

impl HmcConfig {
    /// Reduced configuration for benchmark loops: 2 chains of 300 + 300.
    pub fn benchmark() -> Self {
        Self {
            chains: 2,
            warmup: 300,
            draws: 300,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 || self.leapfrog_steps == 0 {
            return Err(Error::InvalidParameter("chains, draws and leapfrog steps must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target_accept must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub acceptance_rate: Vec<f64>,
    pub step_size: Vec<f64>,
    pub divergences: usize,
    /// Split-R̂ per unconstrained coordinate.
    pub rhat: Vec<f64>,
    pub max_rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSampleSet {
    /// `S x n_latent`, chain-major.
    pub latent_draws: Vec<Vec<f64>>,
    /// `S x n_hyper`, chain-major.
    pub hyper_draws: Vec<Vec<f64>>,
    pub hyper_names: Vec<String>,
    pub diagnostics: Diagnostics,
}

impl PosteriorSampleSet {
    pub fn len(&self) -> usize {
        self.hyper_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyper_draws.is_empty()
    }

    pub fn hyper_index(&self, name: &str) -> Option<usize> {
        self.hyper_names.iter().position(|n| n == name)
    }

    pub fn hyper(&self, s: usize, name: &str) -> Option<f64> {
        self.hyper_index(name).map(|i| self.hyper_draws[s][i])
    }

    /// Evenly spaced subset of draw indices.
    pub fn thin_indices(&self, n: usize) -> Vec<usize> {
        let s = self.len();
        if n >= s {
            return (0..s).collect();
        }
        (0..n).map(|i| i * s / n).collect()
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.diagnostics).expect("diagnostics serialize")
    }
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    accept: f64,
    divergences: usize,
    step_size: f64,
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            h_bar: 0.0,
            log_eps: eps.ln(),
            log_eps_bar: 0.0,
            t: 0.0,
            target,
        }
    }

    fn update(&mut self, accept: f64) {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn finalized(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

struct State {
    x: Vec<f64>,
    lp: f64,
    grad: Vec<f64>,
}

struct Stepper<'a, M: ?Sized> {
    model: &'a M,
    inv_metric: Vec<f64>,
    steps: usize,
}

impl<M: LogDensity + ?Sized> Stepper<'_, M> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn momentum(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.inv_metric
            .iter()
            .map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt())
            .collect()
    }

    /// Integrate `steps` leapfrog steps; `None` if the trajectory leaves the
    /// region where the density is finite.
    fn integrate(&self, start: &State, p: &mut [f64], eps: f64, steps: usize) -> Option<State> {
        let mut x = start.x.clone();
        let mut grad = start.grad.clone();
        let mut lp = start.lp;
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * eps * g;
        }
        for step in 0..steps {
            for ((xi, pi), m) in x.iter_mut().zip(p.iter()).zip(&self.inv_metric) {
                *xi += eps * m * pi;
            }
            lp = self.model.log_density_grad(&x, &mut grad);
            if !lp.is_finite() {
                return None;
            }
            let scale = if step + 1 == steps { 0.5 } else { 1.0 };
            for (pi, g) in p.iter_mut().zip(&grad) {
                *pi += scale * eps * g;
            }
        }
        Some(State { x, lp, grad })
    }

    /// One HMC transition. Returns (acceptance statistic, divergent).
    fn transition(&self, state: &mut State, eps: f64, rng: &mut ChaCha8Rng) -> (f64, bool) {
        let mut p = self.momentum(rng);
        let h0 = -state.lp + self.kinetic(&p);
        let Some(next) = self.integrate(state, &mut p, eps, self.steps) else {
            return (0.0, true);
        };
        let h1 = -next.lp + self.kinetic(&p);
        if !h1.is_finite() || h1 - h0 > 1000.0 {
            return (0.0, true);
        }
        let accept = (h0 - h1).exp().min(1.0);
        if rng.random::<f64>() < accept {
            *state = next;
        }
        (accept, false)
    }

    fn reasonable_step(&self, state: &State, rng: &mut ChaCha8Rng) -> f64 {
        let mut eps: f64 = 0.1;
        let ratio = |eps: f64, rng: &mut ChaCha8Rng| -> f64 {
            let mut p = self.momentum(rng);
            let h0 = -state.lp + self.kinetic(&p);
            match self.integrate(state, &mut p, eps, 1) {
                Some(next) => {
                    let h1 = -next.lp + self.kinetic(&p);
                    if h1.is_finite() {
                        (h0 - h1).exp()
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            }
        };
        let first = ratio(eps, rng);
        let up = first > 0.5;
        for _ in 0..60 {
            let r = ratio(eps, rng);
            if up != (r > 0.5) {
                break;
            }
            eps = if up { eps * 2.0 } else { eps * 0.5 };
            if !(1e-10..=1e3).contains(&eps) {
                break;
            }
        }
        eps.clamp(1e-10, 1e3)
    }
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn add(&mut self, x: &[f64]) {
        if self.mean.is_empty() {
            self.mean = vec![0.0; x.len()];
            self.m2 = vec![0.0; x.len()];
        }
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    /// Sample variance shrunk toward 1e-3, as in Stan's metric adaptation.
    fn regularized(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|s| {
                let var = s / (n - 1.0).max(1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

fn run_chain<M: LogDensity + ?Sized>(model: &M, config: &HmcConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0x4843_u64 + chain as u64));
    let dim = model.dim();
    let mut grad = vec![0.0; dim];
    let mut state = None;
    for _ in 0..20 {
        let x = model.initial_point(&mut rng);
        let lp = model.log_density_grad(&x, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            state = Some(State {
                x,
                lp,
                grad: grad.clone(),
            });
            break;
        }
    }
    let mut state = state.ok_or(Error::NonFiniteInit)?;

    let mut stepper = Stepper {
        model,
        inv_metric: vec![1.0; dim],
        steps: config.leapfrog_steps,
    };
    let warmup = config.warmup;
    let mut eps = if dim == 0 { 1.0 } else { stepper.reasonable_step(&state, &mut rng) };
    let mut da = DualAveraging::new(eps, config.target_accept);

    // metric windows inside [init_buffer, warmup - term_buffer)
    let mut window_ends = Vec::new();
    let (init_buffer, term_buffer) = ((warmup as f64 * 0.15) as usize, (warmup as f64 * 0.1) as usize);
    if warmup >= 20 && dim > 0 {
        let slow = warmup - init_buffer - term_buffer;
        window_ends.push(init_buffer + slow / 3);
        window_ends.push(warmup - term_buffer);
    }
    let mut welford = Welford::default();

    let mut draws = Vec::with_capacity(config.draws);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    for it in 0..warmup + config.draws {
        if it < warmup {
            let (accept, _) = stepper.transition(&mut state, da.current(), &mut rng);
            da.update(accept);
            if it >= init_buffer && it < warmup - term_buffer {
                welford.add(&state.x);
            }
            if window_ends.contains(&(it + 1)) && welford.n >= 10.0 {
                stepper.inv_metric = welford.regularized();
                welford = Welford::default();
                eps = stepper.reasonable_step(&state, &mut rng);
                da = DualAveraging::new(eps, config.target_accept);
            }
            if it + 1 == warmup {
                eps = da.finalized();
            }
        } else {
            let jittered = eps * rng.random_range(0.9..1.1);
            let (accept, divergent) = stepper.transition(&mut state, jittered, &mut rng);
            accept_sum += accept;
            if divergent {
                divergences += 1;
            }
            draws.push(state.x.clone());
        }
    }
    if warmup == 0 {
        eps = da.current();
    }
    Ok(ChainOutput {
        draws,
        accept: accept_sum / config.draws as f64,
        divergences,
        step_size: eps,
    })
}

/// Split-R̂ for every coordinate across the given chains.
pub fn split_rhat(chains: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let Some(dim) = chains.first().and_then(|c| c.first()).map(Vec::len) else {
        return Vec::new();
    };
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return vec![f64::NAN; dim];
    }
    (0..dim)
        .map(|d| {
            let seqs: Vec<Vec<f64>> = chains
                .iter()
                .flat_map(|c| {
                    [
                        c[..half].iter().map(|x| x[d]).collect::<Vec<_>>(),
                        c[c.len() - half..].iter().map(|x| x[d]).collect::<Vec<_>>(),
                    ]
                })
                .collect();
            let n = half as f64;
            let m = seqs.len() as f64;
            let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
            let grand = means.iter().sum::<f64>() / m;
            let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
            let w = seqs
                .iter()
                .zip(&means)
                .map(|(s, mu)| s.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
                .sum::<f64>()
                / m;
            if w <= 0.0 {
                return 1.0;
            }
            let var_plus = (n - 1.0) / n * w + b / n;
            (var_plus / w).sqrt()
        })
        .collect()
}

pub fn hmc_sample<M: LogDensity + ?Sized>(model: &M, config: &HmcConfig) -> Result<PosteriorSampleSet> {
    config.validate()?;
    let outputs: Vec<ChainOutput> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(model, config, c))
        .collect::<Result<_>>()?;

    let total = config.chains * config.draws;
    let divergences: usize = outputs.iter().map(|o| o.divergences).sum();
    let rate = divergences as f64 / total as f64;
    if rate > config.max_divergence_rate {
        return Err(Error::TooManyDivergences {
            rate,
            limit: config.max_divergence_rate,
        });
    }
    let chain_draws: Vec<Vec<Vec<f64>>> = outputs.iter().map(|o| o.draws.clone()).collect();
    let rhat = split_rhat(&chain_draws);
    let max_rhat = rhat.iter().cloned().filter(|r| r.is_finite()).fold(1.0, f64::max);

    let mut latent_draws = Vec::with_capacity(total);
    let mut hyper_draws = Vec::with_capacity(total);
    for x in chain_draws.iter().flatten() {
        let (g, h) = model.constrain(x);
        latent_draws.push(g);
        hyper_draws.push(h);
    }
    Ok(PosteriorSampleSet {
        latent_draws,
        hyper_draws,
        hyper_names: model.hyper_names(),
        diagnostics: Diagnostics {
            chains: config.chains,
            draws_per_chain: config.draws,
            acceptance_rate: outputs.iter().map(|o| o.accept).collect(),
            step_size: outputs.iter().map(|o| o.step_size).collect(),
            divergences,
            rhat,
            max_rhat,
        },
    })
}

/// Relative error between the analytic gradient and central differences at `x`.
pub fn gradient_check<M: LogDensity + ?Sized>(model: &M, x: &[f64], h: f64) -> f64 {
    let mut analytic = vec![0.0; model.dim()];
    model.log_density_grad(x, &mut analytic);
    let mut scratch = vec![0.0; model.dim()];
    let mut xp = x.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = model.log_density_grad(&xp, &mut scratch);
            xp[i] = x[i] - h;
            let down = model.log_density_grad(&xp, &mut scratch);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}
