//! Posterior predictive draws at test inputs: for every posterior sample,
//! condition the GP on that sample's latents and hyperparameters, then draw.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::PosteriorSampleSet;
use crate::error::{Error, Result};
use crate::gp::conditional_at_test;
use crate::kernel::{KernelKind, KernelParams};
use crate::linalg::cholesky_jittered;
use crate::seed::mix;

/// Kernel for the predictive: fixed, or read per draw from `lengthscale_d` / `signal_sd`.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveKernel {
    Fixed(KernelParams),
    FromSamples(KernelKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraws {
    /// `S x m`.
    pub draws: Vec<Vec<f64>>,
    /// Posterior samples dropped because their conditional could not be factorized.
    pub skipped: usize,
}

impl PredictiveDraws {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let m = self.draws.first().map_or(0, Vec::len);
        let n = self.draws.len() as f64;
        (0..m).map(|j| self.draws.iter().map(|d| d[j]).sum::<f64>() / n).collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let n = self.draws.len() as f64;
        mean.iter()
            .enumerate()
            .map(|(j, mu)| self.draws.iter().map(|d| (d[j] - mu).powi(2)).sum::<f64>() / (n - 1.0))
            .collect()
    }
}

pub(crate) fn kernel_from_hypers(samples: &PosteriorSampleSet, s: usize, kind: KernelKind) -> Result<KernelParams> {
    let mut lengthscales = Vec::new();
    while let Some(l) = samples.hyper(s, &format!("lengthscale_{}", lengthscales.len())) {
        lengthscales.push(l);
    }
    let sd = samples
        .hyper(s, "signal_sd")
        .ok_or_else(|| Error::InvalidData("posterior samples carry no signal_sd".into()))?;
    KernelParams::new(lengthscales, sd * sd, kind)
}

/// Draw from `N(mean, cov)`, escalating jitter and falling back to a clipped
/// eigendecomposition for near-singular covariances.
pub fn draw_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = mean.len();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let scale = cov.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let x = match cholesky_jittered(cov, scale) {
        Ok(f) => mean + f.l * z,
        Err(_) => {
            let eig = SymmetricEigen::new(cov.clone());
            let root = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
            mean + eig.eigenvectors * root.component_mul(&z)
        }
    };
    x.as_slice().to_vec()
}

pub fn posterior_predictive(
    samples: &PosteriorSampleSet,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
    kernel: &PredictiveKernel,
    seed: u64,
) -> Result<PredictiveDraws> {
    if samples.is_empty() {
        return Err(Error::InvalidData("no posterior samples".into()));
    }
    let results: Vec<Result<Option<Vec<f64>>>> = (0..samples.len())
        .into_par_iter()
        .map(|s| {
            let params = match kernel {
                PredictiveKernel::Fixed(p) => p.clone(),
                PredictiveKernel::FromSamples(kind) => kernel_from_hypers(samples, s, *kind)?,
            };
            let pred = match conditional_at_test(train, &samples.latent_draws[s], &params, &|_| 0.0, test) {
                Ok(p) => p,
                Err(Error::Factorization { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, s as u64));
            Ok(Some(draw_mvn(&pred.mean, &pred.covariance, &mut rng)))
        })
        .collect();
    let mut draws = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(d) => draws.push(d),
            None => skipped += 1,
        }
    }
    if draws.is_empty() {
        return Err(Error::Factorization { jitter: f64::NAN });
    }
    Ok(PredictiveDraws { draws, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{hmc_sample, models::fixed_gaussian_density, HmcConfig};

    #[test]
    fn draws_at_training_inputs_match_latents() {
        let xs = vec![vec![0.1], vec![0.5], vec![0.9]];
        let params = KernelParams::new(vec![0.3], 1.0, KernelKind::SquaredExponential).unwrap();
        let m = fixed_gaussian_density(xs.clone(), &[0.2, -0.4, 0.6], params.clone(), 0.2);
        let cfg = HmcConfig {
            chains: 2,
            warmup: 100,
            draws: 50,
            seed: 4,
            ..Default::default()
        };
        let s = hmc_sample(&m, &cfg).unwrap();
        let p = posterior_predictive(&s, &xs, &xs, &PredictiveKernel::Fixed(params), 1).unwrap();
        assert_eq!(p.skipped, 0);
        for (d, g) in p.draws.iter().zip(&s.latent_draws) {
            for (a, b) in d.iter().zip(g) {
                assert!((a - b).abs() < 1e-3, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn singular_covariance_still_draws() {
        let cov = DMatrix::from_element(3, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = draw_mvn(&DVector::zeros(3), &cov, &mut rng);
        assert!((x[0] - x[1]).abs() < 1e-4 && (x[1] - x[2]).abs() < 1e-4);
    }
}
