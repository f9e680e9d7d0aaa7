//! Observation models: probit pairwise preferences, Gaussian numerical
//! observations, their factorized multi-modal combination, and the AR1
//! comparison likelihood that integrates out the low-fidelity GP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// The decision maker preferred `winner` over `loser` (row indices into the
/// associated input matrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Comparison {
    pub winner: usize,
    pub loser: usize,
}

impl Comparison {
    pub fn new(winner: usize, loser: usize) -> Result<Self> {
        if winner == loser {
            return Err(Error::InvalidData(format!(
                "comparison must involve two distinct inputs, got ({winner}, {winner})"
            )));
        }
        Ok(Self { winner, loser })
    }

    pub fn check(&self, len: usize) -> Result<()> {
        for index in [self.winner, self.loser] {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
        }
        if self.winner == self.loser {
            return Err(Error::InvalidData("comparison with identical indices".into()));
        }
        Ok(())
    }
}

/// High-fidelity comparisons plus low-fidelity numerical observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MixedDataset {
    pub hf_inputs: Vec<Vec<f64>>,
    pub comparisons: Vec<Comparison>,
    pub lf_inputs: Vec<Vec<f64>>,
    pub lf_targets: Vec<f64>,
}

impl MixedDataset {
    pub fn validate(&self) -> Result<()> {
        for c in &self.comparisons {
            c.check(self.hf_inputs.len())?;
        }
        if self.lf_inputs.len() != self.lf_targets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lf_inputs.len(),
                found: self.lf_targets.len(),
            });
        }
        if let Some(d) = self.dims() {
            if self.hf_inputs.iter().chain(&self.lf_inputs).any(|x| x.len() != d) {
                return Err(Error::InvalidData("inputs have inconsistent dimensions".into()));
            }
        }
        if self.lf_targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidData("non-finite numerical observation".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> Option<usize> {
        self.hf_inputs.first().or(self.lf_inputs.first()).map(Vec::len)
    }

    pub fn n_observations(&self) -> usize {
        self.comparisons.len() + self.lf_targets.len()
    }

    /// Index of `x` among the hf inputs, appending it when new.
    pub fn hf_index_of(&mut self, x: &[f64]) -> usize {
        if let Some(i) = self.hf_inputs.iter().position(|h| h.as_slice() == x) {
            return i;
        }
        self.hf_inputs.push(x.to_vec());
        self.hf_inputs.len() - 1
    }
}

fn check_sd(noise_sd: f64) -> Result<()> {
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_sd must be positive, got {noise_sd}")));
    }
    Ok(())
}

/// `log Phi((g_winner - g_loser) / sqrt(2 sigma^2))`.
pub fn probit_pref_loglik(g_winner: f64, g_loser: f64, noise_sd: f64) -> Result<f64> {
    check_sd(noise_sd)?;
    Ok(normal::log_cdf((g_winner - g_loser) / (2f64.sqrt() * noise_sd)))
}

pub fn gaussian_loglik(y: f64, g: f64, noise_sd: f64) -> f64 {
    let r = (y - g) / noise_sd;
    -0.5 * r * r - noise_sd.ln() - LN_SQRT_2PI
}

/// `latents` holds the hf latent values followed by the lf latent values.
pub fn joint_multimodal_loglik(latents: &[f64], data: &MixedDataset, noise_sd: f64) -> Result<f64> {
    check_sd(noise_sd)?;
    let n_hf = data.hf_inputs.len();
    let expected = n_hf + data.lf_inputs.len();
    if latents.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: latents.len(),
        });
    }
    if data.lf_inputs.len() != data.lf_targets.len() {
        return Err(Error::DimensionMismatch {
            expected: data.lf_inputs.len(),
            found: data.lf_targets.len(),
        });
    }
    let mut total = 0.0;
    for c in &data.comparisons {
        c.check(n_hf)?;
        total += probit_pref_loglik(latents[c.winner], latents[c.loser], noise_sd)?;
    }
    for (i, y) in data.lf_targets.iter().enumerate() {
        total += gaussian_loglik(*y, latents[n_hf + i], noise_sd);
    }
    Ok(total)
}

/// AR1 comparison likelihood with the low-fidelity GP integrated out.
///
/// `lf_var_diff` is `Var[g_lf(winner) - g_lf(loser)]`.
pub fn ar1_comparison_loglik(
    delta_winner: f64,
    delta_loser: f64,
    lf_mean_winner: f64,
    lf_mean_loser: f64,
    lf_var_diff: f64,
    noise_sd: f64,
) -> Result<f64> {
    check_sd(noise_sd)?;
    if !(lf_var_diff >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance of the low-fidelity difference must be non-negative, got {lf_var_diff}"
        )));
    }
    let num = delta_winner + lf_mean_winner - delta_loser - lf_mean_loser;
    Ok(normal::log_cdf(num / (lf_var_diff + 2.0 * noise_sd * noise_sd).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn probit_examples() {
        let v = probit_pref_loglik(0.3, 0.3, 0.7).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-15);
        assert!((v + 0.6931).abs() < 1e-4);
        let s = 0.4;
        let v = probit_pref_loglik(2f64.sqrt() * s, 0.0, s).unwrap();
        assert!((v - 0.841_344_746_068_542_9f64.ln()).abs() < 1e-12);
        assert!(probit_pref_loglik(1.0, 0.0, 0.0).is_err());
        assert!(probit_pref_loglik(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn probit_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 1_000_000;
        for _ in 0..3 {
            let gi: f64 = rng.random_range(-1.0..1.0);
            let gj: f64 = rng.random_range(-1.0..1.0);
            let s: f64 = rng.random_range(0.1..1.0);
            let eps = Normal::new(0.0, s).unwrap();
            let hits = (0..n)
                .filter(|_| gi + eps.sample(&mut rng) >= gj + eps.sample(&mut rng))
                .count();
            let p_mc = hits as f64 / n as f64;
            let p = probit_pref_loglik(gi, gj, s).unwrap().exp();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((p - p_mc).abs() <= 3.0 * se, "{p} vs {p_mc}");
        }
    }

    #[test]
    fn comparison_rejects_identical_indices() {
        assert!(Comparison::new(2, 2).is_err());
        assert!(matches!(
            Comparison::new(0, 3).unwrap().check(3),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn joint_likelihood_examples() {
        let empty = MixedDataset::default();
        assert_eq!(joint_multimodal_loglik(&[], &empty, 0.3).unwrap(), 0.0);

        let data = MixedDataset {
            hf_inputs: vec![vec![0.1], vec![0.9]],
            comparisons: vec![Comparison::new(0, 1).unwrap()],
            lf_inputs: vec![vec![0.5]],
            lf_targets: vec![0.25],
        };
        let v = joint_multimodal_loglik(&[0.4, 0.4, 0.25], &data, 1.0).unwrap();
        let expect = 0.5f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - expect).abs() < 1e-14);
        assert!(joint_multimodal_loglik(&[0.4, 0.4], &data, 1.0).is_err());

        let bad = MixedDataset {
            comparisons: vec![Comparison { winner: 0, loser: 5 }],
            ..data
        };
        assert!(matches!(
            joint_multimodal_loglik(&[0.0, 0.0, 0.0], &bad, 1.0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn joint_likelihood_is_sum_of_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hf: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random()]).collect();
        let comps: Vec<Comparison> = (0..8)
            .map(|_| {
                let w = rng.random_range(0..6);
                let l = (w + rng.random_range(1..6)) % 6;
                Comparison::new(w, l).unwrap()
            })
            .collect();
        let lf: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random()]).collect();
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let latents: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = MixedDataset {
            hf_inputs: hf,
            comparisons: comps.clone(),
            lf_inputs: lf,
            lf_targets: y.clone(),
        };
        let s = 0.35;
        let mut expect = 0.0;
        for c in &comps {
            let z = (latents[c.winner] - latents[c.loser]) / (2f64.sqrt() * s);
            expect += (0.5 * libm::erfc(-z / 2f64.sqrt())).ln();
        }
        for i in 0..4 {
            let r = y[i] - latents[6 + i];
            expect += -0.5 * r * r / (s * s) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln();
        }
        let v = joint_multimodal_loglik(&latents, &data, s).unwrap();
        assert!((v - expect).abs() < 1e-10);
    }

    #[test]
    fn ar1_examples() {
        let v = ar1_comparison_loglik(0.2, 0.2, 1.0, 1.0, 0.7, 0.3).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-15);
        let a = ar1_comparison_loglik(0.4, -0.1, 0.3, 0.5, 0.0, 0.25).unwrap();
        let b = probit_pref_loglik(0.7, 0.4, 0.25).unwrap();
        assert_eq!(a, b);
        assert!(ar1_comparison_loglik(0.0, 0.0, 0.0, 0.0, -1e-3, 0.3).is_err());
        assert!(ar1_comparison_loglik(0.0, 0.0, 0.0, 0.0, 0.1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn probit_complementarity(a in -10.0f64..10.0, b in -10.0f64..10.0, s in 0.01f64..5.0) {
            let p = probit_pref_loglik(a, b, s).unwrap().exp();
            let q = probit_pref_loglik(b, a, s).unwrap().exp();
            prop_assert!((p + q - 1.0).abs() <= 1e-12);
            let v = probit_pref_loglik(a, b, s).unwrap();
            prop_assert!(v < 0.0 || (a - b) / s > 8.0);
        }

        #[test]
        fn probit_monotone_in_gap(a in -5.0f64..5.0, d in 1e-3f64..3.0, s in 0.05f64..2.0) {
            prop_assert!(probit_pref_loglik(a + d, 0.0, s).unwrap() > probit_pref_loglik(a, 0.0, s).unwrap());
        }

        #[test]
        fn ar1_shrinks_toward_indifference(
            dw in -2.0f64..2.0, dl in -2.0f64..2.0, mw in -2.0f64..2.0, ml in -2.0f64..2.0,
            v in 0.0f64..3.0, extra in 0.01f64..3.0, s in 0.05f64..1.0,
        ) {
            let p1 = ar1_comparison_loglik(dw, dl, mw, ml, v, s).unwrap().exp();
            let p2 = ar1_comparison_loglik(dw, dl, mw, ml, v + extra, s).unwrap().exp();
            prop_assert!((p2 - 0.5).abs() <= (p1 - 0.5).abs() + 1e-15);
        }

        #[test]
        fn joint_likelihood_order_invariant(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data = MixedDataset {
                hf_inputs: (0..4).map(|i| vec![i as f64]).collect(),
                comparisons: (0..5).map(|_| {
                    let w = rng.random_range(0..4);
                    Comparison::new(w, (w + rng.random_range(1..4)) % 4).unwrap()
                }).collect(),
                lf_inputs: (0..3).map(|i| vec![i as f64]).collect(),
                lf_targets: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let mut latents: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let before = joint_multimodal_loglik(&latents, &data, 0.4).unwrap();
            data.comparisons.reverse();
            data.lf_inputs.reverse();
            data.lf_targets.reverse();
            latents[4..].reverse();
            let after = joint_multimodal_loglik(&latents, &data, 0.4).unwrap();
            prop_assert!((before - after).abs() < 1e-12);
        }
    }
}
