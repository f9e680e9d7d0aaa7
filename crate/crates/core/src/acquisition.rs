//! Acquisition functions and their maximization over the unit box.
//!
//! EI and EUBO are evaluated per mixture component in closed form and
//! averaged, which is the Monte Carlo estimate with the Gaussian part
//! integrated exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::kernel::Fidelity;
use crate::normal;
use crate::seed::mix;
use crate::sobol::Sobol;
use crate::space::clamp_unit;
use crate::surrogate::SurrogateModel;

/// Points evaluated by the refinement step around the best candidate.
pub const LOCAL_PERTURBATIONS: usize = 32;
pub const LOCAL_SD: f64 = 0.05;
/// Size of the mean-plus-SD shortlist that is paired exhaustively.
pub const PAIR_SHORTLIST: usize = 16;
pub const RANDOM_PAIRS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Ei,
    Ipv,
    Eubo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateOrigin {
    Sobol,
    Uniform,
    LocalPerturbation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
    pub origin: CandidateOrigin,
}

impl CandidateSet {
    pub fn sobol(dims: usize, n: usize, seed: u64) -> Self {
        let s = Sobol::scrambled(dims, seed).expect("supported dimension");
        Self {
            points: s.points(n),
            origin: CandidateOrigin::Sobol,
        }
    }

    pub fn uniform(dims: usize, n: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            points: (0..n).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect(),
            origin: CandidateOrigin::Uniform,
        }
    }

    pub fn around(center: &[f64], n: usize, sd: f64, rng: &mut ChaCha8Rng) -> Self {
        let noise = Normal::new(0.0, sd).expect("positive sd");
        let points = (0..n)
            .map(|_| {
                let mut p: Vec<f64> = center.iter().map(|c| c + noise.sample(rng)).collect();
                clamp_unit(&mut p);
                p
            })
            .collect();
        Self {
            points,
            origin: CandidateOrigin::LocalPerturbation,
        }
    }
}

/// `E[max(X - incumbent, 0)]` for `X ~ N(mean, sd^2)`.
pub fn ei_gaussian(mean: f64, sd: f64, incumbent: f64) -> f64 {
    let gap = mean - incumbent;
    if sd <= 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * normal::cdf(z) + sd * normal::pdf(z)).max(0.0)
}

/// `E[max(X, Y)]` for jointly Gaussian `X`, `Y`.
pub fn eubo_gaussian(mean_a: f64, mean_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    let theta2 = var_a + var_b - 2.0 * cov;
    if theta2 <= 1e-24 {
        return mean_a.max(mean_b);
    }
    let theta = theta2.sqrt();
    let d = (mean_a - mean_b) / theta;
    mean_a * normal::cdf(d) + mean_b * normal::cdf(-d) + theta * normal::pdf(d)
}

/// Expected improvement over `incumbent` at each candidate.
pub fn expected_improvement(model: &SurrogateModel, candidates: &[Vec<f64>], incumbent: f64, fidelity: Fidelity) -> Vec<f64> {
    let comps = model.marginals(candidates, fidelity);
    let mut out = vec![0.0; candidates.len()];
    for (m, v) in &comps {
        for j in 0..candidates.len() {
            out[j] += ei_gaussian(m[j], v[j].sqrt(), incumbent);
        }
    }
    out.iter().map(|e| e / comps.len() as f64).collect()
}

/// Reduction of grid-averaged predictive variance from observing each
/// candidate once. Independent of the fantasized value for Gaussian
/// components, so the posterior-mean fantasy needs no explicit update.
pub fn integral_predictive_variance(
    model: &SurrogateModel,
    candidates: &[Vec<f64>],
    grid: &[Vec<f64>],
    fidelity: Fidelity,
) -> Vec<f64> {
    model.variance_reduction(candidates, grid, fidelity)
}

/// EUBO for index pairs into `points`.
pub fn eubo_pairs(model: &SurrogateModel, points: &[Vec<f64>], pairs: &[(usize, usize)]) -> Vec<f64> {
    let comps = model.joints(points, Fidelity::Hf);
    let mut out = vec![0.0; pairs.len()];
    for c in &comps {
        let cov = &c.covariance;
        for (o, &(a, b)) in out.iter_mut().zip(pairs) {
            *o += eubo_gaussian(c.mean[a], c.mean[b], cov[(a, a)], cov[(b, b)], cov[(a, b)]);
        }
    }
    out.iter().map(|e| e / comps.len() as f64).collect()
}

pub fn eubo(model: &SurrogateModel, a: &[f64], b: &[f64]) -> f64 {
    eubo_pairs(model, &[a.to_vec(), b.to_vec()], &[(0, 1)])[0]
}

/// Best point among `budget` Sobol candidates, refined once by local
/// perturbation (skipped when `budget == 1`). `acq` scores a batch.
pub fn maximize_single(acq: &dyn Fn(&[Vec<f64>]) -> Vec<f64>, dims: usize, budget: usize, seed: u64) -> (Vec<f64>, f64) {
    let budget = budget.max(1);
    let cands = CandidateSet::sobol(dims, budget, mix(seed, 1));
    let scores = acq(&cands.points);
    let (mut best, mut best_v) = argmax(&cands.points, &scores);
    if budget > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 2));
        let local = CandidateSet::around(&best, LOCAL_PERTURBATIONS, LOCAL_SD, &mut rng);
        let local_scores = acq(&local.points);
        let (p, v) = argmax(&local.points, &local_scores);
        if v > best_v {
            best = p;
            best_v = v;
        }
    }
    (best, best_v)
}

fn argmax(points: &[Vec<f64>], scores: &[f64]) -> (Vec<f64>, f64) {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    (points[best].clone(), scores[best])
}

/// Query pair maximizing EUBO among all pairs of the mean-plus-SD shortlist
/// (from `budget` Sobol candidates) and `min(64, budget)` uniform random pairs.
/// Pairs of identical points are never considered.
pub fn maximize_pair(model: &SurrogateModel, dims: usize, budget: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let budget = budget.max(1);
    let cands = CandidateSet::sobol(dims, budget, mix(seed, 3));
    let comps = model.marginals(&cands.points, Fidelity::Hf);
    let k = comps.len() as f64;
    let score: Vec<f64> = (0..cands.points.len())
        .map(|j| {
            let mean = comps.iter().map(|(m, _)| m[j]).sum::<f64>() / k;
            let second = comps.iter().map(|(m, v)| v[j] + m[j] * m[j]).sum::<f64>() / k;
            mean + (second - mean * mean).max(0.0).sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|a, b| score[*b].total_cmp(&score[*a]).then(a.cmp(b)));

    let mut points: Vec<Vec<f64>> = Vec::new();
    for &i in &order {
        if points.len() == PAIR_SHORTLIST {
            break;
        }
        if !points.contains(&cands.points[i]) {
            points.push(cands.points[i].clone());
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            pairs.push((a, b));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 4));
    for _ in 0..RANDOM_PAIRS.min(budget) {
        let a: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        if a == b {
            continue;
        }
        points.push(a);
        points.push(b);
        pairs.push((points.len() - 2, points.len() - 1));
    }
    let values = eubo_pairs(model, &points, &pairs);
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (a, b) = pairs[best];
    (points[a].clone(), points[b].clone())
}
