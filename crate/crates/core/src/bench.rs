//! Synthetic ground truth for benchmarks: correlated hf/lf utility pairs, a
//! simulated probit decision maker, and brute-force optima.
//!
//! All utilities are maximized and live on the unit box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Comparison;
use crate::seed::mix;
use crate::sobol::Sobol;
use crate::space::DesignBox;

pub const PROBE_POINTS: usize = 512;
const BUMPS: usize = 3;
const MAX_RETRIES: u64 = 200;

/// Something with a utility value at every point of the unit box.
pub trait Utility: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Utility for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Turns a cost to be minimized into a utility to be maximized.
pub struct Negated<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Utility for Negated<F> {
    fn value(&self, x: &[f64]) -> f64 {
        -(self.0)(x)
    }
}

/// Sum of Gaussian bumps, affinely standardized on the probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub centers: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    pub heights: Vec<f64>,
    pub offset: f64,
    pub scale: f64,
}

impl BumpFunction {
    fn random(dims: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            centers: (0..BUMPS).map(|_| (0..dims).map(|_| rng.random_range(0.1..0.9)).collect()).collect(),
            widths: (0..BUMPS).map(|_| rng.random_range(0.1..0.3)).collect(),
            heights: (0..BUMPS).map(|_| rng.random_range(0.5..1.5)).collect(),
            offset: 0.0,
            scale: 1.0,
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.widths)
            .zip(&self.heights)
            .map(|((c, w), h)| {
                let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                h * (-0.5 * d2 / (w * w)).exp()
            })
            .sum()
    }

    fn standardize(&mut self, probe: &[Vec<f64>]) {
        let v: Vec<f64> = probe.iter().map(|x| self.raw(x)).collect();
        let (m, s) = mean_sd(&v);
        self.offset = m;
        self.scale = if s > 1e-12 { s } else { 1.0 };
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.raw(x) - self.offset) / self.scale
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    cov / (sa * sb)
}

/// A true hf utility and a correlated lf approximation
/// `lf = alpha * hf + sqrt(1 - alpha^2) * other`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub dims: usize,
    pub target_correlation: f64,
    /// Seed requested by the caller.
    pub seed: u64,
    /// Seed the construction actually succeeded with (after retries).
    pub construction_seed: u64,
    pub alpha: f64,
    pub hf: BumpFunction,
    pub other: BumpFunction,
}

impl SyntheticPair {
    pub fn hf_utility(&self, x: &[f64]) -> f64 {
        self.hf.eval(x)
    }

    pub fn lf_utility(&self, x: &[f64]) -> f64 {
        if self.alpha >= 1.0 {
            return self.hf.eval(x);
        }
        self.alpha * self.hf.eval(x) + (1.0 - self.alpha * self.alpha).sqrt() * self.other.eval(x)
    }

    pub fn probe_set(dims: usize) -> Vec<Vec<f64>> {
        Sobol::new(dims).expect("supported dimension").points(PROBE_POINTS)
    }

    /// Pearson correlation of hf and lf on the probe set.
    pub fn empirical_correlation(&self) -> f64 {
        let probe = Self::probe_set(self.dims);
        let hf: Vec<f64> = probe.iter().map(|x| self.hf_utility(x)).collect();
        let lf: Vec<f64> = probe.iter().map(|x| self.lf_utility(x)).collect();
        pearson(&hf, &lf)
    }
}

fn try_pair(seed: u64, target: f64, dims: usize, probe: &[Vec<f64>]) -> Option<SyntheticPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5959));
    let mut hf = BumpFunction::random(dims, &mut rng);
    let mut other = BumpFunction::random(dims, &mut rng);
    hf.standardize(probe);
    other.standardize(probe);
    let mut pair = SyntheticPair {
        dims,
        target_correlation: target,
        seed,
        construction_seed: seed,
        alpha: 1.0,
        hf,
        other,
    };
    if target >= 1.0 {
        return Some(pair);
    }
    let hv: Vec<f64> = probe.iter().map(|x| pair.hf.eval(x)).collect();
    let ov: Vec<f64> = probe.iter().map(|x| pair.other.eval(x)).collect();
    let corr = |alpha: f64| {
        let lf: Vec<f64> = hv.iter().zip(&ov).map(|(h, o)| alpha * h + (1.0 - alpha * alpha).sqrt() * o).collect();
        pearson(&hv, &lf)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if corr(lo) > target || corr(hi) < target {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if corr(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    pair.alpha = 0.5 * (lo + hi);
    ((corr(pair.alpha) - target).abs() < 1e-6).then_some(pair)
}

/// Build a pair whose lf/hf probe-set correlation equals `target_correlation`.
/// Seeds whose independent component makes the target unreachable are
/// skipped in favour of the next seed.
pub fn make_synthetic_pair(seed: u64, target_correlation: f64, dims: usize) -> Result<SyntheticPair> {
    if dims == 0 || dims > crate::sobol::MAX_DIMS {
        return Err(Error::InvalidParameter(format!("unsupported dimension {dims}")));
    }
    if !(0.0..=1.0).contains(&target_correlation) {
        return Err(Error::InvalidParameter("target correlation must lie in [0, 1]".into()));
    }
    let probe = SyntheticPair::probe_set(dims);
    for attempt in 0..MAX_RETRIES {
        if let Some(mut pair) = try_pair(seed.wrapping_add(attempt), target_correlation, dims, &probe) {
            pair.seed = seed;
            return Ok(pair);
        }
    }
    Err(Error::Synthetic(format!(
        "no pair reached correlation {target_correlation} within {MAX_RETRIES} seeds"
    )))
}

/// Probit decision maker over a known utility.
pub struct SimulatedDm<U> {
    pub utility: U,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl<U: Utility> SimulatedDm<U> {
    pub fn new(utility: U, noise_sd: f64, seed: u64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidParameter("decision-maker noise must be non-negative".into()));
        }
        Ok(Self {
            utility,
            noise: (noise_sd > 0.0).then(|| Normal::new(0.0, noise_sd).expect("valid sd")),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// True when `a` is preferred: `u(a) + e_a >= u(b) + e_b`.
    pub fn prefers_first(&mut self, a: &[f64], b: &[f64]) -> bool {
        let (mut ua, mut ub) = (self.utility.value(a), self.utility.value(b));
        if let Some(n) = &self.noise {
            ua += n.sample(&mut self.rng);
            ub += n.sample(&mut self.rng);
        }
        ua >= ub
    }

    /// Comparison over the local indices `a = 0`, `b = 1`.
    pub fn query(&mut self, a: &[f64], b: &[f64]) -> Comparison {
        if self.prefers_first(a, b) {
            Comparison { winner: 0, loser: 1 }
        } else {
            Comparison { winner: 1, loser: 0 }
        }
    }
}

/// Maximizer of `utility` over a dense grid (up to 3 dimensions) or 10^5
/// Sobol points, in the coordinates of `design`.
pub fn grid_optimum(utility: &dyn Utility, design: &DesignBox, resolution: usize) -> Result<(Vec<f64>, f64)> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    let dims = design.dims();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut visit = |u: Vec<f64>| {
        let x = design.from_unit(&u);
        let v = utility.value(&x);
        if v > best.1 {
            best = (x, v);
        }
    };
    if dims <= 3 {
        let total = resolution.pow(dims as u32);
        for idx in 0..total {
            let mut rem = idx;
            let u: Vec<f64> = (0..dims)
                .map(|_| {
                    let i = rem % resolution;
                    rem /= resolution;
                    i as f64 / (resolution - 1) as f64
                })
                .collect();
            visit(u);
        }
    } else {
        let s = Sobol::new(dims)?;
        for i in 0..100_000u32 {
            visit(s.point(i));
        }
    }
    Ok(best)
}

/// `optimum_value - utility(x)`; non-negative up to the grid slack.
pub fn regret(x: &[f64], truth: &dyn Utility, optimum_value: f64) -> f64 {
    optimum_value - truth.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_correlation_copies_hf() {
        let p = make_synthetic_pair(3, 1.0, 2).unwrap();
        for x in SyntheticPair::probe_set(2) {
            assert!((p.hf_utility(&x) - p.lf_utility(&x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_correlation_is_uncorrelated() {
        let p = make_synthetic_pair(11, 0.0, 2).unwrap();
        assert!(p.empirical_correlation().abs() <= 0.1);
    }

    #[test]
    fn seed_seven_two_dims() {
        let p = make_synthetic_pair(7, 0.9, 2).unwrap();
        let r = p.empirical_correlation();
        assert!((0.8..=1.0).contains(&r), "{r}");
    }

    #[test]
    fn pairs_are_reproducible() {
        let a = make_synthetic_pair(21, 0.5, 3).unwrap();
        let b = make_synthetic_pair(21, 0.5, 3).unwrap();
        assert_eq!(a, b);
        let x = [0.3, 0.6, 0.9];
        assert_eq!(a.lf_utility(&x), b.lf_utility(&x));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_synthetic_pair(0, 1.5, 2).is_err());
        assert!(make_synthetic_pair(0, 0.5, 0).is_err());
        assert!(SimulatedDm::new(|x: &[f64]| x[0], -1.0, 0).is_err());
    }

    #[test]
    fn noiseless_dm_follows_utility() {
        let mut dm = SimulatedDm::new(|x: &[f64]| x[0], 0.0, 1).unwrap();
        for _ in 0..100 {
            assert!(dm.prefers_first(&[0.6], &[0.5]));
        }
        assert_eq!(dm.query(&[0.1], &[0.2]), Comparison { winner: 1, loser: 0 });
    }

    #[test]
    fn indifferent_dm_is_balanced() {
        let mut dm = SimulatedDm::new(|_: &[f64]| 0.0, 0.3, 2).unwrap();
        let wins = (0..10_000).filter(|_| dm.prefers_first(&[0.1], &[0.9])).count();
        let rate = wins as f64 / 1e4;
        assert!((0.47..=0.53).contains(&rate), "{rate}");
    }

    #[test]
    fn planted_grid_optimum() {
        let u = |x: &[f64]| -((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2));
        let (x, v) = grid_optimum(&u, &DesignBox::unit(2), 101).unwrap();
        assert_eq!(x, vec![0.5, 0.5]);
        assert_eq!(v, 0.0);
        let (x, _) = grid_optimum(&|x: &[f64]| x[0], &DesignBox::unit(2), 11).unwrap();
        assert_eq!(x[0], 1.0);
        assert!(grid_optimum(&u, &DesignBox::unit(2), 1).is_err());
    }

    #[test]
    fn negation_and_regret() {
        let cost = Negated(|x: &[f64]| x[0] * x[0]);
        assert_eq!(cost.value(&[2.0]), -4.0);
        assert!((regret(&[0.3], &|x: &[f64]| x[0], 1.0) - 0.7).abs() < 1e-15);
    }
}
