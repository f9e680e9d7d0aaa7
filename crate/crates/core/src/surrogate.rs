//! The three fitted surrogates (preference GP, multi-modal ICM, multi-modal
//! AR1) behind one interface.
//!
//! Every surrogate is a mixture of Gaussian processes, one component per
//! retained posterior draw. Each component conditions on its draw of the
//! latent values and hyperparameters, so predictions at arbitrary test
//! points are closed form per component. Factors are cached per component
//! and rebuilt when a model is loaded.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit_point_estimate, EvidenceSearch, GaussianPrediction, GpRegressor, NumericalDataset, PointEstimate};
use crate::kernel::{AugmentedInput, CoregMatrix, Fidelity, KernelKind, KernelParams};
use crate::likelihood::{Comparison, MixedDataset};
use crate::linalg::{cholesky_jittered, cholesky_with, Factor};
use crate::mcmc::{
    ar1_delta_density, draw_mvn, hmc_sample, icm_density, kernel_from_hypers, preference_density, Diagnostics,
    HmcConfig, HyperPriors, PosteriorSampleSet, MODEL_JITTER,
};

pub const SURROGATE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    PrefGp,
    MmIcm,
    MmAr1,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::PrefGp => "pref-gp",
            SurrogateKind::MmIcm => "mm-icm",
            SurrogateKind::MmAr1 => "mm-ar1",
        }
    }

    pub fn is_multimodal(self) -> bool {
        !matches!(self, SurrogateKind::PrefGp)
    }
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pref-gp" => Ok(Self::PrefGp),
            "mm-icm" => Ok(Self::MmIcm),
            "mm-ar1" => Ok(Self::MmAr1),
            other => Err(Error::InvalidParameter(format!("unknown surrogate kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub kernel: KernelKind,
    pub mcmc: HmcConfig,
    pub priors: HyperPriors,
    /// Posterior draws retained as prediction components (evenly thinned).
    pub max_components: usize,
    /// Multistart count for the low-fidelity evidence fit (mm-ar1).
    pub lf_starts: usize,
    /// Diagnostic: drop the discrepancy so mm-ar1 predicts with the lf GP alone.
    pub ar1_zero_delta: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::SquaredExponential,
            mcmc: HmcConfig::default(),
            priors: HyperPriors::default(),
            max_components: 256,
            lf_starts: 8,
            ar1_zero_delta: false,
        }
    }
}

impl SurrogateConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            mcmc: self.mcmc.with_seed(seed),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
enum CompKernel {
    Stationary(KernelParams),
    Icm { base: KernelParams, coreg: CoregMatrix },
}

impl CompKernel {
    #[inline]
    fn eval(&self, a: &[f64], fa: Fidelity, b: &[f64], fb: Fidelity) -> f64 {
        match self {
            CompKernel::Stationary(p) => p.eval_unchecked(a, b),
            CompKernel::Icm { base, coreg } => coreg.entry(fa, fb) * base.eval_unchecked(a, b),
        }
    }
}

/// One Gaussian-process component: conditioned on a single posterior draw.
#[derive(Debug, Clone)]
struct Component {
    kernel: CompKernel,
    inputs: Vec<AugmentedInput>,
    factor: Option<Factor>,
    alpha: DVector<f64>,
    noise_sd: f64,
}

impl Component {
    fn new(kernel: CompKernel, inputs: Vec<AugmentedInput>, latents: &[f64], noise_sd: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Ok(Self {
                kernel,
                inputs,
                factor: None,
                alpha: DVector::zeros(0),
                noise_sd,
            });
        }
        let n = inputs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel.eval(&inputs[i].xi, inputs[i].fidelity, &inputs[j].xi, inputs[j].fidelity)
        });
        let factor = match cholesky_with(&k, MODEL_JITTER) {
            Some(l) => Factor { l, jitter: MODEL_JITTER },
            None => cholesky_jittered(&k, k.diagonal().max().max(1e-12))?,
        };
        let alpha = factor.solve_vec(&DVector::from_column_slice(latents));
        Ok(Self {
            kernel,
            inputs,
            factor: Some(factor),
            alpha,
            noise_sd,
        })
    }

    fn cross(&self, test: &[Vec<f64>], f: Fidelity) -> DMatrix<f64> {
        DMatrix::from_fn(self.inputs.len(), test.len(), |i, j| {
            let a = &self.inputs[i];
            self.kernel.eval(&a.xi, a.fidelity, &test[j], f)
        })
    }

    fn prior_var(&self, x: &[f64], f: Fidelity) -> f64 {
        self.kernel.eval(x, f, x, f)
    }

    fn mean(&self, test: &[Vec<f64>], f: Fidelity) -> DVector<f64> {
        if self.factor.is_none() {
            return DVector::zeros(test.len());
        }
        self.cross(test, f).tr_mul(&self.alpha)
    }

    /// `L^{-1} k(train, test)`; empty when there is no training data.
    fn whitened(&self, test: &[Vec<f64>], f: Fidelity) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let factor = self.factor.as_ref()?;
        let cross = self.cross(test, f);
        let v = factor.solve_l(&cross);
        Some((cross, v))
    }

    fn marginals(&self, test: &[Vec<f64>], f: Fidelity) -> (DVector<f64>, DVector<f64>) {
        match self.whitened(test, f) {
            None => (
                DVector::zeros(test.len()),
                DVector::from_iterator(test.len(), test.iter().map(|x| self.prior_var(x, f))),
            ),
            Some((cross, v)) => {
                let mean = cross.tr_mul(&self.alpha);
                let var = DVector::from_fn(test.len(), |j, _| (self.prior_var(&test[j], f) - v.column(j).norm_squared()).max(0.0));
                (mean, var)
            }
        }
    }

    fn joint(&self, test: &[Vec<f64>], f: Fidelity) -> GaussianPrediction {
        let m = test.len();
        let prior = DMatrix::from_fn(m, m, |i, j| self.kernel.eval(&test[i], f, &test[j], f));
        match self.whitened(test, f) {
            None => GaussianPrediction {
                mean: DVector::zeros(m),
                covariance: prior,
            },
            Some((cross, v)) => {
                let mean = cross.tr_mul(&self.alpha);
                let c = prior - v.tr_mul(&v);
                GaussianPrediction {
                    mean,
                    covariance: (&c + c.transpose()) * 0.5,
                }
            }
        }
    }

    /// Grid-averaged variance reduction from one noisy observation at each candidate.
    fn variance_reduction(&self, candidates: &[Vec<f64>], grid: &[Vec<f64>], f: Fidelity, noise_var: f64) -> Vec<f64> {
        let prior_cross = DMatrix::from_fn(grid.len(), candidates.len(), |i, j| self.kernel.eval(&grid[i], f, &candidates[j], f));
        let (cov, var_c) = match (self.whitened(grid, f), self.whitened(candidates, f)) {
            (Some((_, vg)), Some((_, vc))) => {
                let cov = prior_cross - vg.tr_mul(&vc);
                let var = (0..candidates.len())
                    .map(|j| (self.prior_var(&candidates[j], f) - vc.column(j).norm_squared()).max(0.0))
                    .collect::<Vec<_>>();
                (cov, var)
            }
            _ => (prior_cross, candidates.iter().map(|c| self.prior_var(c, f)).collect()),
        };
        reduction_from(&cov, &var_c, noise_var)
    }
}

fn reduction_from(cov: &DMatrix<f64>, var_c: &[f64], noise_var: f64) -> Vec<f64> {
    let g = cov.nrows() as f64;
    (0..cov.ncols())
        .map(|j| cov.column(j).norm_squared() / (var_c[j] + noise_var) / g)
        .collect()
}

/// Persisted form of a surrogate; factors are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SurrogateDoc {
    schema_version: u32,
    kind: SurrogateKind,
    config: SurrogateConfig,
    data: MixedDataset,
    samples: PosteriorSampleSet,
    /// (mean, sd) used to standardize lf targets for mm-icm.
    lf_scale: Option<(f64, f64)>,
    lf_estimate: Option<PointEstimate>,
}

/// Draws of the AR1 surrogate split into its hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Draws {
    pub hf: Vec<Vec<f64>>,
    pub lf: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    doc: SurrogateDoc,
    components: Vec<Component>,
    lf_gp: Option<GpRegressor>,
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    if y.is_empty() {
        return (Vec::new(), 0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 1e-12 { sd } else { 1.0 };
    (y.iter().map(|v| (v - mean) / sd).collect(), mean, sd)
}

fn dims_of(data: &MixedDataset) -> Result<usize> {
    data.dims().ok_or_else(|| Error::InvalidData("dataset has no inputs".into()))
}

pub fn fit_pref_gp(hf_inputs: Vec<Vec<f64>>, comparisons: Vec<Comparison>, config: &SurrogateConfig) -> Result<SurrogateModel> {
    let data = MixedDataset {
        hf_inputs,
        comparisons,
        ..Default::default()
    };
    data.validate()?;
    if data.comparisons.is_empty() {
        return Err(Error::InvalidData("preference GP needs at least one comparison".into()));
    }
    let dims = dims_of(&data)?;
    let model = preference_density(data.hf_inputs.clone(), data.comparisons.clone(), dims, config.kernel, config.priors);
    let samples = hmc_sample(&model, &config.mcmc)?;
    SurrogateModel::assemble(SurrogateDoc {
        schema_version: SURROGATE_SCHEMA_VERSION,
        kind: SurrogateKind::PrefGp,
        config: config.clone(),
        data,
        samples,
        lf_scale: None,
        lf_estimate: None,
    })
}

pub fn fit_mm_icm(data: MixedDataset, config: &SurrogateConfig) -> Result<SurrogateModel> {
    data.validate()?;
    if data.n_observations() == 0 {
        return Err(Error::InvalidData("multi-modal ICM needs at least one observation".into()));
    }
    let (y, mean, sd) = standardize(&data.lf_targets);
    let model = icm_density(
        &data.hf_inputs,
        data.comparisons.clone(),
        &data.lf_inputs,
        &y,
        config.kernel,
        config.priors,
    );
    let samples = hmc_sample(&model, &config.mcmc)?;
    SurrogateModel::assemble(SurrogateDoc {
        schema_version: SURROGATE_SCHEMA_VERSION,
        kind: SurrogateKind::MmIcm,
        config: config.clone(),
        data,
        samples,
        lf_scale: Some((mean, sd)),
        lf_estimate: None,
    })
}

pub fn fit_mm_ar1(data: MixedDataset, config: &SurrogateConfig) -> Result<SurrogateModel> {
    data.validate()?;
    if data.lf_targets.len() < 2 {
        return Err(Error::InvalidData("multi-modal AR1 needs at least two lf observations".into()));
    }
    let search = EvidenceSearch {
        starts: config.lf_starts,
        kind: config.kernel,
        seed: config.mcmc.seed,
        ..Default::default()
    };
    let lf_data = NumericalDataset::new(data.lf_inputs.clone(), data.lf_targets.clone(), 1.0)?;
    let estimate = fit_point_estimate(&lf_data, &search)?;
    let lf_gp = GpRegressor::new(data.lf_inputs.clone(), &data.lf_targets, &estimate)?;
    let lf_at_hf = lf_gp.predict_standardized(&data.hf_inputs);
    let model = ar1_delta_density(
        data.hf_inputs.clone(),
        data.comparisons.clone(),
        &lf_at_hf.mean,
        &lf_at_hf.covariance,
        dims_of(&data)?,
        config.kernel,
        config.priors,
    );
    let samples = hmc_sample(&model, &config.mcmc)?;
    SurrogateModel::assemble(SurrogateDoc {
        schema_version: SURROGATE_SCHEMA_VERSION,
        kind: SurrogateKind::MmAr1,
        config: config.clone(),
        data,
        samples,
        lf_scale: None,
        lf_estimate: Some(estimate),
    })
}

/// Dispatch on the surrogate kind. `pref-gp` uses only the hf part of `data`.
pub fn fit_surrogate(kind: SurrogateKind, data: MixedDataset, config: &SurrogateConfig) -> Result<SurrogateModel> {
    match kind {
        SurrogateKind::PrefGp => fit_pref_gp(data.hf_inputs, data.comparisons, config),
        SurrogateKind::MmIcm => fit_mm_icm(data, config),
        SurrogateKind::MmAr1 => fit_mm_ar1(data, config),
    }
}

impl SurrogateModel {
    fn assemble(doc: SurrogateDoc) -> Result<Self> {
        let samples = &doc.samples;
        let kernel_kind = doc.config.kernel;
        let indices = samples.thin_indices(doc.config.max_components.max(1));
        let noise = |s: usize| samples.hyper(s, "noise_sd").unwrap_or(0.0);
        let mut lf_gp = None;
        let mut components = Vec::with_capacity(indices.len());
        match doc.kind {
            SurrogateKind::PrefGp => {
                let inputs: Vec<AugmentedInput> =
                    doc.data.hf_inputs.iter().map(|x| AugmentedInput::new(x.clone(), Fidelity::Hf)).collect();
                for &s in &indices {
                    let params = kernel_from_hypers(samples, s, kernel_kind)?;
                    components.push(Component::new(
                        CompKernel::Stationary(params),
                        inputs.clone(),
                        &samples.latent_draws[s],
                        noise(s),
                    )?);
                }
            }
            SurrogateKind::MmIcm => {
                let inputs: Vec<AugmentedInput> = doc
                    .data
                    .hf_inputs
                    .iter()
                    .map(|x| AugmentedInput::new(x.clone(), Fidelity::Hf))
                    .chain(doc.data.lf_inputs.iter().map(|x| AugmentedInput::new(x.clone(), Fidelity::Lf)))
                    .collect();
                let dims = dims_of(&doc.data)?;
                for &s in &indices {
                    let ls = (0..dims)
                        .map(|d| samples.hyper(s, &format!("lengthscale_{d}")))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| Error::InvalidData("ICM draws lack lengthscales".into()))?;
                    let get = |n: &str| samples.hyper(s, n).ok_or_else(|| Error::InvalidData(format!("ICM draws lack {n}")));
                    let coreg = CoregMatrix::new(get("sigma_hf")?, get("sigma_lf")?, get("rho")?.min(1.0 - 1e-12))?;
                    let base = KernelParams::new(ls, 1.0, kernel_kind)?;
                    components.push(Component::new(
                        CompKernel::Icm { base, coreg },
                        inputs.clone(),
                        &samples.latent_draws[s],
                        noise(s),
                    )?);
                }
            }
            SurrogateKind::MmAr1 => {
                let est = doc
                    .lf_estimate
                    .as_ref()
                    .ok_or_else(|| Error::InvalidData("AR1 model without lf estimate".into()))?;
                let gp = GpRegressor::new(doc.data.lf_inputs.clone(), &doc.data.lf_targets, est)?;
                let inputs: Vec<AugmentedInput> =
                    doc.data.hf_inputs.iter().map(|x| AugmentedInput::new(x.clone(), Fidelity::Hf)).collect();
                if !doc.config.ar1_zero_delta {
                    for &s in &indices {
                        let params = kernel_from_hypers(samples, s, kernel_kind)?;
                        components.push(Component::new(
                            CompKernel::Stationary(params),
                            inputs.clone(),
                            &samples.latent_draws[s],
                            noise(s),
                        )?);
                    }
                }
                lf_gp = Some(gp);
            }
        }
        Ok(Self { doc, components, lf_gp })
    }

    pub fn kind(&self) -> SurrogateKind {
        self.doc.kind
    }

    pub fn config(&self) -> &SurrogateConfig {
        &self.doc.config
    }

    pub fn data(&self) -> &MixedDataset {
        &self.doc.data
    }

    pub fn samples(&self) -> &PosteriorSampleSet {
        &self.doc.samples
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.doc.samples.diagnostics
    }

    pub fn lf_gp(&self) -> Option<&GpRegressor> {
        self.lf_gp.as_ref()
    }

    /// Number of mixture components used for prediction at `fidelity`.
    pub fn n_components(&self, fidelity: Fidelity) -> usize {
        match (self.doc.kind, fidelity) {
            (SurrogateKind::MmAr1, Fidelity::Lf) => 1,
            (SurrogateKind::MmAr1, Fidelity::Hf) => self.components.len().max(1),
            _ => self.components.len(),
        }
    }

    fn effective(&self, fidelity: Fidelity) -> Fidelity {
        match self.doc.kind {
            SurrogateKind::PrefGp => Fidelity::Hf,
            _ => fidelity,
        }
    }

    fn lf_standardized(&self, test: &[Vec<f64>]) -> GaussianPrediction {
        self.lf_gp.as_ref().expect("AR1 model carries an lf GP").predict_standardized(test)
    }

    /// Per-component marginal means and variances at `test`.
    pub fn marginals(&self, test: &[Vec<f64>], fidelity: Fidelity) -> Vec<(DVector<f64>, DVector<f64>)> {
        let f = self.effective(fidelity);
        if self.doc.kind == SurrogateKind::MmAr1 {
            let (m, v) = self.lf_gp.as_ref().expect("lf GP").predict_marginal_standardized(test);
            let (lm, lv) = (DVector::from_vec(m), DVector::from_vec(v));
            if f == Fidelity::Lf || self.components.is_empty() {
                return vec![(lm, lv)];
            }
            return self
                .components
                .iter()
                .map(|c| {
                    let (dm, dv) = c.marginals(test, Fidelity::Hf);
                    (&lm + dm, &lv + dv)
                })
                .collect();
        }
        self.components.iter().map(|c| c.marginals(test, f)).collect()
    }

    /// Per-component joint Gaussian at `test`.
    pub fn joints(&self, test: &[Vec<f64>], fidelity: Fidelity) -> Vec<GaussianPrediction> {
        let f = self.effective(fidelity);
        if self.doc.kind == SurrogateKind::MmAr1 {
            let lf = self.lf_standardized(test);
            if f == Fidelity::Lf || self.components.is_empty() {
                return vec![lf];
            }
            return self
                .components
                .iter()
                .map(|c| {
                    let d = c.joint(test, Fidelity::Hf);
                    GaussianPrediction {
                        mean: &lf.mean + d.mean,
                        covariance: &lf.covariance + d.covariance,
                    }
                })
                .collect();
        }
        self.components.iter().map(|c| c.joint(test, f)).collect()
    }

    /// Posterior mean at `fidelity`, averaged over components.
    pub fn mean_at(&self, test: &[Vec<f64>], fidelity: Fidelity) -> Vec<f64> {
        let f = self.effective(fidelity);
        let mut acc = DVector::zeros(test.len());
        let count;
        if self.doc.kind == SurrogateKind::MmAr1 {
            let (m, _) = self.lf_gp.as_ref().expect("lf GP").predict_marginal_standardized(test);
            acc += DVector::from_vec(m);
            if f == Fidelity::Hf && !self.components.is_empty() {
                let mut delta = DVector::zeros(test.len());
                for c in &self.components {
                    delta += c.mean(test, Fidelity::Hf);
                }
                acc += delta / self.components.len() as f64;
            }
            count = 1.0;
        } else {
            for c in &self.components {
                acc += c.mean(test, f);
            }
            count = self.components.len() as f64;
        }
        (acc / count).as_slice().to_vec()
    }

    /// Posterior mean of the hf latent utility.
    pub fn posterior_mean(&self, test: &[Vec<f64>]) -> Vec<f64> {
        self.mean_at(test, Fidelity::Hf)
    }

    /// Posterior-predictive draws of the hf latent utility, `n_draws x test.len()`.
    /// Draw `i` comes from component `i mod S`.
    pub fn sample_at(&self, test: &[Vec<f64>], n_draws: usize, seed: u64) -> Vec<Vec<f64>> {
        if self.doc.kind == SurrogateKind::MmAr1 {
            return self.sample_decomposed(test, n_draws, seed).map(|d| d.hf).unwrap_or_default();
        }
        self.sample_mixture(&self.joints(test, Fidelity::Hf), n_draws, seed)
    }

    fn sample_mixture(&self, comps: &[GaussianPrediction], n_draws: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_draws)
            .map(|i| {
                let c = &comps[i % comps.len()];
                draw_mvn(&c.mean, &c.covariance, &mut rng)
            })
            .collect()
    }

    /// AR1 draws split into lf, discrepancy and hf parts, with `hf = lf + delta`
    /// element by element. `None` for other kinds.
    pub fn sample_decomposed(&self, test: &[Vec<f64>], n_draws: usize, seed: u64) -> Option<Ar1Draws> {
        if self.doc.kind != SurrogateKind::MmAr1 {
            return None;
        }
        let lf = self.lf_standardized(test);
        let deltas: Vec<GaussianPrediction> = self.components.iter().map(|c| c.joint(test, Fidelity::Hf)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Ar1Draws {
            hf: Vec::with_capacity(n_draws),
            lf: Vec::with_capacity(n_draws),
            delta: Vec::with_capacity(n_draws),
        };
        for i in 0..n_draws {
            let l = draw_mvn(&lf.mean, &lf.covariance, &mut rng);
            let d = if deltas.is_empty() {
                vec![0.0; test.len()]
            } else {
                let c = &deltas[i % deltas.len()];
                draw_mvn(&c.mean, &c.covariance, &mut rng)
            };
            out.hf.push(l.iter().zip(&d).map(|(a, b)| a + b).collect());
            out.lf.push(l);
            out.delta.push(d);
        }
        Some(out)
    }

    /// Per-component grid-averaged variance reduction from one noisy
    /// observation at each candidate, averaged over components.
    pub fn variance_reduction(&self, candidates: &[Vec<f64>], grid: &[Vec<f64>], fidelity: Fidelity) -> Vec<f64> {
        let f = self.effective(fidelity);
        let mut acc = vec![0.0; candidates.len()];
        let mut count: f64 = 0.0;
        let mut add = |r: Vec<f64>| {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
            count += 1.0;
        };
        if self.doc.kind == SurrogateKind::MmAr1 && f == Fidelity::Lf {
            let gp = self.lf_gp.as_ref().expect("lf GP");
            let params = gp.standardized_params();
            let vg = gp.whitened_cross(grid);
            let vc = gp.whitened_cross(candidates);
            let prior = crate::kernel::kernel_matrix_unchecked(grid, candidates, params);
            let cov = prior - vg.tr_mul(&vc);
            let var: Vec<f64> = (0..candidates.len())
                .map(|j| (params.signal_variance - vc.column(j).norm_squared()).max(0.0))
                .collect();
            add(reduction_from(&cov, &var, gp.standardized_noise_sd().powi(2)));
        } else {
            for c in &self.components {
                add(c.variance_reduction(candidates, grid, f, c.noise_sd * c.noise_sd));
            }
        }
        acc.iter().map(|a| a / count.max(1.0)).collect()
    }

    /// Largest lf target in the units the surrogate predicts lf values in.
    pub fn lf_incumbent(&self) -> Option<f64> {
        let y = &self.doc.data.lf_targets;
        if y.is_empty() {
            return None;
        }
        let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        match self.doc.kind {
            SurrogateKind::PrefGp => None,
            SurrogateKind::MmIcm => self.doc.lf_scale.map(|(m, s)| (max - m) / s),
            SurrogateKind::MmAr1 => self.lf_gp.as_ref().map(|g| (max - g.target_mean()) / g.target_sd()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.doc).expect("surrogate serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let doc: SurrogateDoc =
            serde_json::from_value(value).map_err(|e| Error::InvalidData(format!("surrogate document: {e}")))?;
        if doc.schema_version != SURROGATE_SCHEMA_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported surrogate schema_version {}",
                doc.schema_version
            )));
        }
        Self::assemble(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SurrogateConfig {
        SurrogateConfig {
            mcmc: HmcConfig {
                chains: 2,
                warmup: 150,
                draws: 100,
                seed: 3,
                ..Default::default()
            },
            max_components: 64,
            ..Default::default()
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [SurrogateKind::PrefGp, SurrogateKind::MmIcm, SurrogateKind::MmAr1] {
            assert_eq!(k.name().parse::<SurrogateKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), serde_json::json!(k.name()));
        }
        assert!("gp".parse::<SurrogateKind>().is_err());
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let data = MixedDataset {
            hf_inputs: vec![vec![0.2], vec![0.8]],
            comparisons: vec![Comparison::new(1, 0).unwrap()],
            lf_inputs: vec![vec![0.1], vec![0.5], vec![0.9]],
            lf_targets: vec![0.0, 0.5, 1.0],
        };
        let test = vec![vec![0.3], vec![0.7]];
        for kind in [SurrogateKind::PrefGp, SurrogateKind::MmIcm, SurrogateKind::MmAr1] {
            let m = fit_surrogate(kind, data.clone(), &quick()).unwrap();
            let back = SurrogateModel::from_json(m.to_json()).unwrap();
            assert_eq!(m.posterior_mean(&test), back.posterior_mean(&test), "{kind}");
            assert_eq!(m.sample_at(&test, 5, 1), back.sample_at(&test, 5, 1));
        }
    }

    #[test]
    fn rejects_unknown_schema_version() {
        let m = fit_pref_gp(vec![vec![0.1], vec![0.9]], vec![Comparison::new(0, 1).unwrap()], &quick()).unwrap();
        let mut v = m.to_json();
        v["schema_version"] = serde_json::json!(99);
        assert!(SurrogateModel::from_json(v).is_err());
    }
}
