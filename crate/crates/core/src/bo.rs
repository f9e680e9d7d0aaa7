//! Optimization loops: numerical BO, preferential BO and the phased
//! multi-fidelity procedure, with recommendation, regret and trace replay.
//!
//! Loops work in the unit box. Episode 0 of every trace records the
//! initialization design; acquisition-driven episodes follow contiguously.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{expected_improvement, integral_predictive_variance, maximize_pair, maximize_single};
use crate::bench::{SimulatedDm, Utility};
use crate::error::{Error, Result};
use crate::kernel::Fidelity;
use crate::likelihood::{Comparison, MixedDataset};
use crate::seed::mix;
use crate::sobol::Sobol;
use crate::surrogate::{fit_surrogate, SurrogateConfig, SurrogateKind, SurrogateModel};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

const RETRY_TARGET_ACCEPT: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub lf_explore_episodes: usize,
    pub lf_exploit_episodes: usize,
    pub hf_episodes: usize,
}

impl PhaseSchedule {
    pub fn new(lf_explore_episodes: usize, lf_exploit_episodes: usize, hf_episodes: usize) -> Self {
        Self {
            lf_explore_episodes,
            lf_exploit_episodes,
            hf_episodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidParameter("schedule has no episodes".into()));
        }
        Ok(())
    }

    pub fn lf_episodes(&self) -> usize {
        self.lf_explore_episodes + self.lf_exploit_episodes
    }

    pub fn total(&self) -> usize {
        self.lf_episodes() + self.hf_episodes
    }

    /// Phase of acquisition-driven episode `episode` (1-based).
    pub fn phase_of(&self, episode: usize) -> Phase {
        if episode == 0 {
            Phase::Init
        } else if episode <= self.lf_explore_episodes {
            Phase::LfExplore
        } else if episode <= self.lf_episodes() {
            Phase::LfExploit
        } else {
            Phase::Hf
        }
    }
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self::new(20, 5, 15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    LfExplore,
    LfExploit,
    Hf,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::LfExplore => "lf-explore",
            Phase::LfExploit => "lf-exploit",
            Phase::Hf => "hf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub surrogate: SurrogateConfig,
    /// Sobol candidates per acquisition maximization.
    pub acq_budget: usize,
    /// Sobol candidates when maximizing the posterior mean.
    pub recommend_budget: usize,
    /// Integration grid size for IPV.
    pub ipv_grid: usize,
    /// Sobol lf evaluations before a multi-fidelity or numerical run.
    pub lf_init: usize,
    /// Sobol comparison pairs before a preference-only run.
    pub pref_init_pairs: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            surrogate: SurrogateConfig::default(),
            acq_budget: 256,
            recommend_budget: 1024,
            ipv_grid: 64,
            lf_init: 4,
            pref_init_pairs: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Observation {
    /// Numerical lf value of `queries[index]`.
    Numerical { index: usize, value: f64 },
    /// `queries[winner]` was preferred over `queries[loser]`.
    Comparison { winner: usize, loser: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcSummary {
    pub max_rhat: f64,
    pub mean_acceptance: f64,
    pub divergences: usize,
}

impl McmcSummary {
    pub fn of(model: &SurrogateModel) -> Self {
        let d = model.diagnostics();
        Self {
            max_rhat: d.max_rhat,
            mean_acceptance: d.acceptance_rate.iter().sum::<f64>() / d.acceptance_rate.len().max(1) as f64,
            divergences: d.divergences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub phase: Phase,
    /// Acquisition-driven hf comparisons made up to and including this episode.
    pub hf_episode: usize,
    pub queries: Vec<Vec<f64>>,
    pub observations: Vec<Observation>,
    pub recommendation: Vec<f64>,
    pub regret: Option<f64>,
    /// True hf utility at each query (benchmark mode).
    pub query_utility: Option<Vec<f64>>,
    pub wall_clock_ms: f64,
    pub mcmc: McmcSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub schema_version: u32,
    pub method: String,
    pub surrogate: SurrogateKind,
    pub seed: u64,
    pub dims: usize,
    pub records: Vec<EpisodeRecord>,
}

impl RunTrace {
    /// Regret after hf episode `k`: from the last record whose counter equals `k`.
    pub fn regret_at_hf_episode(&self, k: usize) -> Option<f64> {
        self.records.iter().rev().find(|r| r.hf_episode == k).and_then(|r| r.regret)
    }

    pub fn final_recommendation(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.recommendation.as_slice())
    }

    /// True utility of every point queried in an acquisition-driven hf episode.
    pub fn hf_query_utilities(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.phase == Phase::Hf)
            .filter_map(|r| r.query_utility.clone())
            .flatten()
            .collect()
    }

    pub fn comparisons(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| &r.observations)
            .filter(|o| matches!(o, Observation::Comparison { .. }))
            .count()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::json!({
                "schema_version": self.schema_version,
                "method": self.method,
                "surrogate": self.surrogate,
                "seed": self.seed,
                "record": r,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
#[error("run aborted after {} episodes: {error}", trace.records.len())]
pub struct RunFailure {
    pub trace: RunTrace,
    pub error: Error,
}

pub type RunResult = std::result::Result<RunTrace, Box<RunFailure>>;

pub trait LfOracle {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;
}

impl<F: FnMut(&[f64]) -> Result<f64>> LfOracle for F {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

pub trait DecisionMaker {
    fn prefers_first(&mut self, a: &[f64], b: &[f64]) -> Result<bool>;
}

impl<U: Utility> DecisionMaker for SimulatedDm<U> {
    fn prefers_first(&mut self, a: &[f64], b: &[f64]) -> Result<bool> {
        Ok(SimulatedDm::prefers_first(self, a, b))
    }
}

/// Known truth for regret accounting.
#[derive(Clone, Copy)]
pub struct Truth<'a> {
    pub utility: &'a dyn Utility,
    pub optimum: f64,
}

/// `optimum - utility(x)`.
pub fn regret(x: &[f64], truth: &Truth<'_>) -> f64 {
    truth.optimum - truth.utility.value(x)
}

/// Argmax of the posterior mean at `fidelity`.
pub fn recommend_at(model: &SurrogateModel, fidelity: Fidelity, dims: usize, budget: usize, seed: u64) -> Vec<f64> {
    maximize_single(&|c: &[Vec<f64>]| model.mean_at(c, fidelity), dims, budget, seed).0
}

/// Argmax of the hf posterior mean.
pub fn recommend(model: &SurrogateModel, dims: usize, budget: usize, seed: u64) -> Vec<f64> {
    recommend_at(model, Fidelity::Hf, dims, budget, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Numerical-only loop with the given acquisition; recommendations at lf.
    Numerical(crate::acquisition::AcquisitionKind),
    Preference,
    MultiFidelity(PhaseSchedule),
}

/// Seeds derived per episode so that replay reproduces every fit.
fn fit_seed(seed: u64, episode: usize) -> u64 {
    mix(seed, 0x1000_0000 + episode as u64)
}

fn acq_seed(seed: u64, episode: usize) -> u64 {
    mix(seed, 0x2000_0000 + episode as u64)
}

fn rec_seed(seed: u64, episode: usize) -> u64 {
    mix(seed, 0x3000_0000 + episode as u64)
}

struct Loop<'a> {
    kind: SurrogateKind,
    mode: Mode,
    config: BoConfig,
    seed: u64,
    dims: usize,
    data: MixedDataset,
    truth: Option<Truth<'a>>,
    trace: RunTrace,
    hf_episode: usize,
}

impl<'a> Loop<'a> {
    fn new(method: &str, kind: SurrogateKind, mode: Mode, config: &BoConfig, seed: u64, dims: usize, truth: Option<Truth<'a>>) -> Self {
        Self {
            kind,
            mode,
            config: config.clone(),
            seed,
            dims,
            data: MixedDataset::default(),
            truth,
            trace: RunTrace {
                schema_version: TRACE_SCHEMA_VERSION,
                method: method.to_string(),
                surrogate: kind,
                seed,
                dims,
                records: Vec::new(),
            },
            hf_episode: 0,
        }
    }

    fn fit(&self, episode: usize) -> Result<SurrogateModel> {
        let mut cfg = self.config.surrogate.with_seed(fit_seed(self.seed, episode));
        match fit_surrogate(self.kind, self.data.clone(), &cfg) {
            // One retry with a smaller adapted step size before giving up.
            Err(Error::TooManyDivergences { rate, .. }) if cfg.mcmc.target_accept < RETRY_TARGET_ACCEPT => {
                tracing::warn!(episode, rate, "divergent fit, retrying with target_accept {RETRY_TARGET_ACCEPT}");
                cfg.mcmc.target_accept = RETRY_TARGET_ACCEPT;
                fit_surrogate(self.kind, self.data.clone(), &cfg)
            }
            other => other,
        }
    }

    fn recommendation_fidelity(&self) -> Fidelity {
        match self.mode {
            Mode::Numerical(_) => Fidelity::Lf,
            _ => Fidelity::Hf,
        }
    }

    fn apply(&mut self, queries: &[Vec<f64>], observations: &[Observation]) {
        for o in observations {
            match *o {
                Observation::Numerical { index, value } => {
                    self.data.lf_inputs.push(queries[index].clone());
                    self.data.lf_targets.push(value);
                }
                Observation::Comparison { winner, loser } => {
                    let w = self.data.hf_index_of(&queries[winner]);
                    let l = self.data.hf_index_of(&queries[loser]);
                    self.data.comparisons.push(Comparison { winner: w, loser: l });
                }
            }
        }
    }

    /// Record an episode whose observations are already applied; refits and recommends.
    fn record(&mut self, episode: usize, phase: Phase, queries: Vec<Vec<f64>>, observations: Vec<Observation>, started: Instant) -> Result<SurrogateModel> {
        let model = self.fit(episode)?;
        let recommendation = recommend_at(
            &model,
            self.recommendation_fidelity(),
            self.dims,
            self.config.recommend_budget,
            rec_seed(self.seed, episode),
        );
        let regret = self.truth.as_ref().map(|t| regret(&recommendation, t));
        let query_utility = self.truth.as_ref().map(|t| queries.iter().map(|q| t.utility.value(q)).collect());
        self.trace.records.push(EpisodeRecord {
            episode,
            phase,
            hf_episode: self.hf_episode,
            queries,
            observations,
            recommendation,
            regret,
            query_utility,
            wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
            mcmc: McmcSummary::of(&model),
        });
        Ok(model)
    }

    fn fail(self, error: Error) -> Box<RunFailure> {
        Box::new(RunFailure { trace: self.trace, error })
    }
}

fn sobol_design(dims: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    Sobol::scrambled(dims, mix(seed, 0x5EED)).expect("supported dimension").points(n)
}

fn ipv_grid(dims: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    Sobol::scrambled(dims, mix(seed, 0x6A1D)).expect("supported dimension").points(n)
}

fn check_dims(dims: usize) -> Result<()> {
    if dims == 0 || dims > crate::sobol::MAX_DIMS {
        return Err(Error::InvalidParameter(format!("unsupported dimension {dims}")));
    }
    Ok(())
}

fn query_lf(oracle: &mut dyn LfOracle, x: &[f64]) -> Result<f64> {
    let v = oracle.evaluate(x)?;
    if !v.is_finite() {
        return Err(Error::Oracle(format!("non-finite lf value at {x:?}")));
    }
    Ok(v)
}

fn comparison_of(dm: &mut dyn DecisionMaker, a: &[f64], b: &[f64]) -> Result<Observation> {
    Ok(if dm.prefers_first(a, b)? {
        Observation::Comparison { winner: 0, loser: 1 }
    } else {
        Observation::Comparison { winner: 1, loser: 0 }
    })
}

fn init_lf(l: &mut Loop<'_>, oracle: &mut dyn LfOracle) -> Result<SurrogateModel> {
    let started = Instant::now();
    let queries = sobol_design(l.dims, l.config.lf_init.max(2), l.seed);
    let mut obs = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        obs.push(Observation::Numerical {
            index: i,
            value: query_lf(oracle, q)?,
        });
    }
    l.apply(&queries, &obs);
    l.record(0, Phase::Init, queries, obs, started)
}

fn lf_episode(l: &mut Loop<'_>, model: &SurrogateModel, oracle: &mut dyn LfOracle, episode: usize, explore: bool) -> Result<SurrogateModel> {
    let started = Instant::now();
    let seed = acq_seed(l.seed, episode);
    let x = if explore {
        let grid = ipv_grid(l.dims, l.config.ipv_grid, l.seed);
        maximize_single(
            &|c: &[Vec<f64>]| integral_predictive_variance(model, c, &grid, Fidelity::Lf),
            l.dims,
            l.config.acq_budget,
            seed,
        )
        .0
    } else {
        let incumbent = model.lf_incumbent().unwrap_or(0.0);
        maximize_single(
            &|c: &[Vec<f64>]| expected_improvement(model, c, incumbent, Fidelity::Lf),
            l.dims,
            l.config.acq_budget,
            seed,
        )
        .0
    };
    let value = query_lf(oracle, &x)?;
    let queries = vec![x];
    let obs = vec![Observation::Numerical { index: 0, value }];
    l.apply(&queries, &obs);
    let phase = if explore { Phase::LfExplore } else { Phase::LfExploit };
    l.record(episode, phase, queries, obs, started)
}

fn hf_episode(l: &mut Loop<'_>, model: &SurrogateModel, dm: &mut dyn DecisionMaker, episode: usize) -> Result<SurrogateModel> {
    let started = Instant::now();
    let (a, b) = maximize_pair(model, l.dims, l.config.acq_budget, acq_seed(l.seed, episode));
    let obs = vec![comparison_of(dm, &a, &b)?];
    let queries = vec![a, b];
    l.apply(&queries, &obs);
    l.hf_episode += 1;
    l.record(episode, Phase::Hf, queries, obs, started)
}

/// Numerical BO on the lf oracle alone. `kind` must be multi-modal; the
/// surrogate only ever sees lf data and recommendations are taken at lf.
pub fn run_numerical_bo(
    oracle: &mut dyn LfOracle,
    kind: SurrogateKind,
    acq: crate::acquisition::AcquisitionKind,
    episodes: usize,
    dims: usize,
    seed: u64,
    config: &BoConfig,
    truth: Option<Truth<'_>>,
) -> RunResult {
    let mut l = Loop::new("numerical", kind, Mode::Numerical(acq), config, seed, dims, truth);
    let checks = check_dims(dims).and_then(|_| {
        if episodes == 0 {
            return Err(Error::InvalidParameter("episodes must be at least 1".into()));
        }
        if !kind.is_multimodal() {
            return Err(Error::InvalidParameter("numerical BO needs a surrogate that accepts numerical data".into()));
        }
        if acq == crate::acquisition::AcquisitionKind::Eubo {
            return Err(Error::InvalidParameter("EUBO needs preference queries".into()));
        }
        Ok(())
    });
    if let Err(e) = checks {
        return Err(l.fail(e));
    }
    let mut model = match init_lf(&mut l, oracle) {
        Ok(m) => m,
        Err(e) => return Err(l.fail(e)),
    };
    let explore = acq == crate::acquisition::AcquisitionKind::Ipv;
    for episode in 1..=episodes {
        model = match lf_episode(&mut l, &model, oracle, episode, explore) {
            Ok(m) => m,
            Err(e) => return Err(l.fail(e)),
        };
    }
    Ok(l.trace)
}

/// Preferential BO with the single-fidelity preference GP.
pub fn run_pbo(dm: &mut dyn DecisionMaker, episodes: usize, dims: usize, seed: u64, config: &BoConfig, truth: Option<Truth<'_>>) -> RunResult {
    let mut l = Loop::new("pbo", SurrogateKind::PrefGp, Mode::Preference, config, seed, dims, truth);
    if let Err(e) = check_dims(dims).and_then(|_| {
        (episodes > 0)
            .then_some(())
            .ok_or_else(|| Error::InvalidParameter("episodes must be at least 1".into()))
    }) {
        return Err(l.fail(e));
    }
    let init = |l: &mut Loop<'_>, dm: &mut dyn DecisionMaker| -> Result<SurrogateModel> {
        let started = Instant::now();
        let pairs = l.config.pref_init_pairs.max(1);
        let queries = sobol_design(dims, 2 * pairs, seed);
        let mut obs = Vec::with_capacity(pairs);
        for p in 0..pairs {
            let (a, b) = (2 * p, 2 * p + 1);
            obs.push(if dm.prefers_first(&queries[a], &queries[b])? {
                Observation::Comparison { winner: a, loser: b }
            } else {
                Observation::Comparison { winner: b, loser: a }
            });
        }
        l.apply(&queries, &obs);
        l.record(0, Phase::Init, queries, obs, started)
    };
    let mut model = match init(&mut l, dm) {
        Ok(m) => m,
        Err(e) => return Err(l.fail(e)),
    };
    for episode in 1..=episodes {
        model = match hf_episode(&mut l, &model, dm, episode) {
            Ok(m) => m,
            Err(e) => return Err(l.fail(e)),
        };
    }
    Ok(l.trace)
}

/// Phased multi-fidelity BO: IPV on lf, then EI on lf, then EUBO queries to
/// the decision maker. Recommendations are always at hf.
pub fn run_mm_mf_bo(
    oracle: &mut dyn LfOracle,
    dm: &mut dyn DecisionMaker,
    kind: SurrogateKind,
    schedule: PhaseSchedule,
    dims: usize,
    seed: u64,
    config: &BoConfig,
    truth: Option<Truth<'_>>,
) -> RunResult {
    let mut l = Loop::new(kind.name(), kind, Mode::MultiFidelity(schedule), config, seed, dims, truth);
    let checks = check_dims(dims).and_then(|_| schedule.validate()).and_then(|_| {
        kind.is_multimodal()
            .then_some(())
            .ok_or_else(|| Error::InvalidParameter("multi-fidelity BO needs mm-icm or mm-ar1".into()))
    });
    if let Err(e) = checks {
        return Err(l.fail(e));
    }
    let mut model = match init_lf(&mut l, oracle) {
        Ok(m) => m,
        Err(e) => return Err(l.fail(e)),
    };
    for episode in 1..=schedule.total() {
        let step = match schedule.phase_of(episode) {
            Phase::LfExplore => lf_episode(&mut l, &model, oracle, episode, true),
            Phase::LfExploit => lf_episode(&mut l, &model, oracle, episode, false),
            _ => hf_episode(&mut l, &model, dm, episode),
        };
        model = match step {
            Ok(m) => m,
            Err(e) => return Err(l.fail(e)),
        };
    }
    Ok(l.trace)
}

/// Where an interactive run gets its lf information.
pub enum LfSource<'a> {
    /// Run the init design and the scheduled lf episodes against an oracle.
    Oracle(&'a mut dyn LfOracle),
    /// Pre-collected lf data in unit coordinates; stands in for the lf phase.
    Dataset { points: Vec<Vec<f64>>, values: Vec<f64> },
    /// Preference-only surrogate, no lf information.
    None,
}

/// A phased run driven one comparison at a time by an external decision
/// maker. The lf phase runs eagerly in [`InteractiveRun::start`]; afterwards
/// the run alternates between proposing a pair and accepting its outcome.
///
/// Everything needed to continue is in the serializable state: the data set
/// is rebuilt from the trace and the proposed pair is stored, so no model is
/// kept between calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractiveRun {
    pub schedule: PhaseSchedule,
    pub config: BoConfig,
    pub trace: RunTrace,
    /// Episode number of the first hf comparison.
    pub first_hf_episode: usize,
    pub proposed: Option<(Vec<f64>, Vec<f64>)>,
}

impl InteractiveRun {
    pub fn start(kind: SurrogateKind, schedule: PhaseSchedule, dims: usize, seed: u64, config: &BoConfig, lf: LfSource<'_>) -> Result<Self> {
        check_dims(dims)?;
        schedule.validate()?;
        if schedule.hf_episodes == 0 {
            return Err(Error::InvalidParameter("an interactive run needs at least one hf episode".into()));
        }
        let mode = if kind.is_multimodal() {
            Mode::MultiFidelity(schedule)
        } else {
            Mode::Preference
        };
        let method = if kind.is_multimodal() { kind.name() } else { "pbo" };
        let mut l = Loop::new(method, kind, mode, config, seed, dims, None);
        let (model, first_hf_episode) = match lf {
            LfSource::Oracle(oracle) => {
                if !kind.is_multimodal() {
                    return Err(Error::InvalidParameter("pref-gp does not use lf data".into()));
                }
                let mut model = init_lf(&mut l, oracle)?;
                for episode in 1..=schedule.lf_episodes() {
                    let explore = schedule.phase_of(episode) == Phase::LfExplore;
                    model = lf_episode(&mut l, &model, oracle, episode, explore)?;
                }
                (Some(model), schedule.lf_episodes() + 1)
            }
            LfSource::Dataset { points, values } => {
                if !kind.is_multimodal() {
                    return Err(Error::InvalidParameter("pref-gp does not use lf data".into()));
                }
                if points.is_empty() || points.len() != values.len() {
                    return Err(Error::InvalidData(format!(
                        "lf dataset needs matching, non-empty points and values ({} vs {})",
                        points.len(),
                        values.len()
                    )));
                }
                for p in &points {
                    if p.len() != dims {
                        return Err(Error::DimensionMismatch { expected: dims, found: p.len() });
                    }
                    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(Error::InvalidData("lf dataset point outside the design box".into()));
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData("non-finite lf value".into()));
                }
                let obs: Vec<Observation> = values
                    .iter()
                    .enumerate()
                    .map(|(index, &value)| Observation::Numerical { index, value })
                    .collect();
                l.apply(&points, &obs);
                let model = l.record(0, Phase::Init, points, obs, Instant::now())?;
                (Some(model), 1)
            }
            LfSource::None => {
                if kind.is_multimodal() {
                    return Err(Error::InvalidParameter(format!("{} needs an lf oracle or dataset", kind.name())));
                }
                (None, 1)
            }
        };
        let mut run = Self {
            schedule,
            config: l.config.clone(),
            trace: l.trace,
            first_hf_episode,
            proposed: None,
        };
        run.proposed = Some(run.propose(model.as_ref()));
        Ok(run)
    }

    pub fn dims(&self) -> usize {
        self.trace.dims
    }

    pub fn hf_done(&self) -> usize {
        self.trace.records.last().map_or(0, |r| r.hf_episode)
    }

    /// Episode number the next comparison will be recorded under.
    pub fn next_episode(&self) -> usize {
        self.first_hf_episode + self.hf_done()
    }

    pub fn is_complete(&self) -> bool {
        self.hf_done() >= self.schedule.hf_episodes
    }

    pub fn recommendation(&self) -> Option<&[f64]> {
        self.trace.final_recommendation()
    }

    fn propose(&self, model: Option<&SurrogateModel>) -> (Vec<f64>, Vec<f64>) {
        match model {
            Some(m) => maximize_pair(m, self.dims(), self.config.acq_budget, acq_seed(self.trace.seed, self.next_episode())),
            None => {
                let mut d = sobol_design(self.dims(), 2, self.trace.seed);
                let b = d.pop().expect("two points");
                (d.pop().expect("two points"), b)
            }
        }
    }

    fn resume(&self) -> Loop<'static> {
        let mode = if self.trace.surrogate.is_multimodal() {
            Mode::MultiFidelity(self.schedule)
        } else {
            Mode::Preference
        };
        let mut l = Loop::new(&self.trace.method, self.trace.surrogate, mode, &self.config, self.trace.seed, self.dims(), None);
        for r in &self.trace.records {
            l.apply(&r.queries, &r.observations);
        }
        l.hf_episode = self.hf_done();
        l.trace = self.trace.clone();
        l
    }

    /// Record the outcome for the proposed pair, refit, recommend and propose
    /// the next pair unless the schedule is exhausted. On error the run is
    /// left unchanged.
    pub fn submit(&mut self, first_wins: bool) -> Result<&EpisodeRecord> {
        let (a, b) = self
            .proposed
            .clone()
            .ok_or_else(|| Error::InvalidParameter("no proposed pair".into()))?;
        let started = Instant::now();
        let episode = self.next_episode();
        let mut l = self.resume();
        let obs = vec![if first_wins {
            Observation::Comparison { winner: 0, loser: 1 }
        } else {
            Observation::Comparison { winner: 1, loser: 0 }
        }];
        let queries = vec![a, b];
        l.apply(&queries, &obs);
        l.hf_episode += 1;
        let model = l.record(episode, Phase::Hf, queries, obs, started)?;
        let mut next = Self {
            trace: l.trace,
            proposed: None,
            ..self.clone()
        };
        if !next.is_complete() {
            next.proposed = Some(next.propose(Some(&model)));
        }
        *self = next;
        Ok(self.trace.records.last().expect("just recorded"))
    }
}

/// Refit every episode of `trace` from its recorded observations and return
/// the recommendations, which match the recorded ones under the same config.
pub fn replay(trace: &RunTrace, config: &BoConfig) -> Result<Vec<Vec<f64>>> {
    let mode = if trace.surrogate == SurrogateKind::PrefGp {
        Mode::Preference
    } else if trace.method == "numerical" {
        Mode::Numerical(crate::acquisition::AcquisitionKind::Ei)
    } else {
        Mode::MultiFidelity(PhaseSchedule::default())
    };
    let mut l = Loop::new(&trace.method, trace.surrogate, mode, config, trace.seed, trace.dims, None);
    let mut out = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        l.apply(&r.queries, &r.observations);
        let model = l.fit(r.episode)?;
        out.push(recommend_at(
            &model,
            l.recommendation_fidelity(),
            l.dims,
            config.recommend_budget,
            rec_seed(l.seed, r.episode),
        ));
    }
    Ok(out)
}
