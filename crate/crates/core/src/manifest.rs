//! Benchmark manifests: a JSON file naming the synthetic problem, schedule,
//! methods and seeds, executed into a regret CSV, a trace JSONL file and a
//! diagnostics JSON file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{grid_optimum, make_synthetic_pair, SimulatedDm, SyntheticPair};
use crate::bo::{run_mm_mf_bo, run_pbo, BoConfig, PhaseSchedule, RunResult, RunTrace, Truth};
use crate::error::Result;
use crate::mcmc::HmcConfig;
use crate::seed::mix;
use crate::space::DesignBox;
use crate::surrogate::SurrogateKind;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const REGRET_CSV: &str = "regret.csv";
pub const TRACE_JSONL: &str = "trace.jsonl";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ManifestError {
    #[error("manifest is not valid JSON: {0}")]
    Syntax(String),
    #[error("manifest field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ManifestError {
    ManifestError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub dims: usize,
    pub correlation: f64,
    #[serde(default = "default_pair_seed")]
    pub pair_seed: u64,
    #[serde(default = "default_dm_noise")]
    pub dm_noise_sd: f64,
    /// Grid points per dimension for the reference optimum.
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
}

fn default_pair_seed() -> u64 {
    7
}

fn default_dm_noise() -> f64 {
    0.1
}

fn default_resolution() -> usize {
    201
}

/// A benchmark method: preference-only BO or a multi-fidelity surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pbo,
    MultiFidelity(SurrogateKind),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pbo => "pbo",
            Method::MultiFidelity(k) => k.name(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pbo" | "pref-gp" => Some(Method::Pbo),
            "mm-icm" => Some(Method::MultiFidelity(SurrogateKind::MmIcm)),
            "mm-ar1" => Some(Method::MultiFidelity(SurrogateKind::MmAr1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub problem: Problem,
    pub schedule: PhaseSchedule,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub bo: BoConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    schema_version: u32,
    problem: serde_json::Value,
    schedule: serde_json::Value,
    methods: Vec<String>,
    seeds: Vec<u64>,
    #[serde(default)]
    mcmc: Option<serde_json::Value>,
    #[serde(default)]
    bo: Option<serde_json::Value>,
}

fn typed<T: serde::de::DeserializeOwned>(name: &str, v: serde_json::Value) -> std::result::Result<T, ManifestError> {
    serde_json::from_value(v).map_err(|e| field(name, e.to_string()))
}

impl Manifest {
    pub fn parse(text: &str) -> std::result::Result<Self, ManifestError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ManifestError::Syntax(e.to_string()))?;
        let raw: RawManifest = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            let name = msg.split('`').nth(1).unwrap_or("manifest").to_string();
            field(&name, msg)
        })?;
        if raw.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {}, expected {MANIFEST_SCHEMA_VERSION}", raw.schema_version),
            ));
        }
        let problem: Problem = typed("problem", raw.problem)?;
        if problem.dims == 0 || problem.dims > crate::sobol::MAX_DIMS {
            return Err(field("problem.dims", format!("must be in 1..={}", crate::sobol::MAX_DIMS)));
        }
        if !(0.0..=1.0).contains(&problem.correlation) {
            return Err(field("problem.correlation", "must lie in [0, 1]"));
        }
        if !(problem.dm_noise_sd >= 0.0 && problem.dm_noise_sd.is_finite()) {
            return Err(field("problem.dm_noise_sd", "must be non-negative"));
        }
        if problem.grid_resolution < 2 {
            return Err(field("problem.grid_resolution", "must be at least 2"));
        }
        let schedule: PhaseSchedule = typed("schedule", raw.schedule)?;
        schedule.validate().map_err(|e| field("schedule", e.to_string()))?;
        if raw.methods.is_empty() {
            return Err(field("methods", "at least one method required"));
        }
        let methods = raw
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                Method::parse(m).ok_or_else(|| {
                    field(
                        &format!("methods[{i}]"),
                        format!("unknown surrogate kind `{m}` (expected pbo, mm-icm or mm-ar1)"),
                    )
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if raw.seeds.is_empty() {
            return Err(field("seeds", "at least one seed required"));
        }
        let mut bo: BoConfig = match raw.bo {
            Some(v) => typed("bo", v)?,
            None => BoConfig::default(),
        };
        bo.surrogate.mcmc = match raw.mcmc {
            Some(v) => typed("mcmc", v)?,
            None => HmcConfig::benchmark(),
        };
        if bo.surrogate.mcmc.chains == 0 || bo.surrogate.mcmc.draws == 0 {
            return Err(field("mcmc", "chains and draws must be positive"));
        }
        Ok(Self {
            problem,
            schedule,
            methods,
            seeds: raw.seeds,
            bo,
        })
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|e| field("path", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Outcome of one (method, seed) run.
#[derive(Debug)]
pub struct RunOutput {
    pub method: Method,
    pub seed: u64,
    pub result: RunResult,
}

impl RunOutput {
    pub fn trace(&self) -> &RunTrace {
        match &self.result {
            Ok(t) => t,
            Err(f) => &f.trace,
        }
    }
}

/// The problem instance shared by every run of a manifest.
pub struct Benchmark {
    pub pair: SyntheticPair,
    pub optimum: (Vec<f64>, f64),
}

impl Benchmark {
    pub fn new(problem: &Problem) -> Result<Self> {
        let pair = make_synthetic_pair(problem.pair_seed, problem.correlation, problem.dims)?;
        let hf = |x: &[f64]| pair.hf_utility(x);
        let optimum = grid_optimum(&hf, &DesignBox::unit(problem.dims), problem.grid_resolution)?;
        Ok(Self { pair, optimum })
    }
}

/// Execute every (method, seed) combination in manifest order.
pub fn execute(manifest: &Manifest, seed_override: Option<u64>) -> Result<(Benchmark, Vec<RunOutput>)> {
    let bench = Benchmark::new(&manifest.problem)?;
    let seeds = match seed_override {
        Some(s) => vec![s],
        None => manifest.seeds.clone(),
    };
    let dims = manifest.problem.dims;
    let pair = &bench.pair;
    let hf = |x: &[f64]| pair.hf_utility(x);
    let truth = Truth {
        utility: &hf,
        optimum: bench.optimum.1,
    };
    let mut outputs = Vec::new();
    for &method in &manifest.methods {
        for &seed in &seeds {
            let started = std::time::Instant::now();
            let mut dm = SimulatedDm::new(hf, manifest.problem.dm_noise_sd, mix(seed, 0xD3C1))?;
            let result = match method {
                Method::Pbo => run_pbo(&mut dm, manifest.schedule.hf_episodes.max(1), dims, seed, &manifest.bo, Some(truth)),
                Method::MultiFidelity(kind) => {
                    let mut lf = |x: &[f64]| -> Result<f64> { Ok(pair.lf_utility(x)) };
                    run_mm_mf_bo(&mut lf, &mut dm, kind, manifest.schedule, dims, seed, &manifest.bo, Some(truth))
                }
            };
            tracing::info!(
                method = method.name(),
                seed,
                ok = result.is_ok(),
                secs = started.elapsed().as_secs_f64(),
                "run finished"
            );
            outputs.push(RunOutput { method, seed, result });
        }
    }
    Ok((bench, outputs))
}

pub fn regret_csv(outputs: &[RunOutput]) -> String {
    let mut out = String::from("method,seed,episode,phase,hf_episode,regret\n");
    for o in outputs {
        for r in &o.trace().records {
            let regret = r.regret.map(|v| format!("{v:.12}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                o.method.name(),
                o.seed,
                r.episode,
                r.phase.name(),
                r.hf_episode,
                regret
            );
        }
    }
    out
}

pub fn diagnostics_json(bench: &Benchmark, outputs: &[RunOutput]) -> serde_json::Value {
    let runs: Vec<serde_json::Value> = outputs
        .iter()
        .map(|o| {
            let t = o.trace();
            serde_json::json!({
                "method": o.method.name(),
                "seed": o.seed,
                "status": if o.result.is_ok() { "ok" } else { "failed" },
                "error": o.result.as_ref().err().map(|f| f.error.to_string()),
                "episodes": t.records.iter().map(|r| serde_json::json!({
                    "episode": r.episode,
                    "phase": r.phase.name(),
                    "mcmc": r.mcmc,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "problem": {
            "empirical_correlation": bench.pair.empirical_correlation(),
            "construction_seed": bench.pair.construction_seed,
            "optimum": bench.optimum.0,
            "optimum_value": bench.optimum.1,
        },
        "runs": runs,
    })
}

pub fn write_outputs(dir: &Path, bench: &Benchmark, outputs: &[RunOutput]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(REGRET_CSV), regret_csv(outputs))?;
    let mut jsonl = String::new();
    for o in outputs {
        jsonl.push_str(&o.trace().to_jsonl());
    }
    std::fs::write(dir.join(TRACE_JSONL), jsonl)?;
    let diag = serde_json::to_string_pretty(&diagnostics_json(bench, outputs)).expect("diagnostics serialize");
    std::fs::write(dir.join(DIAGNOSTICS_JSON), diag + "\n")
}

/// Load, execute and write a manifest. Returns the process exit status:
/// 0 on success, 1 if any run failed, 2 for manifest errors.
pub fn run_manifest(path: &Path, out_dir: &Path, seed_override: Option<u64>) -> i32 {
    let manifest = match Manifest::load(path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let (bench, outputs) = match execute(&manifest, seed_override) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Err(e) = write_outputs(out_dir, &bench, &outputs) {
        eprintln!("error: writing outputs to {}: {e}", out_dir.display());
        return 1;
    }
    let mut failed = 0;
    for o in &outputs {
        if let Err(f) = &o.result {
            failed += 1;
            eprintln!("run {} seed {} failed: {}", o.method.name(), o.seed, f.error);
        }
    }
    if failed > 0 {
        1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "problem": {"dims": 2, "correlation": 0.9},
        "schedule": {"lf_explore_episodes": 4, "lf_exploit_episodes": 1, "hf_episodes": 2},
        "methods": ["mm-ar1"],
        "seeds": [0]
    }"#;

    #[test]
    fn parses_minimal_manifest_with_defaults() {
        let m = Manifest::parse(MINIMAL).unwrap();
        assert_eq!(m.problem.pair_seed, 7);
        assert_eq!(m.problem.dm_noise_sd, 0.1);
        assert_eq!(m.methods, [Method::MultiFidelity(SurrogateKind::MmAr1)]);
        assert_eq!(m.bo.surrogate.mcmc, HmcConfig::benchmark());
    }

    #[test]
    fn unknown_method_names_the_field() {
        let bad = MINIMAL.replace("\"mm-ar1\"", "\"mm-ar1\", \"gp-magic\"");
        let err = Manifest::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("methods[1]"), "{err}");
        assert!(err.to_string().contains("gp-magic"));
    }

    #[test]
    fn missing_and_invalid_fields() {
        let err = Manifest::parse(&MINIMAL.replace("\"seeds\": [0]", "\"seedz\": [0]")).unwrap_err();
        assert!(err.to_string().contains("seedz"), "{err}");
        let err = Manifest::parse(&MINIMAL.replace("0.9", "1.9")).unwrap_err();
        assert!(err.to_string().contains("problem.correlation"));
        let err = Manifest::parse(&MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 4")).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
        assert!(matches!(Manifest::parse("{"), Err(ManifestError::Syntax(_))));
    }
}
