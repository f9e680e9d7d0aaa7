//! JSON wire types for the session service, shared by server and client.

use serde::{Deserialize, Serialize};

use crate::bo::{BoConfig, Phase, PhaseSchedule};
use crate::surrogate::SurrogateKind;

pub const API_SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    API_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub name: String,
    pub value: f64,
}

/// Where a session's lf observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LfSourceSpec {
    /// The lf member of a synthetic benchmark pair, evaluated server side.
    Synthetic {
        #[serde(default = "default_pair_seed")]
        pair_seed: u64,
        #[serde(default = "default_correlation")]
        correlation: f64,
    },
    /// Pre-collected lf data; points in parameter units.
    Dataset { points: Vec<Vec<f64>>, values: Vec<f64> },
    /// No lf information (pref-gp sessions).
    #[default]
    None,
}

fn default_pair_seed() -> u64 {
    7
}

fn default_correlation() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub parameters: Vec<ParameterSpec>,
    pub schedule: PhaseSchedule,
    pub surrogate: SurrogateKind,
    #[serde(default)]
    pub lf_source: LfSourceSpec,
    #[serde(default)]
    pub seed: u64,
    /// Loop settings; defaults use the short benchmark MCMC configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bo: Option<BoConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub schema_version: u32,
    pub session_id: String,
    pub surrogate: SurrogateKind,
    pub phase: Phase,
    /// Episodes completed; the init design is episode 0.
    pub episode: usize,
    pub hf_episode: usize,
    pub hf_episodes: usize,
    pub complete: bool,
    pub outstanding: bool,
    pub n_lf: usize,
    pub n_comparisons: usize,
    pub recommendation: Option<Vec<ParamValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub schema_version: u32,
    pub session_id: String,
    /// Episode the answer will be recorded under.
    pub episode: usize,
    pub hf_episode: usize,
    pub hf_episodes: usize,
    pub a: Vec<ParamValue>,
    pub b: Vec<ParamValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRequest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub episode: usize,
    pub hf_episode: usize,
    pub hf_episodes: usize,
    pub complete: bool,
    pub recommendation: Vec<ParamValue>,
    pub refit_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub schema_version: u32,
    pub error: ErrorDetail,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            schema_version: API_SCHEMA_VERSION,
            error: ErrorDetail {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub schema_version: u32,
    pub status: String,
    pub version: String,
    pub sessions: usize,
}
