//! Live preference-elicitation sessions.
//!
//! A session wraps an [`InteractiveRun`] with parameter names and bounds and
//! an outstanding flag: `next_query` hands out the proposed pair and marks it
//! outstanding, `post_preference` consumes it. Any other order is an error.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::api::{
    CreateSessionRequest, LfSourceSpec, ParamValue, ParameterSpec, PreferenceResponse, QueryResponse, SessionStatus, Winner,
    API_SCHEMA_VERSION,
};
use crate::bench::make_synthetic_pair;
use crate::bo::{BoConfig, InteractiveRun, LfSource, Observation, Phase};
use crate::mcmc::HmcConfig;
use crate::space::DesignBox;

pub const SESSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("no outstanding pair; request a query first")]
    NoOutstandingPair,
    #[error("session complete: all hf episodes answered")]
    Complete,
    #[error("session {0} already exists")]
    AlreadyExists(String),
    #[error("lf oracle failure: {0}")]
    Oracle(String),
    #[error("{0}")]
    Internal(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::NotFound(_) => "not_found",
            SessionError::InvalidConfig(_) => "invalid_config",
            SessionError::NoOutstandingPair => "no_outstanding_pair",
            SessionError::Complete => "session_complete",
            SessionError::AlreadyExists(_) => "already_exists",
            SessionError::Oracle(_) => "oracle_failure",
            SessionError::Internal(_) => "internal",
        }
    }

    /// HTTP status class for the error.
    pub fn http_status(&self) -> u16 {
        match self {
            SessionError::NotFound(_) => 404,
            SessionError::InvalidConfig(_) => 400,
            SessionError::NoOutstandingPair | SessionError::Complete | SessionError::AlreadyExists(_) => 409,
            SessionError::Oracle(_) | SessionError::Internal(_) => 500,
        }
    }
}

impl From<crate::Error> for SessionError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Oracle(m) => SessionError::Oracle(m),
            crate::Error::InvalidParameter(_) | crate::Error::InvalidData(_) | crate::Error::DimensionMismatch { .. } => {
                SessionError::InvalidConfig(e.to_string())
            }
            other => SessionError::Internal(other.to_string()),
        }
    }
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub parameters: Vec<ParameterSpec>,
    pub lf_source: LfSourceSpec,
    pub run: InteractiveRun,
    pub outstanding: bool,
}

/// Export format: everything needed to resume after a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub schema_version: u32,
    pub session: Session,
}

fn design_box(parameters: &[ParameterSpec]) -> SessionResult<DesignBox> {
    if parameters.is_empty() {
        return Err(SessionError::InvalidConfig("at least one parameter required".into()));
    }
    for (i, p) in parameters.iter().enumerate() {
        if p.name.trim().is_empty() {
            return Err(SessionError::InvalidConfig(format!("parameters[{i}].name is empty")));
        }
        if parameters[..i].iter().any(|q| q.name == p.name) {
            return Err(SessionError::InvalidConfig(format!("duplicate parameter name `{}`", p.name)));
        }
    }
    DesignBox::new(
        parameters.iter().map(|p| p.lower).collect(),
        parameters.iter().map(|p| p.upper).collect(),
    )
    .map_err(|e| SessionError::InvalidConfig(e.to_string()))
}

/// Default loop settings for sessions: short MCMC so a refit stays interactive.
pub fn default_session_bo() -> BoConfig {
    let mut bo = BoConfig::default();
    bo.surrogate.mcmc = HmcConfig::benchmark();
    bo
}

impl Session {
    /// Validate the request, run the lf phase and propose the first pair.
    pub fn create(id: String, req: CreateSessionRequest) -> SessionResult<Self> {
        if req.schema_version != API_SCHEMA_VERSION {
            return Err(SessionError::InvalidConfig(format!("unsupported schema_version {}", req.schema_version)));
        }
        let bx = design_box(&req.parameters)?;
        let dims = bx.dims();
        let bo = req.bo.clone().unwrap_or_else(default_session_bo);
        let kind = req.surrogate;
        let run = match &req.lf_source {
            LfSourceSpec::Synthetic { pair_seed, correlation } => {
                if !kind.is_multimodal() {
                    return Err(SessionError::InvalidConfig("pref-gp sessions take no lf source".into()));
                }
                let pair = make_synthetic_pair(*pair_seed, *correlation, dims).map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
                let mut oracle = |u: &[f64]| -> crate::Result<f64> { Ok(pair.lf_utility(u)) };
                InteractiveRun::start(kind, req.schedule, dims, req.seed, &bo, LfSource::Oracle(&mut oracle))?
            }
            LfSourceSpec::Dataset { points, values } => {
                let mut unit = Vec::with_capacity(points.len());
                for p in points {
                    if p.len() != dims {
                        return Err(SessionError::InvalidConfig(format!("lf point has {} values, expected {dims}", p.len())));
                    }
                    if !bx.contains(p) {
                        return Err(SessionError::InvalidConfig(format!("lf point {p:?} outside the design box")));
                    }
                    unit.push(bx.to_unit(p));
                }
                InteractiveRun::start(
                    kind,
                    req.schedule,
                    dims,
                    req.seed,
                    &bo,
                    LfSource::Dataset {
                        points: unit,
                        values: values.clone(),
                    },
                )?
            }
            LfSourceSpec::None => InteractiveRun::start(kind, req.schedule, dims, req.seed, &bo, LfSource::None)?,
        };
        Ok(Self {
            id,
            parameters: req.parameters,
            lf_source: req.lf_source,
            run,
            outstanding: false,
        })
    }

    fn design_box(&self) -> DesignBox {
        design_box(&self.parameters).expect("validated on create")
    }

    fn named(&self, unit: &[f64]) -> Vec<ParamValue> {
        let x = self.design_box().from_unit(unit);
        self.parameters
            .iter()
            .zip(x)
            .map(|(p, value)| ParamValue {
                name: p.name.clone(),
                value,
            })
            .collect()
    }

    /// Episodes completed so far (0 before any record or after init only).
    pub fn episode(&self) -> usize {
        self.run.trace.records.last().map_or(0, |r| r.episode)
    }

    pub fn n_lf(&self) -> usize {
        self.observations().filter(|o| matches!(o, Observation::Numerical { .. })).count()
    }

    pub fn n_comparisons(&self) -> usize {
        self.run.trace.comparisons()
    }

    /// Size of the initialization design (lf points in the episode-0 record).
    pub fn init_size(&self) -> usize {
        self.run
            .trace
            .records
            .first()
            .filter(|r| r.phase == Phase::Init)
            .map_or(0, |r| r.observations.len())
    }

    fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.run.trace.records.iter().flat_map(|r| r.observations.iter())
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            schema_version: API_SCHEMA_VERSION,
            session_id: self.id.clone(),
            surrogate: self.run.trace.surrogate,
            phase: Phase::Hf,
            episode: self.episode(),
            hf_episode: self.run.hf_done(),
            hf_episodes: self.run.schedule.hf_episodes,
            complete: self.run.is_complete(),
            outstanding: self.outstanding,
            n_lf: self.n_lf(),
            n_comparisons: self.n_comparisons(),
            recommendation: self.run.recommendation().map(|r| self.named(r)),
        }
    }

    /// Hand out the proposed pair; repeated calls return the same pair.
    pub fn next_query(&mut self) -> SessionResult<QueryResponse> {
        if self.run.is_complete() {
            return Err(SessionError::Complete);
        }
        let (a, b) = self
            .run
            .proposed
            .as_ref()
            .ok_or_else(|| SessionError::Internal("no proposed pair in an open session".into()))?;
        let response = QueryResponse {
            schema_version: API_SCHEMA_VERSION,
            session_id: self.id.clone(),
            episode: self.run.next_episode(),
            hf_episode: self.run.hf_done() + 1,
            hf_episodes: self.run.schedule.hf_episodes,
            a: self.named(a),
            b: self.named(b),
        };
        self.outstanding = true;
        Ok(response)
    }

    /// Answer the outstanding pair; refits and proposes the next one.
    pub fn post_preference(&mut self, winner: Winner) -> SessionResult<PreferenceResponse> {
        if !self.outstanding {
            return Err(SessionError::NoOutstandingPair);
        }
        let started = Instant::now();
        let record = self.run.submit(winner == Winner::A)?;
        let recommendation = record.recommendation.clone();
        let episode = record.episode;
        self.outstanding = false;
        Ok(PreferenceResponse {
            schema_version: API_SCHEMA_VERSION,
            session_id: self.id.clone(),
            episode,
            hf_episode: self.run.hf_done(),
            hf_episodes: self.run.schedule.hf_episodes,
            complete: self.run.is_complete(),
            recommendation: self.named(&recommendation),
            refit_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    pub fn export(&self) -> SessionDocument {
        SessionDocument {
            schema_version: SESSION_SCHEMA_VERSION,
            session: self.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.export()).expect("session serializes")
    }

    pub fn import(doc: SessionDocument) -> SessionResult<Self> {
        if doc.schema_version != SESSION_SCHEMA_VERSION {
            return Err(SessionError::InvalidConfig(format!(
                "unsupported session schema_version {}",
                doc.schema_version
            )));
        }
        let s = doc.session;
        let bx = design_box(&s.parameters)?;
        if bx.dims() != s.run.dims() {
            return Err(SessionError::InvalidConfig("parameter count does not match the trace".into()));
        }
        if s.run.proposed.is_none() && !s.run.is_complete() {
            return Err(SessionError::InvalidConfig("open session without a proposed pair".into()));
        }
        if s.outstanding && s.run.is_complete() {
            return Err(SessionError::InvalidConfig("complete session with an outstanding pair".into()));
        }
        Ok(s)
    }

    pub fn from_json(text: &str) -> SessionResult<Self> {
        let doc: SessionDocument = serde_json::from_str(text).map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        Self::import(doc)
    }
}
