//! Async client for the session service.

use prefmf_core::api::{
    CreateSessionRequest, ErrorBody, Health, PreferenceRequest, PreferenceResponse, QueryResponse, SessionStatus, Winner,
    API_SCHEMA_VERSION,
};
use prefmf_core::session::SessionDocument;
use serde::de::DeserializeOwned;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server returned {status} ({code}): {message}")]
    Api { status: u16, code: String, message: String },
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    /// Error code from the server body, if the server answered.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            _ => None,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> ClientResult<T> {
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()));
        }
        match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => Err(ClientError::Api {
                status: status.as_u16(),
                code: body.error.code,
                message: body.error.message,
            }),
            Err(_) => Err(ClientError::Api {
                status: status.as_u16(),
                code: "http".into(),
                message: String::from_utf8_lossy(&bytes).into_owned(),
            }),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> ClientResult<T> {
        Self::decode(self.http.get(self.url(path)).send().await?).await
    }

    async fn post<B: serde::Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> ClientResult<T> {
        Self::decode(self.http.post(self.url(path)).json(body).send().await?).await
    }

    pub async fn health(&self) -> ClientResult<Health> {
        self.get("/v1/health").await
    }

    pub async fn create_session(&self, req: &CreateSessionRequest) -> ClientResult<SessionStatus> {
        self.post("/v1/sessions", req).await
    }

    pub async fn status(&self, id: &str) -> ClientResult<SessionStatus> {
        self.get(&format!("/v1/sessions/{id}")).await
    }

    pub async fn next_query(&self, id: &str) -> ClientResult<QueryResponse> {
        self.get(&format!("/v1/sessions/{id}/query")).await
    }

    pub async fn post_preference(&self, id: &str, winner: Winner) -> ClientResult<PreferenceResponse> {
        let body = PreferenceRequest {
            schema_version: API_SCHEMA_VERSION,
            winner,
        };
        self.post(&format!("/v1/sessions/{id}/preference"), &body).await
    }

    pub async fn export(&self, id: &str) -> ClientResult<SessionDocument> {
        self.get(&format!("/v1/sessions/{id}/export")).await
    }

    pub async fn import(&self, doc: &SessionDocument) -> ClientResult<SessionStatus> {
        self.post("/v1/sessions/import", doc).await
    }
}
