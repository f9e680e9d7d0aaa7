use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use prefmf_server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn create_body(hf: usize) -> Value {
    json!({
        "schema_version": 1,
        "parameters": [
            {"name": "gain", "lower": 0.0, "upper": 2.0},
            {"name": "damping", "lower": -1.0, "upper": 1.0, "unit": "Ns/m"}
        ],
        "schedule": {"lf_explore_episodes": 3, "lf_exploit_episodes": 1, "hf_episodes": hf},
        "surrogate": "mm-ar1",
        "lf_source": {"type": "synthetic", "pair_seed": 7, "correlation": 0.9},
        "seed": 3,
        "bo": {
            "acq_budget": 32, "recommend_budget": 64, "ipv_grid": 16,
            "surrogate": {"max_components": 16, "mcmc": {"chains": 1, "warmup": 80, "draws": 60}}
        }
    })
}

fn app(dir: Option<std::path::PathBuf>) -> Router {
    router(Arc::new(AppState::new(dir).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, hf: usize) -> String {
    let (status, body) = call(app, Method::POST, "/v1/sessions", Some(create_body(hf))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_reports_schema_version() {
    let app = app(None);
    let (status, body) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["schema_version"], 1);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn full_session_flow() {
    let app = app(None);
    let id = create(&app, 2).await;
    let (s, st) = call(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(st["phase"], "hf");
    assert_eq!(st["outstanding"], false);

    let (s, err) = call(&app, Method::POST, &format!("/v1/sessions/{id}/preference"), Some(json!({"winner": "a"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "no_outstanding_pair");

    let (s, q1) = call(&app, Method::GET, &format!("/v1/sessions/{id}/query"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (_, q1again) = call(&app, Method::GET, &format!("/v1/sessions/{id}/query"), None).await;
    assert_eq!(q1, q1again);
    assert_eq!(q1["a"][0]["name"], "gain");
    assert_eq!(q1["b"][1]["name"], "damping");

    let (s, r) = call(&app, Method::POST, &format!("/v1/sessions/{id}/preference"), Some(json!({"schema_version": 1, "winner": "b"}))).await;
    assert_eq!(s, StatusCode::OK, "{r}");
    assert_eq!(r["hf_episode"], 1);
    assert_eq!(r["complete"], false);
    assert!(r["refit_ms"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["recommendation"].as_array().unwrap().len(), 2);

    let (_, q2) = call(&app, Method::GET, &format!("/v1/sessions/{id}/query"), None).await;
    assert_ne!((&q1["a"], &q1["b"]), (&q2["a"], &q2["b"]));
    let (_, r) = call(&app, Method::POST, &format!("/v1/sessions/{id}/preference"), Some(json!({"winner": "a"}))).await;
    assert_eq!(r["complete"], true);
    let (s, err) = call(&app, Method::GET, &format!("/v1/sessions/{id}/query"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "session_complete");
}

#[tokio::test]
async fn errors_have_status_classes() {
    let app = app(None);
    let (s, e) = call(&app, Method::GET, "/v1/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["error"]["code"], "not_found");
    let (s, _) = call(&app, Method::GET, "/v1/sessions/nope/query", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let mut bad = create_body(2);
    bad["parameters"][0]["upper"] = json!(-5.0);
    let (s, e) = call(&app, Method::POST, "/v1/sessions", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["error"]["code"], "invalid_config");

    let mut bad = create_body(2);
    bad["surrogate"] = json!("magic");
    let (s, _) = call(&app, Method::POST, "/v1/sessions", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let id = create(&app, 1).await;
    let (s, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/preference"), Some(json!({"winner": "c"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn export_import_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(Some(dir.path().to_path_buf()));
    let id = create(&a, 3).await;
    call(&a, Method::GET, &format!("/v1/sessions/{id}/query"), None).await;
    call(&a, Method::POST, &format!("/v1/sessions/{id}/preference"), Some(json!({"winner": "a"}))).await;
    call(&a, Method::GET, &format!("/v1/sessions/{id}/query"), None).await;
    let (s, doc) = call(&a, Method::GET, &format!("/v1/sessions/{id}/export"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(doc["schema_version"], 1);

    // Importing into the same server conflicts; a fresh server accepts it.
    let (s, _) = call(&a, Method::POST, "/v1/sessions/import", Some(doc.clone())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let b = app(None);
    let (s, st) = call(&b, Method::POST, "/v1/sessions/import", Some(doc.clone())).await;
    assert_eq!(s, StatusCode::CREATED, "{st}");
    assert_eq!(st["outstanding"], true);

    // A restart from the data directory restores the same state.
    let c = app(Some(dir.path().to_path_buf()));
    let (_, doc_c) = call(&c, Method::GET, &format!("/v1/sessions/{id}/export"), None).await;
    assert_eq!(doc_c, doc);

    let pref = Some(json!({"winner": "b"}));
    let (_, ra) = call(&a, Method::POST, &format!("/v1/sessions/{id}/preference"), pref.clone()).await;
    let (_, rb) = call(&b, Method::POST, &format!("/v1/sessions/{id}/preference"), pref.clone()).await;
    let (_, rc) = call(&c, Method::POST, &format!("/v1/sessions/{id}/preference"), pref).await;
    assert_eq!(ra["recommendation"], rb["recommendation"]);
    assert_eq!(ra["recommendation"], rc["recommendation"]);

    let mut bad = doc;
    bad["session"]["id"] = json!("../escape");
    let (s, _) = call(&b, Method::POST, "/v1/sessions/import", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let app = app(None);
    let (x, y) = tokio::join!(create(&app, 1), create(&app, 1));
    assert_ne!(x, y);
    let (ux, uy) = (format!("/v1/sessions/{x}/query"), format!("/v1/sessions/{y}/query"));
    let (qx, qy) = tokio::join!(call(&app, Method::GET, &ux, None), call(&app, Method::GET, &uy, None));
    assert_eq!(qx.0, StatusCode::OK);
    // Same config and seed: the two sessions propose the same pair.
    assert_eq!(qx.1["a"], qy.1["a"]);
    let (_, h) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(h["sessions"], 2);
}
