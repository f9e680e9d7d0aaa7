use prefmf_client::Client;
use prefmf_core::api::{CreateSessionRequest, LfSourceSpec, ParameterSpec, Winner, API_SCHEMA_VERSION};
use prefmf_core::bo::{BoConfig, PhaseSchedule};
use prefmf_core::mcmc::HmcConfig;
use prefmf_core::surrogate::SurrogateKind;

async fn spawn_server(dir: Option<std::path::PathBuf>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(prefmf_server::serve_on(listener, dir));
    format!("http://{addr}")
}

fn request() -> CreateSessionRequest {
    let mut bo = BoConfig {
        acq_budget: 32,
        recommend_budget: 64,
        ipv_grid: 16,
        ..BoConfig::default()
    };
    bo.surrogate.mcmc = HmcConfig {
        chains: 1,
        warmup: 80,
        draws: 60,
        ..HmcConfig::default()
    };
    bo.surrogate.max_components = 16;
    CreateSessionRequest {
        schema_version: API_SCHEMA_VERSION,
        parameters: vec![ParameterSpec {
            name: "stiffness".into(),
            lower: 10.0,
            upper: 50.0,
            unit: Some("N/m".into()),
        }],
        schedule: PhaseSchedule::new(3, 1, 2),
        surrogate: SurrogateKind::MmIcm,
        lf_source: LfSourceSpec::Synthetic {
            pair_seed: 7,
            correlation: 0.9,
        },
        seed: 5,
        bo: Some(bo),
    }
}

#[tokio::test]
async fn client_drives_a_session_over_http() {
    let c = Client::new(&spawn_server(None).await);
    assert_eq!(c.health().await.unwrap().status, "ok");
    let st = c.create_session(&request()).await.unwrap();
    let id = st.session_id;

    let err = c.post_preference(&id, Winner::A).await.unwrap_err();
    assert_eq!((err.status(), err.code()), (Some(409), Some("no_outstanding_pair")));

    let q = c.next_query(&id).await.unwrap();
    assert_eq!(q.a[0].name, "stiffness");
    assert!((10.0..=50.0).contains(&q.a[0].value));
    let r = c.post_preference(&id, Winner::B).await.unwrap();
    assert!(!r.complete);

    let doc = c.export(&id).await.unwrap();
    let other = Client::new(&spawn_server(None).await);
    let imported = other.import(&doc).await.unwrap();
    assert_eq!(imported, c.status(&id).await.unwrap());
    assert_eq!(other.next_query(&id).await.unwrap(), c.next_query(&id).await.unwrap());
    let ra = c.post_preference(&id, Winner::A).await.unwrap();
    let rb = other.post_preference(&id, Winner::A).await.unwrap();
    assert_eq!(ra.recommendation, rb.recommendation);
    assert!(ra.complete);

    let err = c.next_query(&id).await.unwrap_err();
    assert_eq!(err.code(), Some("session_complete"));
    let err = c.status("missing").await.unwrap_err();
    assert_eq!(err.status(), Some(404));
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let c = Client::new("http://127.0.0.1:9");
    assert!(matches!(c.health().await, Err(prefmf_client::ClientError::Transport(_))));
}
