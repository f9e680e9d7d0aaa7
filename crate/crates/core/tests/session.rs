use prefmf_core::api::{CreateSessionRequest, LfSourceSpec, ParameterSpec, Winner, API_SCHEMA_VERSION};
use prefmf_core::bo::{BoConfig, PhaseSchedule};
use prefmf_core::mcmc::HmcConfig;
use prefmf_core::session::{Session, SessionError};
use prefmf_core::surrogate::SurrogateKind;

fn small_bo() -> BoConfig {
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
    bo
}

fn params() -> Vec<ParameterSpec> {
    vec![
        ParameterSpec {
            name: "gain".into(),
            lower: 0.0,
            upper: 2.0,
            unit: None,
        },
        ParameterSpec {
            name: "damping".into(),
            lower: -1.0,
            upper: 1.0,
            unit: Some("Ns/m".into()),
        },
    ]
}

fn request(kind: SurrogateKind, hf: usize) -> CreateSessionRequest {
    CreateSessionRequest {
        schema_version: API_SCHEMA_VERSION,
        parameters: params(),
        schedule: PhaseSchedule::new(3, 1, hf),
        surrogate: kind,
        lf_source: LfSourceSpec::Synthetic {
            pair_seed: 7,
            correlation: 0.9,
        },
        seed: 11,
        bo: Some(small_bo()),
    }
}

#[test]
fn loop_progress_and_named_candidates() {
    let mut s = Session::create("s1".into(), request(SurrogateKind::MmAr1, 3)).unwrap();
    let st = s.status();
    assert_eq!(st.n_lf, 4 + 4);
    assert_eq!(st.n_comparisons, 0);
    assert!(!st.outstanding && !st.complete);
    let q1 = s.next_query().unwrap();
    assert_eq!(q1.a.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), ["gain", "damping"]);
    assert!(q1.a.iter().chain(&q1.b).all(|p| p.value.is_finite()));
    assert!((0.0..=2.0).contains(&q1.a[0].value) && (-1.0..=1.0).contains(&q1.a[1].value));
    assert_eq!(q1.episode, 5);
    let r = s.post_preference(Winner::A).unwrap();
    assert_eq!(r.hf_episode, 1);
    assert!(r.refit_ms >= 0.0);
    let q2 = s.next_query().unwrap();
    assert_ne!((q1.a, q1.b), (q2.a, q2.b));
}

#[test]
fn next_query_is_idempotent() {
    let mut s = Session::create("s2".into(), request(SurrogateKind::MmAr1, 2)).unwrap();
    let q1 = s.next_query().unwrap();
    let q2 = s.next_query().unwrap();
    assert_eq!(q1, q2);
}

#[test]
fn preference_without_outstanding_pair_conflicts() {
    let mut s = Session::create("s3".into(), request(SurrogateKind::MmAr1, 2)).unwrap();
    let err = s.post_preference(Winner::A).unwrap_err();
    assert_eq!(err, SessionError::NoOutstandingPair);
    assert_eq!(err.http_status(), 409);
    s.next_query().unwrap();
    s.post_preference(Winner::B).unwrap();
    assert_eq!(s.post_preference(Winner::B).unwrap_err(), SessionError::NoOutstandingPair);
}

/// Enumerate every op sequence of length 5 against a two-episode session and
/// compare with the reference state machine.
#[test]
fn exhaustive_small_traces_follow_state_machine() {
    let base = Session::create("s4".into(), request(SurrogateKind::MmAr1, 2)).unwrap();
    let init = base.init_size();
    for mask in 0u32..32 {
        let mut s = base.clone();
        let (mut outstanding, mut answered) = (false, 0usize);
        for step in 0..5 {
            let is_next = mask >> step & 1 == 0;
            if is_next {
                let r = s.next_query();
                if answered == 2 {
                    assert_eq!(r.unwrap_err(), SessionError::Complete);
                } else {
                    r.unwrap();
                    outstanding = true;
                }
            } else {
                let r = s.post_preference(if step % 2 == 0 { Winner::A } else { Winner::B });
                if outstanding {
                    r.unwrap();
                    outstanding = false;
                    answered += 1;
                } else {
                    assert_eq!(r.unwrap_err(), SessionError::NoOutstandingPair);
                }
            }
            let st = s.status();
            assert_eq!(st.outstanding, outstanding, "mask {mask:05b} step {step}");
            assert_eq!(st.n_comparisons, answered);
            assert_eq!(st.complete, answered == 2);
            assert_eq!(st.episode, st.n_comparisons + st.n_lf - init);
        }
    }
}

#[test]
fn export_import_round_trip_is_exact_and_deterministic() {
    let mut s = Session::create("s5".into(), request(SurrogateKind::MmAr1, 3)).unwrap();
    s.next_query().unwrap();
    s.post_preference(Winner::B).unwrap();
    s.next_query().unwrap();
    let text = s.to_json();
    let mut restored = Session::from_json(&text).unwrap();
    assert_eq!(restored, s);
    assert_eq!(restored.status(), s.status());
    let a = s.post_preference(Winner::A).unwrap();
    let b = restored.post_preference(Winner::A).unwrap();
    assert_eq!(a.recommendation, b.recommendation);
    assert_eq!(s.next_query().unwrap(), restored.next_query().unwrap());
}

#[test]
fn exhausted_session_reports_complete() {
    let mut s = Session::create("s6".into(), request(SurrogateKind::MmIcm, 1)).unwrap();
    s.next_query().unwrap();
    let r = s.post_preference(Winner::A).unwrap();
    assert!(r.complete);
    assert_eq!(s.next_query().unwrap_err(), SessionError::Complete);
    assert!(s.status().recommendation.is_some());
}

#[test]
fn dataset_and_preference_only_sessions() {
    let mut req = request(SurrogateKind::MmAr1, 1);
    req.lf_source = LfSourceSpec::Dataset {
        points: vec![vec![0.2, -0.5], vec![1.5, 0.1], vec![1.0, 0.9], vec![0.4, 0.4]],
        values: vec![0.1, 0.7, 0.3, 0.5],
    };
    let mut s = Session::create("d".into(), req).unwrap();
    assert_eq!((s.init_size(), s.episode()), (4, 0));
    assert_eq!(s.next_query().unwrap().episode, 1);

    let mut req = request(SurrogateKind::PrefGp, 2);
    req.lf_source = LfSourceSpec::None;
    let mut s = Session::create("p".into(), req).unwrap();
    assert!(s.status().recommendation.is_none());
    s.next_query().unwrap();
    s.post_preference(Winner::A).unwrap();
    assert!(s.status().recommendation.is_some());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut dup = request(SurrogateKind::MmAr1, 1);
    dup.parameters[1].name = "gain".into();
    let mut flat = request(SurrogateKind::MmAr1, 1);
    flat.parameters[0].upper = 0.0;
    let mut no_lf = request(SurrogateKind::MmIcm, 1);
    no_lf.lf_source = LfSourceSpec::None;
    let pref_with_lf = request(SurrogateKind::PrefGp, 1);
    let mut outside = request(SurrogateKind::MmAr1, 1);
    outside.lf_source = LfSourceSpec::Dataset {
        points: vec![vec![3.0, 0.0]],
        values: vec![1.0],
    };
    let no_hf = request(SurrogateKind::MmAr1, 0);
    for req in [dup, flat, no_lf, pref_with_lf, outside, no_hf] {
        let err = Session::create("x".into(), req).unwrap_err();
        assert_eq!(err.http_status(), 400, "{err}");
    }
}
