use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use clientsim::backend::{load_fixture, BackendFactory, HttpBackend, RateLimiter};
use clientsim::io::{read_jsonl, read_profiles};
use clientsim::service::{router, AppState, ServiceOptions, StoredSession};
use clientsim_core::corpus::EmpiricalActionTable;
use clientsim_core::gateway::{
    ChatBackend, ChatSession, FixtureRule, ReplyMode, Role, SamplingParams, SyntheticBackend,
    SyntheticRates,
};
use clientsim_core::{EndReason, SimulationConfig, StateOfChange};
use serde_json::{json, Value};
use tower::ServiceExt;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

fn options(factory: BackendFactory) -> ServiceOptions {
    ServiceOptions {
        profiles: read_profiles(&Path::new(DATA).join("profiles.json")).unwrap(),
        table: EmpiricalActionTable::new(),
        factory,
        base_config: SimulationConfig::default(),
        reports_dir: None,
        store_dir: None,
    }
}

fn scripted() -> BackendFactory {
    BackendFactory::Scripted(load_fixture(&Path::new(DATA).join("scripted_backend.json")).unwrap())
}

fn app(opts: ServiceOptions) -> Router {
    router(Arc::new(AppState::new(opts).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

async fn open(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_session_statuses() {
    let app = app(options(scripted()));
    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"profile_id": "p01-drinking"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["client_text"], "I am good. What about you?");
    assert!(v.get("trace").is_none());

    let (_, profiles) = call(&app, "GET", "/profiles", None).await;
    let mut bad = profiles[0].clone();
    bad["receptivity"] = json!(9);
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({"profile": bad}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(!v["violations"].as_array().unwrap().is_empty(), "{v}");

    let (status, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"profile_id": "nobody"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"profile_id": "p01-drinking", "config": {"max_turns": 1}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn turn_lifecycle() {
    let app = app(options(scripted()));
    let id = open(
        &app,
        json!({"profile_id": "p02-smoking", "reveal_trace": true}),
    )
    .await;
    let (status, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "How has your week been?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["turn_index"], 3);
    assert!(!v["client_text"].as_str().unwrap().is_empty());
    assert!(v["trace"]["state"].is_string());

    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "   "})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/sessions/live-0-0/turns",
        Some(json!({"text": "hi"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, first) = call(&app, "POST", &format!("/sessions/{id}/end"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        first["transcript"]["end_reason"],
        json!(EndReason::ManualStop)
    );
    let (_, again) = call(&app, "POST", &format!("/sessions/{id}/end"), None).await;
    assert_eq!(first, again);

    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "One more?"})),
    )
    .await;
    assert_eq!(status, StatusCode::GONE);
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ended");
    assert_eq!(v["turns"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn trace_hidden_by_default() {
    let app = app(options(scripted()));
    let id = open(&app, json!({"profile_id": "p03-gambling"})).await;
    let (_, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "What brings you in?"})),
    )
    .await;
    assert!(v.get("trace").is_none() && v.get("checks").is_none());
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert!(v["turns"]
        .as_array()
        .unwrap()
        .iter()
        .all(|t| t.get("trace").is_none()));
    assert!(v.get("state").is_none());
}

#[tokio::test]
async fn turn_cap_ends_the_session() {
    let app = app(options(scripted()));
    let id = open(
        &app,
        json!({"profile_id": "p04-diet", "config": {"max_turns": 6}}),
    )
    .await;
    let (_, a) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "One."})),
    )
    .await;
    assert_eq!(a["session_over"], false);
    let (_, b) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "Two."})),
    )
    .await;
    assert_eq!(b["session_over"], true);
    assert_eq!(b["end_reason"], json!(EndReason::MaxTurns));
    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "Three."})),
    )
    .await;
    assert_eq!(status, StatusCode::GONE);
}

#[tokio::test]
async fn debrief_stays_in_contemplation_with_a_belief_unaddressed() {
    let mut fixture = load_fixture(&Path::new(DATA).join("scripted_backend.json")).unwrap();
    let rule = |fp: &str, replies: &[&str]| FixtureRule {
        fingerprint: fp.into(),
        replies: replies.iter().map(|s| s.to_string()).collect(),
        mode: ReplyMode::RepeatLast,
    };
    fixture.rules.splice(
        0..0,
        [
            rule(
                "mention the Client's motivation?",
                &["Analysis: Named.\nScore: 90%"],
            ),
            rule(
                "relieve the Client's concern?",
                &["Analysis: Yes.\nScore: 90%", "Analysis: No.\nScore: 10%"],
            ),
        ],
    );
    let dir = tempfile::tempdir().unwrap();
    let mut opts = options(BackendFactory::Scripted(fixture));
    opts.store_dir = Some(dir.path().to_path_buf());
    let app = app(opts);

    let (_, profiles) = call(&app, "GET", "/profiles", None).await;
    let mut p = profiles[0].clone();
    p["id"] = json!("two-beliefs");
    p["beliefs"] = json!([
        "Drinking is how everyone unwinds.",
        "Cutting back would cost me friends."
    ]);
    p["initial_state"] = json!(StateOfChange::Precontemplation);
    p["final_state"] = json!(StateOfChange::Preparation);
    let id = open(
        &app,
        json!({"profile": p, "config": {"relapse_enabled": false}}),
    )
    .await;
    for text in [
        "What brings you in?",
        "What matters most to you?",
        "How do your friends fit in?",
        "What would change look like?",
    ] {
        let (status, v) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/turns"),
            Some(json!({ "text": text })),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{v}");
    }
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/end"), None).await;
    assert_eq!(status, StatusCode::OK);
    let s = &v["summary"];
    assert_eq!(s["final_state"], json!(StateOfChange::Contemplation));
    assert_eq!(s["beliefs_addressed"], 1);
    assert_eq!(s["beliefs_total"], 2);
    assert_eq!(s["motivation_matched"], true);
    assert_eq!(s["turns"], 10);

    let stored: Vec<StoredSession> = read_jsonl(&dir.path().join("live_sessions.jsonl")).unwrap();
    assert_eq!(stored.len(), 1);
    assert!(stored[0].transcript.check_invariants().is_empty());
    let index: Vec<Value> = read_jsonl(&dir.path().join("live_sessions.index.jsonl")).unwrap();
    assert_eq!(index[0]["session_id"], json!(id));

    // a restarted service still serves the finished session
    let mut opts = options(scripted());
    opts.store_dir = Some(dir.path().to_path_buf());
    let reopened = self::app(opts);
    let (status, v) = call(&reopened, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        v["summary"]["final_state"],
        json!(StateOfChange::Contemplation)
    );
}

#[tokio::test]
async fn catalog_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = json!({
        "batch_id": "b-1",
        "reports": [{"client": "Framework", "consistency": {"pe": 91.5, "mo": 88.25, "be": 70.0, "cp": 66.6}, "act_kl": 0.1438}],
    });
    std::fs::write(
        dir.path().join("b-1.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )
    .unwrap();
    let mut opts = options(scripted());
    opts.reports_dir = Some(dir.path().to_path_buf());
    let app = app(opts);

    let (status, v) = call(&app, "GET", "/profiles", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 12);
    let (status, v) = call(&app, "GET", "/reports/b-1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, report);
    for missing in ["/reports/nope", "/reports/..%2Fsecret", "/reports/.hidden"] {
        let (status, _) = call(&app, "GET", missing, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{missing}");
    }
}

/// Chat-completions stand-in that answers like the synthetic backend, slowly,
/// and never lets the client change state.
async fn slow_llm(delay: Duration) -> String {
    let backend = Arc::new(Mutex::new(SyntheticBackend::with_rates(
        11,
        SyntheticRates {
            motivation: 0.0,
            belief: 0.0,
            entail: 0.0,
            conclude: 0.0,
        },
    )));
    let handler = move |Json(body): Json<Value>| {
        let backend = backend.clone();
        async move {
            tokio::time::sleep(delay).await;
            let mut session = ChatSession::default();
            for m in body["messages"].as_array().unwrap() {
                let text = m["content"].as_str().unwrap();
                match serde_json::from_value::<Role>(m["role"].clone()).unwrap() {
                    Role::System => session = ChatSession::new(text),
                    Role::User => session.push_user(text),
                    Role::Assistant => session.push_assistant(text),
                }
            }
            let reply = backend
                .lock()
                .unwrap()
                .chat(&session, SamplingParams::JUDGE)
                .unwrap();
            Json(json!({"choices": [{"message": {"role": "assistant", "content": reply}}]}))
        }
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(
            listener,
            Router::new().route("/v1/chat/completions", post(handler)),
        )
        .await
        .unwrap();
    });
    format!("http://{addr}/v1")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_posts_serialize_per_session() {
    let url = slow_llm(Duration::from_millis(60)).await;
    let http = HttpBackend::new(
        &url,
        "mock",
        None,
        Duration::from_secs(10),
        Arc::new(RateLimiter::new(10_000.0, 1000)),
    );
    let app = app(options(BackendFactory::Http(http)));
    let id = open(
        &app,
        json!({"profile_id": "p05-exercise", "config": {"max_turns": 40}}),
    )
    .await;

    let rounds = 5;
    let per_round = 20;
    for round in 0..rounds {
        let tasks: Vec<_> = (0..per_round)
            .map(|i| {
                let app = app.clone();
                let uri = format!("/sessions/{id}/turns");
                tokio::spawn(async move {
                    call(
                        &app,
                        "POST",
                        &uri,
                        Some(json!({"text": format!("Round {round}, post {i}.")})),
                    )
                    .await
                })
            })
            .collect();
        let mut ok = 0;
        let mut conflict = 0;
        for t in tasks {
            match t.await.unwrap().0 {
                StatusCode::OK => ok += 1,
                StatusCode::CONFLICT => conflict += 1,
                s => panic!("unexpected status {s}"),
            }
        }
        assert_eq!((ok, conflict), (1, per_round - 1), "round {round}");
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let turns = v["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 2 + 2 * rounds);
    for (i, t) in turns.iter().enumerate() {
        assert_eq!(t["index"], i);
    }
}
