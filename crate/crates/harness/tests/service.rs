mod common;

use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::Arc;

use common::CaptureBackend;
use counsel_core::metrics::LexiconSet;
use counsel_core::prompt::{default_config, MessageRole, Scaffold, VariantId};
use counsel_core::session::{load_transcript, OPENER};
use counsel_harness::service::{router, AppState, ServiceConfig};
use counsel_llm::CompletionBackend;
use serde_json::{json, Value};

struct Server {
    base: String,
    client: reqwest::Client,
}

impl Server {
    async fn start(dir: &Path, window: usize, backend: Arc<dyn CompletionBackend>) -> Server {
        let config = ServiceConfig {
            window: NonZeroUsize::new(window).unwrap(),
            scaffold: Scaffold::bundled(),
            generation: default_config(),
            exemplar_seed: 0,
            k_per_subprocess: None,
            data_dir: dir.to_path_buf(),
            lexicons: LexiconSet::bundled(),
        };
        let app = router(AppState::new(config, backend).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        Server {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
        }
    }

    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    async fn create(&self, condition: &str) -> String {
        let (status, body) = self.post("/sessions", json!({"condition": condition, "topic": "sugar_salt"})).await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn create_returns_opener_and_lists() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), 6, CaptureBackend::new()).await;
    let (status, body) = s.post("/sessions", json!({"condition": "counsel", "topic": "sugar_salt"})).await;
    assert_eq!(status, 201);
    assert_eq!(body["turns"][0]["text"], OPENER);
    assert_eq!(body["turns"][0]["role"], "agent");
    assert_eq!(body["state"], "open");
    assert_eq!(body["variant"], 4);
    assert_eq!(body["time_budget_secs"], 600);
    let (_, list) = s.get("/sessions").await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(s.get("/healthz").await.1["status"], "ok");
    assert_eq!(s.get("/survey/items").await.1["acceptance"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn condition_selects_variant() {
    let dir = tempfile::tempdir().unwrap();
    let backend = CaptureBackend::new();
    let s = Server::start(dir.path(), 6, backend.clone()).await;
    for condition in ["baseline", "counsel"] {
        let id = s.create(condition).await;
        let (status, _) = s.post(&format!("/sessions/{id}/messages"), json!({"text": "I eat chips every night."})).await;
        assert_eq!(status, 200);
    }
    let bundles = backend.bundles.lock().unwrap();
    assert_eq!(bundles[0].variant, VariantId::BASELINE);
    assert!(bundles[0].system_text.is_empty() && bundles[0].exemplar_messages.is_empty());
    assert_eq!(bundles[1].variant, VariantId::FULL);
    assert!(!bundles[1].exemplar_messages.is_empty());
}

#[tokio::test]
async fn history_sent_never_exceeds_window() {
    let dir = tempfile::tempdir().unwrap();
    let backend = CaptureBackend::new();
    let s = Server::start(dir.path(), 4, backend.clone()).await;
    let id = s.create("counsel").await;
    for k in 0..8 {
        let (status, body) = s.post(&format!("/sessions/{id}/messages"), json!({"text": format!("Message number {k}.")})).await;
        assert_eq!(status, 200, "{body}");
        assert_eq!(body["user_turn"]["index"], 2 * k + 2);
        assert_eq!(body["agent_turn"]["index"], 2 * k + 3);
    }
    let bundles = backend.bundles.lock().unwrap();
    assert_eq!(bundles.len(), 8);
    for (k, b) in bundles.iter().enumerate() {
        assert!(b.window_messages.len() <= 4);
        assert_eq!(b.window_messages.len(), (2 * k + 2).min(4));
        let last = b.window_messages.last().unwrap();
        assert_eq!((last.role, last.content.clone()), (MessageRole::User, format!("Message number {k}.")));
    }
}

#[tokio::test]
async fn backend_failure_is_502_and_leaves_session_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(CaptureBackend {
        fail_on: Some("explode".into()),
        ..Default::default()
    });
    let s = Server::start(dir.path(), 6, backend).await;
    let id = s.create("counsel").await;
    let (status, body) = s.post(&format!("/sessions/{id}/messages"), json!({"text": "please explode"})).await;
    assert_eq!(status, 502);
    assert_eq!(body["code"], "backend");
    assert_eq!(body["retriable"], true);
    let (_, session) = s.get(&format!("/sessions/{id}")).await;
    assert_eq!(session["turns"].as_array().unwrap().len(), 1);
    let (status, _) = s.post(&format!("/sessions/{id}/messages"), json!({"text": "fine now"})).await;
    assert_eq!(status, 200);
}

#[tokio::test]
async fn documented_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), 6, CaptureBackend::new()).await;
    let (status, body) = s.post("/sessions", json!({"condition": "placebo", "topic": "fats"})).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("validation")));
    assert_eq!(body["retriable"], false);
    let (status, body) = s.get("/sessions/nope").await;
    assert_eq!((status, body["code"].as_str()), (404, Some("not_found")));
    let id = s.create("baseline").await;
    let (status, body) = s.post(&format!("/sessions/{id}/messages"), json!({"text": "   "})).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("validation")));
    let (status, body) = s.post(&format!("/sessions/{id}/messages"), json!({"txt": "hi"})).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("validation")));
    let (status, body) = s.post(&format!("/sessions/{id}/survey"), json!({"intention_pre": 3, "intention_post": 5})).await;
    assert_eq!((status, body["code"].as_str()), (409, Some("lifecycle")));
    let (status, body) = s.post(&format!("/sessions/{id}/end"), json!({})).await;
    assert_eq!(status, 200);
    assert_eq!(body["state"], "closed");
    let (status, body) = s.post(&format!("/sessions/{id}/messages"), json!({"text": "one more"})).await;
    assert_eq!((status, body["code"].as_str()), (409, Some("lifecycle")));
    let (status, _) = s.post(&format!("/sessions/{id}/end"), json!({})).await;
    assert_eq!(status, 409);
    let (status, body) = s.post(&format!("/sessions/{id}/survey"), json!({"intention_pre": 3, "intention_post": 11})).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("validation")));
    let bad_item = json!({"intention_pre": 3, "intention_post": 7, "acceptance": [{"item_id": "mystery", "score": 3}]});
    assert_eq!(s.post(&format!("/sessions/{id}/survey"), bad_item).await.0, 400);
    let ok = json!({"intention_pre": 3, "intention_post": 7, "acceptance": [{"item_id": "easy_to_use", "score": 5}]});
    let (status, body) = s.post(&format!("/sessions/{id}/survey"), ok).await;
    assert_eq!(status, 200);
    assert_eq!(s.get(&format!("/sessions/{id}")).await.1["survey"]["intention_post"], 7);
    assert_eq!(body["survey"]["acceptance"][0]["score"], 5);
}

#[tokio::test]
async fn sessions_persist_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let (id, transcript) = {
        let s = Server::start(dir.path(), 6, CaptureBackend::new()).await;
        let id = s.create("counsel").await;
        s.post(&format!("/sessions/{id}/messages"), json!({"text": "I skip lunch."})).await;
        s.post(&format!("/sessions/{id}/end"), json!({"closure_text": "Thanks for talking today."})).await;
        s.post(&format!("/sessions/{id}/survey"), json!({"intention_pre": 2, "intention_post": 6})).await;
        let bytes = s.client.get(format!("{}/sessions/{id}/transcript", s.base)).send().await.unwrap().bytes().await.unwrap();
        (id, bytes)
    };
    let on_disk = std::fs::read(dir.path().join(format!("sessions/{id}.jsonl"))).unwrap();
    assert_eq!(on_disk, transcript.to_vec());
    let session = load_transcript(&on_disk).unwrap();
    assert_eq!(session.turns().len(), 4);
    let s = Server::start(dir.path(), 6, CaptureBackend::new()).await;
    let (status, body) = s.get(&format!("/sessions/{id}")).await;
    assert_eq!(status, 200);
    assert_eq!(body["state"], "closed");
    assert_eq!(body["survey"]["intention_post"], 6);
    assert_eq!(body["turns"][3]["text"], "Thanks for talking today.");
}

#[tokio::test]
async fn concurrent_messages_to_one_session_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(CaptureBackend {
        delay_ms: 10,
        ..Default::default()
    });
    let s = Arc::new(Server::start(dir.path(), 6, backend.clone()).await);
    let id = s.create("counsel").await;
    let mut handles = Vec::new();
    for k in 0..6 {
        let s = s.clone();
        let id = id.clone();
        handles.push(tokio::spawn(async move {
            s.post(&format!("/sessions/{id}/messages"), json!({"text": format!("Parallel {k}.")})).await.0
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), 200);
    }
    let (_, body) = s.get(&format!("/sessions/{id}")).await;
    let turns = body["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 13);
    for (i, t) in turns.iter().enumerate() {
        assert_eq!(t["index"], i + 1);
        assert_eq!(t["role"], if i % 2 == 0 { "agent" } else { "user" });
    }
    assert_eq!(backend.peak.load(std::sync::atomic::Ordering::SeqCst), 1);
}

#[tokio::test]
async fn metrics_cover_user_and_agent_turns() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(dir.path(), 6, CaptureBackend::new()).await;
    let id = s.create("counsel").await;
    let (_, empty) = s.get(&format!("/sessions/{id}/metrics")).await;
    assert!(empty["self_disclosure"].is_null());
    s.post(&format!("/sessions/{id}/messages"), json!({"text": "I feel bad about my snacking. I eat candy daily."})).await;
    let (status, m) = s.get(&format!("/sessions/{id}/metrics")).await;
    assert_eq!(status, 200);
    let sd = &m["self_disclosure"];
    assert_eq!(sd["turns"], 1);
    assert_eq!(sd["mean_length_words"], 10.0);
    assert_eq!(sd["mean_first_person"], 3.0);
    assert!(sd["mean_valence"].as_f64().unwrap() < 0.0);
    assert!(m["agent_linguistic"]["type_token_ratio"].as_f64().unwrap() > 0.0);
}
