use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use counsel_core::prompt::{assemble_prompt, GenerationConfig, PromptBundle, PromptInputs, VariantId};
use counsel_core::{Condition, Role, Session, Topic};
use counsel_llm::{BackendEndpoint, BackoffPolicy, CompletionBackend, Dialect, HttpBackend};
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Reply {
    Status(u16),
    Text(&'static str),
    Sleep(u64),
}

#[derive(Default)]
struct Recorded {
    bodies: Vec<Value>,
    auth: Vec<Option<String>>,
}

#[derive(Clone)]
struct Fake {
    script: Arc<Vec<Reply>>,
    seen: Arc<Mutex<Recorded>>,
}

async fn handler(State(fake): State<Fake>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, String) {
    let n = {
        let mut seen = fake.seen.lock().unwrap();
        seen.bodies.push(body);
        seen.auth.push(headers.get("authorization").map(|v| v.to_str().unwrap().to_string()));
        seen.bodies.len()
    };
    let reply = fake.script.get(n - 1).copied().unwrap_or(Reply::Text("ok?"));
    match reply {
        Reply::Status(code) => (StatusCode::from_u16(code).unwrap(), "{\"error\":\"scripted\"}".into()),
        Reply::Sleep(ms) => {
            tokio::time::sleep(Duration::from_millis(ms)).await;
            (StatusCode::OK, completion("late"))
        }
        Reply::Text(t) => (StatusCode::OK, completion(t)),
    }
}

fn completion(text: &str) -> String {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}).to_string()
}

async fn serve(script: Vec<Reply>) -> (String, Arc<Mutex<Recorded>>) {
    let seen = Arc::new(Mutex::new(Recorded::default()));
    let fake = Fake {
        script: Arc::new(script),
        seen: seen.clone(),
    };
    let app = Router::new().route("/v1/chat/completions", post(handler)).with_state(fake);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1"), seen)
}

fn endpoint(base: &str, max_retries: u32) -> BackendEndpoint {
    let mut e = BackendEndpoint::new(base, "test-model");
    e.max_retries = max_retries;
    e.backoff = BackoffPolicy { initial_ms: 5, max_ms: 20 };
    e.timeout_ms = 2_000;
    e
}

fn bundle(config: GenerationConfig) -> PromptBundle {
    let mut s = Session::create_with("h", Condition::Baseline, Topic::Fats, 0);
    s.append_turn_at(Role::User, "I eat out a lot.", 1).unwrap();
    assemble_prompt(VariantId::BASELINE, &PromptInputs::default(), s.turns(), &config).unwrap()
}

fn config() -> GenerationConfig {
    counsel_core::prompt::default_config()
}

#[tokio::test]
async fn retries_server_errors_then_succeeds() {
    let (base, seen) = serve(vec![Reply::Status(500), Reply::Status(503), Reply::Text("Sounds hard. Why?")]).await;
    let backend = HttpBackend::new(endpoint(&base, 2)).unwrap();
    let r = backend.complete(&bundle(config())).await.unwrap();
    assert_eq!(r.text, "Sounds hard. Why?");
    assert_eq!(r.attempt_count, 3);
    assert_eq!(seen.lock().unwrap().bodies.len(), 3);
}

#[tokio::test]
async fn exhausted_retries_report_backend_error() {
    let (base, seen) = serve(vec![Reply::Status(500); 5]).await;
    let backend = HttpBackend::new(endpoint(&base, 2)).unwrap();
    let err = backend.complete(&bundle(config())).await.unwrap_err();
    assert_eq!(err.code(), "backend");
    assert!(err.retriable());
    assert!(err.to_string().contains("3 attempt"), "{err}");
    assert_eq!(seen.lock().unwrap().bodies.len(), 3);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let (base, seen) = serve(vec![Reply::Status(400), Reply::Text("never")]).await;
    let backend = HttpBackend::new(endpoint(&base, 3)).unwrap();
    let err = backend.complete(&bundle(config())).await.unwrap_err();
    assert_eq!(err.code(), "request");
    assert!(!err.retriable());
    assert_eq!(seen.lock().unwrap().bodies.len(), 1);
}

#[tokio::test]
async fn rate_limits_are_retried() {
    let (base, _) = serve(vec![Reply::Status(429), Reply::Text("fine?")]).await;
    let r = HttpBackend::new(endpoint(&base, 1)).unwrap().complete(&bundle(config())).await.unwrap();
    assert_eq!(r.attempt_count, 2);
}

#[tokio::test]
async fn empty_completion_is_protocol_error() {
    let (base, seen) = serve(vec![Reply::Text("   ")]).await;
    let err = HttpBackend::new(endpoint(&base, 2)).unwrap().complete(&bundle(config())).await.unwrap_err();
    assert_eq!(err.code(), "protocol");
    assert_eq!(seen.lock().unwrap().bodies.len(), 1);
}

#[tokio::test]
async fn timeouts_are_transient() {
    let (base, seen) = serve(vec![Reply::Sleep(500), Reply::Text("quick?")]).await;
    let mut e = endpoint(&base, 1);
    e.timeout_ms = 100;
    let r = HttpBackend::new(e).unwrap().complete(&bundle(config())).await.unwrap();
    assert_eq!((r.text.as_str(), r.attempt_count), ("quick?", 2));
    assert_eq!(seen.lock().unwrap().bodies.len(), 2);
}

#[tokio::test]
async fn unreachable_backend_is_backend_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = HttpBackend::new(endpoint(&format!("http://{addr}"), 1))
        .unwrap()
        .complete(&bundle(config()))
        .await
        .unwrap_err();
    assert_eq!(err.code(), "backend");
}

#[tokio::test]
async fn request_carries_exact_parameters() {
    let cfg = GenerationConfig {
        temperature: 0.37,
        top_p: 0.81,
        repetition_penalty: 1.13,
        max_tokens: 77,
    };
    for dialect in [Dialect::OpenaiLike, Dialect::LlamaServer] {
        let (base, seen) = serve(vec![]).await;
        let mut e = endpoint(&base, 0);
        e.dialect = dialect;
        e.api_key = Some("k-123".into());
        HttpBackend::new(e).unwrap().complete(&bundle(cfg.clone())).await.unwrap();
        let seen = seen.lock().unwrap();
        let body = &seen.bodies[0];
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"].as_f64(), Some(0.37));
        assert_eq!(body["top_p"].as_f64(), Some(0.81));
        assert_eq!(body["max_tokens"].as_u64(), Some(77));
        assert_eq!(body[dialect.penalty_key()].as_f64(), Some(1.13));
        let other = match dialect {
            Dialect::OpenaiLike => "repeat_penalty",
            Dialect::LlamaServer => "repetition_penalty",
        };
        assert!(body.get(other).is_none());
        assert_eq!(body["messages"], json!([
                {"role": "assistant", "content": "What can I help you with today?"},
                {"role": "user", "content": "I eat out a lot."}
            ]));
        assert_eq!(seen.auth[0].as_deref(), Some("Bearer k-123"));
    }
}
