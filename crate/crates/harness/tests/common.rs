#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use counsel_core::prompt::PromptBundle;
use counsel_llm::{mock_complete, CompletionBackend, CompletionResult, LlmError};

/// Mock replies plus a record of every bundle and the peak concurrency.
#[derive(Default)]
pub struct CaptureBackend {
    pub bundles: Mutex<Vec<PromptBundle>>,
    pub in_flight: AtomicUsize,
    pub peak: AtomicUsize,
    pub delay_ms: u64,
    /// Fail calls whose last user message contains this text.
    pub fail_on: Option<String>,
}

impl CaptureBackend {
    pub fn new() -> Arc<Self> {
        Arc::new(CaptureBackend::default())
    }

    pub fn calls(&self) -> usize {
        self.bundles.lock().unwrap().len()
    }
}

#[async_trait]
impl CompletionBackend for CaptureBackend {
    async fn complete(&self, bundle: &PromptBundle) -> Result<CompletionResult, LlmError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        if self.delay_ms > 0 {
            tokio::time::sleep(Duration::from_millis(self.delay_ms)).await;
        }
        self.bundles.lock().unwrap().push(bundle.clone());
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let last = bundle.window_messages.last().map(|m| m.content.as_str()).unwrap_or("");
        match &self.fail_on {
            Some(needle) if last.contains(needle.as_str()) => Err(LlmError::Backend {
                attempts: 3,
                cause: "connection refused".into(),
            }),
            _ => Ok(mock_complete(bundle)),
        }
    }

    fn describe(&self) -> String {
        "capture".into()
    }
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
