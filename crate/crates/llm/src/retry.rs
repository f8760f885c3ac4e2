use std::future::Future;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::LlmError;

/// Exponential backoff between attempts: `initial_ms * 2^(n-1)` before retry
/// `n`, capped at `max_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffPolicy {
    pub initial_ms: u64,
    pub max_ms: u64,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            initial_ms: 250,
            max_ms: 8_000,
        }
    }
}

impl BackoffPolicy {
    pub const NONE: BackoffPolicy = BackoffPolicy { initial_ms: 0, max_ms: 0 };

    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_ms.saturating_mul(factor).min(self.max_ms))
    }
}

/// Outcome of one attempt.
#[derive(Debug)]
pub enum Attempt<T> {
    Done(T),
    /// Worth retrying; the string describes the cause.
    Transient(String),
    Fatal(LlmError),
}

/// Runs `op` up to `max_retries + 1` times. Returns the value and the number
/// of attempts used, or [`LlmError::Backend`] carrying the last transient cause.
pub async fn retry_with_backoff<T, F, Fut>(
    policy: BackoffPolicy,
    max_retries: u32,
    mut op: F,
) -> Result<(T, u32), LlmError>
where
    F: FnMut(u32) -> Fut,
    Fut: Future<Output = Attempt<T>>,
{
    let mut last = String::new();
    for attempt in 1..=max_retries.saturating_add(1) {
        if attempt > 1 {
            let wait = policy.delay(attempt - 1);
            tracing::debug!(attempt, wait_ms = wait.as_millis() as u64, cause = %last, "retrying completion");
            if !wait.is_zero() {
                tokio::time::sleep(wait).await;
            }
        }
        match op(attempt).await {
            Attempt::Done(v) => return Ok((v, attempt)),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Transient(cause) => last = cause,
        }
    }
    Err(LlmError::Backend {
        attempts: max_retries.saturating_add(1),
        cause: last,
    })
}
