use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{complete, Backend, CompletionRequest, CompletionResponse, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Wait before the second attempt; doubles for each later one.
    #[serde(with = "secs_f64")]
    pub base_backoff: Duration,
    #[serde(with = "secs_f64")]
    pub max_backoff: Duration,
    /// Scale each wait by a random factor in `[0.5, 1.0]`.
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff: Duration::from_secs(1),
            max_backoff: Duration::from_secs(30),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// A policy that retries without waiting.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
            jitter: false,
        }
    }

    /// Wait after the `failed`-th failed attempt (1-based).
    pub fn backoff(&self, failed: u32) -> Duration {
        let factor = 2u32.saturating_pow(failed.saturating_sub(1));
        let raw = self.base_backoff.saturating_mul(factor).min(self.max_backoff);
        if self.jitter && !raw.is_zero() {
            raw.mul_f64(rand::thread_rng().gen_range(0.5..=1.0))
        } else {
            raw
        }
    }
}

mod secs_f64 {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// A value together with the number of attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempted<T> {
    pub value: T,
    pub attempts: u32,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("{error} (after {attempts} attempt{})", if *.attempts == 1 { "" } else { "s" })]
pub struct RetryFailure {
    pub attempts: u32,
    #[source]
    pub error: GatewayError,
}

/// Calls [`complete`] until it succeeds, a non-retryable error occurs, or
/// `policy.max_attempts` is reached.
pub fn complete_with_retry(
    backend: &dyn Backend,
    req: &CompletionRequest,
    policy: &RetryPolicy,
) -> Result<Attempted<CompletionResponse>, RetryFailure> {
    let max_attempts = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match complete(backend, req) {
            Ok(value) => {
                return Ok(Attempted {
                    value,
                    attempts: attempt,
                })
            }
            Err(error) if error.is_retryable() && attempt < max_attempts => {
                let mut wait = policy.backoff(attempt);
                if let GatewayError::RateLimited {
                    retry_after: Some(hint),
                } = &error
                {
                    wait = wait.max((*hint).min(policy.max_backoff));
                }
                tracing::debug!(attempt, ?wait, %error, backend = backend.name(), "retrying");
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            Err(error) => {
                return Err(RetryFailure {
                    attempts: attempt,
                    error,
                })
            }
        }
    }
}
