use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Exponential backoff with jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Outcome of one attempt that failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptError {
    /// Worth retrying: timeouts, connection resets, 429, 5xx.
    Transient(String),
    /// Retrying cannot help: malformed request, auth failure.
    Permanent(String),
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }

    /// Nominal delay before retry number `retry` (1-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << retry.saturating_sub(1).min(16))
    }

    /// Runs `op` until it succeeds, fails permanently, or attempts run out.
    /// The closure receives the 1-based attempt number.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, AttemptError>) -> Result<T, String> {
        let attempts = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(AttemptError::Permanent(msg)) => return Err(msg),
                Err(AttemptError::Transient(msg)) => {
                    tracing::warn!(attempt, error = %msg, "provider call failed");
                    last = msg;
                    if attempt < attempts {
                        std::thread::sleep(self.jittered(attempt));
                    }
                }
            }
        }
        Err(format!("gave up after {attempts} attempts: {last}"))
    }

    fn jittered(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry);
        if nominal.is_zero() {
            return nominal;
        }
        let factor: f64 = rand::rng().random_range(0.5..1.5);
        nominal.mul_f64(factor)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retries_transient_then_succeeds() {
        let mut calls = 0;
        let out = RetryPolicy::no_delay(3).run(|_| {
            calls += 1;
            if calls < 3 {
                Err(AttemptError::Transient("503".into()))
            } else {
                Ok(calls)
            }
        });
        assert_eq!(out, Ok(3));
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let mut calls = 0;
        let out: Result<(), _> = RetryPolicy::no_delay(3).run(|_| {
            calls += 1;
            Err(AttemptError::Transient("timeout".into()))
        });
        assert!(out.is_err());
        assert_eq!(calls, 3);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let mut calls = 0;
        let out: Result<(), _> = RetryPolicy::no_delay(3).run(|_| {
            calls += 1;
            Err(AttemptError::Permanent("401".into()))
        });
        assert_eq!(out, Err("401".into()));
        assert_eq!(calls, 1);
    }

    #[test]
    fn backoff_doubles_from_500ms() {
        let p = RetryPolicy::default();
        assert_eq!(p.max_attempts, 3);
        assert_eq!(p.nominal_delay(1), Duration::from_millis(500));
        assert_eq!(p.nominal_delay(2), Duration::from_millis(1000));
        let j = p.jittered(1);
        assert!(j >= Duration::from_millis(250) && j < Duration::from_millis(750));
    }
}
