//! Exponential backoff for transient provider and API failures.

use std::thread;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub base_delay: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

/// Whether a failed attempt may be retried.
pub trait Transient {
    fn is_transient(&self) -> bool;
}

impl Backoff {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }

    /// Run `op` until it succeeds, fails permanently, or retries run out. `op`
    /// receives the zero-based attempt number.
    pub fn run<T, E: Transient>(&self, mut op: impl FnMut(u32) -> Result<T, E>) -> Result<T, E> {
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.max_retries => {
                    let wait = self.delay(attempt);
                    log::debug!("transient failure on attempt {attempt}; retrying in {wait:?}");
                    thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
