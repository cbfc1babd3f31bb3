//! Errors shared by every model provider contract (embeddings, NLI, word
//! vectors, generation).

use thiserror::Error;

use crate::retry::Transient;

#[derive(Debug, Error)]
pub enum ProviderError {
    /// A file-backed provider has no entry for the requested input.
    #[error("{kind} lookup failed: no entry for {key}")]
    Missing { kind: &'static str, key: String },
    /// The service could not be reached or kept failing after retries.
    #[error("transport error: {0}")]
    Transport(String),
    /// Rate limited (HTTP 429) or a 5xx that may succeed on retry.
    #[error("service unavailable (status {0})")]
    Unavailable(u16),
    /// The service answered with something that violates the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("provider data error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Transient for ProviderError {
    fn is_transient(&self) -> bool {
        matches!(
            self,
            ProviderError::Transport(_) | ProviderError::Unavailable(_)
        )
    }
}

/// Hex SHA-256 of a UTF-8 string; the key for every content-addressed cache.
pub fn content_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Cache key for an ordered (premise, hypothesis) pair.
pub fn pair_hash(premise: &str, hypothesis: &str) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(premise.as_bytes());
    h.update([0x1f]);
    h.update(hypothesis.as_bytes());
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_stable_and_direction_sensitive() {
        assert_eq!(
            content_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_ne!(pair_hash("a", "b"), pair_hash("b", "a"));
        assert_ne!(pair_hash("ab", "c"), pair_hash("a", "bc"));
    }
}
