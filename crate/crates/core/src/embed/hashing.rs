use sha2::{Digest, Sha256};

use crate::evaluation::tokenize;
use crate::provider::ProviderError;

use super::{EmbeddingProvider, EmbeddingVector, ProviderKind};

/// Signed feature hashing of unigrams and bigrams. A deterministic offline
/// encoder for fixtures, benches and smoke runs; it captures lexical overlap
/// only.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    model_tag: String,
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(model_tag: impl Into<String>, dimension: usize) -> Self {
        HashingEmbedder {
            model_tag: model_tag.into(),
            dimension: dimension.max(1),
        }
    }

    pub fn encode(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let tokens = tokenize(text);
        let mut values = vec![0.0f32; self.dimension];
        let mut add = |feature: &str, weight: f32| {
            let h = Sha256::digest(feature.as_bytes());
            let idx =
                u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) as usize % self.dimension;
            let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
            values[idx] += sign * weight;
        };
        for t in &tokens {
            add(t, 1.0);
        }
        for w in tokens.windows(2) {
            add(&format!("{} {}", w[0], w[1]), 0.5);
        }
        EmbeddingVector::new(values).map_err(|e| ProviderError::Format(format!("{e}: {text:?}")))
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileBacked
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}
