use crate::provider::ProviderError;

use super::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    FileBacked,
    HttpService,
    /// Recorded outputs keyed by input hash (generation only).
    Replay,
}

/// Text encoder contract. The same text must always map to the same vector,
/// and every vector has [`EmbeddingProvider::dimension`] components.
pub trait EmbeddingProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn model_tag(&self) -> &str;
    fn dimension(&self) -> usize;
    /// One vector per input text, in order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

/// Embed `texts` and check the result against the provider contract.
pub fn embed_batch(
    provider: &dyn EmbeddingProvider,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector>, ProviderError> {
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(ProviderError::Format(format!("text #{i} is empty")));
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let vectors = provider.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::Protocol(format!(
            "{} returned {} vectors for {} texts",
            provider.model_tag(),
            vectors.len(),
            texts.len()
        )));
    }
    if let Some(bad) = vectors.iter().find(|v| v.dim() != provider.dimension()) {
        return Err(ProviderError::Protocol(format!(
            "{} returned dimension {} (expected {})",
            provider.model_tag(),
            bad.dim(),
            provider.dimension()
        )));
    }
    Ok(vectors)
}
