use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use super::{EmbeddingProvider, EmbeddingVector, ProviderKind, VectorStore};
use crate::provider::ProviderError;

/// Memoizing wrapper: each distinct text reaches the inner provider at most
/// once. The cache can be persisted as a [`VectorStore`], which makes it
/// usable later as a file-backed provider.
pub struct CachedEmbedder {
    inner: Arc<dyn EmbeddingProvider>,
    cache: RwLock<VectorStore>,
    batch_size: usize,
    provider_calls: AtomicUsize,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn EmbeddingProvider>, batch_size: usize) -> Self {
        let store = VectorStore::new(inner.model_tag(), inner.dimension());
        CachedEmbedder {
            inner,
            cache: RwLock::new(store),
            batch_size: batch_size.max(1),
            provider_calls: AtomicUsize::new(0),
        }
    }

    /// Seed the cache from a store directory if one exists there.
    pub fn with_cache_dir(self, dir: &Path) -> Result<Self, ProviderError> {
        if VectorStore::exists(dir) {
            let on_disk = VectorStore::open(dir)?;
            if on_disk.dimension() == self.inner.dimension() {
                self.cache
                    .write()
                    .expect("cache lock")
                    .extend_from(&on_disk)?;
            } else {
                log::warn!(
                    "ignoring embedding cache at {} (dimension {} != {})",
                    dir.display(),
                    on_disk.dimension(),
                    self.inner.dimension()
                );
            }
        }
        Ok(self)
    }

    /// Number of requests sent to the inner provider so far.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> VectorStore {
        self.cache.read().expect("cache lock").clone()
    }

    pub fn save(&self, dir: &Path) -> Result<(), ProviderError> {
        self.cache.read().expect("cache lock").save(dir)
    }
}

impl EmbeddingProvider for CachedEmbedder {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn model_tag(&self) -> &str {
        self.inner.model_tag()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let missing: Vec<&str> = {
            let cache = self.cache.read().expect("cache lock");
            let mut seen = BTreeSet::new();
            texts
                .iter()
                .copied()
                .filter(|t| cache.get(t).is_none() && seen.insert(*t))
                .collect()
        };
        for chunk in missing.chunks(self.batch_size) {
            self.provider_calls.fetch_add(1, Ordering::Relaxed);
            let vectors = super::embed_batch(self.inner.as_ref(), chunk)?;
            let mut cache = self.cache.write().expect("cache lock");
            for (text, v) in chunk.iter().zip(vectors) {
                cache.insert(text, v.values().to_vec())?;
            }
        }
        let cache = self.cache.read().expect("cache lock");
        texts
            .iter()
            .map(|t| {
                let values = cache.get(t).expect("cached above").to_vec();
                EmbeddingVector::new(values).map_err(|e| ProviderError::Format(e.to_string()))
            })
            .collect()
    }
}
