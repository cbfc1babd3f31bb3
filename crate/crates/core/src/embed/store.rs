//! Content-addressed vector files.
//!
//! Layout of a store directory:
//!
//! ```text
//! <dir>/manifest.json   {"model_tag": "...", "dimension": 384, "count": N, "encoding": "f32le"}
//! <dir>/vectors.bin     N records of [32-byte SHA-256 of the text][dimension × f32 little-endian]
//! ```
//!
//! Records are written in ascending hash order, so saving the same content
//! twice yields identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, EmbeddingVector, ProviderKind};
use crate::provider::{content_hash, ProviderError};

const MANIFEST: &str = "manifest.json";
const VECTORS: &str = "vectors.bin";
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub model_tag: String,
    pub dimension: usize,
    pub count: usize,
    pub encoding: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    model_tag: String,
    dimension: usize,
    entries: BTreeMap<[u8; HASH_LEN], Vec<f32>>,
}

impl VectorStore {
    pub fn new(model_tag: impl Into<String>, dimension: usize) -> Self {
        VectorStore {
            model_tag: model_tag.into(),
            dimension,
            entries: BTreeMap::new(),
        }
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join(MANIFEST).is_file()
    }

    pub fn get(&self, text: &str) -> Option<&[f32]> {
        self.entries.get(&key(text)).map(Vec::as_slice)
    }

    pub fn insert(&mut self, text: &str, values: Vec<f32>) -> Result<(), ProviderError> {
        self.insert_hashed(key(text), values)
    }

    fn insert_hashed(&mut self, k: [u8; HASH_LEN], values: Vec<f32>) -> Result<(), ProviderError> {
        if values.len() != self.dimension {
            return Err(ProviderError::Format(format!(
                "vector of dimension {} in a {}-dimensional store",
                values.len(),
                self.dimension
            )));
        }
        self.entries.insert(k, values);
        Ok(())
    }

    /// Merge all entries of `other` into `self`.
    pub fn extend_from(&mut self, other: &VectorStore) -> Result<(), ProviderError> {
        for (k, v) in &other.entries {
            self.insert_hashed(*k, v.clone())?;
        }
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self, ProviderError> {
        let manifest: StoreManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)
            .map_err(|e| ProviderError::Format(format!("{}: {e}", dir.display())))?;
        if manifest.encoding != "f32le" {
            return Err(ProviderError::Format(format!(
                "unsupported encoding {}",
                manifest.encoding
            )));
        }
        let bytes = fs::read(dir.join(VECTORS))?;
        let record = HASH_LEN + 4 * manifest.dimension;
        if bytes.len() != record * manifest.count {
            return Err(ProviderError::Format(format!(
                "{}: expected {} bytes for {} vectors, found {}",
                dir.display(),
                record * manifest.count,
                manifest.count,
                bytes.len()
            )));
        }
        let mut store = VectorStore::new(manifest.model_tag, manifest.dimension);
        for chunk in bytes.chunks_exact(record) {
            let mut k = [0u8; HASH_LEN];
            k.copy_from_slice(&chunk[..HASH_LEN]);
            let values = chunk[HASH_LEN..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.entries.insert(k, values);
        }
        Ok(store)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ProviderError> {
        fs::create_dir_all(dir)?;
        let manifest = StoreManifest {
            model_tag: self.model_tag.clone(),
            dimension: self.dimension,
            count: self.entries.len(),
            encoding: "f32le".into(),
        };
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| ProviderError::Format(e.to_string()))?;
        fs::write(dir.join(MANIFEST), json)?;
        let mut out = BufWriter::new(fs::File::create(dir.join(VECTORS))?);
        for (k, values) in &self.entries {
            out.write_all(k)?;
            for v in values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn key(text: &str) -> [u8; HASH_LEN] {
    use sha2::{Digest, Sha256};
    Sha256::digest(text.as_bytes()).into()
}

/// Provider that only looks vectors up in a [`VectorStore`].
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    store: VectorStore,
}

impl FileEmbedder {
    pub fn new(store: VectorStore) -> Self {
        FileEmbedder { store }
    }

    pub fn open(dir: &Path) -> Result<Self, ProviderError> {
        VectorStore::open(dir).map(Self::new)
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }
}

impl EmbeddingProvider for FileEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileBacked
    }

    fn model_tag(&self) -> &str {
        self.store.model_tag()
    }

    fn dimension(&self) -> usize {
        self.store.dimension()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts
            .iter()
            .map(|t| {
                let values = self.store.get(t).ok_or_else(|| ProviderError::Missing {
                    kind: "embedding",
                    key: content_hash(t),
                })?;
                EmbeddingVector::new(values.to_vec())
                    .map_err(|e| ProviderError::Format(e.to_string()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_open_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = VectorStore::new("toy", 3);
        store.insert("b", vec![0.0, 1.0, 2.5]).unwrap();
        store.insert("a", vec![-1.0, 0.5, 0.25]).unwrap();
        store.save(dir.path()).unwrap();
        let first = fs::read(dir.path().join(VECTORS)).unwrap();

        let back = VectorStore::open(dir.path()).unwrap();
        assert_eq!(back, store);
        back.save(dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join(VECTORS)).unwrap(), first);
        assert_eq!(first.len(), 2 * (32 + 12));
    }

    #[test]
    fn file_embedder_reports_missing_hash() {
        let mut store = VectorStore::new("toy", 2);
        store.insert("known", vec![1.0, 0.0]).unwrap();
        let p = FileEmbedder::new(store);
        assert_eq!(p.embed(&["known"]).unwrap()[0].values(), [1.0, 0.0]);
        match p.embed(&["unknown"]) {
            Err(ProviderError::Missing { key, .. }) => assert_eq!(key, content_hash("unknown")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let mut store = VectorStore::new("toy", 2);
        assert!(store.insert("x", vec![1.0]).is_err());
    }
}
