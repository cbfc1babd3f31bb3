use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::embed::ProviderKind;
use crate::provider::{pair_hash, ProviderError};

/// Tolerance on the three probabilities summing to one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliProbs {
    pub ent: f64,
    pub neu: f64,
    pub con: f64,
}

impl NliProbs {
    pub fn validate(&self) -> Result<(), ProviderError> {
        let parts = [self.ent, self.neu, self.con];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ProviderError::Protocol(format!(
                "probability outside [0, 1]: {self:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(ProviderError::Protocol(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(())
    }
}

/// Sentence-pair classifier contract: deterministic per ordered
/// (premise, hypothesis) pair.
pub trait NliProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn model_tag(&self) -> &str;
    fn classify(&self, pairs: &[(&str, &str)]) -> Result<Vec<NliProbs>, ProviderError>;
}

/// Classify and check the result against the provider contract.
pub fn classify_checked(
    provider: &dyn NliProvider,
    pairs: &[(&str, &str)],
) -> Result<Vec<NliProbs>, ProviderError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let probs = provider.classify(pairs)?;
    if probs.len() != pairs.len() {
        return Err(ProviderError::Protocol(format!(
            "{} returned {} results for {} pairs",
            provider.model_tag(),
            probs.len(),
            pairs.len()
        )));
    }
    for p in &probs {
        p.validate()?;
    }
    Ok(probs)
}

#[derive(Debug, Serialize, Deserialize)]
struct NliManifest {
    model_tag: String,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct NliLine {
    key: String,
    #[serde(flatten)]
    probs: NliProbs,
}

/// Pair-hash keyed NLI results.
///
/// ```text
/// <dir>/manifest.json   {"model_tag": "...", "count": N}
/// <dir>/probs.jsonl     {"key": "<sha256 of premise 0x1f hypothesis>", "ent": .., "neu": .., "con": ..}
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct NliStore {
    model_tag: String,
    entries: BTreeMap<String, NliProbs>,
}

impl NliStore {
    pub fn new(model_tag: impl Into<String>) -> Self {
        NliStore {
            model_tag: model_tag.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join("manifest.json").is_file()
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, premise: &str, hypothesis: &str) -> Option<NliProbs> {
        self.entries.get(&pair_hash(premise, hypothesis)).copied()
    }

    pub fn insert(&mut self, premise: &str, hypothesis: &str, probs: NliProbs) {
        self.entries.insert(pair_hash(premise, hypothesis), probs);
    }

    pub fn open(dir: &Path) -> Result<Self, ProviderError> {
        let manifest: NliManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)
                .map_err(|e| ProviderError::Format(format!("{}: {e}", dir.display())))?;
        let mut store = NliStore::new(manifest.model_tag);
        let file = fs::File::open(dir.join("probs.jsonl"))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: NliLine = serde_json::from_str(&line)
                .map_err(|e| ProviderError::Format(format!("probs.jsonl line {}: {e}", i + 1)))?;
            store.entries.insert(rec.key, rec.probs);
        }
        Ok(store)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ProviderError> {
        fs::create_dir_all(dir)?;
        let manifest = NliManifest {
            model_tag: self.model_tag.clone(),
            count: self.entries.len(),
        };
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_vec_pretty(&manifest)
                .map_err(|e| ProviderError::Format(e.to_string()))?,
        )?;
        let mut out = BufWriter::new(fs::File::create(dir.join("probs.jsonl"))?);
        for (key, probs) in &self.entries {
            let line = NliLine {
                key: key.clone(),
                probs: *probs,
            };
            serde_json::to_writer(&mut out, &line)
                .map_err(|e| ProviderError::Format(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Provider answering only from an [`NliStore`].
#[derive(Debug, Clone)]
pub struct FileNli {
    store: NliStore,
}

impl FileNli {
    pub fn new(store: NliStore) -> Self {
        FileNli { store }
    }

    pub fn open(dir: &Path) -> Result<Self, ProviderError> {
        NliStore::open(dir).map(Self::new)
    }
}

impl NliProvider for FileNli {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileBacked
    }

    fn model_tag(&self) -> &str {
        self.store.model_tag()
    }

    fn classify(&self, pairs: &[(&str, &str)]) -> Result<Vec<NliProbs>, ProviderError> {
        pairs
            .iter()
            .map(|(p, h)| {
                self.store.get(p, h).ok_or_else(|| ProviderError::Missing {
                    kind: "nli",
                    key: pair_hash(p, h),
                })
            })
            .collect()
    }
}

/// Memoizing, batching wrapper around an NLI provider.
pub struct CachedNli {
    inner: Arc<dyn NliProvider>,
    cache: RwLock<NliStore>,
    batch_size: usize,
    provider_calls: AtomicUsize,
}

impl CachedNli {
    pub fn new(inner: Arc<dyn NliProvider>, batch_size: usize) -> Self {
        let store = NliStore::new(inner.model_tag());
        CachedNli {
            inner,
            cache: RwLock::new(store),
            batch_size: batch_size.max(1),
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cache_dir(self, dir: &Path) -> Result<Self, ProviderError> {
        if NliStore::exists(dir) {
            let on_disk = NliStore::open(dir)?;
            self.cache
                .write()
                .expect("cache lock")
                .entries
                .extend(on_disk.entries);
        }
        Ok(self)
    }

    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> NliStore {
        self.cache.read().expect("cache lock").clone()
    }

    pub fn save(&self, dir: &Path) -> Result<(), ProviderError> {
        self.cache.read().expect("cache lock").save(dir)
    }
}

impl NliProvider for CachedNli {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn model_tag(&self) -> &str {
        self.inner.model_tag()
    }

    fn classify(&self, pairs: &[(&str, &str)]) -> Result<Vec<NliProbs>, ProviderError> {
        let missing: Vec<(&str, &str)> = {
            let cache = self.cache.read().expect("cache lock");
            let mut seen = BTreeSet::new();
            pairs
                .iter()
                .copied()
                .filter(|(p, h)| cache.get(p, h).is_none() && seen.insert((*p, *h)))
                .collect()
        };
        for chunk in missing.chunks(self.batch_size) {
            self.provider_calls.fetch_add(1, Ordering::Relaxed);
            let probs = classify_checked(self.inner.as_ref(), chunk)?;
            let mut cache = self.cache.write().expect("cache lock");
            for ((p, h), pr) in chunk.iter().zip(probs) {
                cache.insert(p, h, pr);
            }
        }
        let cache = self.cache.read().expect("cache lock");
        Ok(pairs
            .iter()
            .map(|(p, h)| cache.get(p, h).expect("cached above"))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_contract() {
        assert!(NliProbs {
            ent: 0.2,
            neu: 0.3,
            con: 0.5
        }
        .validate()
        .is_ok());
        assert!(NliProbs {
            ent: 0.2,
            neu: 0.3,
            con: 0.6
        }
        .validate()
        .is_err());
        assert!(NliProbs {
            ent: -0.1,
            neu: 0.6,
            con: 0.5
        }
        .validate()
        .is_err());
    }

    #[test]
    fn store_round_trip_and_missing_key() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = NliStore::new("toy-nli");
        store.insert(
            "a",
            "b",
            NliProbs {
                ent: 0.1,
                neu: 0.1,
                con: 0.8,
            },
        );
        store.save(dir.path()).unwrap();
        let p = FileNli::open(dir.path()).unwrap();
        assert_eq!(p.classify(&[("a", "b")]).unwrap()[0].con, 0.8);
        assert!(matches!(
            p.classify(&[("b", "a")]),
            Err(ProviderError::Missing { kind: "nli", .. })
        ));
    }

    #[test]
    fn cache_batches_and_dedupes() {
        let mut store = NliStore::new("toy");
        for i in 0..5 {
            store.insert(
                &i.to_string(),
                "h",
                NliProbs {
                    ent: 1.0,
                    neu: 0.0,
                    con: 0.0,
                },
            );
        }
        let cached = CachedNli::new(Arc::new(FileNli::new(store)), 2);
        let pairs: Vec<(String, &str)> = (0..5).chain(0..5).map(|i| (i.to_string(), "h")).collect();
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(p, h)| (p.as_str(), *h)).collect();
        cached.classify(&refs).unwrap();
        assert_eq!(cached.provider_calls(), 3);
        cached.classify(&refs).unwrap();
        assert_eq!(cached.provider_calls(), 3);
    }
}
