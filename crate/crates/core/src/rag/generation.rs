use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::ProviderKind;
use crate::provider::{content_hash, ProviderError};

/// Canonical answer for contexts that cannot support an answer.
pub const SENTINEL: &str = "Insufficient evidence";
pub const TEMPERATURE: f64 = 0.0;
pub const MAX_TOKENS: u32 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    /// The provider stopped at the token limit.
    pub truncated: bool,
    /// Seconds since the epoch, as reported by the provider.
    pub timestamp: u64,
}

/// Greedy text generation at temperature 0 with a 256-token cap.
pub trait GenerationProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn model_tag(&self) -> &str;
    fn generate(&self, prompt: &str) -> Result<Generation, ProviderError>;
}

/// One recorded generation, keyed by the SHA-256 of the exact prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub model: String,
    pub prompt_sha256: String,
    pub text: String,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub timestamp: u64,
}

/// Answers a prompt from a recorded `replay.jsonl`; unknown prompts are a
/// `Missing` error.
#[derive(Debug, Clone)]
pub struct ReplayGenerator {
    model_tag: String,
    entries: HashMap<String, ReplayEntry>,
}

impl ReplayGenerator {
    pub fn new(model_tag: impl Into<String>) -> Self {
        ReplayGenerator {
            model_tag: model_tag.into(),
            entries: HashMap::new(),
        }
    }

    pub fn record(&mut self, prompt: &str, text: impl Into<String>, timestamp: u64) {
        let key = content_hash(prompt);
        self.entries.insert(
            key.clone(),
            ReplayEntry {
                model: self.model_tag.clone(),
                prompt_sha256: key,
                text: text.into(),
                truncated: false,
                timestamp,
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Load the entries recorded for `model_tag`; other models' lines are
    /// ignored.
    pub fn open(path: &Path, model_tag: &str) -> Result<Self, ProviderError> {
        let mut out = ReplayGenerator::new(model_tag);
        let reader = BufReader::new(fs::File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(&line)
                .map_err(|e| ProviderError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if entry.model == model_tag {
                out.entries.insert(entry.prompt_sha256.clone(), entry);
            }
        }
        Ok(out)
    }

    /// Append this model's entries to `path`, sorted by prompt hash.
    pub fn append_to(&self, path: &Path) -> Result<(), ProviderError> {
        let mut entries: Vec<&ReplayEntry> = self.entries.values().collect();
        entries.sort_by(|a, b| a.prompt_sha256.cmp(&b.prompt_sha256));
        let mut out = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        for e in entries {
            let line =
                serde_json::to_string(e).map_err(|e| ProviderError::Format(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl GenerationProvider for ReplayGenerator {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Replay
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }

    fn generate(&self, prompt: &str) -> Result<Generation, ProviderError> {
        let key = content_hash(prompt);
        let e = self.entries.get(&key).ok_or(ProviderError::Missing {
            kind: "replay",
            key,
        })?;
        Ok(Generation {
            text: e.text.clone(),
            truncated: e.truncated,
            timestamp: e.timestamp,
        })
    }
}

/// Trim the answer and map any case or punctuation variant of the sentinel
/// onto it. Returns the answer and whether it is the sentinel.
pub fn normalize_answer(raw: &str) -> (String, bool) {
    let trimmed = raw.trim();
    let folded: Vec<String> = trimmed
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    if folded == ["insufficient", "evidence"] {
        (SENTINEL.to_string(), true)
    } else {
        (trimmed.to_string(), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_normalization_table() {
        for raw in [
            "Insufficient evidence",
            " insufficient evidence.",
            "INSUFFICIENT EVIDENCE!",
            "\"Insufficient evidence\"",
            "insufficient  evidence\n",
        ] {
            assert_eq!(
                normalize_answer(raw),
                (SENTINEL.to_string(), true),
                "{raw:?}"
            );
        }
        for raw in [
            "Insufficient evidence for children.",
            "evidence insufficient",
            "",
        ] {
            assert!(!normalize_answer(raw).1, "{raw:?}");
        }
        assert_eq!(
            normalize_answer("  Take with food. "),
            ("Take with food.".to_string(), false)
        );
    }

    #[test]
    fn replay_identity_and_miss() {
        let mut r = ReplayGenerator::new("m1");
        r.record("prompt", "Take it daily.", 7);
        let g = r.generate("prompt").unwrap();
        assert_eq!(g.text, "Take it daily.");
        assert_eq!(g.timestamp, 7);
        assert!(matches!(
            r.generate("other"),
            Err(ProviderError::Missing { .. })
        ));
    }

    #[test]
    fn replay_file_filters_by_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.jsonl");
        let mut a = ReplayGenerator::new("a");
        a.record("p", "from a", 1);
        let mut b = ReplayGenerator::new("b");
        b.record("p", "from b", 2);
        a.append_to(&path).unwrap();
        b.append_to(&path).unwrap();
        let back = ReplayGenerator::open(&path, "b").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.generate("p").unwrap().text, "from b");
    }
}
