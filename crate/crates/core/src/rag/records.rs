use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ReplayEntry, RetrievalCondition};
use crate::corpus::QueryId;
use crate::provider::{content_hash, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub query_ref: QueryId,
    pub condition: RetrievalCondition,
    pub model_tag: String,
    pub context_pmids: Vec<String>,
    pub prompt: String,
    pub answer: String,
    /// Set exactly when `answer` is the sentinel.
    pub insufficient: bool,
    pub truncated: bool,
    pub timestamp: u64,
}

impl RunRecord {
    pub fn sort_key(&self) -> (QueryId, RetrievalCondition, &str) {
        (self.query_ref, self.condition, &self.model_tag)
    }
}

/// A cell that could not be run, for the failure manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub query_ref: QueryId,
    pub condition: RetrievalCondition,
    pub model_tag: String,
    pub error: String,
}

/// Read a JSONL record file; a missing file is an empty log.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, ProviderError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| ProviderError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn write_lines(mut out: impl Write, records: &[&RunRecord]) -> Result<(), ProviderError> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| ProviderError::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Append to the log without touching earlier lines.
pub fn append_records(path: &Path, records: &[RunRecord]) -> Result<(), ProviderError> {
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_lines(&mut out, &records.iter().collect::<Vec<_>>())?;
    out.flush()?;
    Ok(())
}

/// Rewrite `path` with the records in canonical order.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), ProviderError> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut buf = Vec::new();
    write_lines(&mut buf, &sorted)?;
    fs::write(path, buf)?;
    Ok(())
}
/// Replay entries answering each record's prompt with its answer, one per
/// (model, prompt), ordered by model then prompt hash.
pub fn replay_entries(records: &[RunRecord]) -> Vec<ReplayEntry> {
    let mut out: Vec<ReplayEntry> = records
        .iter()
        .map(|r| ReplayEntry {
            model: r.model_tag.clone(),
            prompt_sha256: content_hash(&r.prompt),
            text: r.answer.clone(),
            truncated: r.truncated,
            timestamp: r.timestamp,
        })
        .collect();
    out.sort_by(|a, b| (&a.model, &a.prompt_sha256).cmp(&(&b.model, &b.prompt_sha256)));
    out.dedup_by(|a, b| a.model == b.model && a.prompt_sha256 == b.prompt_sha256);
    out
}
