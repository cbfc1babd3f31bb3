//! Context assembly under the three retrieval conditions, grounded prompts,
//! generation and the run-record log.

mod generation;
mod records;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generation::{
    normalize_answer, Generation, GenerationProvider, ReplayEntry, ReplayGenerator, MAX_TOKENS,
    SENTINEL, TEMPERATURE,
};
pub use records::{
    append_records, read_records, replay_entries, write_records, FailedCell, RunRecord,
};

use crate::contradiction::{contradiction_contexts, ContradictionReport};
use crate::corpus::{Corpus, Document, EvidencePool, QueryId, QueryInstance};
use crate::exec::Execution;
use crate::provider::ProviderError;
use crate::ranking::ScoredDocument;

/// The prompt template, versioned as an asset. `{abstracts}` and `{question}`
/// are substituted.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_v1.txt");
pub const PROMPT_VERSION: &str = "prompt_v1";
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("{0}: contradiction report missing")]
    MissingReport(QueryId),
    #[error("{0}: ranking missing")]
    MissingRanking(QueryId),
    #[error("{query}: pmid {pmid} is not in the selected pool")]
    UnknownDocument { query: QueryId, pmid: String },
    #[error("context size must be at least 1")]
    InvalidK,
    #[error("empty context")]
    EmptyContext,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalCondition {
    MostSimilar,
    MostContradictory,
    LeastContradictory,
}

impl RetrievalCondition {
    pub const ALL: [RetrievalCondition; 3] = [
        RetrievalCondition::MostSimilar,
        RetrievalCondition::MostContradictory,
        RetrievalCondition::LeastContradictory,
    ];

    /// Short label used in tables and file names.
    pub fn key(self) -> &'static str {
        match self {
            RetrievalCondition::MostSimilar => "ms",
            RetrievalCondition::MostContradictory => "mc",
            RetrievalCondition::LeastContradictory => "lc",
        }
    }
}

impl fmt::Display for RetrievalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for RetrievalCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ms" | "most_similar" => Ok(RetrievalCondition::MostSimilar),
            "mc" | "most_contradictory" => Ok(RetrievalCondition::MostContradictory),
            "lc" | "least_contradictory" => Ok(RetrievalCondition::LeastContradictory),
            _ => Err(format!(
                "unknown retrieval condition {s:?} (expected ms, mc or lc)"
            )),
        }
    }
}

/// Pick the context documents for one query and condition, in the
/// condition's ranking order. A one-document pool has no salience and
/// yields that document under every condition.
pub fn build_context<'a>(
    pool: &'a EvidencePool,
    ranked: &[ScoredDocument],
    report: Option<&ContradictionReport>,
    condition: RetrievalCondition,
    k: usize,
) -> Result<Vec<&'a Document>, RagError> {
    if k == 0 {
        return Err(RagError::InvalidK);
    }
    let pmids: Vec<String> = match condition {
        _ if pool.len() == 1 => vec![pool.documents[0].pmid().to_string()],
        RetrievalCondition::MostSimilar => ranked.iter().take(k).map(|d| d.pmid.clone()).collect(),
        RetrievalCondition::MostContradictory | RetrievalCondition::LeastContradictory => {
            let report = report.ok_or(RagError::MissingReport(pool.query))?;
            let ctx = contradiction_contexts(&report.salience, k);
            if condition == RetrievalCondition::MostContradictory {
                ctx.most
            } else {
                ctx.least
            }
        }
    };
    pmids
        .iter()
        .map(|p| {
            pool.get(p).ok_or_else(|| RagError::UnknownDocument {
                query: pool.query,
                pmid: p.clone(),
            })
        })
        .collect()
}

/// Render the grounded prompt. Byte-identical for identical inputs.
pub fn build_prompt(query: &QueryInstance, context: &[&Document]) -> Result<String, RagError> {
    if context.is_empty() {
        return Err(RagError::EmptyContext);
    }
    let mut abstracts = String::new();
    for (i, d) in context.iter().enumerate() {
        abstracts.push_str(&format!(
            "[Abstract {} | {} | {}]\n{}\n\n",
            i + 1,
            d.pmid(),
            d.year(),
            d.text()
        ));
    }
    Ok(PROMPT_TEMPLATE
        .replace("{abstracts}", abstracts.trim_end_matches('\n'))
        .replace("{question}", &query.text))
}

/// Call the provider and normalize its answer.
pub fn generate(
    provider: &dyn GenerationProvider,
    prompt: &str,
) -> Result<(String, bool, Generation), RagError> {
    let g = provider.generate(prompt)?;
    let (answer, insufficient) = normalize_answer(&g.text);
    if answer.is_empty() {
        log::warn!("{}: empty answer", provider.model_tag());
    }
    Ok((answer, insufficient, g))
}

/// Everything a run needs per query: the selected pool, its ranking and
/// (for pools of two or more) its contradiction report.
pub struct QueryArtifacts<'a> {
    pub rankings: &'a BTreeMap<QueryId, Vec<ScoredDocument>>,
    pub reports: &'a BTreeMap<QueryId, ContradictionReport>,
}

#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    /// All records, previous and new, in canonical order.
    pub records: Vec<RunRecord>,
    /// Records produced by this call.
    pub new_records: usize,
    pub failed: Vec<FailedCell>,
}

/// Run every (query, condition, model) cell not already present in
/// `existing`. Queries without a selected pool, or with an empty one, are skipped.
pub fn run_experiment(
    corpus: &Corpus,
    artifacts: &QueryArtifacts<'_>,
    conditions: &[RetrievalCondition],
    k: usize,
    generators: &[Arc<dyn GenerationProvider>],
    existing: Vec<RunRecord>,
    exec: Execution,
) -> Result<ExperimentOutcome, RagError> {
    if k == 0 {
        return Err(RagError::InvalidK);
    }
    let done: BTreeSet<(QueryId, RetrievalCondition, String)> = existing
        .iter()
        .map(|r| (r.query_ref, r.condition, r.model_tag.clone()))
        .collect();
    let mut cells = Vec::new();
    for query in &corpus.queries {
        let id = query.id();
        if corpus.pool(id).is_none_or(EvidencePool::is_empty) {
            continue;
        }
        for &condition in conditions {
            for (gi, g) in generators.iter().enumerate() {
                if !done.contains(&(id, condition, g.model_tag().to_string())) {
                    cells.push((id, condition, gi));
                }
            }
        }
    }

    let results = exec.map(&cells, |&(id, condition, gi)| {
        let cell = || -> Result<RunRecord, RagError> {
            let query = corpus.query(id).expect("cell built from corpus queries");
            let pool = corpus.pool(id).expect("cell built from pools");
            let ranked = artifacts
                .rankings
                .get(&id)
                .ok_or(RagError::MissingRanking(id))?;
            let context = build_context(pool, ranked, artifacts.reports.get(&id), condition, k)?;
            let prompt = build_prompt(query, &context)?;
            let provider = generators[gi].as_ref();
            let (answer, insufficient, g) = generate(provider, &prompt)?;
            Ok(RunRecord {
                query_ref: id,
                condition,
                model_tag: provider.model_tag().to_string(),
                context_pmids: context.iter().map(|d| d.pmid().to_string()).collect(),
                prompt,
                answer,
                insufficient,
                truncated: g.truncated,
                timestamp: g.timestamp,
            })
        };
        cell().map_err(|e| FailedCell {
            query_ref: id,
            condition,
            model_tag: generators[gi].model_tag().to_string(),
            error: e.to_string(),
        })
    });

    let mut records = existing;
    let mut failed = Vec::new();
    let mut new_records = 0;
    for r in results {
        match r {
            Ok(rec) => {
                records.push(rec);
                new_records += 1;
            }
            Err(f) => failed.push(f),
        }
    }
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(ExperimentOutcome {
        records,
        new_records,
        failed,
    })
}
