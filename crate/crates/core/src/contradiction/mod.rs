//! Pairwise contradiction scoring within an evidence pool.
//!
//! For an ordered document pair `(a, b)` every sentence pair `(s, t)` in
//! `S(a) × S(b)` whose embeddings reach cosine `θ` is sent to the NLI model
//! with `s` as premise. `cnt(a, b)` is the largest contradiction probability
//! among those pairs (0 when there are none) and a document's salience is the
//! mean of `cnt(d, d')` over the rest of the pool.

mod lexical;
mod nli;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexical::LexicalNli;
pub use nli::{
    classify_checked, CachedNli, FileNli, NliProbs, NliProvider, NliStore, PROB_SUM_TOLERANCE,
};

use crate::corpus::types::pmid_order_key;
use crate::corpus::{EvidencePool, QueryId};
use crate::embed::{cosine, embed_batch, EmbeddingProvider, EmbeddingVector, VectorError};
use crate::exec::Execution;
use crate::provider::ProviderError;

/// Default sentence-similarity threshold for candidate pairs.
pub const DEFAULT_THETA: f64 = 0.75;

#[derive(Debug, Error)]
pub enum ContradictionError {
    #[error("salience is undefined for a pool of one document")]
    SingletonPool,
    #[error("pmid {0} is not in the pool")]
    UnknownDocument(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContradictionParams {
    pub theta: f64,
    /// When set, document pairs whose abstract similarity falls below the gate
    /// get no sentence candidates.
    pub abs_sim_gate: Option<f64>,
    pub nli_batch: usize,
}

impl Default for ContradictionParams {
    fn default() -> Self {
        ContradictionParams {
            theta: DEFAULT_THETA,
            abs_sim_gate: None,
            nli_batch: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePairEvidence {
    pub premise_pmid: String,
    pub premise_idx: usize,
    pub hypothesis_pmid: String,
    pub hypothesis_idx: usize,
    pub sentence_similarity: f64,
    pub p_con: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pmid_a: String,
    pub pmid_b: String,
    pub abs_similarity: f64,
    pub cnt: f64,
    pub best_pair: Option<SentencePairEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContradictionReport {
    pub pool_ref: QueryId,
    /// Pool order.
    pub pmids: Vec<String>,
    /// Every ordered pair `a != b`, `a`-major in pool order.
    pub pair_scores: Vec<PairScore>,
    /// Per-document salience; empty for single-document pools.
    pub salience: BTreeMap<String, f64>,
}

/// Sentence index pair with its similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub premise_idx: usize,
    pub hypothesis_idx: usize,
    pub similarity: f64,
}

/// Coarse similarity of two abstracts under the scientific encoder.
pub fn abstract_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    cosine(a, b)
}

/// All sentence pairs of `S(a) × S(b)` with cosine at least `theta`, in
/// row-major order.
pub fn candidate_pairs(
    premises: &[EmbeddingVector],
    hypotheses: &[EmbeddingVector],
    theta: f64,
) -> Result<Vec<CandidatePair>, VectorError> {
    let mut out = Vec::new();
    for (i, s) in premises.iter().enumerate() {
        for (j, t) in hypotheses.iter().enumerate() {
            let similarity = cosine(s, t)?;
            if similarity >= theta {
                out.push(CandidatePair {
                    premise_idx: i,
                    hypothesis_idx: j,
                    similarity,
                });
            }
        }
    }
    Ok(out)
}

/// Peak contradiction probability; 0 when there are no candidates.
pub fn cnt(p_con: &[f64]) -> f64 {
    p_con.iter().copied().fold(0.0, f64::max)
}

struct Embedded {
    abstracts: Vec<EmbeddingVector>,
    sentences: Vec<Vec<EmbeddingVector>>,
}

fn embed_pool(
    pool: &EvidencePool,
    encoder: &dyn EmbeddingProvider,
) -> Result<Embedded, ProviderError> {
    let abstracts = embed_batch(
        encoder,
        &pool.documents.iter().map(|d| d.text()).collect::<Vec<_>>(),
    )?;
    let all_sentences: Vec<&str> = pool
        .documents
        .iter()
        .flat_map(|d| d.sentences().iter().map(String::as_str))
        .collect();
    let mut flat = embed_batch(encoder, &all_sentences)?.into_iter();
    let sentences = pool
        .documents
        .iter()
        .map(|d| flat.by_ref().take(d.sentences().len()).collect())
        .collect();
    Ok(Embedded {
        abstracts,
        sentences,
    })
}

/// Score every ordered document pair of a pool and derive saliences.
pub fn score_pool(
    pool: &EvidencePool,
    encoder: &dyn EmbeddingProvider,
    nli: &dyn NliProvider,
    params: &ContradictionParams,
    exec: Execution,
) -> Result<ContradictionReport, ContradictionError> {
    let docs = &pool.documents;
    let embedded = embed_pool(pool, encoder)?;

    let ordered: Vec<(usize, usize)> = (0..docs.len())
        .flat_map(|a| {
            (0..docs.len())
                .filter(move |&b| b != a)
                .map(move |b| (a, b))
        })
        .collect();

    let candidates: Vec<(f64, Vec<CandidatePair>)> = exec.try_map(&ordered, |&(a, b)| {
        let abs = abstract_similarity(&embedded.abstracts[a], &embedded.abstracts[b])?;
        if params.abs_sim_gate.is_some_and(|gate| abs < gate) {
            return Ok((abs, Vec::new()));
        }
        let pairs = candidate_pairs(&embedded.sentences[a], &embedded.sentences[b], params.theta)?;
        Ok::<_, VectorError>((abs, pairs))
    })?;

    // Distinct sentence pairs, classified in batches.
    let mut unique: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (&(a, b), (_, pairs)) in ordered.iter().zip(&candidates) {
        for c in pairs {
            let key = (
                docs[a].sentences()[c.premise_idx].as_str(),
                docs[b].sentences()[c.hypothesis_idx].as_str(),
            );
            let next = unique.len();
            unique.entry(key).or_insert(next);
        }
    }
    let mut keyed: Vec<((&str, &str), usize)> = unique.into_iter().collect();
    keyed.sort_by_key(|&(_, i)| i);
    let texts: Vec<(&str, &str)> = keyed.iter().map(|&(k, _)| k).collect();
    let batches: Vec<&[(&str, &str)]> = texts.chunks(params.nli_batch.max(1)).collect();
    let results = exec.try_map(&batches, |batch| classify_checked(nli, batch))?;
    let p_con: BTreeMap<(&str, &str), f64> = texts
        .iter()
        .copied()
        .zip(results.into_iter().flatten().map(|p| p.con))
        .collect();

    let mut pair_scores = Vec::with_capacity(ordered.len());
    for (&(a, b), (abs, pairs)) in ordered.iter().zip(candidates) {
        let mut best: Option<SentencePairEvidence> = None;
        for c in pairs {
            let key = (
                docs[a].sentences()[c.premise_idx].as_str(),
                docs[b].sentences()[c.hypothesis_idx].as_str(),
            );
            let pc = p_con[&key];
            if best.as_ref().is_none_or(|bst| pc > bst.p_con) {
                best = Some(SentencePairEvidence {
                    premise_pmid: docs[a].pmid().to_string(),
                    premise_idx: c.premise_idx,
                    hypothesis_pmid: docs[b].pmid().to_string(),
                    hypothesis_idx: c.hypothesis_idx,
                    sentence_similarity: c.similarity,
                    p_con: pc,
                });
            }
        }
        pair_scores.push(PairScore {
            pmid_a: docs[a].pmid().to_string(),
            pmid_b: docs[b].pmid().to_string(),
            abs_similarity: abs,
            cnt: best.as_ref().map_or(0.0, |b| b.p_con),
            best_pair: best,
        });
    }

    let pmids: Vec<String> = docs.iter().map(|d| d.pmid().to_string()).collect();
    let salience = saliences(&pmids, &pair_scores);
    Ok(ContradictionReport {
        pool_ref: pool.query,
        pmids,
        pair_scores,
        salience,
    })
}

fn saliences(pmids: &[String], pair_scores: &[PairScore]) -> BTreeMap<String, f64> {
    if pmids.len() < 2 {
        return BTreeMap::new();
    }
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for p in pair_scores {
        *sums.entry(p.pmid_a.as_str()).or_insert(0.0) += p.cnt;
    }
    let denom = (pmids.len() - 1) as f64;
    pmids
        .iter()
        .map(|id| {
            (
                id.clone(),
                sums.get(id.as_str()).copied().unwrap_or(0.0) / denom,
            )
        })
        .collect()
}

impl ContradictionReport {
    pub fn pair(&self, pmid_a: &str, pmid_b: &str) -> Option<&PairScore> {
        self.pair_scores
            .iter()
            .find(|p| p.pmid_a == pmid_a && p.pmid_b == pmid_b)
    }

    /// Mean contradiction of `pmid` (as premise side) against the rest of the pool.
    pub fn salience(&self, pmid: &str) -> Result<f64, ContradictionError> {
        if !self.pmids.iter().any(|p| p == pmid) {
            return Err(ContradictionError::UnknownDocument(pmid.to_string()));
        }
        if self.pmids.len() < 2 {
            return Err(ContradictionError::SingletonPool);
        }
        Ok(self.salience[pmid])
    }

    /// Rebuild a report from pairwise scores (pool order given by `pmids`).
    pub fn from_pairs(pool_ref: QueryId, pmids: Vec<String>, pair_scores: Vec<PairScore>) -> Self {
        let salience = saliences(&pmids, &pair_scores);
        ContradictionReport {
            pool_ref,
            pmids,
            pair_scores,
            salience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContradictionContexts {
    pub most: Vec<String>,
    pub least: Vec<String>,
}

/// Top-`k` documents by salience, descending (`most`) and ascending
/// (`least`); ties go to the lower pmid in both lists.
pub fn contradiction_contexts(salience: &BTreeMap<String, f64>, k: usize) -> ContradictionContexts {
    let mut entries: Vec<(&str, f64)> = salience.iter().map(|(p, &s)| (p.as_str(), s)).collect();
    let by_pmid = |a: &str, b: &str| pmid_order_key(a).cmp(&pmid_order_key(b));

    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| by_pmid(a.0, b.0))
    });
    let most = entries.iter().take(k).map(|e| e.0.to_string()).collect();

    entries.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| by_pmid(a.0, b.0))
    });
    let least = entries.iter().take(k).map(|e| e.0.to_string()).collect();

    ContradictionContexts { most, least }
}

pub const REPORT_CSV_HEADER: &str =
    "pmid_a,pmid_b,abs_sim,cnt,best_premise_idx,best_hypothesis_idx,best_sim,best_pcon";

/// Write a report as CSV (header included). Pairs without candidates leave
/// the `best_*` columns empty.
pub fn write_report_csv(mut out: impl Write, report: &ContradictionReport) -> std::io::Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for p in &report.pair_scores {
        match &p.best_pair {
            Some(b) => writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.pmid_a,
                p.pmid_b,
                p.abs_similarity,
                p.cnt,
                b.premise_idx,
                b.hypothesis_idx,
                b.sentence_similarity,
                b.p_con
            )?,
            None => writeln!(
                out,
                "{},{},{},{},,,,",
                p.pmid_a, p.pmid_b, p.abs_similarity, p.cnt
            )?,
        }
    }
    Ok(())
}
