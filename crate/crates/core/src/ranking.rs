//! MMR with temporal augmentation.
//!
//! For a query `q` and candidates `d_1..d_n`:
//!
//! ```text
//! relevance_i  = cos(e(q), e(d_i))
//! redundancy_i = max_{j != i} cos(e(d_i), e(d_j))        (0 for a single candidate)
//! mmr_i        = λ · relevance_i − (1 − λ) · redundancy_i
//! tau_i        = (year_i − min_year) / (max_year − min_year + ε)
//! score_i      = α · mmr_i + (1 − α) · tau_i
//! ```
//!
//! Redundancy is taken against every other candidate at once, not against an
//! incrementally grown selection as in greedy MMR.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::types::pmid_order_key;
use crate::corpus::{EvidencePool, QueryInstance, MAX_SELECTED};
use crate::embed::{cosine, embed_batch, EmbeddingProvider, EmbeddingVector, VectorError};
use crate::provider::ProviderError;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("invalid ranking parameters: {0}")]
    InvalidParams(String),
    #[error("cannot rank an empty pool")]
    EmptyPool,
    #[error("pool holds {0} candidates; ranking takes at most {MAX_SELECTED}")]
    PoolTooLarge(usize),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingParams {
    pub lambda: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub k: usize,
}

impl Default for RankingParams {
    fn default() -> Self {
        RankingParams {
            lambda: 0.7,
            alpha: 0.7,
            epsilon: 1e-5,
            k: 5,
        }
    }
}

impl RankingParams {
    pub fn validate(&self) -> Result<(), RankingError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.lambda) {
            return Err(RankingError::InvalidParams(format!(
                "lambda {} not in [0, 1]",
                self.lambda
            )));
        }
        if !unit.contains(&self.alpha) {
            return Err(RankingError::InvalidParams(format!(
                "alpha {} not in [0, 1]",
                self.alpha
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(RankingError::InvalidParams(format!(
                "epsilon {} must be > 0",
                self.epsilon
            )));
        }
        if self.k == 0 {
            return Err(RankingError::InvalidParams("k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub pmid: String,
    pub year: i32,
    pub relevance: f64,
    pub redundancy: f64,
    pub mmr: f64,
    pub tau: f64,
    pub score: f64,
}

/// Position of `year` within `[min_year, max_year]`, in `[0, 1)`.
pub fn temporal_score(year: i32, min_year: i32, max_year: i32, epsilon: f64) -> f64 {
    f64::from(year - min_year) / (f64::from(max_year - min_year) + epsilon)
}

/// Temporal scores of a whole candidate set.
pub fn temporal_scores(years: &[i32], epsilon: f64) -> Vec<f64> {
    let (Some(&min), Some(&max)) = (years.iter().min(), years.iter().max()) else {
        return Vec::new();
    };
    years
        .iter()
        .map(|&y| temporal_score(y, min, max, epsilon))
        .collect()
}

/// `(relevance, redundancy, mmr)` per candidate from precomputed similarities.
/// `cross[i][j]` is the similarity between candidates `i` and `j`.
pub fn mmr_from_similarities(
    relevance: &[f64],
    cross: &[Vec<f64>],
    lambda: f64,
) -> Vec<(f64, f64, f64)> {
    relevance
        .iter()
        .enumerate()
        .map(|(i, &rel)| {
            let red = cross[i]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &s)| s)
                .fold(None, |acc: Option<f64>, s| {
                    Some(acc.map_or(s, |a| a.max(s)))
                })
                .unwrap_or(0.0);
            (rel, red, lambda * rel - (1.0 - lambda) * red)
        })
        .collect()
}

/// MMR scores of candidates against a query vector.
pub fn mmr_scores(
    query: &EmbeddingVector,
    candidates: &[EmbeddingVector],
    lambda: f64,
) -> Result<Vec<(f64, f64, f64)>, VectorError> {
    let relevance = candidates
        .iter()
        .map(|d| cosine(query, d))
        .collect::<Result<Vec<_>, _>>()?;
    let n = candidates.len();
    let mut cross = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine(&candidates[i], &candidates[j])?;
            cross[i][j] = s;
            cross[j][i] = s;
        }
    }
    Ok(mmr_from_similarities(&relevance, &cross, lambda))
}

/// A candidate ready for ranking.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub pmid: &'a str,
    pub year: i32,
    pub vector: EmbeddingVector,
}

/// Score and order candidates by the combined score, descending, ties by pmid.
pub fn rank_candidates(
    query: &EmbeddingVector,
    candidates: &[Candidate<'_>],
    params: &RankingParams,
) -> Result<Vec<ScoredDocument>, RankingError> {
    params.validate()?;
    if candidates.is_empty() {
        return Err(RankingError::EmptyPool);
    }
    if candidates.len() > MAX_SELECTED {
        return Err(RankingError::PoolTooLarge(candidates.len()));
    }
    let vectors: Vec<EmbeddingVector> = candidates.iter().map(|c| c.vector.clone()).collect();
    let mmr = mmr_scores(query, &vectors, params.lambda)?;
    let years: Vec<i32> = candidates.iter().map(|c| c.year).collect();
    let taus = temporal_scores(&years, params.epsilon);

    let mut scored: Vec<ScoredDocument> = candidates
        .iter()
        .zip(mmr)
        .zip(taus)
        .map(|((c, (relevance, redundancy, mmr)), tau)| ScoredDocument {
            pmid: c.pmid.to_string(),
            year: c.year,
            relevance,
            redundancy,
            mmr,
            tau,
            score: params.alpha * mmr + (1.0 - params.alpha) * tau,
        })
        .collect();
    sort_by_score(&mut scored);
    Ok(scored)
}

pub(crate) fn sort_by_score(scored: &mut [ScoredDocument]) {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| pmid_order_key(&a.pmid).cmp(&pmid_order_key(&b.pmid)))
    });
}

/// Embed the query and its selected pool with the retrieval encoder and rank.
pub fn rank(
    query: &QueryInstance,
    pool: &EvidencePool,
    encoder: &dyn EmbeddingProvider,
    params: &RankingParams,
) -> Result<Vec<ScoredDocument>, RankingError> {
    if pool.is_empty() {
        return Err(RankingError::EmptyPool);
    }
    let mut texts: Vec<&str> = vec![query.text.as_str()];
    texts.extend(pool.documents.iter().map(|d| d.text()));
    let mut vectors = embed_batch(encoder, &texts)?;
    let doc_vectors = vectors.split_off(1);
    let candidates: Vec<Candidate<'_>> = pool
        .documents
        .iter()
        .zip(doc_vectors)
        .map(|(d, vector)| Candidate {
            pmid: d.pmid(),
            year: d.year(),
            vector,
        })
        .collect();
    rank_candidates(&vectors[0], &candidates, params)
}

/// The first `min(k, len)` entries of a ranking.
pub fn top_k_similar(ranked: &[ScoredDocument], k: usize) -> &[ScoredDocument] {
    &ranked[..k.min(ranked.len())]
}

pub const SCORE_TABLE_HEADER: &str = "query_ref,rank,pmid,year,relevance,redundancy,mmr,tau,score";

/// Append one query's ranking as CSV rows (no header).
pub fn write_score_rows(
    mut out: impl Write,
    query_ref: &str,
    ranked: &[ScoredDocument],
) -> std::io::Result<()> {
    for (i, d) in ranked.iter().enumerate() {
        writeln!(
            out,
            "{query_ref},{},{},{},{},{},{},{},{}",
            i + 1,
            d.pmid,
            d.year,
            d.relevance,
            d.redundancy,
            d.mmr,
            d.tau,
            d.score
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector::from_f64(x).unwrap()
    }

    #[test]
    fn same_year_pool_has_zero_tau() {
        assert_eq!(temporal_scores(&[2001, 2001, 2001], 1e-5), vec![0.0; 3]);
    }

    #[test]
    fn tau_midpoint() {
        let t = temporal_scores(&[2000, 2010, 2020], 1e-5);
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 10.0 / 20.00001).abs() < 1e-15);
        assert!((t[1] - 0.49999975).abs() < 1e-8);
        assert!(t[2] < 1.0);
    }

    #[test]
    fn mmr_hand_arithmetic() {
        let cross = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let m = mmr_from_similarities(&[0.9, 0.8], &cross, 0.7);
        assert!((m[0].2 - 0.48).abs() < 1e-12);
        assert!((m[1].2 - 0.41).abs() < 1e-12);
    }

    #[test]
    fn singleton_uses_zero_redundancy() {
        let m = mmr_from_similarities(&[0.6], &[vec![1.0]], 0.7);
        assert_eq!(m[0].1, 0.0);
        assert!((m[0].2 - 0.42).abs() < 1e-12);
    }

    #[test]
    fn lambda_one_is_pure_relevance() {
        let cross = vec![vec![1.0, 0.9], vec![0.9, 1.0]];
        let m = mmr_from_similarities(&[0.3, 0.7], &cross, 1.0);
        assert_eq!((m[0].2, m[1].2), (0.3, 0.7));
    }

    #[test]
    fn combined_score_arithmetic() {
        let p = RankingParams::default();
        let s = p.alpha * 0.48 + (1.0 - p.alpha) * 0.5;
        assert!((s - 0.486).abs() < 1e-12);
    }

    #[test]
    fn newer_document_wins_when_otherwise_equal() {
        // Symmetric about the query: equal relevance and redundancy.
        let q = v(&[1.0, 0.0]);
        let a = v(&[1.0, 1.0]);
        let b = v(&[1.0, -1.0]);
        for alpha in [0.0, 0.3, 0.7, 0.99] {
            let params = RankingParams {
                alpha,
                ..Default::default()
            };
            let ranked = rank_candidates(
                &q,
                &[
                    Candidate {
                        pmid: "1",
                        year: 1990,
                        vector: a.clone(),
                    },
                    Candidate {
                        pmid: "2",
                        year: 2020,
                        vector: b.clone(),
                    },
                ],
                &params,
            )
            .unwrap();
            assert_eq!(ranked[0].pmid, "2", "alpha {alpha}");
        }
    }

    #[test]
    fn ties_break_by_pmid() {
        let q = v(&[1.0, 0.0]);
        let a = v(&[1.0, 1.0]);
        let ranked = rank_candidates(
            &q,
            &[
                Candidate {
                    pmid: "30",
                    year: 2000,
                    vector: a.clone(),
                },
                Candidate {
                    pmid: "4",
                    year: 2000,
                    vector: a.clone(),
                },
            ],
            &RankingParams::default(),
        )
        .unwrap();
        assert_eq!(ranked[0].pmid, "4");
    }

    #[test]
    fn singleton_pool_ranks() {
        let ranked = rank_candidates(
            &v(&[1.0, 0.0]),
            &[Candidate {
                pmid: "1",
                year: 2000,
                vector: v(&[1.0, 0.0]),
            }],
            &RankingParams::default(),
        )
        .unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].redundancy, 0.0);
        assert!((ranked[0].score - 0.7 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn top_k_truncates() {
        let docs: Vec<ScoredDocument> = (0..14)
            .map(|i| ScoredDocument {
                pmid: i.to_string(),
                year: 2000,
                relevance: 0.0,
                redundancy: 0.0,
                mmr: 0.0,
                tau: 0.0,
                score: -(i as f64),
            })
            .collect();
        assert_eq!(top_k_similar(&docs, 5).len(), 5);
        assert_eq!(top_k_similar(&docs[..3], 5).len(), 3);
        assert_eq!(top_k_similar(&docs, 1)[0].pmid, "0");
    }

    #[test]
    fn invalid_params_are_rejected() {
        for p in [
            RankingParams {
                lambda: 1.5,
                ..Default::default()
            },
            RankingParams {
                alpha: -0.1,
                ..Default::default()
            },
            RankingParams {
                epsilon: 0.0,
                ..Default::default()
            },
            RankingParams {
                k: 0,
                ..Default::default()
            },
        ] {
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn oversized_and_empty_pools_are_rejected() {
        let q = v(&[1.0]);
        assert!(matches!(
            rank_candidates(&q, &[], &RankingParams::default()),
            Err(RankingError::EmptyPool)
        ));
        let many: Vec<Candidate<'_>> = (0..21)
            .map(|_| Candidate {
                pmid: "x",
                year: 2000,
                vector: q.clone(),
            })
            .collect();
        assert!(matches!(
            rank_candidates(&q, &many, &RankingParams::default()),
            Err(RankingError::PoolTooLarge(21))
        ));
    }
}
