//! Answer-vs-reference metrics and their macro-averaged aggregation.

mod divergence;
mod rouge;
mod text;
mod wordvec;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use divergence::{jsd, kld, Distribution, KLD_SMOOTHING};
pub use rouge::{rouge_l, rouge_n};
pub use text::{token_distribution, tokenize};
pub use wordvec::{FileWordVectors, WordVectorProvider};

use crate::embed::{cosine, embed_batch, EmbeddingProvider, EmbeddingVector, VectorError};
use crate::provider::ProviderError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("text has no tokens")]
    EmptyText,
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub cos: f64,
    pub dot: f64,
}

/// Every metric for one (answer, reference) pair. VSIM is `None` when either
/// side has no in-vocabulary token; JSD/KLD are `None` when either side has
/// no token at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub bert_cos: f64,
    pub bert_dot: f64,
    pub vsim_cos: Option<f64>,
    pub vsim_dot: Option<f64>,
    pub jsd: Option<f64>,
    pub kld: Option<f64>,
}

/// Column labels in output order.
pub const METRIC_COLUMNS: [&str; 9] = [
    "R1", "R2", "RL", "BERT_cos", "BERT_dot", "VSIM_cos", "VSIM_dot", "JSD", "KLD",
];

impl MetricScores {
    pub fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.r1),
            Some(self.r2),
            Some(self.rl),
            Some(self.bert_cos),
            Some(self.bert_dot),
            self.vsim_cos,
            self.vsim_dot,
            self.jsd,
            self.kld,
        ]
    }
}

/// Cosine and raw dot product of whole-text embeddings.
pub fn embedding_similarity(
    reference: &str,
    candidate: &str,
    encoder: &dyn EmbeddingProvider,
) -> Result<Similarity, EvalError> {
    let v = embed_batch(encoder, &[reference, candidate])?;
    Ok(Similarity {
        cos: cosine(&v[0], &v[1])?,
        dot: v[0].dot(&v[1])?,
    })
}

fn mean_word_vector(
    text: &str,
    words: &dyn WordVectorProvider,
) -> Result<Option<EmbeddingVector>, EvalError> {
    let tokens = tokenize(text);
    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    let dim = words.dimension();
    let mut sum = vec![0.0f64; dim];
    let mut n = 0usize;
    for v in words.lookup(&refs)?.into_iter().flatten() {
        if v.len() != dim || v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for (s, x) in sum.iter_mut().zip(&v) {
            *s += f64::from(*x);
        }
        n += 1;
    }
    if n == 0 {
        return Ok(None);
    }
    let mean: Vec<f64> = sum.into_iter().map(|s| s / n as f64).collect();
    Ok(Some(EmbeddingVector::from_f64(&mean)?))
}

/// Cosine and dot of mean word vectors; `None` when either text is entirely
/// out of vocabulary.
pub fn vsim(
    reference: &str,
    candidate: &str,
    words: &dyn WordVectorProvider,
) -> Result<Option<Similarity>, EvalError> {
    let (Some(a), Some(b)) = (
        mean_word_vector(reference, words)?,
        mean_word_vector(candidate, words)?,
    ) else {
        return Ok(None);
    };
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Ok(None);
    }
    Ok(Some(Similarity {
        cos: cosine(&a, &b)?,
        dot: a.dot(&b)?,
    }))
}

/// Score one generated answer against its reference.
pub fn score_answer(
    reference: &str,
    candidate: &str,
    encoder: &dyn EmbeddingProvider,
    words: &dyn WordVectorProvider,
) -> Result<MetricScores, EvalError> {
    let bert = embedding_similarity(reference, candidate, encoder)?;
    let word = vsim(reference, candidate, words)?;
    let (jsd_v, kld_v) = match (token_distribution(candidate), token_distribution(reference)) {
        (Some(c), Some(r)) => (Some(jsd(&c, &r)), Some(kld(&c, &r))),
        _ => (None, None),
    };
    Ok(MetricScores {
        r1: rouge_n(reference, candidate, 1),
        r2: rouge_n(reference, candidate, 2),
        rl: rouge_l(reference, candidate),
        bert_cos: bert.cos,
        bert_dot: bert.dot,
        vsim_cos: word.map(|s| s.cos),
        vsim_dot: word.map(|s| s.dot),
        jsd: jsd_v,
        kld: kld_v,
    })
}

/// Per-metric two-level macro average: mean over a medicine's queries, then
/// mean over medicines. Missing values are skipped metric by metric; a
/// metric with no values at all averages to `None`.
pub fn macro_average(records: &[(u32, MetricScores)]) -> [Option<f64>; 9] {
    let mut out = [None; 9];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut per_medicine: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for (medicine, scores) in records {
            if let Some(v) = scores.values()[col] {
                let e = per_medicine.entry(*medicine).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        if per_medicine.is_empty() {
            continue;
        }
        let means: Vec<f64> = per_medicine.values().map(|(s, n)| s / *n as f64).collect();
        *slot = Some(means.iter().sum::<f64>() / means.len() as f64);
    }
    out
}

/// Header of the model × condition metrics table.
pub fn metrics_table_header() -> String {
    let mut h = String::from("model,condition");
    for c in METRIC_COLUMNS {
        h.push(',');
        h.push_str(c);
    }
    h
}

/// One row of the metrics table; missing averages are left empty.
pub fn write_metrics_row(
    mut out: impl Write,
    model: &str,
    condition: &str,
    averages: &[Option<f64>; 9],
) -> std::io::Result<()> {
    write!(out, "{model},{condition}")?;
    for v in averages {
        match v {
            Some(x) => write!(out, ",{x:.6}")?,
            None => write!(out, ",")?,
        }
    }
    writeln!(out)
}
