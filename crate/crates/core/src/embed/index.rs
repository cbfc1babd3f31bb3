use std::cmp::Ordering;

use super::hnsw::{Hnsw, HnswParams};
use super::{cosine, EmbeddingVector, VectorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    /// Full scan; the ground truth.
    Exact,
    /// HNSW graph search.
    Approximate,
}

/// Collects vectors; [`IndexBuilder::freeze`] turns it into a read-only index.
#[derive(Debug, Clone)]
pub struct IndexBuilder {
    mode: IndexMode,
    params: HnswParams,
    ids: Vec<String>,
    vectors: Vec<EmbeddingVector>,
}

impl IndexBuilder {
    pub fn new(mode: IndexMode) -> Self {
        IndexBuilder {
            mode,
            params: HnswParams::default(),
            ids: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: HnswParams) -> Self {
        self.params = params;
        self
    }

    pub fn insert(
        &mut self,
        pmid: impl Into<String>,
        vector: EmbeddingVector,
    ) -> Result<(), VectorError> {
        if vector.norm() == 0.0 {
            return Err(VectorError::ZeroNorm);
        }
        if let Some(first) = self.vectors.first() {
            if first.dim() != vector.dim() {
                return Err(VectorError::DimensionMismatch {
                    expected: first.dim(),
                    got: vector.dim(),
                });
            }
        }
        self.ids.push(pmid.into());
        self.vectors.push(vector);
        Ok(())
    }

    pub fn freeze(self) -> VectorIndex {
        let graph = match self.mode {
            IndexMode::Exact => None,
            IndexMode::Approximate => {
                let refs: Vec<&[f32]> = self.vectors.iter().map(EmbeddingVector::values).collect();
                Some(Hnsw::build(&refs, self.params))
            }
        };
        VectorIndex {
            mode: self.mode,
            ids: self.ids,
            vectors: self.vectors,
            graph,
        }
    }
}

/// Immutable pmid → vector index; safe to search from many threads.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    mode: IndexMode,
    ids: Vec<String>,
    vectors: Vec<EmbeddingVector>,
    graph: Option<Hnsw>,
}

impl VectorIndex {
    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Up to `k` `(pmid, cosine)` pairs, highest similarity first, ties by pmid.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<(String, f64)>, VectorError> {
        let k = k.max(1).min(self.len());
        let mut hits: Vec<(String, f64)> = match &self.graph {
            None => self
                .ids
                .iter()
                .zip(&self.vectors)
                .map(|(id, v)| Ok((id.clone(), cosine(query, v)?)))
                .collect::<Result<_, VectorError>>()?,
            Some(graph) => {
                if query.norm() == 0.0 {
                    return Err(VectorError::ZeroNorm);
                }
                // Re-score graph hits exactly so both modes report the same numbers.
                graph
                    .search(query.values(), k)
                    .into_iter()
                    .map(|(node, _)| {
                        Ok((self.ids[node].clone(), cosine(query, &self.vectors[node])?))
                    })
                    .collect::<Result<_, VectorError>>()?
            }
        };
        hits.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        hits.truncate(k);
        Ok(hits)
    }
}
