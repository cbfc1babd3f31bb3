//! Query-to-pool ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use contrarag_core::corpus::{
    Corpus, CorpusError, Document, EvidencePool, Medicine, QueryInstance, QuerySlot,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::Cache;
use crate::client::{EutilsClient, ICiteClient, IngestError};
use crate::query::{formulate_queries, merge_dedup, QueryFormulation};
use crate::terms::{extract_content_terms, ExclusionList};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("medicine list: {0}")]
    Input(String),
}

/// One medicine of the ingestion input, with reference answers keyed by slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicineInput {
    pub id: u32,
    pub name: String,
    #[serde(default)]
    pub references: BTreeMap<QuerySlot, String>,
}

/// Read a JSON array of [`MedicineInput`].
pub fn load_medicines(path: &Path) -> Result<Vec<MedicineInput>, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

/// What ingestion did for one query.
#[derive(Debug, Clone, Serialize)]
pub struct QueryLog {
    pub query_ref: String,
    pub terms: Vec<String>,
    pub formulations: Vec<QueryFormulation>,
    pub hits_per_tier: Vec<usize>,
    pub merged: usize,
    pub without_abstract: usize,
    pub rejected: usize,
    pub documents: usize,
}

pub struct Ingestor<'a> {
    pub eutils: &'a EutilsClient,
    pub icite: &'a ICiteClient,
    pub cache: Option<&'a Cache>,
    pub exclusions: &'a ExclusionList,
}

impl Ingestor<'_> {
    /// Search all three tiers, union the hits and build the raw pool.
    pub fn ingest_query(
        &self,
        medicine: &Medicine,
        query: &QueryInstance,
    ) -> Result<(EvidencePool, QueryLog), PipelineError> {
        let terms = if query.text.trim().is_empty() {
            Vec::new()
        } else {
            extract_content_terms(&query.text, self.exclusions)
        };
        let formulations = formulate_queries(&medicine.name, &query.text, &terms);
        let hits = formulations
            .iter()
            .map(|f| self.eutils.esearch(f))
            .collect::<Result<Vec<_>, _>>()?;
        let merged = merge_dedup(&hits);
        let articles = self.eutils.fetch_articles(&merged, self.cache)?;
        let with_abstract: Vec<_> = articles
            .into_iter()
            .filter(|a| a.abstract_text.is_some())
            .collect();
        let without_abstract = merged.len() - with_abstract.len();
        let pmids: Vec<String> = with_abstract.iter().map(|a| a.pmid.clone()).collect();
        let citations = self.icite.citation_counts(&pmids, self.cache)?;

        let mut documents = Vec::with_capacity(with_abstract.len());
        let mut rejected = 0;
        for a in with_abstract {
            let Some(year) = a.year else {
                log::warn!("pmid {}: no publication year, dropped", a.pmid);
                rejected += 1;
                continue;
            };
            let kappa = citations.get(&a.pmid).copied().unwrap_or(0);
            match Document::new(
                a.pmid.clone(),
                year,
                kappa,
                a.abstract_text.unwrap_or_default(),
            ) {
                Ok(d) => documents.push(d),
                Err(e) => {
                    log::warn!("{e}; dropped");
                    rejected += 1;
                }
            }
        }
        let log = QueryLog {
            query_ref: query.id().to_string(),
            terms,
            hits_per_tier: hits.iter().map(Vec::len).collect(),
            formulations,
            merged: merged.len(),
            without_abstract,
            rejected,
            documents: documents.len(),
        };
        Ok((EvidencePool::raw(query.id(), documents)?, log))
    }

    /// Ingest six queries for every medicine into a raw corpus.
    pub fn ingest_corpus(
        &self,
        medicines: &[MedicineInput],
    ) -> Result<(Corpus, Vec<QueryLog>), PipelineError> {
        let mut corpus = Corpus::default();
        let mut logs = Vec::new();
        for m in medicines {
            let medicine = Medicine {
                id: m.id,
                name: m.name.to_uppercase(),
            };
            for slot in QuerySlot::ALL {
                let reference = m.references.get(&slot).cloned().unwrap_or_default();
                let query = QueryInstance::standard(&medicine, slot, reference);
                let (pool, log) = self.ingest_query(&medicine, &query)?;
                log::info!(
                    "{}: {} hits, {} documents",
                    log.query_ref,
                    log.merged,
                    log.documents
                );
                corpus.pools.insert(query.id(), pool);
                corpus.queries.push(query);
                logs.push(log);
            }
            corpus.medicines.push(medicine);
        }
        corpus.validate()?;
        Ok((corpus, logs))
    }
}
