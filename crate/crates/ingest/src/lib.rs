//! Evidence acquisition from PubMed: content-term extraction, three-tier
//! query formulation, batched E-utilities retrieval with a per-pmid cache,
//! and citation counts from iCite.

pub mod cache;
pub mod client;
pub mod parse;
pub mod pipeline;
pub mod query;
pub mod tagger;
pub mod terms;

pub use cache::Cache;
pub use client::{EutilsClient, EutilsConfig, ICiteClient, IngestError, RateLimiter};
pub use parse::FetchedArticle;
pub use pipeline::{load_medicines, Ingestor, MedicineInput, PipelineError, QueryLog};
pub use query::{formulate_queries, merge_dedup, QueryFormulation, Tier};
pub use tagger::PerceptronTagger;
pub use terms::{extract_content_terms, ExclusionList};
