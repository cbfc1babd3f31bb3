//! Domain types for medicines, queries, documents and evidence pools, plus
//! sentence segmentation and the line-delimited corpus file format.

mod io;
mod segment;
pub(crate) mod types;

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use segment::segment_sentences;
pub use types::{
    Corpus, Document, EvidencePool, Medicine, PoolStage, QueryId, QueryInstance, QuerySlot,
    MAX_SELECTED, MIN_YEAR,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        CorpusError::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
