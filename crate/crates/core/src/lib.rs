//! Contradiction-aware retrieval for medical question answering.
//!
//! The crate covers evidence selection, diversity-aware ranking, pairwise
//! contradiction scoring, grounded generation and answer evaluation. Model
//! access goes through provider traits with file-backed and HTTP
//! implementations.

pub mod analysis;
pub mod contradiction;
pub mod corpus;
pub mod embed;
pub mod evaluation;
pub mod exec;
#[cfg(feature = "http")]
pub mod http;
pub mod provider;
pub mod rag;
pub mod ranking;
pub mod retry;
pub mod selection;

pub use exec::Execution;
pub use provider::ProviderError;
