//! Embedding vectors, the text-encoder provider contract, a content-addressed
//! vector store, and a nearest-neighbour index.

mod cache;
mod hashing;
mod hnsw;
mod index;
mod provider;
mod store;
mod vector;

pub use cache::CachedEmbedder;
pub use hashing::HashingEmbedder;
pub use hnsw::HnswParams;
pub use index::{IndexBuilder, IndexMode, VectorIndex};
pub use provider::{embed_batch, EmbeddingProvider, ProviderKind};
pub use store::{FileEmbedder, StoreManifest, VectorStore};
pub use vector::{cosine, EmbeddingVector, VectorError};

/// Default encoder width.
pub const DEFAULT_DIMENSION: usize = 384;
