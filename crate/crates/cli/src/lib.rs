//! Stage runner for the contradiction-aware medical RAG pipeline: a TOML
//! configuration, one artifact directory per stage, and manifests that tie
//! every artifact to the configuration and inputs that produced it.

pub mod config;
pub mod error;
pub mod manifest;
pub mod providers;
pub mod stages;

pub use config::PipelineConfig;
pub use error::CliError;
pub use stages::{AnalyzeOptions, GenerateOptions, Outcome, Runner, Stage};
