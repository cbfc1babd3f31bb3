use std::process::ExitCode;

use contrarag_core::contradiction::ContradictionError;
use contrarag_core::corpus::CorpusError;
use contrarag_core::rag::RagError;
use contrarag_core::ranking::RankingError;
use contrarag_core::ProviderError;
use contrarag_ingest::{IngestError, PipelineError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    /// A prerequisite stage has not run, or its artifacts do not fit together.
    #[error("{0}")]
    Upstream(String),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Upstream(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Other(_) => 1,
        })
    }

    pub fn missing(stage: &str) -> Self {
        CliError::Upstream(format!(
            "{stage} artifacts missing; run `contrarag {stage}` first"
        ))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Io(io) => CliError::Other(io.into()),
            other => CliError::Provider(other.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Other(e.into())
    }
}

impl From<RankingError> for CliError {
    fn from(e: RankingError) -> Self {
        match e {
            RankingError::Provider(p) => p.into(),
            RankingError::InvalidParams(m) => CliError::Config(m),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<ContradictionError> for CliError {
    fn from(e: ContradictionError) -> Self {
        match e {
            ContradictionError::Provider(p) => p.into(),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<RagError> for CliError {
    fn from(e: RagError) -> Self {
        match e {
            RagError::Provider(p) => p.into(),
            RagError::InvalidK => CliError::Config(e.to_string()),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(io) => CliError::Other(io.into()),
            other => CliError::Provider(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(i) => i.into(),
            PipelineError::Input(m) => CliError::Config(m),
            PipelineError::Corpus(c) => c.into(),
        }
    }
}
