//! Providers built from configuration.

use std::path::PathBuf;
use std::sync::Arc;

use contrarag_core::contradiction::{CachedNli, FileNli, LexicalNli, NliProvider};
use contrarag_core::embed::{CachedEmbedder, EmbeddingProvider, FileEmbedder, HashingEmbedder};
use contrarag_core::evaluation::{FileWordVectors, WordVectorProvider};
use contrarag_core::http::{HttpClient, HttpEmbedder, HttpGenerator, HttpNli, HttpWordVectors};
use contrarag_core::rag::{GenerationProvider, ReplayGenerator};

use crate::config::{EmbedderSpec, GeneratorSpec, NliSpec, PipelineConfig, WordVectorSpec};
use crate::error::CliError;

/// Cache directory names must not be able to escape the cache root.
fn safe_name(tag: &str) -> String {
    tag.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn client(cfg: &PipelineConfig, url: &str) -> HttpClient {
    HttpClient::new(url).with_backoff(cfg.providers.backoff())
}

/// An embedding provider plus, for remote ones, the cache to persist after
/// use.
pub struct Embedder {
    pub provider: Arc<dyn EmbeddingProvider>,
    cache: Option<(Arc<CachedEmbedder>, PathBuf)>,
}

impl Embedder {
    pub fn build(cfg: &PipelineConfig, spec: &EmbedderSpec) -> Result<Self, CliError> {
        Ok(match spec {
            EmbedderSpec::File { path } => Embedder {
                provider: Arc::new(FileEmbedder::open(&cfg.resolve(path))?),
                cache: None,
            },
            EmbedderSpec::Hashing { model, dimension } => Embedder {
                provider: Arc::new(HashingEmbedder::new(model.clone(), *dimension)),
                cache: None,
            },
            EmbedderSpec::Http {
                url,
                model,
                dimension,
            } => {
                let http = Arc::new(HttpEmbedder::new(
                    client(cfg, url),
                    model.clone(),
                    *dimension,
                ));
                let dir = cfg.cache_dir().join("embed").join(safe_name(model));
                let cached = Arc::new(
                    CachedEmbedder::new(http, cfg.providers.embed_batch).with_cache_dir(&dir)?,
                );
                Embedder {
                    provider: cached.clone(),
                    cache: Some((cached, dir)),
                }
            }
        })
    }

    pub fn persist(&self) -> Result<(), CliError> {
        if let Some((c, dir)) = &self.cache {
            c.save(dir)?;
        }
        Ok(())
    }
}

pub struct Nli {
    pub provider: Arc<dyn NliProvider>,
    cache: Option<(Arc<CachedNli>, PathBuf)>,
}

impl Nli {
    pub fn build(cfg: &PipelineConfig, spec: &NliSpec) -> Result<Self, CliError> {
        Ok(match spec {
            NliSpec::File { path } => Nli {
                provider: Arc::new(FileNli::open(&cfg.resolve(path))?),
                cache: None,
            },
            NliSpec::Lexical { model } => Nli {
                provider: Arc::new(LexicalNli::new(model.clone())),
                cache: None,
            },
            NliSpec::Http { url, model } => {
                let http = Arc::new(HttpNli::new(client(cfg, url), model.clone()));
                let dir = cfg.cache_dir().join("nli").join(safe_name(model));
                let cached = Arc::new(
                    CachedNli::new(http, cfg.contradiction.nli_batch).with_cache_dir(&dir)?,
                );
                Nli {
                    provider: cached.clone(),
                    cache: Some((cached, dir)),
                }
            }
        })
    }

    pub fn persist(&self) -> Result<(), CliError> {
        if let Some((c, dir)) = &self.cache {
            c.save(dir)?;
        }
        Ok(())
    }
}

pub fn word_vectors(
    cfg: &PipelineConfig,
    spec: &WordVectorSpec,
) -> Result<Arc<dyn WordVectorProvider>, CliError> {
    Ok(match spec {
        WordVectorSpec::File { path } => Arc::new(FileWordVectors::open(&cfg.resolve(path))?),
        WordVectorSpec::Http {
            url,
            model,
            dimension,
        } => Arc::new(HttpWordVectors::new(
            client(cfg, url),
            model.clone(),
            *dimension,
        )),
    })
}

pub fn generator(
    cfg: &PipelineConfig,
    spec: &GeneratorSpec,
) -> Result<Arc<dyn GenerationProvider>, CliError> {
    Ok(match spec {
        GeneratorSpec::Replay { model, path } => {
            Arc::new(ReplayGenerator::open(&cfg.resolve(path), model)?)
        }
        GeneratorSpec::Http { url, model } => {
            Arc::new(HttpGenerator::new(client(cfg, url), model.clone()))
        }
    })
}

/// Files a provider reads, for the stage manifest.
pub fn embedder_inputs(cfg: &PipelineConfig, spec: &EmbedderSpec) -> Vec<PathBuf> {
    match spec {
        EmbedderSpec::File { path } => vec![cfg.resolve(path)],
        _ => Vec::new(),
    }
}

pub fn nli_inputs(cfg: &PipelineConfig, spec: &NliSpec) -> Vec<PathBuf> {
    match spec {
        NliSpec::File { path } => vec![cfg.resolve(path)],
        _ => Vec::new(),
    }
}

pub fn wordvec_inputs(cfg: &PipelineConfig, spec: &WordVectorSpec) -> Vec<PathBuf> {
    match spec {
        WordVectorSpec::File { path } => vec![cfg.resolve(path)],
        _ => Vec::new(),
    }
}

pub fn generator_inputs(cfg: &PipelineConfig, spec: &GeneratorSpec) -> Vec<PathBuf> {
    match spec {
        GeneratorSpec::Replay { path, .. } => vec![cfg.resolve(path)],
        _ => Vec::new(),
    }
}
