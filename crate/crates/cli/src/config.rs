//! Pipeline configuration file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use contrarag_core::contradiction::ContradictionParams;
use contrarag_core::rag::RetrievalCondition;
use contrarag_core::ranking::RankingParams;
use contrarag_core::retry::Backoff;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Raw corpus to select from. When absent, `select` reads the output of
    /// `ingest`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Medicine list with reference answers, read by `ingest`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medicines: Option<PathBuf>,
    pub cache: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContradictionConfig {
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_sim_gate: Option<f64>,
    pub nli_batch: usize,
}

impl Default for ContradictionConfig {
    fn default() -> Self {
        let p = ContradictionParams::default();
        ContradictionConfig {
            theta: p.theta,
            abs_sim_gate: p.abs_sim_gate,
            nli_batch: p.nli_batch,
        }
    }
}

impl ContradictionConfig {
    pub fn params(&self) -> ContradictionParams {
        ContradictionParams {
            theta: self.theta,
            abs_sim_gate: self.abs_sim_gate,
            nli_batch: self.nli_batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub eutils_url: String,
    pub icite_url: String,
    pub batch_size: usize,
    pub concurrency: usize,
    pub retmax: usize,
    /// Defaults to 3/s, or 10/s when an API key is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
    /// Company-name exclusion list; the bundled list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusions: Option<PathBuf>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            eutils_url: contrarag_ingest::client::DEFAULT_EUTILS_URL.into(),
            icite_url: contrarag_ingest::client::DEFAULT_ICITE_URL.into(),
            batch_size: contrarag_ingest::client::MAX_BATCH,
            concurrency: 3,
            retmax: 9999,
            requests_per_second: None,
            exclusions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderSpec {
    /// Vector store directory.
    File { path: PathBuf },
    Http {
        url: String,
        model: String,
        dimension: usize,
    },
    /// Feature-hashing baseline, no model needed.
    Hashing { model: String, dimension: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NliSpec {
    File {
        path: PathBuf,
    },
    Http {
        url: String,
        model: String,
    },
    /// Word-overlap and negation heuristic, no model needed.
    Lexical {
        model: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WordVectorSpec {
    /// word2vec text format.
    File { path: PathBuf },
    Http {
        url: String,
        model: String,
        dimension: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Replay { model: String, path: PathBuf },
    Http { url: String, model: String },
}

impl GeneratorSpec {
    pub fn model(&self) -> &str {
        match self {
            GeneratorSpec::Replay { model, .. } | GeneratorSpec::Http { model, .. } => model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Providers {
    /// Encoder for query/abstract relevance.
    pub retrieval: EmbedderSpec,
    /// Encoder for abstract and sentence similarity in contradiction scoring.
    pub scientific: EmbedderSpec,
    pub nli: NliSpec,
    /// Encoder for the answer-similarity metrics.
    pub evaluation: EmbedderSpec,
    /// Without word vectors the VSIM columns stay empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wordvec: Option<WordVectorSpec>,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    pub embed_batch: usize,
    pub retries: u32,
    pub retry_base_ms: u64,
}

impl Providers {
    pub fn backoff(&self) -> Backoff {
        Backoff {
            max_retries: self.retries,
            base_delay: Duration::from_millis(self.retry_base_ms),
        }
    }
}

impl Default for Providers {
    fn default() -> Self {
        let service = "http://127.0.0.1:8080".to_string();
        Providers {
            retrieval: EmbedderSpec::Http {
                url: service.clone(),
                model: "bge-small-en-v1.5".into(),
                dimension: 384,
            },
            scientific: EmbedderSpec::Http {
                url: service.clone(),
                model: "pubmedbert-embeddings".into(),
                dimension: 768,
            },
            nli: NliSpec::Http {
                url: service.clone(),
                model: "pubmedbert-mnli-mednli".into(),
            },
            evaluation: EmbedderSpec::Http {
                url: service.clone(),
                model: "bge-small-en-v1.5".into(),
                dimension: 384,
            },
            wordvec: Some(WordVectorSpec::Http {
                url: service.clone(),
                model: "word2vec-google-news-300".into(),
                dimension: 300,
            }),
            generators: vec![GeneratorSpec::Http {
                url: service,
                model: "gpt-4o-mini".into(),
            }],
            embed_batch: 64,
            retries: 3,
            retry_base_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub conditions: Vec<RetrievalCondition>,
    pub execution: ExecutionMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            conditions: RetrievalCondition::ALL.to_vec(),
            execution: ExecutionMode::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub ranking: RankingParams,
    #[serde(default)]
    pub contradiction: ContradictionConfig,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub providers: Providers,
    #[serde(default)]
    pub run: RunConfig,
    /// Directory relative paths resolve against; the config file's own.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths {
                corpus: None,
                medicines: Some("medicines.json".into()),
                cache: "cache".into(),
                output: "out".into(),
            },
            ranking: RankingParams::default(),
            contradiction: ContradictionConfig::default(),
            ingest: IngestConfig::default(),
            providers: Providers::default(),
            run: RunConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        // relative paths resolve against the working directory until `load`
        // says otherwise
        cfg.base_dir = PathBuf::from(".");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolve a configured path against the config file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.resolve(&self.paths.cache)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.ranking
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let c = &self.contradiction;
        if !(-1.0..=1.0).contains(&c.theta) {
            return Err(CliError::Config(format!(
                "contradiction.theta {} not in [-1, 1]",
                c.theta
            )));
        }
        if let Some(g) = c.abs_sim_gate {
            if !(-1.0..=1.0).contains(&g) {
                return Err(CliError::Config(format!(
                    "contradiction.abs_sim_gate {g} not in [-1, 1]"
                )));
            }
        }
        if c.nli_batch == 0 {
            return Err(CliError::Config(
                "contradiction.nli_batch must be >= 1".into(),
            ));
        }
        let i = &self.ingest;
        if !(1..=contrarag_ingest::client::MAX_BATCH).contains(&i.batch_size) {
            return Err(CliError::Config(format!(
                "ingest.batch_size {} not in [1, 300]",
                i.batch_size
            )));
        }
        if i.concurrency == 0 || i.retmax == 0 {
            return Err(CliError::Config(
                "ingest.concurrency and ingest.retmax must be >= 1".into(),
            ));
        }
        if i.requests_per_second
            .is_some_and(|r| r.is_nan() || r <= 0.0)
        {
            return Err(CliError::Config(
                "ingest.requests_per_second must be > 0".into(),
            ));
        }
        if self.providers.embed_batch == 0 {
            return Err(CliError::Config(
                "providers.embed_batch must be >= 1".into(),
            ));
        }
        let mut models: Vec<&str> = self
            .providers
            .generators
            .iter()
            .map(GeneratorSpec::model)
            .collect();
        models.sort_unstable();
        if let Some(w) = models.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!(
                "generator model {:?} listed twice",
                w[0]
            )));
        }
        if self.run.conditions.is_empty() {
            return Err(CliError::Config("run.conditions is empty".into()));
        }
        if self.paths.corpus.is_none() && self.paths.medicines.is_none() {
            return Err(CliError::Config(
                "set paths.corpus or paths.medicines".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = PipelineConfig::default();
        let text = cfg.render();
        let back = PipelineConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.ranking.lambda, 0.7);
        assert_eq!(back.ranking.alpha, 0.7);
        assert_eq!(back.ranking.k, 5);
        assert_eq!(back.contradiction.theta, 0.75);
        assert_eq!(back.ingest.batch_size, 300);
    }

    #[test]
    fn rejects_out_of_range_and_unknown_keys() {
        let mut cfg = PipelineConfig::default();
        cfg.ranking.lambda = 1.5;
        assert!(matches!(
            PipelineConfig::parse(&cfg.render()),
            Err(CliError::Config(_))
        ));

        let mut cfg = PipelineConfig::default();
        cfg.ingest.batch_size = 301;
        assert!(PipelineConfig::parse(&cfg.render()).is_err());

        let text = PipelineConfig::default()
            .render()
            .replace("[paths]", "[paths]\nbogus = 1");
        assert!(PipelineConfig::parse(&text).is_err());
    }

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = PipelineConfig::parse(
            r#"
            [paths]
            corpus = "corpus.jsonl"
            cache = "cache"
            output = "out"

            [providers]
            embed_batch = 16
            retries = 0
            retry_base_ms = 10
            retrieval = { kind = "hashing", model = "hash", dimension = 64 }
            scientific = { kind = "file", path = "stores/sci" }
            evaluation = { kind = "hashing", model = "hash", dimension = 64 }
            nli = { kind = "lexical", model = "lex" }

            [[providers.generators]]
            kind = "replay"
            model = "m"
            path = "replay.jsonl"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.run.conditions.len(), 3);
        assert_eq!(cfg.ranking, RankingParams::default());
        assert!(cfg.providers.wordvec.is_none());
        assert_eq!(PipelineConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    proptest::proptest! {
        #[test]
        fn tuned_config_round_trips(
            lambda in 0.0f64..=1.0,
            alpha in 0.0f64..=1.0,
            k in 1usize..50,
            theta in -1.0f64..=1.0,
            gate in proptest::option::of(0.0f64..1.0),
            batch in 1usize..=300,
        ) {
            let mut cfg = PipelineConfig::default();
            cfg.ranking = RankingParams { lambda, alpha, k, ..cfg.ranking };
            cfg.contradiction.theta = theta;
            cfg.contradiction.abs_sim_gate = gate;
            cfg.ingest.batch_size = batch;
            let back = PipelineConfig::parse(&cfg.render()).unwrap();
            proptest::prop_assert_eq!(back, cfg);
        }
    }
}
