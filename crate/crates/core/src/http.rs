//! Clients for the model-server wire protocol: `POST /embed`, `/nli`,
//! `/wordvec` and `/generate`, all JSON.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::contradiction::{NliProbs, NliProvider};
use crate::embed::{EmbeddingProvider, EmbeddingVector, ProviderKind};
use crate::evaluation::WordVectorProvider;
use crate::provider::ProviderError;
use crate::rag::{Generation, GenerationProvider, MAX_TOKENS, TEMPERATURE};
use crate::retry::Backoff;

/// JSON-over-HTTP transport with retry on 429, 5xx and connection errors.
#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    base_url: String,
    backoff: Backoff,
}

impl HttpClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpClient {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            backoff: Backoff::default(),
        }
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ProviderError> {
        let url = format!("{}{path}", self.base_url);
        self.backoff.run(|_| {
            let mut resp = self
                .agent
                .post(&url)
                .send_json(body)
                .map_err(|e| ProviderError::Transport(format!("{url}: {e}")))?;
            let status = resp.status().as_u16();
            if status == 429 || status >= 500 {
                return Err(ProviderError::Unavailable(status));
            }
            if !(200..300).contains(&status) {
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(ProviderError::Protocol(format!(
                    "{url}: status {status}: {text}"
                )));
            }
            resp.body_mut()
                .read_json::<Resp>()
                .map_err(|e| ProviderError::Protocol(format!("{url}: {e}")))
        })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Embeddings from `POST /embed`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: HttpClient,
    model_tag: String,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(client: HttpClient, model_tag: impl Into<String>, dimension: usize) -> Self {
        HttpEmbedder {
            client,
            model_tag: model_tag.into(),
            dimension,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn kind(&self) -> ProviderKind {
        ProviderKind::HttpService
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self.client.post_json(
            "/embed",
            &EmbedRequest {
                model: &self.model_tag,
                texts,
            },
        )?;
        if resp.vectors.len() != texts.len() {
            return Err(ProviderError::Protocol(format!(
                "/embed returned {} vectors for {} texts",
                resp.vectors.len(),
                texts.len()
            )));
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(ProviderError::Protocol(format!(
                        "/embed returned dimension {} (expected {})",
                        v.len(),
                        self.dimension
                    )));
                }
                EmbeddingVector::new(v).map_err(|e| ProviderError::Protocol(e.to_string()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct NliPair<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct NliRequest<'a> {
    model: &'a str,
    pairs: Vec<NliPair<'a>>,
}

#[derive(Deserialize)]
struct NliResponse {
    probs: Vec<NliProbs>,
}

/// Entailment/neutral/contradiction probabilities from `POST /nli`.
#[derive(Debug, Clone)]
pub struct HttpNli {
    client: HttpClient,
    model_tag: String,
}

impl HttpNli {
    pub fn new(client: HttpClient, model_tag: impl Into<String>) -> Self {
        HttpNli {
            client,
            model_tag: model_tag.into(),
        }
    }
}

impl NliProvider for HttpNli {
    fn kind(&self) -> ProviderKind {
        ProviderKind::HttpService
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }

    fn classify(&self, pairs: &[(&str, &str)]) -> Result<Vec<NliProbs>, ProviderError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let req = NliRequest {
            model: &self.model_tag,
            pairs: pairs
                .iter()
                .map(|&(premise, hypothesis)| NliPair {
                    premise,
                    hypothesis,
                })
                .collect(),
        };
        let resp: NliResponse = self.client.post_json("/nli", &req)?;
        if resp.probs.len() != pairs.len() {
            return Err(ProviderError::Protocol(format!(
                "/nli returned {} results for {} pairs",
                resp.probs.len(),
                pairs.len()
            )));
        }
        Ok(resp.probs)
    }
}

#[derive(Serialize)]
struct WordVecRequest<'a> {
    model: &'a str,
    tokens: &'a [&'a str],
}

#[derive(Deserialize)]
struct WordVecResponse {
    vectors: Vec<Option<Vec<f32>>>,
}

/// Word vectors from `POST /wordvec`; `null` marks an unknown token.
#[derive(Debug, Clone)]
pub struct HttpWordVectors {
    client: HttpClient,
    model_tag: String,
    dimension: usize,
}

impl HttpWordVectors {
    pub fn new(client: HttpClient, model_tag: impl Into<String>, dimension: usize) -> Self {
        HttpWordVectors {
            client,
            model_tag: model_tag.into(),
            dimension,
        }
    }
}

impl WordVectorProvider for HttpWordVectors {
    fn kind(&self) -> ProviderKind {
        ProviderKind::HttpService
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn lookup(&self, tokens: &[&str]) -> Result<Vec<Option<Vec<f32>>>, ProviderError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let resp: WordVecResponse = self.client.post_json(
            "/wordvec",
            &WordVecRequest {
                model: &self.model_tag,
                tokens,
            },
        )?;
        if resp.vectors.len() != tokens.len() {
            return Err(ProviderError::Protocol(format!(
                "/wordvec returned {} vectors for {} tokens",
                resp.vectors.len(),
                tokens.len()
            )));
        }
        Ok(resp.vectors)
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
    #[serde(default)]
    truncated: bool,
    #[serde(default)]
    finish_reason: Option<String>,
}

/// Text from `POST /generate` at temperature 0 and 256 tokens.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    client: HttpClient,
    model_tag: String,
}

impl HttpGenerator {
    pub fn new(client: HttpClient, model_tag: impl Into<String>) -> Self {
        HttpGenerator {
            client,
            model_tag: model_tag.into(),
        }
    }
}

impl GenerationProvider for HttpGenerator {
    fn kind(&self) -> ProviderKind {
        ProviderKind::HttpService
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }

    fn generate(&self, prompt: &str) -> Result<Generation, ProviderError> {
        let resp: GenerateResponse = self.client.post_json(
            "/generate",
            &GenerateRequest {
                model: &self.model_tag,
                prompt,
                temperature: TEMPERATURE,
                max_tokens: MAX_TOKENS,
            },
        )?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Generation {
            truncated: resp.truncated || resp.finish_reason.as_deref() == Some("length"),
            text: resp.text,
            timestamp,
        })
    }
}
