//! E-utilities and iCite HTTP clients.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use contrarag_core::retry::{Backoff, Transient};
use rayon::prelude::*;
use thiserror::Error;

use crate::cache::Cache;
use crate::parse::{parse_cached_article, parse_efetch, parse_esearch, FetchedArticle};
use crate::query::QueryFormulation;

pub const DEFAULT_EUTILS_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
pub const DEFAULT_ICITE_URL: &str = "https://icite.od.nih.gov";
/// Environment variable holding the NCBI API key.
pub const API_KEY_ENV: &str = "NCBI_API_KEY";
/// Largest efetch request.
pub const MAX_BATCH: usize = 300;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{url}: transport error: {message}")]
    Transport { url: String, message: String },
    #[error("{url}: HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("malformed esearch response: {0}")]
    Esearch(String),
    #[error("malformed efetch response for batch {}..: {message}", batch.first().map(String::as_str).unwrap_or(""))]
    Efetch { batch: Vec<String>, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Transient for IngestError {
    fn is_transient(&self) -> bool {
        match self {
            IngestError::Transport { .. } => true,
            IngestError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Minimum spacing between request starts, shared by all threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(per_second: f64) -> Self {
        let interval = if per_second > 0.0 {
            Duration::from_secs_f64(1.0 / per_second)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

#[derive(Debug, Clone)]
pub struct EutilsConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    /// Identifies the client to NCBI.
    pub tool: String,
    pub email: Option<String>,
    pub retmax: usize,
    pub batch_size: usize,
    /// Requests in flight at once.
    pub concurrency: usize,
    /// Requests per second; NCBI allows 3 without a key and 10 with one.
    pub requests_per_second: f64,
    pub backoff: Backoff,
}

impl Default for EutilsConfig {
    fn default() -> Self {
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        EutilsConfig {
            base_url: DEFAULT_EUTILS_URL.into(),
            requests_per_second: if api_key.is_some() { 10.0 } else { 3.0 },
            api_key,
            tool: "contrarag".into(),
            email: None,
            retmax: 9999,
            batch_size: MAX_BATCH,
            concurrency: 3,
            backoff: Backoff::default(),
        }
    }
}

pub struct EutilsClient {
    agent: ureq::Agent,
    config: EutilsConfig,
    limiter: RateLimiter,
    pool: rayon::ThreadPool,
    efetch_calls: AtomicUsize,
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

fn send(
    url: &str,
    req: impl FnOnce() -> Result<ureq::http::Response<ureq::Body>, ureq::Error>,
) -> Result<String, IngestError> {
    let mut resp = req().map_err(|e| IngestError::Transport {
        url: url.to_string(),
        message: e.to_string(),
    })?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(IngestError::Status {
            url: url.to_string(),
            status,
        });
    }
    resp.body_mut()
        .with_config()
        .limit(256 * 1024 * 1024)
        .read_to_string()
        .map_err(|e| IngestError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        })
}

impl EutilsClient {
    pub fn new(mut config: EutilsConfig) -> Self {
        config.batch_size = config.batch_size.clamp(1, MAX_BATCH);
        config.base_url = config.base_url.trim_end_matches('/').to_string();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.concurrency.max(1))
            .build()
            .expect("thread pool");
        EutilsClient {
            agent: agent(),
            limiter: RateLimiter::new(config.requests_per_second),
            config,
            pool,
            efetch_calls: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &EutilsConfig {
        &self.config
    }

    /// efetch requests issued so far.
    pub fn efetch_calls(&self) -> usize {
        self.efetch_calls.load(Ordering::SeqCst)
    }

    fn common(&self) -> Vec<(&'static str, String)> {
        let mut p = vec![
            ("db", "pubmed".to_string()),
            ("tool", self.config.tool.clone()),
        ];
        if let Some(k) = &self.config.api_key {
            p.push(("api_key", k.clone()));
        }
        if let Some(e) = &self.config.email {
            p.push(("email", e.clone()));
        }
        p
    }

    /// Run a search and return its pmids in response order.
    pub fn esearch(&self, formulation: &QueryFormulation) -> Result<Vec<String>, IngestError> {
        let url = format!("{}/esearch.fcgi", self.config.base_url);
        let mut params = self.common();
        params.push(("term", formulation.expression.clone()));
        params.push(("retmax", self.config.retmax.to_string()));
        params.push(("retmode", "xml".into()));
        let body = self.config.backoff.run(|_| {
            self.limiter.wait();
            send(&url, || {
                let mut req = self.agent.get(&url);
                for (k, v) in &params {
                    req = req.query(k, v);
                }
                req.call()
            })
        })?;
        parse_esearch(&body).map_err(IngestError::Esearch)
    }

    /// Fetch one batch of at most `batch_size` pmids.
    pub fn efetch_batch(&self, pmids: &[String]) -> Result<Vec<FetchedArticle>, IngestError> {
        assert!(
            pmids.len() <= self.config.batch_size,
            "efetch batch over the limit"
        );
        let url = format!("{}/efetch.fcgi", self.config.base_url);
        let mut params = self.common();
        params.push(("id", pmids.join(",")));
        params.push(("retmode", "xml".into()));
        let body = self.config.backoff.run(|_| {
            self.limiter.wait();
            self.efetch_calls.fetch_add(1, Ordering::SeqCst);
            send(&url, || {
                self.agent
                    .post(&url)
                    .send_form(params.iter().map(|(k, v)| (*k, v.as_str())))
            })
        })?;
        parse_efetch(&body).map_err(|message| IngestError::Efetch {
            batch: pmids.to_vec(),
            message,
        })
    }

    /// Fetch articles for `pmids`, serving what the cache holds and caching
    /// the rest. Output follows `pmids` order; ids PubMed did not return are
    /// absent.
    pub fn fetch_articles(
        &self,
        pmids: &[String],
        cache: Option<&Cache>,
    ) -> Result<Vec<FetchedArticle>, IngestError> {
        let mut found: BTreeMap<String, FetchedArticle> = BTreeMap::new();
        let mut missing = Vec::new();
        for p in pmids {
            match cache
                .and_then(|c| c.article(p))
                .map(|x| parse_cached_article(&x))
            {
                Some(Ok(a)) => {
                    found.insert(p.clone(), a);
                }
                Some(Err(e)) => {
                    log::warn!("ignoring unreadable cache entry for {p}: {e}");
                    missing.push(p.clone());
                }
                None => missing.push(p.clone()),
            }
        }
        let batches: Vec<&[String]> = missing.chunks(self.config.batch_size).collect();
        let fetched: Vec<Vec<FetchedArticle>> = self.pool.install(|| {
            batches
                .par_iter()
                .map(|b| self.efetch_batch(b))
                .collect::<Result<_, _>>()
        })?;
        for a in fetched.into_iter().flatten() {
            if let Some(c) = cache {
                c.store_article(&a.pmid, &a.xml)?;
            }
            found.insert(a.pmid.clone(), a);
        }
        Ok(pmids.iter().filter_map(|p| found.remove(p)).collect())
    }
}

/// Citation counts from the iCite `/api/pubs` endpoint.
pub struct ICiteClient {
    agent: ureq::Agent,
    base_url: String,
    backoff: Backoff,
}

impl ICiteClient {
    pub fn new(base_url: impl Into<String>, backoff: Backoff) -> Self {
        ICiteClient {
            agent: agent(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            backoff,
        }
    }

    fn fetch(&self, pmids: &[String]) -> Result<BTreeMap<String, u64>, IngestError> {
        let url = format!("{}/api/pubs", self.base_url);
        let ids = pmids.join(",");
        let body = self.backoff.run(|_| {
            send(&url, || {
                self.agent
                    .get(&url)
                    .query("pmids", &ids)
                    .query("format", "json")
                    .query("legacy", "false")
                    .call()
            })
        })?;
        let v: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| IngestError::Transport {
                url: url.clone(),
                message: format!("bad JSON: {e}"),
            })?;
        let mut out = BTreeMap::new();
        for rec in v
            .get("data")
            .and_then(|d| d.as_array())
            .into_iter()
            .flatten()
        {
            let pmid = match rec.get("pmid") {
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(serde_json::Value::String(s)) => s.clone(),
                _ => continue,
            };
            let count = rec
                .get("citation_count")
                .and_then(|c| c.as_u64())
                .unwrap_or(0);
            out.insert(pmid, count);
        }
        Ok(out)
    }

    /// Counts for every pmid. Lookups that fail, or pmids iCite does not
    /// know, count as zero and are not cached.
    pub fn citation_counts(
        &self,
        pmids: &[String],
        cache: Option<&Cache>,
    ) -> Result<BTreeMap<String, u64>, IngestError> {
        let mut out = BTreeMap::new();
        let mut missing = Vec::new();
        for p in pmids {
            match cache.and_then(|c| c.citations(p)) {
                Some(n) => {
                    out.insert(p.clone(), n);
                }
                None => missing.push(p.clone()),
            }
        }
        for batch in missing.chunks(MAX_BATCH) {
            match self.fetch(batch) {
                Ok(counts) => {
                    for p in batch {
                        match counts.get(p) {
                            Some(&n) => {
                                if let Some(c) = cache {
                                    c.store_citations(p, n)?;
                                }
                                out.insert(p.clone(), n);
                            }
                            None => {
                                out.insert(p.clone(), 0);
                            }
                        }
                    }
                }
                Err(e) => {
                    log::warn!("citation lookup failed, using 0: {e}");
                    for p in batch {
                        out.insert(p.clone(), 0);
                    }
                }
            }
        }
        Ok(out)
    }
}
