//! The pipeline stages. Each reads its upstream artifacts from the output
//! directory, writes its own into `<output>/<stage>/` and records a
//! manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use contrarag_core::analysis::{export_analysis, joint_histogram, temporal_distribution};
use contrarag_core::contradiction::{score_pool, write_report_csv, ContradictionReport};
use contrarag_core::corpus::{load_corpus, save_corpus, Corpus, EvidencePool, QueryId};
use contrarag_core::embed::{embed_batch, EmbeddingProvider, FileEmbedder, VectorStore};
use contrarag_core::evaluation::{
    macro_average, metrics_table_header, score_answer, write_metrics_row, EvalError, MetricScores,
    WordVectorProvider,
};
use contrarag_core::rag::{
    read_records, replay_entries, run_experiment, write_records, GenerationProvider,
    QueryArtifacts, RetrievalCondition, PROMPT_VERSION,
};
use contrarag_core::ranking::{rank, write_score_rows, ScoredDocument, SCORE_TABLE_HEADER};
use contrarag_core::selection::select_balanced;
use contrarag_core::{Execution, ProviderError};
use contrarag_ingest::{Cache, EutilsClient, EutilsConfig, ExclusionList, ICiteClient, Ingestor};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::manifest::{config_hash, load_upstream, Manifest, StageRun};
use crate::providers::{self, Embedder, Nli};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Select,
    Embed,
    Rank,
    Contradict,
    Generate,
    Evaluate,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Select,
        Stage::Embed,
        Stage::Rank,
        Stage::Contradict,
        Stage::Generate,
        Stage::Evaluate,
        Stage::Analyze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Select => "select",
            Stage::Embed => "embed",
            Stage::Rank => "rank",
            Stage::Contradict => "contradict",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
            Stage::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const SELECTION_CSV: &str = "selection.csv";
pub const RETRIEVAL_STORE: &str = "retrieval";
pub const SCIENTIFIC_STORE: &str = "scientific";
pub const RANKINGS_CSV: &str = "rankings.csv";
pub const RANKINGS_JSON: &str = "rankings.json";
pub const REPORTS_JSONL: &str = "reports.jsonl";
pub const PAIRS_CSV: &str = "pairs.csv";
pub const SALIENCE_CSV: &str = "salience.csv";
pub const RECORDS_JSONL: &str = "run_records.jsonl";
pub const FAILED_JSONL: &str = "failed.jsonl";
pub const REPLAY_JSONL: &str = "replay.jsonl";
pub const SCORES_JSONL: &str = "scores.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";

#[derive(Debug, Clone, Default, Serialize)]
pub struct GenerateOptions {
    /// Overrides `run.conditions`.
    pub conditions: Option<Vec<RetrievalCondition>>,
    /// Restrict to these configured models; all when empty.
    pub models: Vec<String>,
    /// Keep earlier records and only run missing cells.
    pub resume: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnalyzeOptions {
    pub table3: bool,
    pub fig2: bool,
    pub png: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            table3: true,
            fig2: true,
            png: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    /// Configuration and inputs unchanged since the last run.
    Skipped,
}

pub struct Runner {
    pub cfg: PipelineConfig,
    pub exec: Execution,
    /// Re-run even when the manifest says the stage is current.
    pub force: bool,
    pub generate: GenerateOptions,
    pub analyze: AnalyzeOptions,
}

fn other(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Other(e.into())
}

fn write_json_lines<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item).map_err(other)?;
        buf.push(b'\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| other(anyhow::anyhow!("{}: {e}", path.display())))
        })
        .collect()
}

/// Word vectors that know no words; VSIM then stays empty.
struct NoWordVectors;

impl WordVectorProvider for NoWordVectors {
    fn kind(&self) -> contrarag_core::embed::ProviderKind {
        contrarag_core::embed::ProviderKind::FileBacked
    }

    fn dimension(&self) -> usize {
        1
    }

    fn lookup(&self, tokens: &[&str]) -> Result<Vec<Option<Vec<f32>>>, ProviderError> {
        Ok(vec![None; tokens.len()])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreLine {
    query_ref: QueryId,
    condition: RetrievalCondition,
    model_tag: String,
    scores: MetricScores,
}

impl Runner {
    pub fn new(cfg: PipelineConfig) -> Self {
        let exec = match cfg.run.execution {
            crate::config::ExecutionMode::Parallel => Execution::Parallel,
            crate::config::ExecutionMode::Sequential => Execution::Sequential,
        };
        Runner {
            cfg,
            exec,
            force: false,
            generate: GenerateOptions::default(),
            analyze: AnalyzeOptions::default(),
        }
    }

    pub fn output(&self) -> PathBuf {
        self.cfg.output_dir()
    }

    fn artifact(&self, stage: Stage, name: &str) -> PathBuf {
        self.output().join(stage.name()).join(name)
    }

    /// Stages `run` executes, in order.
    pub fn pipeline(&self) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|s| *s != Stage::Ingest || self.cfg.paths.corpus.is_none())
            .collect()
    }

    pub fn run_stage(&self, stage: Stage) -> Result<Outcome, CliError> {
        fs::create_dir_all(self.output())?;
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Select => self.select(),
            Stage::Embed => self.embed(),
            Stage::Rank => self.rank(),
            Stage::Contradict => self.contradict(),
            Stage::Generate => self.generate(),
            Stage::Evaluate => self.evaluate(),
            Stage::Analyze => self.analyze(),
        }
    }

    fn begin(
        &self,
        stage: Stage,
        config: &impl Serialize,
        upstream: &[&Manifest],
        external: &[PathBuf],
    ) -> Result<Option<StageRun>, CliError> {
        let run = StageRun::new(
            &self.output(),
            stage.name(),
            config_hash(config),
            upstream,
            external,
        )?;
        if !self.force && run.up_to_date()? {
            log::info!("{stage}: up to date, skipped");
            return Ok(None);
        }
        log::info!("{stage}: running");
        Ok(Some(run))
    }

    fn selected_corpus(&self) -> Result<(Manifest, Corpus), CliError> {
        let m = load_upstream(&self.output(), Stage::Select.name())?;
        let corpus = load_corpus(self.artifact(Stage::Select, CORPUS_FILE))?;
        Ok((m, corpus))
    }

    fn ingest(&self) -> Result<Outcome, CliError> {
        let medicines = self
            .cfg
            .paths
            .medicines
            .as_ref()
            .map(|p| self.cfg.resolve(p))
            .ok_or_else(|| CliError::Config("ingest needs paths.medicines".into()))?;
        let exclusions_path = self
            .cfg
            .ingest
            .exclusions
            .as_ref()
            .map(|p| self.cfg.resolve(p));
        let mut external = vec![medicines.clone()];
        external.extend(exclusions_path.clone());
        let Some(run) = self.begin(Stage::Ingest, &self.cfg.ingest, &[], &external)? else {
            return Ok(Outcome::Skipped);
        };
        let list = contrarag_ingest::load_medicines(&medicines)?;
        let exclusions = match &exclusions_path {
            Some(p) => ExclusionList::load(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => ExclusionList::bundled(),
        };
        let i = &self.cfg.ingest;
        let defaults = EutilsConfig::default();
        let eutils = EutilsClient::new(EutilsConfig {
            base_url: i.eutils_url.clone(),
            retmax: i.retmax,
            batch_size: i.batch_size,
            concurrency: i.concurrency,
            requests_per_second: i
                .requests_per_second
                .unwrap_or(defaults.requests_per_second),
            backoff: self.cfg.providers.backoff(),
            ..defaults
        });
        let icite = ICiteClient::new(i.icite_url.clone(), self.cfg.providers.backoff());
        let cache = Cache::new(self.cfg.cache_dir().join("pubmed"));
        let ingestor = Ingestor {
            eutils: &eutils,
            icite: &icite,
            cache: Some(&cache),
            exclusions: &exclusions,
        };
        let (corpus, logs) = ingestor.ingest_corpus(&list)?;
        let dir = run.prepare()?;
        save_corpus(&corpus, dir.join(CORPUS_FILE))?;
        let mut log_json = serde_json::to_vec_pretty(&logs).map_err(other)?;
        log_json.push(b'\n');
        fs::write(dir.join("queries.json"), log_json)?;
        run.finish(&[CORPUS_FILE, "queries.json"])?;
        Ok(Outcome::Ran)
    }

    fn select(&self) -> Result<Outcome, CliError> {
        let (upstream, input) = match &self.cfg.paths.corpus {
            Some(p) => (None, self.cfg.resolve(p)),
            None => (
                Some(load_upstream(&self.output(), Stage::Ingest.name())?),
                self.artifact(Stage::Ingest, CORPUS_FILE),
            ),
        };
        let ups: Vec<&Manifest> = upstream.iter().collect();
        let external: Vec<PathBuf> = if upstream.is_none() {
            vec![input.clone()]
        } else {
            Vec::new()
        };
        let Some(run) = self.begin(Stage::Select, &"select_balanced", &ups, &external)? else {
            return Ok(Outcome::Skipped);
        };
        let mut corpus = load_corpus(&input)?;
        let ids: Vec<QueryId> = corpus.pools.keys().copied().collect();
        let selected: Vec<EvidencePool> =
            self.exec.map(&ids, |id| select_balanced(&corpus.pools[id]));
        for pool in selected {
            corpus.pools.insert(pool.query, pool);
        }
        corpus.validate()?;

        let dir = run.prepare()?;
        save_corpus(&corpus, dir.join(CORPUS_FILE))?;
        let mut csv = String::from("query_ref,order,pmid,year,citations\n");
        for (id, pool) in &corpus.pools {
            for (i, d) in pool.documents.iter().enumerate() {
                csv.push_str(&format!(
                    "{id},{},{},{},{}\n",
                    i + 1,
                    d.pmid(),
                    d.year(),
                    d.citations()
                ));
            }
        }
        fs::write(dir.join(SELECTION_CSV), csv)?;
        run.finish(&[CORPUS_FILE, SELECTION_CSV])?;
        Ok(Outcome::Ran)
    }

    fn embed_texts(
        &self,
        provider: &dyn EmbeddingProvider,
        texts: &BTreeSet<&str>,
        dir: &Path,
    ) -> Result<(), CliError> {
        let texts: Vec<&str> = texts.iter().copied().collect();
        let chunks: Vec<&[&str]> = texts.chunks(self.cfg.providers.embed_batch).collect();
        let vectors = self.exec.try_map(&chunks, |c| embed_batch(provider, c))?;
        let mut store = VectorStore::new(provider.model_tag(), provider.dimension());
        for (t, v) in texts.iter().zip(vectors.into_iter().flatten()) {
            store.insert(t, v.values().to_vec())?;
        }
        store.save(dir)?;
        Ok(())
    }

    fn embed(&self) -> Result<Outcome, CliError> {
        let (select, corpus) = self.selected_corpus()?;
        let p = &self.cfg.providers;
        let mut external = providers::embedder_inputs(&self.cfg, &p.retrieval);
        external.extend(providers::embedder_inputs(&self.cfg, &p.scientific));
        let Some(run) = self.begin(
            Stage::Embed,
            &(&p.retrieval, &p.scientific),
            &[&select],
            &external,
        )?
        else {
            return Ok(Outcome::Skipped);
        };
        let retrieval = Embedder::build(&self.cfg, &p.retrieval)?;
        let scientific = Embedder::build(&self.cfg, &p.scientific)?;

        let mut for_retrieval: BTreeSet<&str> = BTreeSet::new();
        let mut for_scientific: BTreeSet<&str> = BTreeSet::new();
        for q in &corpus.queries {
            if corpus.pool(q.id()).is_some_and(|pool| !pool.is_empty()) {
                for_retrieval.insert(&q.text);
            }
        }
        for pool in corpus.pools.values() {
            for d in &pool.documents {
                for_retrieval.insert(d.text());
                for_scientific.insert(d.text());
                for_scientific.extend(d.sentences().iter().map(String::as_str));
            }
        }

        let dir = run.prepare()?;
        let res = self
            .embed_texts(
                retrieval.provider.as_ref(),
                &for_retrieval,
                &dir.join(RETRIEVAL_STORE),
            )
            .and_then(|_| {
                self.embed_texts(
                    scientific.provider.as_ref(),
                    &for_scientific,
                    &dir.join(SCIENTIFIC_STORE),
                )
            });
        retrieval.persist()?;
        scientific.persist()?;
        res?;
        run.finish(&[RETRIEVAL_STORE, SCIENTIFIC_STORE])?;
        Ok(Outcome::Ran)
    }

    fn rank(&self) -> Result<Outcome, CliError> {
        let (select, corpus) = self.selected_corpus()?;
        let embed = load_upstream(&self.output(), Stage::Embed.name())?;
        let Some(run) = self.begin(Stage::Rank, &self.cfg.ranking, &[&select, &embed], &[])? else {
            return Ok(Outcome::Skipped);
        };
        let encoder = FileEmbedder::open(&self.artifact(Stage::Embed, RETRIEVAL_STORE))?;
        let queries: Vec<_> = corpus
            .queries
            .iter()
            .filter(|q| corpus.pool(q.id()).is_some_and(|p| !p.is_empty()))
            .collect();
        let ranked = self.exec.try_map(&queries, |q| {
            rank(
                q,
                corpus.pool(q.id()).expect("filtered"),
                &encoder,
                &self.cfg.ranking,
            )
            .map(|r| (q.id(), r))
        })?;
        let rankings: BTreeMap<QueryId, Vec<ScoredDocument>> = ranked.into_iter().collect();

        let dir = run.prepare()?;
        let mut csv = Vec::new();
        writeln!(csv, "{SCORE_TABLE_HEADER}")?;
        for (id, r) in &rankings {
            write_score_rows(&mut csv, &id.to_string(), r)?;
        }
        fs::write(dir.join(RANKINGS_CSV), csv)?;
        let mut json = serde_json::to_vec_pretty(&rankings).map_err(other)?;
        json.push(b'\n');
        fs::write(dir.join(RANKINGS_JSON), json)?;
        run.finish(&[RANKINGS_CSV, RANKINGS_JSON])?;
        Ok(Outcome::Ran)
    }

    fn contradict(&self) -> Result<Outcome, CliError> {
        let (select, corpus) = self.selected_corpus()?;
        let embed = load_upstream(&self.output(), Stage::Embed.name())?;
        let nli_spec = &self.cfg.providers.nli;
        let external = providers::nli_inputs(&self.cfg, nli_spec);
        let Some(run) = self.begin(
            Stage::Contradict,
            &(&self.cfg.contradiction, nli_spec),
            &[&select, &embed],
            &external,
        )?
        else {
            return Ok(Outcome::Skipped);
        };
        let encoder = FileEmbedder::open(&self.artifact(Stage::Embed, SCIENTIFIC_STORE))?;
        let nli = Nli::build(&self.cfg, nli_spec)?;
        let params = self.cfg.contradiction.params();
        let mut reports = Vec::new();
        let mut failure = None;
        for pool in corpus.pools.values().filter(|p| !p.is_empty()) {
            match score_pool(pool, &encoder, nli.provider.as_ref(), &params, self.exec) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        nli.persist()?;
        if let Some(e) = failure {
            return Err(e.into());
        }

        let dir = run.prepare()?;
        write_json_lines(&dir.join(REPORTS_JSONL), &reports)?;
        let mut pairs = String::from("query_ref,");
        pairs.push_str(contrarag_core::contradiction::REPORT_CSV_HEADER);
        pairs.push('\n');
        let mut salience = String::from("query_ref,pmid,year,salience\n");
        for r in &reports {
            let mut buf = Vec::new();
            write_report_csv(&mut buf, r)?;
            for line in String::from_utf8(buf).map_err(other)?.lines().skip(1) {
                pairs.push_str(&format!("{},{line}\n", r.pool_ref));
            }
            let pool = corpus.pool(r.pool_ref).expect("report from pool");
            for d in &pool.documents {
                if let Some(s) = r.salience.get(d.pmid()) {
                    salience.push_str(&format!("{},{},{},{s}\n", r.pool_ref, d.pmid(), d.year()));
                }
            }
        }
        fs::write(dir.join(PAIRS_CSV), pairs)?;
        fs::write(dir.join(SALIENCE_CSV), salience)?;
        run.finish(&[REPORTS_JSONL, PAIRS_CSV, SALIENCE_CSV])?;
        Ok(Outcome::Ran)
    }

    fn load_rankings(&self) -> Result<BTreeMap<QueryId, Vec<ScoredDocument>>, CliError> {
        let text = fs::read_to_string(self.artifact(Stage::Rank, RANKINGS_JSON))?;
        serde_json::from_str(&text).map_err(other)
    }

    fn load_reports(&self) -> Result<BTreeMap<QueryId, ContradictionReport>, CliError> {
        let reports: Vec<ContradictionReport> =
            read_json_lines(&self.artifact(Stage::Contradict, REPORTS_JSONL))?;
        Ok(reports.into_iter().map(|r| (r.pool_ref, r)).collect())
    }

    fn generate(&self) -> Result<Outcome, CliError> {
        let (select, corpus) = self.selected_corpus()?;
        let ranked = load_upstream(&self.output(), Stage::Rank.name())?;
        let contradict = load_upstream(&self.output(), Stage::Contradict.name())?;
        let opts = &self.generate;
        let specs: Vec<_> = self
            .cfg
            .providers
            .generators
            .iter()
            .filter(|g| opts.models.is_empty() || opts.models.iter().any(|m| m == g.model()))
            .collect();
        if let Some(unknown) = opts
            .models
            .iter()
            .find(|m| !specs.iter().any(|g| g.model() == m.as_str()))
        {
            return Err(CliError::Config(format!(
                "model {unknown:?} is not configured under providers.generators"
            )));
        }
        if specs.is_empty() {
            return Err(CliError::Config("no generators configured".into()));
        }
        let conditions = opts
            .conditions
            .clone()
            .unwrap_or_else(|| self.cfg.run.conditions.clone());
        let external: Vec<PathBuf> = specs
            .iter()
            .flat_map(|g| providers::generator_inputs(&self.cfg, g))
            .collect();
        let config = (
            &specs,
            &conditions,
            self.cfg.ranking.k,
            PROMPT_VERSION,
            opts.resume,
        );
        let failed_path = self.artifact(Stage::Generate, FAILED_JSONL);
        let had_failures = fs::metadata(&failed_path).is_ok_and(|m| m.len() > 0);
        let run = StageRun::new(
            &self.output(),
            Stage::Generate.name(),
            config_hash(&config),
            &[&select, &ranked, &contradict],
            &external,
        )?;
        if !self.force && !had_failures && run.up_to_date()? {
            log::info!("generate: up to date, skipped");
            return Ok(Outcome::Skipped);
        }
        let generators: Vec<Arc<dyn GenerationProvider>> = specs
            .iter()
            .map(|g| providers::generator(&self.cfg, g))
            .collect::<Result<_, _>>()?;
        let rankings = self.load_rankings()?;
        let reports = self.load_reports()?;

        let records_path = self.artifact(Stage::Generate, RECORDS_JSONL);
        let existing = if opts.resume {
            read_records(&records_path)?
        } else {
            Vec::new()
        };
        let dir = if opts.resume {
            run.prepare_keep()?
        } else {
            run.prepare()?
        };
        let outcome = run_experiment(
            &corpus,
            &QueryArtifacts {
                rankings: &rankings,
                reports: &reports,
            },
            &conditions,
            self.cfg.ranking.k,
            &generators,
            existing,
            self.exec,
        )?;
        write_records(&dir.join(RECORDS_JSONL), &outcome.records)?;
        write_json_lines(&dir.join(FAILED_JSONL), &outcome.failed)?;
        // lets a live run be repeated offline with a replay generator
        write_json_lines(&dir.join(REPLAY_JSONL), &replay_entries(&outcome.records))?;
        log::info!(
            "generate: {} new records, {} total, {} failed",
            outcome.new_records,
            outcome.records.len(),
            outcome.failed.len()
        );
        run.finish(&[RECORDS_JSONL, FAILED_JSONL, REPLAY_JSONL])?;
        if let Some(first) = outcome.failed.first() {
            return Err(CliError::Provider(format!(
                "{} generation cells failed (first: {} {} {}: {}); see {}; re-run with --resume",
                outcome.failed.len(),
                first.query_ref,
                first.condition,
                first.model_tag,
                first.error,
                failed_path.display()
            )));
        }
        Ok(Outcome::Ran)
    }

    fn evaluate(&self) -> Result<Outcome, CliError> {
        let (select, corpus) = self.selected_corpus()?;
        let generate = load_upstream(&self.output(), Stage::Generate.name())?;
        let p = &self.cfg.providers;
        let mut external = providers::embedder_inputs(&self.cfg, &p.evaluation);
        if let Some(w) = &p.wordvec {
            external.extend(providers::wordvec_inputs(&self.cfg, w));
        }
        let Some(run) = self.begin(
            Stage::Evaluate,
            &(&p.evaluation, &p.wordvec),
            &[&select, &generate],
            &external,
        )?
        else {
            return Ok(Outcome::Skipped);
        };
        let encoder = Embedder::build(&self.cfg, &p.evaluation)?;
        let words: Arc<dyn WordVectorProvider> = match &p.wordvec {
            Some(spec) => providers::word_vectors(&self.cfg, spec)?,
            None => Arc::new(NoWordVectors),
        };
        let records = read_records(&self.artifact(Stage::Generate, RECORDS_JSONL))?;
        let scorable: Vec<_> = records
            .iter()
            .filter_map(|r| {
                corpus
                    .query(r.query_ref)
                    .filter(|q| q.has_reference())
                    .map(|q| (r, q))
            })
            .collect();
        let scored = self.exec.try_map(&scorable, |(r, q)| {
            match score_answer(
                &q.reference_answer,
                &r.answer,
                encoder.provider.as_ref(),
                words.as_ref(),
            ) {
                Ok(s) => Ok(Some(ScoreLine {
                    query_ref: r.query_ref,
                    condition: r.condition,
                    model_tag: r.model_tag.clone(),
                    scores: s,
                })),
                Err(EvalError::EmptyText) => {
                    log::warn!(
                        "{} {} {}: empty answer, not scored",
                        r.query_ref,
                        r.condition,
                        r.model_tag
                    );
                    Ok(None)
                }
                Err(EvalError::Provider(e)) => Err(CliError::from(e)),
                Err(e) => Err(other(e)),
            }
        });
        encoder.persist()?;
        let lines: Vec<ScoreLine> = scored?.into_iter().flatten().collect();

        let mut csv = Vec::new();
        writeln!(csv, "{}", metrics_table_header())?;
        let mut models: Vec<&str> = p.generators.iter().map(|g| g.model()).collect();
        for l in &lines {
            if !models.contains(&l.model_tag.as_str()) {
                models.push(&l.model_tag);
            }
        }
        for model in models {
            for cond in RetrievalCondition::ALL {
                let cell: Vec<(u32, MetricScores)> = lines
                    .iter()
                    .filter(|l| l.model_tag == model && l.condition == cond)
                    .map(|l| (l.query_ref.medicine_id, l.scores))
                    .collect();
                if !cell.is_empty() {
                    write_metrics_row(&mut csv, model, cond.key(), &macro_average(&cell))?;
                }
            }
        }
        let dir = run.prepare()?;
        write_json_lines(&dir.join(SCORES_JSONL), &lines)?;
        fs::write(dir.join(METRICS_CSV), csv)?;
        run.finish(&[SCORES_JSONL, METRICS_CSV])?;
        Ok(Outcome::Ran)
    }

    fn analyze(&self) -> Result<Outcome, CliError> {
        let (select, corpus) = self.selected_corpus()?;
        let ranked = load_upstream(&self.output(), Stage::Rank.name())?;
        let contradict = load_upstream(&self.output(), Stage::Contradict.name())?;
        let mut opts = self.analyze;
        if !opts.table3 && !opts.fig2 {
            opts.table3 = true;
            opts.fig2 = true;
        }
        let Some(run) = self.begin(Stage::Analyze, &opts, &[&select, &ranked, &contradict], &[])?
        else {
            return Ok(Outcome::Skipped);
        };
        let rankings = self.load_rankings()?;
        let reports = self.load_reports()?;
        let mut joint = Vec::new();
        let mut temporal = Vec::new();
        for (id, report) in &reports {
            let scores: BTreeMap<&str, f64> = rankings
                .get(id)
                .map(|r| r.iter().map(|d| (d.pmid.as_str(), d.score)).collect())
                .unwrap_or_default();
            let pool = corpus
                .pool(*id)
                .ok_or_else(|| CliError::Upstream(format!("report for unknown pool {id}")))?;
            for d in &pool.documents {
                let Some(&s) = report.salience.get(d.pmid()) else {
                    continue;
                };
                if let Some(&score) = scores.get(d.pmid()) {
                    joint.push((score, s));
                }
                temporal.push((d.year(), s));
            }
        }
        let h = opts.table3.then(|| joint_histogram(&joint));
        let t = opts.fig2.then(|| temporal_distribution(&temporal));
        let dir = run.prepare()?;
        let written = export_analysis(&dir, h.as_ref(), t.as_ref(), opts.png)?;
        let names: Vec<String> = written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        run.finish(&refs)?;
        Ok(Outcome::Ran)
    }
}
