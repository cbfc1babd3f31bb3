//! Run-experiment cardinality, resumption and failure reporting.

use std::collections::BTreeMap;
use std::sync::Arc;

use contrarag_core::contradiction::{score_pool, ContradictionParams, LexicalNli};
use contrarag_core::corpus::{Corpus, Document, EvidencePool, Medicine, QueryInstance, QuerySlot};
use contrarag_core::embed::HashingEmbedder;
use contrarag_core::rag::{
    build_context, build_prompt, read_records, run_experiment, write_records, GenerationProvider,
    QueryArtifacts, ReplayGenerator, RetrievalCondition,
};
use contrarag_core::ranking::{rank, RankingParams};
use contrarag_core::selection::select_balanced;
use contrarag_core::Execution;

fn corpus() -> Corpus {
    let medicines = vec![
        Medicine {
            id: 1,
            name: "ABACAVIR".into(),
        },
        Medicine {
            id: 2,
            name: "ZIDOVUDINE".into(),
        },
    ];
    let queries: Vec<QueryInstance> = medicines
        .iter()
        .flat_map(|m| {
            QuerySlot::ALL
                .iter()
                .map(move |&s| QueryInstance::standard(m, s, "Take as directed.".into()))
        })
        .collect();
    let mut pools = BTreeMap::new();
    for (qi, q) in queries.iter().enumerate() {
        let docs = (0..4)
            .map(|d| {
                let text = format!(
                    "Study {qi} reports the drug is {}effective. Adverse events were rare in trial {d}.",
                    if d % 2 == 0 { "" } else { "not " }
                );
                Document::new(format!("{}", qi * 10 + d + 1), 2000 + d as i32 * 5, d as u64, text).unwrap()
            })
            .collect();
        let raw = EvidencePool::raw(q.id(), docs).unwrap();
        pools.insert(q.id(), select_balanced(&raw));
    }
    Corpus {
        medicines,
        queries,
        pools,
    }
}

struct Setup {
    corpus: Corpus,
    rankings:
        BTreeMap<contrarag_core::corpus::QueryId, Vec<contrarag_core::ranking::ScoredDocument>>,
    reports: BTreeMap<
        contrarag_core::corpus::QueryId,
        contrarag_core::contradiction::ContradictionReport,
    >,
}

fn setup() -> Setup {
    let corpus = corpus();
    let enc = HashingEmbedder::new("h", 64);
    let nli = LexicalNli::new("lex");
    let mut rankings = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for q in &corpus.queries {
        let pool = corpus.pool(q.id()).unwrap();
        rankings.insert(
            q.id(),
            rank(q, pool, &enc, &RankingParams::default()).unwrap(),
        );
        reports.insert(
            q.id(),
            score_pool(
                pool,
                &enc,
                &nli,
                &ContradictionParams::default(),
                Execution::Sequential,
            )
            .unwrap(),
        );
    }
    Setup {
        corpus,
        rankings,
        reports,
    }
}

fn replay_all(s: &Setup) -> ReplayGenerator {
    let mut r = ReplayGenerator::new("model-a");
    for q in &s.corpus.queries {
        let pool = s.corpus.pool(q.id()).unwrap();
        for c in RetrievalCondition::ALL {
            let ctx =
                build_context(pool, &s.rankings[&q.id()], s.reports.get(&q.id()), c, 5).unwrap();
            let prompt = build_prompt(q, &ctx).unwrap();
            r.record(&prompt, format!("Answer for {} under {c}.", q.id()), 1);
        }
    }
    r
}

#[test]
fn one_record_per_cell_and_resumable() {
    let s = setup();
    let gens: Vec<Arc<dyn GenerationProvider>> = vec![Arc::new(replay_all(&s))];
    let artifacts = QueryArtifacts {
        rankings: &s.rankings,
        reports: &s.reports,
    };
    let out = run_experiment(
        &s.corpus,
        &artifacts,
        &RetrievalCondition::ALL,
        5,
        &gens,
        Vec::new(),
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(out.records.len(), 36);
    assert_eq!(out.new_records, 36);
    assert!(out.failed.is_empty());
    for r in &out.records {
        let pool = s.corpus.pool(r.query_ref).unwrap();
        assert_eq!(r.context_pmids.len(), 4);
        assert!(r.context_pmids.iter().all(|p| pool.get(p).is_some()));
    }
    let keys: Vec<_> = out.records.iter().map(|r| r.sort_key()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let again = run_experiment(
        &s.corpus,
        &artifacts,
        &RetrievalCondition::ALL,
        5,
        &gens,
        out.records.clone(),
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(again.new_records, 0);
    assert_eq!(again.records, out.records);

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    write_records(&a, &out.records).unwrap();
    let seq = run_experiment(
        &s.corpus,
        &artifacts,
        &RetrievalCondition::ALL,
        5,
        &gens,
        Vec::new(),
        Execution::Sequential,
    )
    .unwrap();
    write_records(&b, &seq.records).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_records(&a).unwrap(), out.records);
}

#[test]
fn missing_generations_become_failed_cells() {
    let s = setup();
    let gens: Vec<Arc<dyn GenerationProvider>> = vec![
        Arc::new(replay_all(&s)),
        Arc::new(ReplayGenerator::new("empty")),
    ];
    let artifacts = QueryArtifacts {
        rankings: &s.rankings,
        reports: &s.reports,
    };
    let out = run_experiment(
        &s.corpus,
        &artifacts,
        &[RetrievalCondition::MostSimilar],
        5,
        &gens,
        Vec::new(),
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(out.failed.len(), 12);
    assert!(out.failed.iter().all(|f| f.model_tag == "empty"));
    assert_eq!(out.new_records, 12);
}
