//! Regenerate the bundled fixture under `fixtures/`: a three-medicine
//! corpus, file-backed embedding/NLI stores produced by the offline
//! baselines, word vectors, and replayed answers for two extractive
//! "models".
//!
//!     cargo run -p contrarag-cli --example build_fixture [-- <dir>]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use contrarag_cli::config::{
    EmbedderSpec, GeneratorSpec, NliSpec, Paths, PipelineConfig, WordVectorSpec,
};
use contrarag_cli::{Runner, Stage};
use contrarag_core::contradiction::{ContradictionReport, LexicalNli, NliStore};
use contrarag_core::corpus::{
    load_corpus, save_corpus, Corpus, Document, EvidencePool, Medicine, QueryInstance, QuerySlot,
};
use contrarag_core::embed::{HashingEmbedder, VectorStore};
use contrarag_core::evaluation::{tokenize, FileWordVectors};
use contrarag_core::rag::{
    build_context, build_prompt, ReplayGenerator, RetrievalCondition, SENTINEL,
};
use contrarag_core::ranking::ScoredDocument;

const DIM: usize = 256;
const WORD_DIM: usize = 32;

const MEDICINES: [&str; 3] = ["ABACAVIR", "METFORMIN", "WARFARIN"];

const REFERENCES: [[&str; 6]; 3] = [
    [
        "Abacavir is used with other antiretroviral medicines to treat HIV infection in adults and children. It reduces the amount of virus in the blood and helps the immune system.",
        "Do not take abacavir if you carry the HLA-B*5701 gene or have had a hypersensitivity reaction to abacavir. Tell your doctor if you have liver disease or heart disease.",
        "Tell your doctor if you take methadone, riociguat or other medicines. Alcohol can increase the amount of abacavir in the blood.",
        "The usual adult dose is 600 mg daily, taken as one tablet once a day or 300 mg twice a day, with or without food.",
        "Keep the warning card with you. Stop taking abacavir and contact your doctor immediately if you develop fever, rash, nausea or shortness of breath.",
        "Common side effects include nausea, headache, tiredness, diarrhoea and loss of appetite. Hypersensitivity reactions can be serious.",
    ],
    [
        "Metformin is used to control blood glucose in adults and children with type 2 diabetes, especially when diet and exercise alone are not enough.",
        "Do not take metformin if you have severe kidney disease, liver disease or a condition that can cause lactic acidosis. Tell your doctor if you drink a lot of alcohol.",
        "Iodinated contrast agents, alcohol and some diuretics may interact with metformin. Your doctor may pause metformin before an x-ray with contrast.",
        "Start with 500 mg once or twice daily with meals. The dose may be increased slowly to a maximum of 3000 mg daily.",
        "Have your kidney function and vitamin B12 levels checked regularly. Stop taking metformin and see a doctor if you feel very weak or have trouble breathing.",
        "Common side effects include nausea, diarrhoea, stomach pain and a metallic taste. Lactic acidosis is rare but serious.",
    ],
    [
        "Warfarin is an anticoagulant used to prevent and treat blood clots in the veins, lungs and heart, including in people with atrial fibrillation.",
        "Do not take warfarin if you are pregnant, have bleeding problems or recent surgery. Tell your doctor about any history of stomach ulcers.",
        "Many medicines interact with warfarin, including aspirin, antibiotics and some herbal products. Large changes in vitamin K intake can change how warfarin works.",
        "The dose is adjusted for each person according to INR blood tests. Take warfarin at the same time each day.",
        "Have regular INR blood tests. Tell your doctor if you notice unusual bruising or bleeding.",
        "Bleeding is the most common side effect. Other effects include bruising, nausea and hair loss.",
    ],
];

/// (medicine index, slot index, pmid, year, citations, abstract)
const DOCUMENTS: &[(usize, usize, &str, i32, u64, &str)] = &[
    (0, 0, "11000001", 1999, 120, "Abacavir is a nucleoside reverse transcriptase inhibitor used to treat HIV infection. Combination therapy with abacavir reduced plasma HIV RNA in adults. Abacavir improved CD4 cell counts over 48 weeks."),
    (0, 0, "11000002", 2006, 85, "Abacavir with lamivudine is an effective once daily regimen for HIV infection. Viral suppression was maintained in most patients at 96 weeks."),
    (0, 0, "11000003", 2014, 40, "Abacavir is used in children with HIV infection. Once daily abacavir was as effective as twice daily dosing in children."),
    (0, 0, "11000004", 2021, 5, "Abacavir did not improve CD4 cell counts over 48 weeks. Dolutegravir based regimens are now preferred for most adults with HIV infection."),
    (0, 1, "11000011", 1998, 60, "Hypersensitivity to abacavir occurs in about five percent of patients. Reactions usually appear within the first six weeks of treatment."),
    (0, 1, "11000012", 2008, 200, "Screening for HLA-B*5701 before starting abacavir reduced hypersensitivity reactions. Patients who carry HLA-B*5701 should not receive abacavir."),
    (0, 1, "11000013", 2016, 33, "Abacavir use was associated with an increased risk of myocardial infarction. Patients with cardiovascular risk factors need careful assessment before starting abacavir."),
    (0, 1, "11000014", 2020, 12, "Abacavir use was not associated with an increased risk of myocardial infarction. Screening for HLA-B*5701 is recommended before treatment."),
    (0, 2, "11000021", 2002, 25, "Ethanol increased abacavir exposure by about forty percent. Methadone clearance was changed when given with abacavir."),
    (0, 2, "11000022", 2018, 9, "Methadone clearance was not changed when given with abacavir. Riociguat exposure increased with abacavir and lamivudine."),
    (0, 3, "11000031", 2010, 18, "Once daily abacavir 600 mg was as effective as 300 mg twice daily. Abacavir can be taken with or without food."),
    (0, 4, "11000041", 2004, 30, "Patients should carry a warning card during abacavir treatment. Fever, rash and gastrointestinal symptoms may signal hypersensitivity."),
    (0, 4, "11000042", 2012, 22, "Abacavir should never be restarted after a suspected hypersensitivity reaction. Fever, rash and gastrointestinal symptoms may signal hypersensitivity."),
    (0, 5, "11000051", 1997, 70, "Nausea, headache and fatigue were the most common adverse events with abacavir. Most adverse events were mild."),
    (0, 5, "11000052", 2005, 45, "Hypersensitivity reactions were the main reason for stopping abacavir. Nausea and diarrhoea were also reported."),
    (0, 5, "11000053", 2013, 45, "Abacavir increased the risk of cardiovascular events in a large cohort. Lipid levels did not change during treatment."),
    (0, 5, "11000054", 2023, 3, "Abacavir did not increase the risk of cardiovascular events in a large cohort. Headache was the most common adverse event."),
    (1, 0, "12000001", 1988, 150, "Metformin lowers fasting blood glucose in patients with type 2 diabetes. Metformin does not cause weight gain."),
    (1, 0, "12000002", 1998, 300, "Intensive glucose control with metformin reduced diabetes related deaths in overweight patients. Metformin reduced the risk of myocardial infarction."),
    (1, 0, "12000003", 2019, 14, "Metformin is recommended as first line therapy for type 2 diabetes. Metformin never reduced the risk of myocardial infarction."),
    (1, 1, "12000011", 1995, 80, "Metformin should be avoided in patients with severe kidney disease. Lactic acidosis is rare with metformin."),
    (1, 1, "12000012", 2016, 55, "Metformin can be used safely in patients with moderate kidney disease. Lactic acidosis is not rare with metformin."),
    (1, 2, "12000021", 2000, 20, "Iodinated contrast may increase the risk of lactic acidosis with metformin. Metformin should be withheld before contrast imaging."),
    (1, 2, "12000022", 2014, 28, "Iodinated contrast did not increase the risk of lactic acidosis with metformin. Withholding metformin before contrast imaging may be unnecessary."),
    (1, 2, "12000023", 2022, 2, "Cimetidine increased metformin concentrations in healthy volunteers. Dolutegravir also raised metformin exposure."),
    (1, 3, "12000031", 1992, 40, "Metformin doses above 2000 mg daily gave little additional benefit. Taking metformin with meals reduced stomach upset."),
    (1, 3, "12000032", 2011, 36, "Extended release metformin once daily was as effective as immediate release twice daily. Gastrointestinal side effects were fewer with extended release metformin."),
    (1, 4, "12000041", 2009, 65, "Long term metformin use was associated with vitamin B12 deficiency. Vitamin B12 levels should be checked regularly during metformin treatment."),
    (1, 5, "12000051", 1990, 90, "Diarrhoea and nausea were the most common side effects of metformin. Symptoms often improved after the first weeks."),
    (1, 5, "12000052", 2007, 50, "Metformin increased the risk of lactic acidosis in a population study. A metallic taste was reported by some patients."),
    (1, 5, "12000053", 2017, 20, "Metformin did not increase the risk of lactic acidosis in a population study. Diarrhoea was the most common side effect."),
    (2, 0, "13000001", 1986, 110, "Warfarin prevents stroke in patients with atrial fibrillation. Warfarin reduced the risk of stroke by about two thirds."),
    (2, 0, "13000002", 2015, 75, "Direct oral anticoagulants are alternatives to warfarin for atrial fibrillation. Warfarin remains the treatment of choice for mechanical heart valves."),
    (2, 1, "13000011", 1993, 48, "Warfarin crosses the placenta and can harm the unborn baby. Warfarin should be avoided in pregnancy."),
    (2, 1, "13000012", 2009, 27, "A history of peptic ulcer increased the risk of bleeding with warfarin. Warfarin should be avoided in pregnancy."),
    (2, 2, "13000021", 1996, 58, "Aspirin increased the risk of bleeding with warfarin. Many antibiotics raise the INR in patients taking warfarin."),
    (2, 2, "13000022", 2006, 41, "Cranberry juice increased the INR in patients taking warfarin. Vitamin K intake changes the response to warfarin."),
    (2, 2, "13000023", 2020, 7, "Cranberry juice did not increase the INR in patients taking warfarin. Aspirin increased the risk of bleeding with warfarin."),
    (2, 3, "13000031", 2001, 66, "Genotype guided warfarin dosing improved time in therapeutic range. Starting doses should be lower in older patients."),
    (2, 3, "13000032", 2013, 80, "Genotype guided warfarin dosing did not improve time in therapeutic range. Clinical dosing algorithms performed as well as genotype guided dosing."),
    (2, 4, "13000041", 2003, 30, "Patient self testing of INR reduced thromboembolic events. Regular INR monitoring is essential during warfarin treatment."),
    (2, 5, "13000051", 1989, 95, "Major bleeding occurred in about three percent of patients each year on warfarin. Bleeding risk was highest in the first month."),
    (2, 5, "13000052", 2010, 35, "Warfarin use was associated with hair loss in a small number of patients. Skin necrosis is a rare complication of warfarin."),
    (2, 5, "13000053", 2024, 1, "Bleeding risk was not highest in the first month in a recent cohort. Major bleeding occurred in about three percent of patients each year on warfarin."),
];

fn corpus() -> Corpus {
    let mut corpus = Corpus::default();
    for (mi, name) in MEDICINES.iter().enumerate() {
        let medicine = Medicine {
            id: mi as u32 + 1,
            name: name.to_string(),
        };
        for (si, slot) in QuerySlot::ALL.into_iter().enumerate() {
            let query = QueryInstance::standard(&medicine, slot, REFERENCES[mi][si].to_string());
            let docs = DOCUMENTS
                .iter()
                .filter(|d| d.0 == mi && d.1 == si)
                .map(|&(_, _, pmid, year, cites, text)| {
                    Document::new(pmid, year, cites, text).expect("valid fixture document")
                })
                .collect();
            corpus.pools.insert(
                query.id(),
                EvidencePool::raw(query.id(), docs).expect("valid pool"),
            );
            corpus.queries.push(query);
        }
        corpus.medicines.push(medicine);
    }
    corpus.validate().expect("valid corpus");
    corpus
}

fn store(tag: &str, texts: &BTreeSet<&str>, dir: &Path) {
    let enc = HashingEmbedder::new(tag, DIM);
    let mut s = VectorStore::new(tag, DIM);
    for t in texts {
        s.insert(t, enc.encode(t).expect("non-empty text").values().to_vec())
            .unwrap();
    }
    s.save(dir).unwrap();
}

fn config() -> PipelineConfig {
    let file = |p: &str| PathBuf::from(p);
    let mut cfg = PipelineConfig {
        paths: Paths {
            corpus: Some(file("corpus.jsonl")),
            medicines: Some(file("medicines.json")),
            cache: file("cache"),
            output: file("out"),
        },
        ..PipelineConfig::default()
    };
    let p = &mut cfg.providers;
    p.retrieval = EmbedderSpec::File {
        path: file("providers/retrieval"),
    };
    p.scientific = EmbedderSpec::File {
        path: file("providers/scientific"),
    };
    p.nli = NliSpec::File {
        path: file("providers/nli"),
    };
    p.evaluation = EmbedderSpec::File {
        path: file("providers/evaluation"),
    };
    p.wordvec = Some(WordVectorSpec::File {
        path: file("providers/wordvec.txt"),
    });
    p.generators = ["extractive-lead", "extractive-overlap"]
        .into_iter()
        .map(|m| GeneratorSpec::Replay {
            model: m.into(),
            path: file("providers/replay.jsonl"),
        })
        .collect();
    p.retries = 0;
    p.retry_base_ms = 10;
    cfg
}

fn lead_answer(context: &[&Document]) -> String {
    context[0].sentences()[0].clone()
}

/// The context sentence sharing the most words with the question, or the
/// sentinel when none shares a content word.
fn overlap_answer(question: &str, medicine: &str, context: &[&Document]) -> String {
    let q: BTreeSet<String> = tokenize(question)
        .into_iter()
        .filter(|t| t.len() > 3 && *t != medicine.to_lowercase())
        .collect();
    let best = context
        .iter()
        .flat_map(|d| d.sentences())
        .map(|s| {
            let hits = tokenize(s).iter().filter(|t| q.contains(*t)).count();
            (hits, s)
        })
        .filter(|(hits, _)| *hits > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)));
    match best {
        Some((_, s)) => s.clone(),
        None => SENTINEL.to_string(),
    }
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    let providers = dir.join("providers");
    if providers.exists() {
        fs::remove_dir_all(&providers).unwrap();
    }
    fs::create_dir_all(&providers).unwrap();

    let corpus = corpus();
    save_corpus(&corpus, dir.join("corpus.jsonl")).unwrap();
    let medicines: Vec<serde_json::Value> = corpus
        .medicines
        .iter()
        .map(|m| {
            let refs: BTreeMap<&str, &str> = corpus
                .queries
                .iter()
                .filter(|q| q.medicine_id == m.id)
                .map(|q| (q.slot.key(), q.reference_answer.as_str()))
                .collect();
            serde_json::json!({ "id": m.id, "name": m.name, "references": refs })
        })
        .collect();
    fs::write(
        dir.join("medicines.json"),
        serde_json::to_string_pretty(&medicines).unwrap() + "\n",
    )
    .unwrap();

    let mut retrieval = BTreeSet::new();
    let mut scientific = BTreeSet::new();
    let mut nli = NliStore::new("lexical-nli");
    for q in &corpus.queries {
        retrieval.insert(q.text.as_str());
    }
    for pool in corpus.pools.values() {
        for d in &pool.documents {
            retrieval.insert(d.text());
            scientific.insert(d.text());
            scientific.extend(d.sentences().iter().map(String::as_str));
        }
        for a in &pool.documents {
            for b in pool.documents.iter().filter(|b| b.pmid() != a.pmid()) {
                for p in a.sentences() {
                    for h in b.sentences() {
                        nli.insert(p, h, LexicalNli::score(p, h));
                    }
                }
            }
        }
    }
    store(
        "hash-retrieval-256",
        &retrieval,
        &providers.join("retrieval"),
    );
    store(
        "hash-scientific-256",
        &scientific,
        &providers.join("scientific"),
    );
    nli.save(&providers.join("nli")).unwrap();

    let cfg = config();
    fs::write(
        dir.join("contrarag.toml"),
        format!("# Offline fixture; regenerate with `cargo run -p contrarag-cli --example build_fixture`.\n\n{}", cfg.render()),
    )
    .unwrap();

    // rankings and reports decide the contexts, so run the upstream stages
    // to learn which prompts the replay file must answer
    let work = tempfile::tempdir().unwrap();
    let mut staged = PipelineConfig::load(&dir.join("contrarag.toml")).unwrap();
    staged.paths.output = work.path().to_path_buf();
    let runner = Runner::new(staged);
    for stage in [Stage::Select, Stage::Embed, Stage::Rank, Stage::Contradict] {
        runner.run_stage(stage).unwrap();
    }
    let selected = load_corpus(work.path().join("select/corpus.jsonl")).unwrap();
    let rankings: BTreeMap<contrarag_core::corpus::QueryId, Vec<ScoredDocument>> =
        serde_json::from_str(&fs::read_to_string(work.path().join("rank/rankings.json")).unwrap())
            .unwrap();
    let reports: BTreeMap<_, ContradictionReport> =
        fs::read_to_string(work.path().join("contradict/reports.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<ContradictionReport>(l).unwrap())
            .map(|r| (r.pool_ref, r))
            .collect();

    let mut lead = ReplayGenerator::new("extractive-lead");
    let mut overlap = ReplayGenerator::new("extractive-overlap");
    let mut answers = BTreeSet::new();
    let mut clock = 1_700_000_000u64;
    for q in &selected.queries {
        let pool = selected.pool(q.id()).unwrap();
        let medicine = &selected.medicine(q.medicine_id).unwrap().name;
        for cond in RetrievalCondition::ALL {
            let ctx = build_context(
                pool,
                &rankings[&q.id()],
                reports.get(&q.id()),
                cond,
                cfg.ranking.k,
            )
            .unwrap();
            let prompt = build_prompt(q, &ctx).unwrap();
            let a = lead_answer(&ctx);
            let b = overlap_answer(&q.text, medicine, &ctx);
            clock += 60;
            lead.record(&prompt, a.clone(), clock);
            overlap.record(&prompt, b.clone(), clock + 1);
            answers.insert(a);
            answers.insert(b);
        }
    }
    let replay = providers.join("replay.jsonl");
    lead.append_to(&replay).unwrap();
    overlap.append_to(&replay).unwrap();

    let mut evaluation: BTreeSet<&str> = answers.iter().map(String::as_str).collect();
    evaluation.extend(selected.queries.iter().map(|q| q.reference_answer.as_str()));
    store(
        "hash-retrieval-256",
        &evaluation,
        &providers.join("evaluation"),
    );

    // word vectors for every token except a few, so the out-of-vocabulary
    // path stays exercised
    let words = HashingEmbedder::new("hash-words", WORD_DIM);
    let mut vocab = FileWordVectors::new(WORD_DIM);
    let tokens: BTreeSet<String> = evaluation.iter().flat_map(|t| tokenize(t)).collect();
    for t in tokens
        .iter()
        .filter(|t| !matches!(t.as_str(), "hla" | "b" | "5701" | "riociguat"))
    {
        vocab
            .insert(t.clone(), words.encode(t).unwrap().values().to_vec())
            .unwrap();
    }
    vocab.save(&providers.join("wordvec.txt")).unwrap();

    println!(
        "fixture written to {}: {} medicines, {} queries, {} documents, {} replay answers",
        dir.display(),
        corpus.medicines.len(),
        corpus.queries.len(),
        corpus.document_count(),
        lead.len() + overlap.len()
    );
}
