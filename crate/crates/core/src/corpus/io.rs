use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Corpus, CorpusError, Document, EvidencePool, Medicine, PoolStage, QueryId, QueryInstance,
    QuerySlot,
};

/// One line of a corpus file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Medicine {
        id: u32,
        name: String,
    },
    Query {
        medicine_id: u32,
        slot: QuerySlot,
        text: String,
        #[serde(default)]
        reference_answer: String,
    },
    Pool {
        query_ref: QueryId,
        stage: PoolStage,
    },
    Document {
        query_ref: QueryId,
        pmid: String,
        year: i32,
        citations: u64,
        text: String,
    },
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    read_corpus(File::open(path)?)
}

pub fn read_corpus(reader: impl Read) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    let mut stages: BTreeMap<QueryId, PoolStage> = BTreeMap::new();
    let mut documents: BTreeMap<QueryId, Vec<Document>> = BTreeMap::new();

    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            Record::Medicine { id, name } => corpus.medicines.push(Medicine { id, name }),
            Record::Query {
                medicine_id,
                slot,
                text,
                reference_answer,
            } => corpus.queries.push(QueryInstance {
                medicine_id,
                slot,
                text,
                reference_answer,
            }),
            Record::Pool { query_ref, stage } => {
                stages.insert(query_ref, stage);
                documents.entry(query_ref).or_default();
            }
            Record::Document {
                query_ref,
                pmid,
                year,
                citations,
                text,
            } => {
                let doc =
                    Document::new(pmid, year, citations, text).map_err(|e| CorpusError::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                documents.entry(query_ref).or_default().push(doc);
            }
        }
    }

    for (query, docs) in documents {
        let stage = stages.get(&query).copied().unwrap_or(PoolStage::Raw);
        corpus.pools.insert(
            query,
            EvidencePool {
                query,
                documents: docs,
                stage,
            },
        );
    }
    corpus.validate()?;
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_corpus(corpus, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_corpus(corpus: &Corpus, mut out: impl Write) -> Result<(), CorpusError> {
    let mut emit = |record: &Record| -> Result<(), CorpusError> {
        serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    for m in &corpus.medicines {
        emit(&Record::Medicine {
            id: m.id,
            name: m.name.clone(),
        })?;
    }
    for q in &corpus.queries {
        emit(&Record::Query {
            medicine_id: q.medicine_id,
            slot: q.slot,
            text: q.text.clone(),
            reference_answer: q.reference_answer.clone(),
        })?;
    }
    for (query, pool) in &corpus.pools {
        emit(&Record::Pool {
            query_ref: *query,
            stage: pool.stage,
        })?;
        for d in &pool.documents {
            emit(&Record::Document {
                query_ref: *query,
                pmid: d.pmid().to_string(),
                year: d.year(),
                citations: d.citations(),
                text: d.text().to_string(),
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Corpus {
        let medicine = Medicine {
            id: 1,
            name: "ABACAVIR".into(),
        };
        let queries: Vec<QueryInstance> = QuerySlot::ALL
            .into_iter()
            .map(|slot| QueryInstance::standard(&medicine, slot, String::new()))
            .collect();
        let q = queries[0].id();
        let docs = vec![
            Document::new("11", 2001, 4, "Abacavir treats HIV. It is well tolerated.").unwrap(),
            Document::new("12", 2005, 0, "Hypersensitivity occurs.").unwrap(),
            Document::new("13", 2010, 9, "Résumé: naïve patients — 5 µg/mL.").unwrap(),
            Document::new("14", 2020, 1, "Dose is 600 mg daily.").unwrap(),
        ];
        let mut pools = BTreeMap::new();
        pools.insert(q, EvidencePool::raw(q, docs).unwrap());
        Corpus {
            medicines: vec![medicine],
            queries,
            pools,
        }
    }

    fn to_string(c: &Corpus) -> String {
        let mut buf = Vec::new();
        write_corpus(c, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn fixture_counts_and_round_trip() {
        let c = fixture();
        let text = to_string(&c);
        let back = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(back.medicines.len(), 1);
        assert_eq!(back.queries.len(), 6);
        assert_eq!(back.document_count(), 4);
        assert_eq!(back, c);
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn unicode_text_is_preserved() {
        let back = read_corpus(to_string(&fixture()).as_bytes()).unwrap();
        let pool = back.pools.values().next().unwrap();
        assert_eq!(
            pool.get("13").unwrap().text(),
            "Résumé: naïve patients — 5 µg/mL."
        );
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = read_corpus(&b""[..]).unwrap();
        assert_eq!(c, Corpus::default());
        assert_eq!(to_string(&c), "");
    }

    #[test]
    fn missing_year_names_the_line() {
        let mut text = to_string(&fixture());
        text.push_str(
            r#"{"kind":"document","query_ref":"1/indications","pmid":"99","citations":0,"text":"x"}"#,
        );
        text.push('\n');
        let err = read_corpus(text.as_bytes()).unwrap_err();
        let line = text.lines().count();
        match err {
            CorpusError::Parse { line: l, message } => {
                assert_eq!(l, line);
                assert!(message.contains("year"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_pmid_is_integrity_error() {
        let mut text = to_string(&fixture());
        text.push_str(
            r#"{"kind":"document","query_ref":"1/indications","pmid":"11","year":2001,"citations":0,"text":"x"}"#,
        );
        assert!(matches!(
            read_corpus(text.as_bytes()),
            Err(CorpusError::Integrity(_))
        ));
    }

    #[test]
    fn query_for_unknown_medicine_is_rejected() {
        let text = r#"{"kind":"query","medicine_id":5,"slot":"dosage","text":"How do I use X?"}"#;
        assert!(matches!(
            read_corpus(text.as_bytes()),
            Err(CorpusError::Integrity(_))
        ));
    }

    #[test]
    fn field_order_is_canonical() {
        let text = to_string(&fixture());
        let first_doc = text.lines().find(|l| l.contains("\"document\"")).unwrap();
        assert!(first_doc.starts_with(
            r#"{"kind":"document","query_ref":"1/indications","pmid":"11","year":2001,"citations":4,"text":"#
        ));
    }
}
