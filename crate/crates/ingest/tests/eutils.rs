//! E-utilities and iCite clients against canned responses and a local mock
//! server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use contrarag_core::corpus::{Medicine, QueryInstance, QuerySlot};
use contrarag_core::retry::Backoff;
use contrarag_ingest::parse::{parse_efetch, parse_esearch};
use contrarag_ingest::{
    formulate_queries, Cache, EutilsClient, EutilsConfig, ExclusionList, ICiteClient, IngestError,
    Ingestor, Tier,
};

const ESEARCH_3: &str = include_str!("fixtures/esearch_3.xml");
const ESEARCH_0: &str = include_str!("fixtures/esearch_0.xml");
const EFETCH_2: &str = include_str!("fixtures/efetch_2.xml");
const EFETCH_MEDLINE: &str = include_str!("fixtures/efetch_medline_date.xml");

#[derive(Debug, Clone)]
struct Request {
    method: String,
    path: String,
    params: Vec<(String, String)>,
}

impl Request {
    fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn decode(s: &str) -> String {
    let s = s.replace('+', " ");
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            out.push(u8::from_str_radix(&s[i + 1..i + 3], 16).unwrap());
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).unwrap()
}

fn pairs(s: &str) -> Vec<(String, String)> {
    s.split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            (decode(k), decode(v))
        })
        .collect()
}

type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

struct Mock {
    url: String,
    requests: Arc<Mutex<Vec<Request>>>,
}

impl Mock {
    fn requests_to(&self, path: &str) -> Vec<Request> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.path == path)
            .cloned()
            .collect()
    }
}

fn serve(handler: Arc<Handler>) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let handler = handler.clone();
            let log = log.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or("").to_string();
                let target = parts.next().unwrap_or("/").to_string();
                let (path, query) = target.split_once('?').unwrap_or((&target, ""));
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let mut params = pairs(query);
                params.extend(pairs(&String::from_utf8_lossy(&body)));
                let req = Request {
                    method,
                    path: path.to_string(),
                    params,
                };
                log.lock().unwrap().push(req.clone());
                let (status, text) = handler(&req);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
            });
        }
    });
    Mock { url, requests }
}

fn quick() -> Backoff {
    Backoff {
        max_retries: 3,
        base_delay: Duration::from_millis(5),
    }
}

fn config(url: &str) -> EutilsConfig {
    EutilsConfig {
        base_url: url.to_string(),
        api_key: None,
        requests_per_second: 0.0,
        backoff: quick(),
        ..EutilsConfig::default()
    }
}

/// efetch XML with one abstract-bearing article per id.
fn articles_for(ids: &str) -> String {
    let mut xml = String::from("<?xml version=\"1.0\" ?>\n<PubmedArticleSet>\n");
    for id in ids.split(',') {
        xml.push_str(&format!(
            "<PubmedArticle><MedlineCitation><PMID Version=\"1\">{id}</PMID><Article><Journal><JournalIssue>\
             <PubDate><Year>2010</Year></PubDate></JournalIssue></Journal><Abstract><AbstractText>Abstract {id}.\
             </AbstractText></Abstract></Article></MedlineCitation></PubmedArticle>\n"
        ));
    }
    xml.push_str("</PubmedArticleSet>\n");
    xml
}

fn ids(range: std::ops::Range<u32>) -> Vec<String> {
    range.map(|i| (1_000_000 + i).to_string()).collect()
}

#[test]
fn canned_esearch_responses() {
    assert_eq!(
        parse_esearch(ESEARCH_3).unwrap(),
        ["31452104", "28870001", "9876543"]
    );
    assert!(parse_esearch(ESEARCH_0).unwrap().is_empty());
    assert!(parse_esearch("<html>busy</html>").is_err());
}

#[test]
fn canned_efetch_records() {
    let arts = parse_efetch(EFETCH_2).unwrap();
    assert_eq!(arts.len(), 2);
    assert_eq!(arts[0].pmid, "31452104");
    assert_eq!(arts[0].year, Some(2019));
    assert_eq!(
        arts[0].abstract_text.as_deref(),
        Some(
            "Abacavir is used with other antiretrovirals to treat HIV-1 infection. \
             Screening for HLA-B*5701 reduced hypersensitivity reactions."
        )
    );
    assert_eq!(arts[1].pmid, "28870001");
    assert_eq!(arts[1].abstract_text, None);

    let medline = parse_efetch(EFETCH_MEDLINE).unwrap();
    assert_eq!(medline[0].year, Some(1998));
}

#[test]
fn esearch_retries_rate_limits() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let mock = serve(Arc::new(move |_| {
        if c.fetch_add(1, Ordering::SeqCst) < 3 {
            (429, "Too Many Requests".into())
        } else {
            (200, ESEARCH_3.into())
        }
    }));
    let client = EutilsClient::new(config(&mock.url));
    let q = &formulate_queries(
        "ABACAVIR",
        "Why am I using ABACAVIR?",
        &["using".into(), "ABACAVIR".into()],
    )[1];
    let pmids = client.esearch(q).unwrap();
    assert_eq!(pmids, ["31452104", "28870001", "9876543"]);
    let reqs = mock.requests_to("/esearch.fcgi");
    assert_eq!(reqs.len(), 4);
    let r = &reqs[3];
    assert_eq!(r.method, "GET");
    assert_eq!(r.param("db"), Some("pubmed"));
    assert_eq!(r.param("retmode"), Some("xml"));
    assert_eq!(r.param("term"), Some(q.expression.as_str()));
}

#[test]
fn esearch_gives_up_after_retries() {
    let mock = serve(Arc::new(|_| (429, String::new())));
    let client = EutilsClient::new(config(&mock.url));
    let q = &formulate_queries("X", "How do I use X?", &[])[0];
    match client.esearch(q) {
        Err(IngestError::Status { status: 429, .. }) => {}
        other => panic!("expected rate-limit error, got {other:?}"),
    }
    assert_eq!(mock.requests_to("/esearch.fcgi").len(), 4);
}

#[test]
fn esearch_zero_hits_is_not_an_error() {
    let mock = serve(Arc::new(|_| (200, ESEARCH_0.into())));
    let client = EutilsClient::new(config(&mock.url));
    let q = &formulate_queries("X", "How do I use X?", &[])[0];
    assert!(client.esearch(q).unwrap().is_empty());
}

#[test]
fn efetch_batches_of_at_most_300() {
    let mock = serve(Arc::new(|r| (200, articles_for(r.param("id").unwrap()))));
    let client = EutilsClient::new(config(&mock.url));
    let pmids = ids(0..650);
    let arts = client.fetch_articles(&pmids, None).unwrap();
    assert_eq!(
        arts.iter().map(|a| a.pmid.clone()).collect::<Vec<_>>(),
        pmids
    );

    let reqs = mock.requests_to("/efetch.fcgi");
    let mut sizes: Vec<usize> = reqs
        .iter()
        .map(|r| r.param("id").unwrap().split(',').count())
        .collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [50, 300, 300]);
    assert!(reqs
        .iter()
        .all(|r| r.method == "POST" && r.param("db") == Some("pubmed")));
    assert_eq!(client.efetch_calls(), 3);
}

#[test]
fn populated_cache_skips_efetch() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path());
    let mock = serve(Arc::new(|r| (200, articles_for(r.param("id").unwrap()))));
    let pmids = ids(0..40);

    let first = EutilsClient::new(config(&mock.url));
    let a = first.fetch_articles(&pmids, Some(&cache)).unwrap();
    assert_eq!(first.efetch_calls(), 1);
    assert!(dir.path().join("efetch").join("1000000.xml").exists());

    let second = EutilsClient::new(config(&mock.url));
    let b = second.fetch_articles(&pmids, Some(&cache)).unwrap();
    assert_eq!(second.efetch_calls(), 0);
    assert_eq!(mock.requests_to("/efetch.fcgi").len(), 1);
    let strip = |v: Vec<contrarag_ingest::FetchedArticle>| {
        v.into_iter()
            .map(|a| (a.pmid, a.year, a.abstract_text))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(a), strip(b));

    // a partial cache only fetches what is missing
    let third = EutilsClient::new(config(&mock.url));
    third.fetch_articles(&ids(30..50), Some(&cache)).unwrap();
    let last = mock.requests_to("/efetch.fcgi").pop().unwrap();
    assert_eq!(last.param("id").unwrap().split(',').count(), 10);
}

#[test]
fn malformed_efetch_names_the_batch() {
    let mock = serve(Arc::new(|_| {
        (200, "<PubmedArticleSet><PubmedArticle>".into())
    }));
    let client = EutilsClient::new(config(&mock.url));
    match client.fetch_articles(&ids(0..3), None) {
        Err(IngestError::Efetch { batch, .. }) => assert_eq!(batch, ids(0..3)),
        other => panic!("expected efetch error, got {other:?}"),
    }
}

#[test]
fn citation_counts_default_to_zero() {
    let mock = serve(Arc::new(|r| {
        let body = serde_json::json!({
            "meta": {},
            "data": [
                { "pmid": 1000000, "citation_count": 17 },
                { "pmid": 1000001, "citation_count": 0 }
            ]
        });
        assert_eq!(r.param("pmids"), Some("1000000,1000001,1000002"));
        (200, body.to_string())
    }));
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path());
    let icite = ICiteClient::new(&mock.url, quick());
    let counts = icite.citation_counts(&ids(0..3), Some(&cache)).unwrap();
    assert_eq!(counts.values().copied().collect::<Vec<_>>(), [17, 0, 0]);
    assert_eq!(cache.citations("1000000"), Some(17));
    assert_eq!(cache.citations("1000002"), None);

    let down = serve(Arc::new(|_| (503, String::new())));
    let icite = ICiteClient::new(&down.url, quick());
    let counts = icite.citation_counts(&ids(0..2), None).unwrap();
    assert_eq!(counts.values().copied().collect::<Vec<_>>(), [0, 0]);
}

#[test]
fn ingest_query_builds_raw_pool() {
    let mock = serve(Arc::new(|r| match r.path.as_str() {
        "/esearch.fcgi" => {
            let term = r.param("term").unwrap();
            if term.contains("[ti]") {
                (200, ESEARCH_3.into())
            } else if term.contains("[tiab:~25]") {
                (200, ESEARCH_0.into())
            } else {
                (200, ESEARCH_3.replace("<Id>9876543</Id>", ""))
            }
        }
        "/efetch.fcgi" => {
            let ids = r.param("id").unwrap();
            let mut xml = EFETCH_2.replace("</PubmedArticleSet>", "");
            if ids.contains("9876543") {
                let medline = EFETCH_MEDLINE.split("<PubmedArticleSet>").nth(1).unwrap();
                xml.push_str(medline);
            } else {
                xml.push_str("</PubmedArticleSet>");
            }
            (200, xml)
        }
        "/api/pubs" => (
            200,
            r#"{"data":[{"pmid":31452104,"citation_count":42}]}"#.into(),
        ),
        _ => (404, String::new()),
    }));
    let eutils = EutilsClient::new(config(&mock.url));
    let icite = ICiteClient::new(&mock.url, quick());
    let exclusions = ExclusionList::bundled();
    let ingestor = Ingestor {
        eutils: &eutils,
        icite: &icite,
        cache: None,
        exclusions: &exclusions,
    };
    let medicine = Medicine {
        id: 1,
        name: "ABACAVIR".into(),
    };
    let query = QueryInstance::standard(&medicine, QuerySlot::Indications, String::new());
    let (pool, log) = ingestor.ingest_query(&medicine, &query).unwrap();

    assert_eq!(
        log.formulations.iter().map(|f| f.tier).collect::<Vec<_>>(),
        [
            Tier::ExactSentence,
            Tier::ProximityTerms,
            Tier::ProximityFull
        ]
    );
    assert!(log.formulations[1].expression.contains("ABACAVIR[ti]"));
    assert_eq!(log.hits_per_tier, [2, 3, 0]);
    assert_eq!(log.merged, 3);
    assert_eq!(log.without_abstract, 1);
    let docs: Vec<_> = pool
        .documents
        .iter()
        .map(|d| (d.pmid(), d.year(), d.citations()))
        .collect();
    assert_eq!(docs, [("31452104", 2019, 42), ("9876543", 1998, 0)]);
    assert!(pool.documents.iter().all(|d| !d.text().trim().is_empty()));
}
