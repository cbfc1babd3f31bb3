//! Wire-protocol conformance of the HTTP providers against a local mock
//! server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use contrarag_core::contradiction::NliProvider;
use contrarag_core::embed::EmbeddingProvider;
use contrarag_core::evaluation::WordVectorProvider;
use contrarag_core::http::{HttpClient, HttpEmbedder, HttpGenerator, HttpNli, HttpWordVectors};
use contrarag_core::rag::GenerationProvider;
use contrarag_core::retry::Backoff;
use contrarag_core::ProviderError;
use serde_json::{json, Value};

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

struct Mock {
    url: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

fn serve(handler: Arc<Handler>) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
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
            let value: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            log.lock().unwrap().push((path.clone(), value.clone()));
            let (status, text) = handler(&path, &value);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    Mock { url, requests }
}

fn client(url: &str) -> HttpClient {
    HttpClient::new(url).with_backoff(Backoff {
        max_retries: 3,
        base_delay: Duration::from_millis(5),
    })
}

#[test]
fn embed_request_and_response_shape() {
    let mock = serve(Arc::new(|_, body| {
        let n = body["texts"].as_array().unwrap().len();
        let vectors: Vec<Vec<f32>> = (0..n).map(|i| vec![1.0, i as f32, 0.0]).collect();
        (200, json!({ "vectors": vectors }).to_string())
    }));
    let e = HttpEmbedder::new(client(&mock.url), "bge-small", 3);
    let out = e.embed(&["a", "b"]).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[1].values(), &[1.0, 1.0, 0.0]);
    let reqs = mock.requests.lock().unwrap();
    assert_eq!(reqs[0].0, "/embed");
    assert_eq!(
        reqs[0].1,
        json!({ "model": "bge-small", "texts": ["a", "b"] })
    );
}

#[test]
fn embed_rejects_wrong_dimension() {
    let mock = serve(Arc::new(|_, _| {
        (200, json!({ "vectors": [[1.0, 0.0]] }).to_string())
    }));
    let e = HttpEmbedder::new(client(&mock.url), "m", 384);
    assert!(matches!(e.embed(&["x"]), Err(ProviderError::Protocol(_))));
}

#[test]
fn nli_round_trip() {
    let mock = serve(Arc::new(|_, body| {
        let n = body["pairs"].as_array().unwrap().len();
        let probs: Vec<Value> = (0..n)
            .map(|_| json!({ "ent": 0.1, "neu": 0.2, "con": 0.7 }))
            .collect();
        (200, json!({ "probs": probs }).to_string())
    }));
    let nli = HttpNli::new(client(&mock.url), "mednli");
    let out = nli.classify(&[("p", "h")]).unwrap();
    assert_eq!(out[0].con, 0.7);
    let reqs = mock.requests.lock().unwrap();
    assert_eq!(reqs[0].0, "/nli");
    assert_eq!(
        reqs[0].1,
        json!({ "model": "mednli", "pairs": [{ "premise": "p", "hypothesis": "h" }] })
    );
}

#[test]
fn generate_sends_fixed_decoding_params() {
    let mock = serve(Arc::new(|_, _| {
        (
            200,
            json!({ "text": "Take daily.", "finish_reason": "length" }).to_string(),
        )
    }));
    let g = HttpGenerator::new(client(&mock.url), "llm");
    let out = g.generate("prompt").unwrap();
    assert_eq!(out.text, "Take daily.");
    assert!(out.truncated);
    let reqs = mock.requests.lock().unwrap();
    assert_eq!(reqs[0].0, "/generate");
    assert_eq!(
        reqs[0].1,
        json!({ "model": "llm", "prompt": "prompt", "temperature": 0.0, "max_tokens": 256 })
    );
}

#[test]
fn word_vectors_allow_unknown_tokens() {
    let mock = serve(Arc::new(|_, _| {
        (200, json!({ "vectors": [[1.0, 0.0], null] }).to_string())
    }));
    let w = HttpWordVectors::new(client(&mock.url), "w2v", 2);
    assert_eq!(
        w.lookup(&["a", "zz"]).unwrap(),
        vec![Some(vec![1.0, 0.0]), None]
    );
}

#[test]
fn transient_failures_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let mock = serve(Arc::new(move |_, _| {
        if c.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "{}".into())
        } else {
            (200, json!({ "text": "ok" }).to_string())
        }
    }));
    let g = HttpGenerator::new(client(&mock.url), "llm");
    assert_eq!(g.generate("p").unwrap().text, "ok");
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_are_bounded_and_client_errors_are_not_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let mock = serve(Arc::new(move |path, _| {
        c.fetch_add(1, Ordering::SeqCst);
        if path == "/generate" {
            (429, "{}".into())
        } else {
            (404, json!({ "error": "unknown model" }).to_string())
        }
    }));
    let g = HttpGenerator::new(client(&mock.url), "llm");
    assert!(matches!(
        g.generate("p"),
        Err(ProviderError::Unavailable(429))
    ));
    assert_eq!(calls.load(Ordering::SeqCst), 4);
    let nli = HttpNli::new(client(&mock.url), "nope");
    assert!(matches!(
        nli.classify(&[("a", "b")]),
        Err(ProviderError::Protocol(_))
    ));
    assert_eq!(calls.load(Ordering::SeqCst), 5);
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let c = HttpClient::new(format!("http://127.0.0.1:{port}")).with_backoff(Backoff {
        max_retries: 1,
        base_delay: Duration::from_millis(1),
    });
    let e = HttpEmbedder::new(c, "m", 2);
    assert!(matches!(e.embed(&["x"]), Err(ProviderError::Transport(_))));
}
