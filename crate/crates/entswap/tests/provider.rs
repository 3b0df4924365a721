use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use entswap::provider::{FileCache, HttpEmbedder, Memoized, Provider, ProviderConfig, ProviderKind};
use entswap_core::embedding::{content_hash, Embedder, EmbeddingRequest};
use entswap_core::Error;
use serde_json::{json, Value};

fn req(id: &str, text: &str) -> EmbeddingRequest {
    EmbeddingRequest::new(id, text).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Seen {
    bodies: Vec<Value>,
    auth: Vec<Option<String>>,
}

/// Serves `responses` in order (the last one repeats): (status, body).
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Seen>>, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Seen {
        bodies: Vec::new(),
        auth: Vec::new(),
    }));
    let hits = Arc::new(AtomicUsize::new(0));
    let (seen2, hits2) = (seen.clone(), hits.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let i = hits2.fetch_add(1, Ordering::SeqCst);
            {
                let mut s = seen2.lock().unwrap();
                s.bodies.push(serde_json::from_slice(&body).unwrap_or(Value::Null));
                s.auth.push(auth);
            }
            let (status, text) = &responses[i.min(responses.len() - 1)];
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (url, seen, hits)
}

fn client(url: &str, d: usize, token: Option<&str>, retries: u32) -> HttpEmbedder {
    HttpEmbedder::new(url, d, token.map(String::from), 2, retries, Duration::from_secs(5)).unwrap()
}

#[test]
fn http_normalizes_on_receipt_and_sends_protocol() {
    let body = json!({"embeddings": [[6.0, 8.0, 0.0], [0.0, 0.0, 10.0]]}).to_string();
    let (url, seen, _) = serve(vec![(200, body)]);
    let out = client(&url, 3, Some("sekret"), 0).embed(&[req("a", "alpha"), req("b", "beta")]).unwrap();
    assert!((norm(&out[0]) - 1.0).abs() < 1e-9);
    assert!((out[0][0] - 0.6).abs() < 1e-12 && (out[0][1] - 0.8).abs() < 1e-12);
    assert_eq!(out[1], vec![0.0, 0.0, 1.0]);
    let s = seen.lock().unwrap();
    assert_eq!(s.bodies[0], json!({"input": ["alpha", "beta"], "dim": 3}));
    assert_eq!(s.auth[0].as_deref(), Some("Bearer sekret"));
}

#[test]
fn http_batches_requests() {
    let body = json!({"embeddings": [[1.0, 0.0], [0.0, 1.0]]}).to_string();
    let one = json!({"embeddings": [[1.0, 1.0]]}).to_string();
    let (url, seen, hits) = serve(vec![(200, body.clone()), (200, one)]);
    let out = client(&url, 2, None, 0)
        .embed(&[req("a", "a"), req("b", "b"), req("c", "c")])
        .unwrap();
    assert_eq!(out.len(), 3);
    assert_eq!(hits.load(Ordering::SeqCst), 2);
    assert_eq!(seen.lock().unwrap().auth[0], None);
}

#[test]
fn http_retries_server_errors_then_succeeds() {
    let ok = json!({"embeddings": [[1.0, 0.0]]}).to_string();
    let (url, _, hits) = serve(vec![(503, "{}".into()), (500, "{}".into()), (200, ok)]);
    let out = client(&url, 2, None, 3).embed(&[req("a", "a")]).unwrap();
    assert_eq!(out, vec![vec![1.0, 0.0]]);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn http_gives_up_after_bounded_retries() {
    let (url, _, hits) = serve(vec![(500, "{}".into())]);
    match client(&url, 2, None, 2).embed(&[req("a", "a")]) {
        Err(Error::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn http_client_errors_are_not_retried() {
    let (url, _, hits) = serve(vec![(401, "{}".into())]);
    assert!(matches!(client(&url, 2, None, 3).embed(&[req("a", "a")]), Err(Error::Provider(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn http_connection_refused_is_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    drop(listener);
    assert!(matches!(
        client(&url, 2, None, 1).embed(&[req("a", "a")]),
        Err(Error::Transport { attempts: 2, .. })
    ));
}

#[test]
fn http_rejects_wrong_dimension_and_count() {
    let (url, _, _) = serve(vec![(200, json!({"embeddings": [[1.0, 0.0, 0.0]]}).to_string())]);
    assert!(matches!(
        client(&url, 2, None, 0).embed(&[req("a", "a")]),
        Err(Error::DimensionMismatch { expected: 2, got: 3 })
    ));
    let (url, _, _) = serve(vec![(200, json!({"embeddings": []}).to_string())]);
    assert!(matches!(client(&url, 2, None, 0).embed(&[req("a", "a")]), Err(Error::LengthMismatch { .. })));
    let (url, _, _) = serve(vec![(200, "not json".into())]);
    assert!(matches!(client(&url, 2, None, 0).embed(&[req("a", "a")]), Err(Error::Provider(_))));
}

#[test]
fn cache_miss_names_missing_ids() {
    let mut vectors = BTreeMap::new();
    vectors.insert(content_hash("one"), vec![3.0, 4.0]);
    vectors.insert(content_hash("two"), vec![0.0, 2.0]);
    let cache = FileCache::new(2, vectors).unwrap();
    match cache.embed(&[req("a", "one"), req("b", "two"), req("c", "three")]) {
        Err(Error::CacheMiss { ids }) => assert_eq!(ids, vec!["c".to_string()]),
        other => panic!("{other:?}"),
    }
    let out = cache.embed(&[req("a", "one")]).unwrap();
    assert!((out[0][0] - 0.6).abs() < 1e-12);
}

#[test]
fn cache_file_loads_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.json");
    let cache = FileCache::new(2, BTreeMap::from([(content_hash("x"), vec![1.0, 1.0])])).unwrap();
    std::fs::write(&path, cache.to_json()).unwrap();
    let config = ProviderConfig {
        kind: ProviderKind::FileCache,
        cache_path: Some(path),
        ..ProviderConfig::default()
    };
    let provider = Provider::from_config(&config, 2).unwrap();
    let v = provider.embed(&[req("a", "x")]).unwrap();
    assert!((norm(&v[0]) - 1.0).abs() < 1e-12);
    assert!(Provider::from_config(&config, 3).is_err());
    let bad = FileCache::new(3, BTreeMap::from([(content_hash("x"), vec![1.0, 1.0])]));
    assert!(bad.is_err());
}

#[test]
fn stub_is_deterministic_and_memo_avoids_refetch() {
    let (url, _, hits) = serve(vec![(200, json!({"embeddings": [[1.0, 2.0]]}).to_string())]);
    let memo = Memoized::new(client(&url, 2, None, 0));
    let a = memo.embed(&[req("a", "same"), req("b", "same")]).unwrap();
    let b = memo.embed(&[req("c", "same")]).unwrap();
    assert_eq!(a[0], a[1]);
    assert_eq!(a[0], b[0]);
    assert_eq!(hits.load(Ordering::SeqCst), 1);
    assert_eq!(memo.snapshot().len(), 1);

    let stub = Provider::from_config(&ProviderConfig::default(), 5).unwrap();
    let x = stub.embed(&[req("a", "text")]).unwrap();
    let y = stub.embed(&[req("z", "text")]).unwrap();
    assert_eq!(x, y);
    assert!((norm(&x[0]) - 1.0).abs() < 1e-12);
}
