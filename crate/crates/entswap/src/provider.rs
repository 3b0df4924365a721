//! Embedding providers: content-hash file cache, HTTP endpoint and the
//! deterministic stub, plus a memoizing wrapper.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use entswap_core::embedding::{content_hash, normalize_received, DeterministicStub, Embedder, EmbeddingRequest};
use entswap_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::formats;

pub const DEFAULT_TOKEN_ENV: &str = "ENTSWAP_EMBEDDING_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[serde(alias = "stub")]
    #[value(name = "stub")]
    DeterministicStub,
    #[serde(alias = "cache")]
    #[value(name = "cache")]
    FileCache,
    #[serde(alias = "http")]
    #[value(name = "http")]
    HttpEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Embedding dimension; taken from the corpus when absent.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_token_env() -> String {
    DEFAULT_TOKEN_ENV.into()
}
fn default_max_batch() -> usize {
    64
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> u64 {
    30
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::DeterministicStub,
            d: None,
            endpoint: None,
            cache_path: None,
            token_env: default_token_env(),
            max_batch: default_max_batch(),
            retries: default_retries(),
            timeout_secs: default_timeout(),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.d {
            if d < 2 {
                return Err(AppError::Config(format!("provider dimension {d} < 2")));
            }
        }
        match self.kind {
            ProviderKind::FileCache if self.cache_path.is_none() => {
                Err(AppError::Config("file_cache provider needs cache_path".into()))
            }
            ProviderKind::HttpEndpoint if self.endpoint.is_none() => {
                Err(AppError::Config("http_endpoint provider needs endpoint".into()))
            }
            _ if self.max_batch == 0 => Err(AppError::Config("max_batch must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Vectors keyed by the SHA-256 of the chunk text.
#[derive(Debug, Clone, PartialEq)]
pub struct FileCache {
    d: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FileCache {
    pub fn new(d: usize, vectors: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for (h, v) in &vectors {
            if v.len() != d {
                return Err(AppError::Core(Error::Validation {
                    record: h.clone(),
                    reason: format!("cached vector has dimension {}, expected {d}", v.len()),
                }));
            }
        }
        Ok(FileCache { d, vectors })
    }

    pub fn load(path: &Path, d: usize) -> Result<Self> {
        let text = formats::read_to_string(path)?;
        let vectors: BTreeMap<String, Vec<f64>> = serde_json::from_str(&text).map_err(|e| AppError::parse(path, e))?;
        FileCache::new(d, vectors)
    }

    pub fn to_json(&self) -> String {
        formats::json(&self.vectors)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Embedder for FileCache {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, requests: &[EmbeddingRequest]) -> entswap_core::Result<Vec<Vec<f64>>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(requests.len());
        for r in requests {
            match self.vectors.get(&content_hash(&r.text)) {
                Some(v) => out.push(normalize_received(v.clone(), self.d, &r.chunk_id)?),
                None => missing.push(r.chunk_id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::CacheMiss { ids: missing });
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    input: Vec<&'a str>,
    dim: usize,
}

#[derive(Deserialize)]
struct HttpResponse {
    embeddings: Vec<Vec<f64>>,
}

/// POSTs `{"input": [...], "dim": d}` and expects `{"embeddings": [[...]]}`.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    endpoint: String,
    d: usize,
    token: Option<String>,
    max_batch: usize,
    retries: u32,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, d: usize, token: Option<String>, max_batch: usize, retries: u32, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AppError::Config(format!("http client: {e}")))?;
        Ok(HttpEmbedder {
            client,
            endpoint: endpoint.into(),
            d,
            token,
            max_batch: max_batch.max(1),
            retries,
        })
    }

    fn post_batch(&self, batch: &[EmbeddingRequest]) -> entswap_core::Result<Vec<Vec<f64>>> {
        let body = serde_json::to_vec(&HttpRequest {
            input: batch.iter().map(|r| r.text.as_str()).collect(),
            dim: self.d,
        })
        .map_err(|e| Error::Provider(e.to_string()))?;
        let attempts = self.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 << attempt.min(6)));
            }
            let mut req = self
                .client
                .post(&self.endpoint)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.clone());
            if let Some(t) = &self.token {
                req = req.bearer_auth(t);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    log::warn!("embedding request attempt {} failed: {last}", attempt + 1);
                    continue;
                }
            };
            let status = resp.status();
            if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
                last = format!("HTTP {status}");
                log::warn!("embedding request attempt {} failed: {last}", attempt + 1);
                continue;
            }
            if !status.is_success() {
                return Err(Error::Provider(format!("HTTP {status} from {}", self.endpoint)));
            }
            let bytes = resp.bytes().map_err(|e| Error::Provider(e.to_string()))?;
            let parsed: HttpResponse =
                serde_json::from_slice(&bytes).map_err(|e| Error::Provider(format!("malformed response: {e}")))?;
            if parsed.embeddings.len() != batch.len() {
                return Err(Error::LengthMismatch {
                    expected: batch.len(),
                    got: parsed.embeddings.len(),
                });
            }
            return parsed
                .embeddings
                .into_iter()
                .zip(batch)
                .map(|(v, r)| normalize_received(v, self.d, &r.chunk_id))
                .collect();
        }
        Err(Error::Transport { attempts, reason: last })
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, requests: &[EmbeddingRequest]) -> entswap_core::Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(requests.len());
        for batch in requests.chunks(self.max_batch) {
            out.extend(self.post_batch(batch)?);
        }
        Ok(out)
    }
}

/// Memoizes any provider by content hash; thread-safe.
pub struct Memoized<E> {
    inner: E,
    memo: Mutex<HashMap<String, Vec<f64>>>,
}

impl<E: Embedder> Memoized<E> {
    pub fn new(inner: E) -> Self {
        Memoized {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Everything seen so far, in cache-file form.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<f64>> {
        self.memo
            .lock()
            .expect("memo lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

impl<E: Embedder> Embedder for Memoized<E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, requests: &[EmbeddingRequest]) -> entswap_core::Result<Vec<Vec<f64>>> {
        let hashes: Vec<String> = requests.iter().map(|r| content_hash(&r.text)).collect();
        let todo: Vec<EmbeddingRequest> = {
            let memo = self.memo.lock().expect("memo lock");
            let mut seen = std::collections::HashSet::new();
            requests
                .iter()
                .zip(&hashes)
                .filter(|(_, h)| !memo.contains_key(*h) && seen.insert((*h).clone()))
                .map(|(r, _)| r.clone())
                .collect()
        };
        if !todo.is_empty() {
            let fresh = self.inner.embed(&todo)?;
            let mut memo = self.memo.lock().expect("memo lock");
            for (r, v) in todo.iter().zip(fresh) {
                memo.insert(content_hash(&r.text), v);
            }
        }
        let memo = self.memo.lock().expect("memo lock");
        Ok(hashes.iter().map(|h| memo[h].clone()).collect())
    }
}

/// A configured provider behind one type.
pub enum Provider {
    Stub(DeterministicStub),
    Cache(FileCache),
    Http(HttpEmbedder),
}

impl Provider {
    pub fn from_config(config: &ProviderConfig, corpus_dim: usize) -> Result<Self> {
        config.validate()?;
        let d = config.d.unwrap_or(corpus_dim);
        if d != corpus_dim {
            return Err(AppError::Core(Error::DimensionMismatch {
                expected: corpus_dim,
                got: d,
            }));
        }
        Ok(match config.kind {
            ProviderKind::DeterministicStub => Provider::Stub(DeterministicStub::new(d)?),
            ProviderKind::FileCache => {
                Provider::Cache(FileCache::load(config.cache_path.as_deref().expect("validated"), d)?)
            }
            ProviderKind::HttpEndpoint => {
                let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
                Provider::Http(HttpEmbedder::new(
                    config.endpoint.clone().expect("validated"),
                    d,
                    token,
                    config.max_batch,
                    config.retries,
                    Duration::from_secs(config.timeout_secs),
                )?)
            }
        })
    }
}

impl Embedder for Provider {
    fn dim(&self) -> usize {
        match self {
            Provider::Stub(e) => e.dim(),
            Provider::Cache(e) => e.dim(),
            Provider::Http(e) => e.dim(),
        }
    }

    fn embed(&self, requests: &[EmbeddingRequest]) -> entswap_core::Result<Vec<Vec<f64>>> {
        match self {
            Provider::Stub(e) => e.embed(requests),
            Provider::Cache(e) => e.embed(requests),
            Provider::Http(e) => e.embed(requests),
        }
    }
}
