//! Embedding provider interface.
//!
//! Providers that talk to files or the network live in the `entswap`
//! crate; this module carries the trait, the content hash used as cache
//! key, and the offline deterministic stub.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub chunk_id: String,
    pub text: String,
}

impl EmbeddingRequest {
    pub fn new(chunk_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let req = EmbeddingRequest {
            chunk_id: chunk_id.into(),
            text: text.into(),
        };
        if req.text.is_empty() {
            return Err(Error::validation(req.chunk_id, "empty text in embedding request"));
        }
        Ok(req)
    }
}

pub trait Embedder {
    fn dim(&self) -> usize;

    /// One unit vector per request, in request order.
    fn embed(&self, requests: &[EmbeddingRequest]) -> Result<Vec<Vec<f64>>>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, requests: &[EmbeddingRequest]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(requests)
    }
}

/// Hex SHA-256 of the text, used to key embedding caches.
pub fn content_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest.iter() {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn seed_of(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Checks the dimension of a provider response and rescales it to unit norm.
pub fn normalize_received(mut v: Vec<f64>, d: usize, chunk_id: &str) -> Result<Vec<f64>> {
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    if !math::normalize(&mut v) {
        return Err(Error::Provider(format!("zero or non-finite embedding for {chunk_id}")));
    }
    Ok(v)
}

/// Pseudo-random unit vectors keyed by text content: a ChaCha stream seeded
/// with a 64-bit content hash produces `d` standard normals, then normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeterministicStub {
    d: usize,
}

impl DeterministicStub {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("embedding dimension {d} < 2")));
        }
        Ok(DeterministicStub { d })
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed_of(text));
        loop {
            let mut v: Vec<f64> = (0..self.d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if math::normalize(&mut v) {
                return v;
            }
        }
    }
}

impl Embedder for DeterministicStub {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, requests: &[EmbeddingRequest]) -> Result<Vec<Vec<f64>>> {
        Ok(requests.iter().map(|r| self.vector(&r.text)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stub_is_deterministic_and_unit() {
        let stub = DeterministicStub::new(4).unwrap();
        let req = [EmbeddingRequest::new("x", "abc").unwrap()];
        let a = stub.embed(&req).unwrap();
        let b = stub.embed(&req).unwrap();
        assert_eq!(a, b);
        assert!((math::norm(&a[0]) - 1.0).abs() < 1e-12);
        assert_eq!(a[0].len(), 4);
    }

    #[test]
    fn distinct_texts_differ() {
        let stub = DeterministicStub::new(8).unwrap();
        assert_ne!(stub.vector("abc"), stub.vector("abd"));
    }

    #[test]
    fn normalizes_on_receipt() {
        let v = normalize_received(vec![6.0, 8.0], 2, "c").unwrap();
        assert!((math::norm(&v) - 1.0).abs() < 1e-15);
        assert!(normalize_received(vec![1.0], 2, "c").is_err());
        assert!(normalize_received(vec![0.0, 0.0], 2, "c").is_err());
    }

    #[test]
    fn rejects_tiny_dimension_and_empty_text() {
        assert!(DeterministicStub::new(1).is_err());
        assert!(EmbeddingRequest::new("a", "").is_err());
    }

    #[test]
    fn content_hash_is_sha256_hex() {
        assert_eq!(
            content_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
