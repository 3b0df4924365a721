#![allow(dead_code)]

use std::collections::BTreeMap;

use entswap_core::corpus::{Chunk, Corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub const CATEGORIES: [&str; 6] = ["Organization", "Person", "Event", "Product", "Location", "Date"];

#[derive(Debug, Clone, Copy)]
pub struct Synth {
    pub docs: usize,
    pub chunks_per_doc: usize,
    pub d: usize,
    pub clusters: usize,
    /// Entity pool size per category.
    pub pool: usize,
    /// Spread of embeddings around their cluster center.
    pub noise: f64,
    pub seed: u64,
}

impl Default for Synth {
    fn default() -> Self {
        Synth {
            docs: 40,
            chunks_per_doc: 20,
            d: 8,
            clusters: 4,
            pool: 80,
            noise: 0.35,
            seed: 1,
        }
    }
}

pub fn normal_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

pub fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, d);
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
            return unit(v);
        }
    }
}

/// Heavy-headed draw from `0..pool`: a few names recur, most are rare.
fn pick<R: Rng>(rng: &mut R, pool: usize) -> usize {
    let u: f64 = rng.random();
    ((pool as f64) * u * u * u) as usize % pool
}

/// Clustered corpus. Each document leans on one cluster; each chunk names
/// zero to two entities per category; names have fixed width so none is a
/// substring of another.
pub fn synthetic_corpus(s: &Synth) -> Corpus {
    let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
    let centers: Vec<Vec<f64>> = (0..s.clusters).map(|_| random_unit(&mut rng, s.d)).collect();
    let mut chunks = Vec::with_capacity(s.docs * s.chunks_per_doc);
    for doc in 0..s.docs {
        let home = doc % s.clusters;
        for c in 0..s.chunks_per_doc {
            let cluster = if rng.random_bool(0.7) {
                home
            } else {
                rng.random_range(0..s.clusters)
            };
            let mut entities = BTreeMap::new();
            let mut words = vec![format!("Section {c} of filing {doc} covers")];
            for cat in CATEGORIES {
                if !rng.random_bool(0.55) {
                    continue;
                }
                let count = if rng.random_bool(0.2) { 2 } else { 1 };
                let mut list: Vec<String> = Vec::new();
                for _ in 0..count {
                    let name = format!("{}{:04}", &cat[..3].to_uppercase(), pick(&mut rng, s.pool));
                    if !list.contains(&name) {
                        list.push(name);
                    }
                }
                words.push(list.join(" with "));
                entities.insert(cat.to_string(), list);
            }
            let mut e = centers[cluster].clone();
            for (x, z) in e.iter_mut().zip(normal_vec(&mut rng, s.d)) {
                *x += s.noise * z;
            }
            chunks.push(Chunk {
                id: format!("doc{doc:02}-c{c:03}"),
                doc_id: format!("doc{doc:02}"),
                text: words.join("; ") + ".",
                entities,
                embedding: Some(unit(e)),
            });
        }
    }
    Corpus::new(CATEGORIES.iter().map(|c| c.to_string()).collect(), s.d, chunks).expect("synthetic corpus is valid")
}
