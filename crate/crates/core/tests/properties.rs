use std::collections::{BTreeMap, BTreeSet};

use entswap_core::contingency::{build_table, frequency_counts, marginalize, CellValue};
use entswap_core::corpus::{Chunk, Corpus};
use entswap_core::embedding::DeterministicStub;
use entswap_core::evaluation::{mcnemar, PairedTable};
use entswap_core::ewens_pitman::{epsf_log_pmf, partitions, EwensPitmanParams};
use entswap_core::mixture::{
    assign, conditional_log_likelihood, fit_em, ComponentParams, EmConfig, Family, Memberships, MixtureModel,
};
use entswap_core::risk_utility::{frontier, optimal_release, Pipeline, RiskUtilityPoint, TradeoffLine};
use entswap_core::swap::{sequential_swap, Constraints, Release, Role};
use proptest::prelude::*;

const CATS: [&str; 3] = ["Organization", "Person", "Product"];

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Chunk spec: doc index, then per category a list of pool indices.
type ChunkSpec = (usize, Vec<Vec<usize>>, Vec<f64>);

fn chunk_spec(docs: usize, pool: usize) -> impl Strategy<Value = ChunkSpec> {
    (
        0..docs,
        prop::collection::vec(prop::collection::vec(0..pool, 0..3), CATS.len()),
        prop::collection::vec(-1.0f64..1.0, 3),
    )
}

fn build(specs: &[ChunkSpec]) -> Corpus {
    let chunks = specs
        .iter()
        .enumerate()
        .map(|(i, (doc, ents, e))| {
            let mut entities = BTreeMap::new();
            let mut words = vec![format!("chunk {i} mentions")];
            for (c, idx) in CATS.iter().zip(ents) {
                let mut list: Vec<String> = Vec::new();
                for k in idx {
                    let name = format!("{}_{:03}", &c[..3], k);
                    if !list.contains(&name) {
                        list.push(name);
                    }
                }
                words.extend(list.iter().cloned());
                if !list.is_empty() {
                    entities.insert(c.to_string(), list);
                }
            }
            let mut emb = e.clone();
            emb[0] += 1e-3;
            Chunk {
                id: format!("c{i}"),
                doc_id: format!("d{doc}"),
                text: words.join(" and "),
                entities,
                embedding: Some(unit(emb)),
            }
        })
        .collect();
    Corpus::new(CATS.iter().map(|s| s.to_string()).collect(), 3, chunks).unwrap()
}

fn multiset(corpus: &Corpus) -> BTreeMap<(String, String), usize> {
    let mut m = BTreeMap::new();
    for c in corpus.chunks() {
        for (cat, list) in &c.entities {
            for e in list {
                *m.entry((cat.clone(), e.clone())).or_insert(0) += 1;
            }
        }
    }
    m
}

fn release(swaps: usize, seed: u64, same_cluster: bool) -> Release {
    let roles = [("Organization", Role::S), ("Person", Role::S), ("Product", Role::U)]
        .into_iter()
        .map(|(c, r)| (c.to_string(), r))
        .collect();
    Release {
        swap_count: swaps,
        roles,
        constraints: Constraints {
            cross_document: true,
            same_cluster,
        },
        seed,
    }
}

fn two_cluster_model() -> MixtureModel {
    MixtureModel::new(
        Family::SCauchy,
        vec![0.5, 0.5],
        vec![
            ComponentParams {
                mu: vec![1.0, 0.0, 0.0],
                rho: 0.5,
            },
            ComponentParams {
                mu: vec![-1.0, 0.0, 0.0],
                rho: 0.5,
            },
        ],
        1e-3,
    )
    .unwrap()
}

fn point(i: usize, du: f64, dr: f64) -> RiskUtilityPoint {
    RiskUtilityPoint {
        release_id: format!("p{i}"),
        j: vec!["A".into(), "B".into()],
        swap_count: i,
        r: 0.0,
        du,
        dr,
        seed: 0,
        n_pop: 1e10,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_counts_and_marginals_match_group_by(specs in prop::collection::vec(chunk_spec(4, 4), 1..40),
                                                 mask in 1usize..8) {
        let corpus = build(&specs);
        let table = build_table(&corpus);
        prop_assert_eq!(table.n(), corpus.len());
        prop_assert_eq!(table.cells().values().map(|c| c.count).sum::<usize>(), corpus.len());
        let keep: Vec<String> = CATS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| c.to_string()).collect();
        let marginal = marginalize(&table, &keep).unwrap();
        let mut oracle: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
        for c in corpus.chunks() {
            let key: Vec<String> = keep.iter().map(|k| {
                let set: BTreeSet<&String> = c.entities_of(k).iter().collect();
                set.into_iter().cloned().collect::<Vec<_>>().join(" & ")
            }).collect();
            oracle.entry(key).or_default().insert(c.id.clone());
        }
        let got: BTreeMap<Vec<String>, BTreeSet<String>> = marginal.cells().iter().map(|(k, c)| {
            let key = k.values().iter().map(|v| match v { CellValue::Empty => String::new(), CellValue::Value(s) => s.clone() }).collect();
            (key, c.chunk_ids.iter().cloned().collect())
        }).collect();
        prop_assert_eq!(got, oracle);
        let counts = frequency_counts(&marginal);
        prop_assert_eq!(counts.n() as usize, corpus.len());
    }

    #[test]
    fn swaps_preserve_entities_and_constraints(specs in prop::collection::vec(chunk_spec(4, 6), 2..40),
                                               swaps in 0usize..12, seed in 0u64..1000) {
        let corpus = build(&specs);
        let model = two_cluster_model();
        let labels = assign(&model, &corpus.embeddings().unwrap());
        let rel = release(swaps, seed, true);
        let run = sequential_swap(&corpus, Some(&labels), &rel).unwrap();
        prop_assert!(run.states.len() <= swaps);
        prop_assert_eq!(run.exhausted, run.states.len() < swaps);
        let before = multiset(&corpus);
        for state in &run.states {
            prop_assert_eq!(multiset(&state.corpus), before.clone());
            // every invariant of a corpus still holds
            Corpus::new(corpus.categories().to_vec(), 3, state.corpus.chunks().to_vec()).unwrap();
            prop_assert_eq!(build_table(&state.corpus), state.table.clone());
            for rec in &state.records {
                let a = corpus.index_of(&rec.chunk_a).unwrap();
                let b = corpus.index_of(&rec.chunk_b).unwrap();
                prop_assert_ne!(&corpus.chunks()[a].doc_id, &corpus.chunks()[b].doc_id);
                prop_assert_eq!(labels.0[a], labels.0[b]);
            }
            for (orig, now) in corpus.chunks().iter().zip(state.corpus.chunks()) {
                prop_assert_eq!(&orig.doc_id, &now.doc_id);
                prop_assert_eq!(orig.entities_of("Product"), now.entities_of("Product"));
            }
        }
        let again = sequential_swap(&corpus, Some(&labels), &rel).unwrap();
        prop_assert_eq!(again.last().corpus.chunks(), run.last().corpus.chunks());
    }

    #[test]
    fn em_trace_never_decreases(seed in 0u64..500, k in 1usize..4, n in 20usize..60) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            unit(vec![sign + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)])
        }).collect();
        let mut cfg = EmConfig::new(Family::Pkb, k);
        cfg.seed = seed;
        cfg.max_iter = 100;
        let fit = fit_em(&xs, &cfg).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
        let total: f64 = fit.model.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn epsf_sums_to_one(n in 1u64..8, theta in 0.1f64..20.0, alpha in 0.0f64..0.95) {
        let p = EwensPitmanParams::new(theta, alpha).unwrap();
        let total: f64 = partitions(n).iter().map(|c| epsf_log_pmf(c, &p).unwrap().exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn frontier_matches_brute_force(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..80),
                                    a in 0.01f64..100.0) {
        // coarse grid forces ties
        let points: Vec<RiskUtilityPoint> = pts.iter().enumerate()
            .map(|(i, (u, r))| point(i, (u * 10.0).round() / 10.0, (r * 10.0).round() / 10.0)).collect();
        let f = frontier(&points);
        let dominated = |p: &RiskUtilityPoint| points.iter().any(|q| q.dr <= p.dr && q.du >= p.du && (q.dr < p.dr || q.du > p.du));
        let expect: BTreeSet<String> = points.iter().filter(|p| !dominated(p)).map(|p| p.release_id.clone()).collect();
        let got: BTreeSet<String> = f.iter().map(|p| p.release_id.clone()).collect();
        prop_assert_eq!(got, expect);
        let line = TradeoffLine::new(a, 0.0).unwrap();
        let best = optimal_release(&f, &line).unwrap();
        let from_all = optimal_release(&points, &line).unwrap();
        prop_assert_eq!(best.release_id, from_all.release_id);
    }

    #[test]
    fn utility_equals_difference_form(specs in prop::collection::vec(chunk_spec(3, 5), 4..30),
                                      swaps in 1usize..6, seed in 0u64..200) {
        let corpus = build(&specs);
        let model = two_cluster_model();
        let xs = corpus.embeddings().unwrap();
        let labels = Memberships(assign(&model, &xs).0);
        let stub = DeterministicStub::new(3).unwrap();
        let pipe = Pipeline::new(&corpus, &model, &labels, &stub).unwrap();
        let run = pipe.run(&release(swaps, seed, false)).unwrap();
        let mut cache = BTreeMap::new();
        let state = run.last();
        let post = pipe.post_embeddings(state, &mut cache).unwrap();
        let du = pipe.utility(state, &mut cache).unwrap();
        let pre_ll = conditional_log_likelihood(&model, &xs, &labels).unwrap();
        let diff: f64 = corpus.chunks().iter().enumerate()
            .filter(|(_, c)| state.swapped_chunk_ids.contains(&c.id))
            .map(|(i, _)| model.component_log_density(labels.0[i], &xs[i]) - model.component_log_density(labels.0[i], &post[i]))
            .sum();
        let expect = (1.0 - diff / pre_ll).clamp(0.0, 1.0);
        prop_assert!((du - expect).abs() < 1e-9, "{du} vs {expect}");
    }

    #[test]
    fn mcnemar_symmetric(a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000) {
        prop_assume!(b + c > 0);
        let x = mcnemar(&PairedTable { a, b, c, d }).unwrap();
        let y = mcnemar(&PairedTable { a, b: c, c: b, d }).unwrap();
        prop_assert_eq!(x.chi_square, y.chi_square);
        prop_assert_eq!(x.exact_p, y.exact_p);
        prop_assert!((0.0..=1.0).contains(&x.p_value) && (0.0..=1.0).contains(&x.exact_p));
    }
}
