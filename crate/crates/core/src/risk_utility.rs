//! Disclosure risk and data utility of swapped releases, the risk-utility
//! frontier and release selection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::contingency::{build_table, frequency_counts, marginalize, sample_uniques, ContingencyTable};
use crate::corpus::Corpus;
use crate::embedding::{content_hash, Embedder, EmbeddingRequest};
use crate::error::{Error, Result};
use crate::ewens_pitman::{fit_mle, pop_unique_ratio, MleFit, PopulationEstimate};
use crate::mixture::{conditional_log_likelihood, Memberships, MixtureModel};
use crate::swap::{sequential_swap, Constraints, Release, Role, SwapState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskUtilityPoint {
    pub release_id: String,
    #[serde(rename = "J")]
    pub j: Vec<String>,
    pub swap_count: usize,
    /// Share of chunks swapped, `2·swap_count/n`.
    pub r: f64,
    #[serde(rename = "DU")]
    pub du: f64,
    #[serde(rename = "DR")]
    pub dr: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n_pop: f64,
}

/// `DR = c + a·DU`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffLine {
    pub a: f64,
    pub c: f64,
}

impl TradeoffLine {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !c.is_finite() {
            return Err(Error::Domain(format!("trade-off slope {a} must be positive and finite")));
        }
        Ok(TradeoffLine { a, c })
    }
}

/// `1 − (swapped sample uniques / s₁)·p̂` on the pre-swap marginal table.
pub fn data_risk(pre_marginal: &ContingencyTable, swapped_ids: &BTreeSet<String>, p_hat: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::Domain(format!("p_hat = {p_hat} outside [0, 1]")));
    }
    let uniques = sample_uniques(pre_marginal);
    if uniques.is_empty() {
        return Err(Error::Undefined("disclosure risk with no sample uniques"));
    }
    let hit = uniques.intersection(swapped_ids).count();
    Ok(1.0 - hit as f64 / uniques.len() as f64 * p_hat)
}

/// Ratio of post- to pre-swap conditional log-likelihoods under the
/// pre-swap model and memberships, clamped to [0, 1].
pub fn data_utility(model: &MixtureModel, labels: &Memberships, pre_x: &[Vec<f64>], post_x: &[Vec<f64>]) -> Result<f64> {
    if pre_x.len() != post_x.len() {
        return Err(Error::LengthMismatch {
            expected: pre_x.len(),
            got: post_x.len(),
        });
    }
    let pre = conditional_log_likelihood(model, pre_x, labels)?;
    if pre == 0.0 {
        return Err(Error::Undefined("utility with zero pre-swap log-likelihood"));
    }
    let post = conditional_log_likelihood(model, post_x, labels)?;
    let du = post / pre;
    if du > 1.0 {
        log::warn!("data utility {du} above 1 clamped");
    } else if du < 0.0 {
        log::warn!("data utility {du} below 0 clamped");
    }
    Ok(du.clamp(0.0, 1.0))
}

/// Everything a release evaluation needs besides the release itself.
pub struct Pipeline<'a, E> {
    corpus: &'a Corpus,
    table: ContingencyTable,
    model: &'a MixtureModel,
    memberships: &'a Memberships,
    pre_x: Vec<Vec<f64>>,
    embedder: &'a E,
}

impl<'a, E: Embedder> Pipeline<'a, E> {
    pub fn new(corpus: &'a Corpus, model: &'a MixtureModel, memberships: &'a Memberships, embedder: &'a E) -> Result<Self> {
        let pre_x = corpus.embeddings()?;
        if memberships.len() != corpus.len() {
            return Err(Error::LengthMismatch {
                expected: corpus.len(),
                got: memberships.len(),
            });
        }
        if model.dim() != corpus.dim() {
            return Err(Error::DimensionMismatch {
                expected: corpus.dim(),
                got: model.dim(),
            });
        }
        if embedder.dim() != corpus.dim() {
            return Err(Error::DimensionMismatch {
                expected: corpus.dim(),
                got: embedder.dim(),
            });
        }
        Ok(Pipeline {
            corpus,
            table: build_table(corpus),
            model,
            memberships,
            pre_x,
            embedder,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn table(&self) -> &ContingencyTable {
        &self.table
    }

    pub fn pre_embeddings(&self) -> &[Vec<f64>] {
        &self.pre_x
    }

    /// Embeddings after the swaps of `state`; swapped chunks are re-embedded,
    /// memoized by content hash in `cache`.
    pub fn post_embeddings(&self, state: &SwapState, cache: &mut BTreeMap<String, Vec<f64>>) -> Result<Vec<Vec<f64>>> {
        let mut missing = Vec::new();
        let mut wanted = BTreeSet::new();
        for chunk in state.corpus.chunks() {
            if state.swapped_chunk_ids.contains(&chunk.id) {
                let h = content_hash(&chunk.text);
                if !cache.contains_key(&h) && wanted.insert(h.clone()) {
                    missing.push((h, EmbeddingRequest::new(chunk.id.clone(), chunk.text.clone())?));
                }
            }
        }
        if !missing.is_empty() {
            let requests: Vec<EmbeddingRequest> = missing.iter().map(|(_, r)| r.clone()).collect();
            let vectors = self.embedder.embed(&requests)?;
            if vectors.len() != requests.len() {
                return Err(Error::LengthMismatch {
                    expected: requests.len(),
                    got: vectors.len(),
                });
            }
            for ((h, _), v) in missing.into_iter().zip(vectors) {
                if v.len() != self.corpus.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.corpus.dim(),
                        got: v.len(),
                    });
                }
                cache.insert(h, v);
            }
        }
        Ok(state
            .corpus
            .chunks()
            .iter()
            .zip(&self.pre_x)
            .map(|(chunk, pre)| {
                if state.swapped_chunk_ids.contains(&chunk.id) {
                    cache[&content_hash(&chunk.text)].clone()
                } else {
                    pre.clone()
                }
            })
            .collect())
    }

    /// DU of a post-swap state.
    pub fn utility(&self, state: &SwapState, cache: &mut BTreeMap<String, Vec<f64>>) -> Result<f64> {
        let post = self.post_embeddings(state, cache)?;
        data_utility(self.model, self.memberships, &self.pre_x, &post)
    }

    /// Runs the release on this corpus.
    pub fn run(&self, release: &Release) -> Result<crate::swap::SwapRun> {
        sequential_swap(self.corpus, Some(self.memberships), release)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMeasures {
    pub mean_du: f64,
    pub mean_dr: f64,
    /// `(DU, DR)` per draw.
    pub draws: Vec<(f64, f64)>,
}

/// Averages DU and DR over `m` runs of the release with seeds
/// `seed, seed + 1, …`. DR is measured on the marginal over `j`.
pub fn monte_carlo_measures<E: Embedder>(
    pipeline: &Pipeline<'_, E>,
    release: &Release,
    j: &[String],
    p_hat: f64,
    m: usize,
) -> Result<MonteCarloMeasures> {
    if m == 0 {
        return Err(Error::Domain("at least one Monte Carlo draw is required".into()));
    }
    let marginal = marginalize(pipeline.table(), j)?;
    let mut cache = BTreeMap::new();
    let mut draws = Vec::with_capacity(m);
    for i in 0..m {
        let mut r = release.clone();
        r.seed = release.seed.wrapping_add(i as u64);
        let run = pipeline.run(&r)?;
        let state = run.last();
        let du = pipeline.utility(state, &mut cache)?;
        let dr = data_risk(&marginal, &state.swapped_chunk_ids, p_hat)?;
        draws.push((du, dr));
    }
    let mean_du = draws.iter().map(|d| d.0).sum::<f64>() / m as f64;
    let mean_dr = draws.iter().map(|d| d.1).sum::<f64>() / m as f64;
    Ok(MonteCarloMeasures { mean_du, mean_dr, draws })
}

/// Maximal points: no other point has DR ≤ and DU ≥ with one strict.
/// Sorted by DU descending, then DR ascending. Non-finite points are dropped.
pub fn frontier(points: &[RiskUtilityPoint]) -> Vec<RiskUtilityPoint> {
    let mut sorted: Vec<&RiskUtilityPoint> = points.iter().filter(|p| p.du.is_finite() && p.dr.is_finite()).collect();
    sorted.sort_by(|x, y| {
        y.du.total_cmp(&x.du)
            .then(x.dr.total_cmp(&y.dr))
            .then(x.swap_count.cmp(&y.swap_count))
            .then(x.release_id.cmp(&y.release_id))
    });
    let mut out = Vec::new();
    let mut best_dr = f64::INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let du = sorted[i].du;
        let mut end = i;
        while end < sorted.len() && sorted[end].du == du {
            end += 1;
        }
        let group_min = sorted[i].dr;
        for p in &sorted[i..end] {
            if p.dr == group_min && p.dr < best_dr {
                out.push((*p).clone());
            }
        }
        best_dr = best_dr.min(group_min);
        i = end;
    }
    out
}

fn preference(x: &RiskUtilityPoint, y: &RiskUtilityPoint, a: f64) -> Ordering {
    let fx = x.dr - a * x.du;
    let fy = y.dr - a * y.du;
    fx.total_cmp(&fy)
        .then(y.du.total_cmp(&x.du))
        .then(x.swap_count.cmp(&y.swap_count))
}

/// The point where a line of slope `a` supports the frontier: the minimizer
/// of `DR − a·DU`; ties go to higher DU, then fewer swaps.
pub fn optimal_release(frontier_points: &[RiskUtilityPoint], line: &TradeoffLine) -> Result<RiskUtilityPoint> {
    if !(line.a > 0.0) {
        return Err(Error::Domain(format!("trade-off slope {} must be positive", line.a)));
    }
    frontier_points
        .iter()
        .filter(|p| p.du.is_finite() && p.dr.is_finite())
        .min_by(|x, y| preference(x, y, line.a))
        .cloned()
        .ok_or(Error::Empty("frontier"))
}

/// Highest-utility point with `DR ≤ cap`; ties go to lower DR, then fewer swaps.
pub fn best_under_risk_cap(points: &[RiskUtilityPoint], cap: f64) -> Option<RiskUtilityPoint> {
    points
        .iter()
        .filter(|p| p.dr <= cap && p.du.is_finite())
        .min_by(|x, y| {
            y.du.total_cmp(&x.du)
                .then(x.dr.total_cmp(&y.dr))
                .then(x.swap_count.cmp(&y.swap_count))
        })
        .cloned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Categories that may take the S role.
    pub eligible: Vec<String>,
    pub subset_size: usize,
    pub max_swaps: usize,
    /// Population sizes N at which p̂ is evaluated.
    pub n_pops: Vec<f64>,
    /// Roles of categories outside the swapped subset; unlisted ones are U.
    #[serde(default)]
    pub roles: BTreeMap<String, Role>,
    pub same_cluster: bool,
    pub seed: u64,
}

/// All `size`-subsets of `items`, in lexicographic position order.
pub fn subsets(items: &[String], size: usize) -> Vec<Vec<String>> {
    fn rec(items: &[String], size: usize, start: usize, cur: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i].clone());
            rec(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if size > 0 && size <= items.len() {
        rec(items, size, 0, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSweep {
    #[serde(rename = "J")]
    pub j: Vec<String>,
    pub n: u64,
    pub k: u64,
    pub s1: u64,
    pub mle: MleFit,
    pub estimates: Vec<PopulationEstimate>,
    pub points: Vec<RiskUtilityPoint>,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub subsets: Vec<SubsetSweep>,
    /// Subsets left out, with the reason.
    pub skipped: Vec<(Vec<String>, String)>,
}

impl SweepResult {
    pub fn points(&self) -> Vec<RiskUtilityPoint> {
        self.subsets.iter().flat_map(|s| s.points.iter().cloned()).collect()
    }
}

pub fn release_id(j: &[String], swap_count: usize, seed: u64, n_pop: f64) -> String {
    format!("{}|swaps={swap_count}|seed={seed}|N={n_pop:e}", j.join("+"))
}

/// Release that swaps exactly the categories in `j`.
pub fn release_for(categories: &[String], j: &[String], config: &SweepConfig, swap_count: usize) -> Release {
    let roles = categories
        .iter()
        .map(|c| {
            let role = if j.contains(c) {
                Role::S
            } else {
                match config.roles.get(c) {
                    Some(Role::S) | None => Role::U,
                    Some(r) => *r,
                }
            };
            (c.clone(), role)
        })
        .collect();
    Release {
        swap_count,
        roles,
        constraints: Constraints {
            cross_document: true,
            same_cluster: config.same_cluster,
        },
        seed: config.seed,
    }
}

/// One sequential run for subset `j`, scored at every prefix and every N,
/// plus the zero-swap anchor.
pub fn sweep_subset<E: Embedder>(pipeline: &Pipeline<'_, E>, j: &[String], config: &SweepConfig) -> Result<SubsetSweep> {
    let marginal = marginalize(pipeline.table(), j)?;
    let counts = frequency_counts(&marginal);
    if counts.s1() == 0 {
        return Err(Error::Undefined("marginal has no sample uniques"));
    }
    let mle = fit_mle(&counts)?;
    let estimates = config
        .n_pops
        .iter()
        .map(|&n_pop| pop_unique_ratio(&mle.params, n_pop, counts.n(), counts.s1()))
        .collect::<Result<Vec<_>>>()?;

    let categories = pipeline.corpus().categories();
    let release = release_for(categories, j, config, config.max_swaps);
    let run = pipeline.run(&release)?;
    let n = pipeline.corpus().len() as f64;
    let mut cache = BTreeMap::new();
    let mut points = Vec::new();
    for est in &estimates {
        points.push(RiskUtilityPoint {
            release_id: release_id(j, 0, config.seed, est.n_pop),
            j: j.to_vec(),
            swap_count: 0,
            r: 0.0,
            du: 1.0,
            dr: 1.0,
            seed: config.seed,
            n_pop: est.n_pop,
        });
    }
    for state in &run.states {
        let du = pipeline.utility(state, &mut cache)?;
        let t = state.swap_count();
        for est in &estimates {
            points.push(RiskUtilityPoint {
                release_id: release_id(j, t, config.seed, est.n_pop),
                j: j.to_vec(),
                swap_count: t,
                r: 2.0 * t as f64 / n,
                du,
                dr: data_risk(&marginal, &state.swapped_chunk_ids, est.p_hat)?,
                seed: config.seed,
                n_pop: est.n_pop,
            });
        }
    }
    points.sort_by(|x, y| x.n_pop.total_cmp(&y.n_pop).then(x.swap_count.cmp(&y.swap_count)));
    Ok(SubsetSweep {
        j: j.to_vec(),
        n: counts.n(),
        k: counts.k(),
        s1: counts.s1(),
        mle,
        estimates,
        points,
        exhausted: run.exhausted,
    })
}

/// Checks the sweep configuration against the corpus categories.
pub fn validate_sweep(categories: &[String], config: &SweepConfig) -> Result<()> {
    for c in config.eligible.iter().chain(config.roles.keys()) {
        if !categories.contains(c) {
            return Err(Error::UnknownCategory(c.clone()));
        }
    }
    if config.subset_size == 0 || config.subset_size > config.eligible.len() {
        return Err(Error::Domain(format!(
            "subset size {} with {} eligible categories",
            config.subset_size,
            config.eligible.len()
        )));
    }
    if config.n_pops.is_empty() {
        return Err(Error::Empty("population sizes"));
    }
    Ok(())
}

/// Per-subset outcome: the sweep or the reason it was skipped.
pub fn collect_sweep(outcomes: Vec<(Vec<String>, Result<SubsetSweep>)>) -> SweepResult {
    let mut result = SweepResult {
        subsets: Vec::new(),
        skipped: Vec::new(),
    };
    for (j, outcome) in outcomes {
        match outcome {
            Ok(s) => result.subsets.push(s),
            Err(e) => {
                log::warn!("skipping {}: {e}", j.join("+"));
                result.skipped.push((j, format!("{e}")));
            }
        }
    }
    result
}

/// Sweeps every subset in turn.
pub fn sweep<E: Embedder>(pipeline: &Pipeline<'_, E>, config: &SweepConfig) -> Result<SweepResult> {
    validate_sweep(pipeline.corpus().categories(), config)?;
    let outcomes = subsets(&config.eligible, config.subset_size)
        .into_iter()
        .map(|j| {
            let r = sweep_subset(pipeline, &j, config);
            (j, r)
        })
        .collect();
    Ok(collect_sweep(outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::CellKey;
    use crate::corpus::Chunk;
    use crate::mixture::{ComponentParams, Family};
    use alloc::string::ToString;
    use alloc::vec;

    fn point(du: f64, dr: f64, swaps: usize) -> RiskUtilityPoint {
        RiskUtilityPoint {
            release_id: format!("{du}/{dr}/{swaps}"),
            j: vec![],
            swap_count: swaps,
            r: 0.0,
            du,
            dr,
            seed: 0,
            n_pop: 1e10,
        }
    }

    #[test]
    fn frontier_drops_dominated() {
        let pts = [point(1.0, 1.0, 0), point(0.95, 0.85, 1), point(0.9, 0.8, 2), point(0.9, 0.9, 3)];
        let f = frontier(&pts);
        let ids: Vec<(f64, f64)> = f.iter().map(|p| (p.du, p.dr)).collect();
        assert_eq!(ids, vec![(1.0, 1.0), (0.95, 0.85), (0.9, 0.8)]);
        assert_eq!(frontier(&pts[..1]).len(), 1);
    }

    #[test]
    fn selection_limits_and_ties() {
        let f = frontier(&[point(1.0, 1.0, 0), point(0.95, 0.85, 1), point(0.9, 0.8, 2)]);
        assert_eq!(optimal_release(&f, &TradeoffLine::new(1e9, 0.0).unwrap()).unwrap().swap_count, 0);
        assert_eq!(optimal_release(&f, &TradeoffLine::new(1e-9, 0.0).unwrap()).unwrap().swap_count, 2);
        // DR − DU: 0, −0.1, −0.1 → tie, higher DU wins
        assert_eq!(optimal_release(&f, &TradeoffLine::new(1.0, 0.0).unwrap()).unwrap().swap_count, 1);
        assert!(TradeoffLine::new(0.0, 0.0).is_err());
        assert!(optimal_release(&[], &TradeoffLine::new(1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn risk_cap_filter() {
        let pts = [point(1.0, 1.0, 0), point(0.95, 0.85, 1), point(0.9, 0.8, 2)];
        assert_eq!(best_under_risk_cap(&pts, 0.9).unwrap().swap_count, 1);
        assert!(best_under_risk_cap(&pts, 0.5).is_none());
    }

    fn singleton_table(ids: &[&str]) -> ContingencyTable {
        let chunks = ids
            .iter()
            .map(|id| Chunk {
                id: id.to_string(),
                doc_id: id.to_string(),
                text: id.to_string(),
                entities: [("Organization".to_string(), vec![id.to_string()])].into_iter().collect(),
                embedding: None,
            })
            .collect();
        build_table(&Corpus::new(vec!["Organization".into()], 2, chunks).unwrap())
    }

    #[test]
    fn risk_bounds() {
        let ids: Vec<String> = (0..100).map(|i| format!("c{i:03}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let t = singleton_table(&refs);
        assert_eq!(data_risk(&t, &BTreeSet::new(), 0.5).unwrap(), 1.0);
        let two: BTreeSet<String> = ids[..2].iter().cloned().collect();
        assert_eq!(data_risk(&t, &two, 0.5).unwrap(), 0.99);
        let all: BTreeSet<String> = ids.iter().cloned().collect();
        assert_eq!(data_risk(&t, &all, 1.0).unwrap(), 0.0);
        assert!(data_risk(&t, &all, 1.5).is_err());
        assert!(CellKey(vec![]).is_all_empty());
    }

    #[test]
    fn utility_identity_and_decrease() {
        let model = MixtureModel::new(
            Family::Pkb,
            vec![1.0],
            vec![ComponentParams {
                mu: vec![0.0, 0.0, 1.0],
                rho: 0.5,
            }],
            0.0,
        )
        .unwrap();
        let pre = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.6, 0.8]];
        let labels = Memberships(vec![0, 0]);
        assert_eq!(data_utility(&model, &labels, &pre, &pre).unwrap(), 1.0);
        let post = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.8, 0.6]];
        assert!(data_utility(&model, &labels, &pre, &post).unwrap() < 1.0);
    }

    #[test]
    fn subsets_of_four_choose_two() {
        let items: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let s = subsets(&items, 2);
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], vec!["a".to_string(), "b".to_string()]);
        assert!(subsets(&items, 5).is_empty());
    }
}
