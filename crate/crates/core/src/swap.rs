//! Named-entity swapping between chunks of different documents.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::contingency::{build_table, CellKey, CellValue, ContingencyTable};
use crate::corpus::{validate_placeholder, Chunk, Corpus};
use crate::error::{Error, Result};
use crate::mixture::Memberships;

/// Role of a category in a release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    /// swapped
    S,
    /// must remain fixed
    F,
    /// must change: suppressed to a placeholder
    C,
    /// unconstrained
    U,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::S => "S",
            Role::F => "F",
            Role::C => "C",
            Role::U => "U",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S" | "s" => Ok(Role::S),
            "F" | "f" => Ok(Role::F),
            "C" | "c" => Ok(Role::C),
            "U" | "u" => Ok(Role::U),
            other => Err(Error::Domain(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub cross_document: bool,
    pub same_cluster: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            cross_document: true,
            same_cluster: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Release {
    pub swap_count: usize,
    pub roles: BTreeMap<String, Role>,
    #[serde(default)]
    pub constraints: Constraints,
    pub seed: u64,
}

impl Release {
    /// Categories with role S, in corpus category order.
    pub fn swapped_categories(&self, categories: &[String]) -> Vec<String> {
        categories
            .iter()
            .filter(|c| self.roles.get(*c) == Some(&Role::S))
            .cloned()
            .collect()
    }

    pub fn validate(&self, categories: &[String]) -> Result<()> {
        for c in categories {
            if !self.roles.contains_key(c) {
                return Err(Error::validation("release", format!("no role for category {c:?}")));
            }
        }
        for c in self.roles.keys() {
            if !categories.contains(c) {
                return Err(Error::UnknownCategory(c.clone()));
            }
        }
        if !self.constraints.cross_document {
            return Err(Error::validation("release", "swaps must be cross-document"));
        }
        if self.swap_count > 0 && self.swapped_categories(categories).is_empty() {
            return Err(Error::validation("release", "swap_count > 0 needs at least one S category"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapRecord {
    /// 1-based position of the swap within its run.
    pub step: usize,
    pub chunk_a: String,
    pub chunk_b: String,
    pub category: String,
    /// `(entity leaving a, entity leaving b)`.
    pub substitutions: Vec<(String, String)>,
    /// Entities of either chunk that were not exchanged.
    pub leftovers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapState {
    pub corpus: Corpus,
    pub table: ContingencyTable,
    pub records: Vec<SwapRecord>,
    /// Chunks touched by a swap; their embeddings are stale (removed).
    pub swapped_chunk_ids: BTreeSet<String>,
    steps: usize,
}

impl SwapState {
    pub fn new(corpus: Corpus) -> Self {
        let table = build_table(&corpus);
        SwapState {
            corpus,
            table,
            records: Vec::new(),
            swapped_chunk_ids: BTreeSet::new(),
            steps: 0,
        }
    }

    /// Completed swaps.
    pub fn swap_count(&self) -> usize {
        self.steps
    }
}

fn key_of(chunk: &Chunk, categories: &[String]) -> CellKey {
    CellKey::of_chunk(chunk, categories)
}

/// All unordered index pairs `(i, j)`, `i < j`, eligible for a swap under
/// the release: different documents, same cluster when required, some
/// unswapped category differs, some swapped category differs, and neither
/// chunk is empty in every swapped category.
pub fn valid_pairs(corpus: &Corpus, memberships: Option<&Memberships>, release: &Release) -> Result<Vec<(usize, usize)>> {
    release.validate(corpus.categories())?;
    let categories = corpus.categories();
    let s_pos: Vec<usize> = (0..categories.len())
        .filter(|&i| release.roles.get(&categories[i]) == Some(&Role::S))
        .collect();
    if s_pos.is_empty() {
        return Ok(Vec::new());
    }
    let other_pos: Vec<usize> = (0..categories.len()).filter(|i| !s_pos.contains(i)).collect();
    let labels = if release.constraints.same_cluster {
        let m = memberships.ok_or(Error::Undefined("same-cluster constraint without memberships"))?;
        if m.len() != corpus.len() {
            return Err(Error::LengthMismatch {
                expected: corpus.len(),
                got: m.len(),
            });
        }
        Some(m.as_slice())
    } else {
        None
    };
    let keys: Vec<CellKey> = corpus.chunks().iter().map(|c| key_of(c, categories)).collect();
    let eligible: Vec<bool> = keys.iter().map(|k| s_pos.iter().any(|&i| !k.0[i].is_empty())).collect();
    let chunks = corpus.chunks();
    let mut out = Vec::new();
    for i in 0..chunks.len() {
        if !eligible[i] {
            continue;
        }
        for j in i + 1..chunks.len() {
            if !eligible[j] || chunks[i].doc_id == chunks[j].doc_id {
                continue;
            }
            if let Some(l) = labels {
                if l[i] != l[j] {
                    continue;
                }
            }
            let (a, b) = (&keys[i].0, &keys[j].0);
            if other_pos.iter().any(|&p| a[p] != b[p]) && s_pos.iter().any(|&p| a[p] != b[p]) {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

fn annotation_count(chunk: &Chunk, s: &str) -> usize {
    chunk.entities.values().flatten().filter(|e| e.as_str() == s).count()
}

/// Rewrites `text` replacing, at every position, the longest key of
/// `mapping` that matches there. Identity entries protect spans.
fn substitute(text: &str, mapping: &BTreeMap<&str, &str>) -> String {
    let mut keys: Vec<(&str, &str)> = mapping.iter().map(|(k, v)| (*k, *v)).filter(|(k, _)| !k.is_empty()).collect();
    keys.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        if let Some((k, v)) = keys.iter().find(|(k, _)| rest.starts_with(*k)) {
            out.push_str(v);
            i += k.len();
        } else {
            let ch = rest.chars().next().unwrap_or_default();
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

fn check_integrity(chunk: &Chunk) -> Result<()> {
    for e in chunk.entities.values().flatten() {
        if !chunk.text.contains(e.as_str()) {
            return Err(Error::Integrity {
                chunk: chunk.id.clone(),
                entity: e.clone(),
            });
        }
    }
    Ok(())
}

/// Exchanges the swapped-category entities of two chunks.
///
/// Within each category the lists are paired by position; unpaired entries
/// stay. A pair is exchanged only when each surface string is annotated
/// exactly once in its own chunk, so that replacing every occurrence in the
/// text keeps annotations and text in sync. Substitution is simultaneous
/// and longest-match-first with the chunk's other annotations protected.
///
/// On error the state is left unchanged.
pub fn apply_swap(state: &mut SwapState, pair: (usize, usize), s_categories: &[String]) -> Result<Vec<SwapRecord>> {
    let (ia, ib) = pair;
    let n = state.corpus.len();
    if ia >= n || ib >= n || ia == ib {
        return Err(Error::Domain(format!("invalid swap pair ({ia}, {ib})")));
    }
    let categories = state.corpus.categories().to_vec();
    for c in s_categories {
        state.corpus.category_index(c)?;
    }
    let old_a = &state.corpus.chunks()[ia];
    let old_b = &state.corpus.chunks()[ib];
    if old_a.doc_id == old_b.doc_id {
        return Err(Error::Domain(format!("chunks {} and {} share a document", old_a.id, old_b.id)));
    }
    check_integrity(old_a)?;
    check_integrity(old_b)?;

    let step = state.steps + 1;
    let mut records = Vec::new();
    let mut map_a: BTreeMap<&str, &str> = BTreeMap::new();
    let mut map_b: BTreeMap<&str, &str> = BTreeMap::new();
    let mut new_lists: Vec<(String, Vec<String>, Vec<String>)> = Vec::new();
    for cat in s_categories {
        let la = old_a.entities_of(cat);
        let lb = old_b.entities_of(cat);
        let mut na = la.to_vec();
        let mut nb = lb.to_vec();
        let mut substitutions = Vec::new();
        let mut leftovers = Vec::new();
        for t in 0..la.len().max(lb.len()) {
            match (la.get(t), lb.get(t)) {
                (Some(x), Some(y)) if annotation_count(old_a, x) == 1 && annotation_count(old_b, y) == 1 => {
                    map_a.insert(x, y);
                    map_b.insert(y, x);
                    na[t] = y.clone();
                    nb[t] = x.clone();
                    substitutions.push((x.clone(), y.clone()));
                }
                (x, y) => leftovers.extend(x.into_iter().chain(y).cloned()),
            }
        }
        records.push(SwapRecord {
            step,
            chunk_a: old_a.id.clone(),
            chunk_b: old_b.id.clone(),
            category: cat.clone(),
            substitutions,
            leftovers,
        });
        new_lists.push((cat.clone(), na, nb));
    }
    for e in old_a.entities.values().flatten() {
        map_a.entry(e).or_insert(e);
    }
    for e in old_b.entities.values().flatten() {
        map_b.entry(e).or_insert(e);
    }

    let mut new_a = old_a.clone();
    let mut new_b = old_b.clone();
    new_a.text = substitute(&old_a.text, &map_a);
    new_b.text = substitute(&old_b.text, &map_b);
    for (cat, na, nb) in new_lists {
        if !na.is_empty() {
            new_a.entities.insert(cat.clone(), na);
        }
        if !nb.is_empty() {
            new_b.entities.insert(cat, nb);
        }
    }
    new_a.embedding = None;
    new_b.embedding = None;
    check_integrity(&new_a)?;
    check_integrity(&new_b)?;

    let (key_a, key_b) = (key_of(old_a, &categories), key_of(old_b, &categories));
    let (to_a, to_b) = (key_of(&new_a, &categories), key_of(&new_b, &categories));
    let (id_a, id_b) = (new_a.id.clone(), new_b.id.clone());
    state.table.move_chunk(&id_a, &key_a, to_a)?;
    state.table.move_chunk(&id_b, &key_b, to_b)?;
    let chunks = state.corpus.chunks_mut();
    chunks[ia] = new_a;
    chunks[ib] = new_b;
    state.swapped_chunk_ids.insert(id_a);
    state.swapped_chunk_ids.insert(id_b);
    state.records.extend(records.iter().cloned());
    state.steps = step;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapRun {
    pub initial: SwapState,
    /// State after each completed swap.
    pub states: Vec<SwapState>,
    /// True when the run stopped early for lack of valid pairs.
    pub exhausted: bool,
}

impl SwapRun {
    /// State after the last completed swap (the initial state if none).
    pub fn last(&self) -> &SwapState {
        self.states.last().unwrap_or(&self.initial)
    }
}

/// Applies up to `release.swap_count` swaps one at a time. Each swap draws
/// a pair uniformly from the valid pairs whose chunks have not been swapped
/// yet in this run.
pub fn sequential_swap(corpus: &Corpus, memberships: Option<&Memberships>, release: &Release) -> Result<SwapRun> {
    let initial = SwapState::new(corpus.clone());
    let mut run = SwapRun {
        initial,
        states: Vec::new(),
        exhausted: false,
    };
    release.validate(corpus.categories())?;
    if release.swap_count == 0 {
        return Ok(run);
    }
    let s_categories = release.swapped_categories(corpus.categories());
    let mut pairs = valid_pairs(corpus, memberships, release)?;
    let mut rng = ChaCha20Rng::seed_from_u64(release.seed);
    let mut state = run.initial.clone();
    let mut used = alloc::vec![false; corpus.len()];
    while run.states.len() < release.swap_count {
        if pairs.is_empty() {
            log::warn!(
                "ran out of swappable pairs after {} of {} swaps",
                run.states.len(),
                release.swap_count
            );
            run.exhausted = true;
            break;
        }
        let pick = pairs[rng.random_range(0..pairs.len())];
        apply_swap(&mut state, pick, &s_categories)?;
        used[pick.0] = true;
        used[pick.1] = true;
        pairs.retain(|&(i, j)| !used[i] && !used[j]);
        run.states.push(state.clone());
    }
    Ok(run)
}

/// Outcome of suppressing one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySuppression {
    pub corpus: Corpus,
    /// Chunks whose text contained entities of the category.
    pub chunks_changed: usize,
    /// Annotations of other categories that lived only inside a suppressed span.
    pub entities_dropped: usize,
}

/// Replaces every entity of `category` by `placeholder` in the text.
/// A chunk that had entities of the category keeps the single entity
/// `placeholder`, so its key value becomes the placeholder constant.
pub fn suppress_category(corpus: &Corpus, category: &str, placeholder: &str) -> Result<CategorySuppression> {
    corpus.category_index(category)?;
    validate_placeholder(placeholder)?;
    let mut chunks = corpus.chunks().to_vec();
    let mut chunks_changed = 0;
    let mut entities_dropped = 0;
    for chunk in &mut chunks {
        let targets: Vec<String> = chunk.entities_of(category).to_vec();
        if targets.is_empty() {
            continue;
        }
        let mut mapping: BTreeMap<&str, &str> = BTreeMap::new();
        for t in &targets {
            mapping.insert(t.as_str(), placeholder);
        }
        for (cat, list) in &chunk.entities {
            if cat != category {
                for e in list {
                    mapping.entry(e.as_str()).or_insert(e.as_str());
                }
            }
        }
        let text = substitute(&chunk.text, &mapping);
        if text != chunk.text {
            chunks_changed += 1;
        }
        chunk.text = text;
        chunk.entities.insert(category.to_string(), alloc::vec![placeholder.to_string()]);
        for list in chunk.entities.values_mut() {
            let before = list.len();
            list.retain(|e| chunk.text.contains(e.as_str()));
            entities_dropped += before - list.len();
        }
        chunk.entities.retain(|_, l| !l.is_empty());
    }
    Ok(CategorySuppression {
        corpus: Corpus::from_parts_unchecked(corpus.categories().to_vec(), corpus.dim(), chunks),
        chunks_changed,
        entities_dropped,
    })
}

/// True when the cell value of `category` is the placeholder constant or ∅
/// for every chunk.
pub fn is_suppressed(corpus: &Corpus, category: &str, placeholder: &str) -> bool {
    corpus.chunks().iter().all(|c| {
        let v = CellValue::encode(c.entities_of(category));
        v.is_empty() || v == CellValue::Value(placeholder.to_string())
    })
}
