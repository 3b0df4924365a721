//! Chunk records, corpus validation, direct-identifier suppression and
//! breakpoint-based semantic chunking.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Allowed deviation of an embedding norm from 1 at ingest.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// One text unit. `doc_id` is the metadata the corpus protects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    /// Category name to entity surface strings, in annotation order.
    #[serde(default)]
    pub entities: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl Chunk {
    /// Entities of `category`, empty when the chunk has none.
    pub fn entities_of(&self, category: &str) -> &[String] {
        self.entities.get(category).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    chunks: Vec<Chunk>,
    categories: Vec<String>,
    d: usize,
}

impl Corpus {
    /// Builds a corpus, checking every chunk invariant. Chunk order is kept.
    pub fn new(categories: Vec<String>, d: usize, chunks: Vec<Chunk>) -> Result<Self> {
        let mut seen_categories = BTreeSet::new();
        for c in &categories {
            if c.is_empty() || !seen_categories.insert(c.as_str()) {
                return Err(Error::validation("categories", format!("empty or duplicate category {c:?}")));
            }
        }
        let mut ids = BTreeSet::new();
        for chunk in &chunks {
            if !ids.insert(chunk.id.as_str()) {
                return Err(Error::validation(&chunk.id, "duplicate chunk id"));
            }
            validate_chunk(chunk, &seen_categories, d)?;
        }
        Ok(Corpus { chunks, categories, d })
    }

    pub(crate) fn from_parts_unchecked(categories: Vec<String>, d: usize, chunks: Vec<Chunk>) -> Self {
        Corpus { chunks, categories, d }
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub(crate) fn chunks_mut(&mut self) -> &mut [Chunk] {
        &mut self.chunks
    }

    pub fn into_chunks(self) -> Vec<Chunk> {
        self.chunks
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Number of distinct documents (`m`).
    pub fn num_documents(&self) -> usize {
        self.chunks.iter().map(|c| c.doc_id.as_str()).collect::<BTreeSet<_>>().len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.chunks.iter().position(|c| c.id == id)
    }

    pub fn category_index(&self, category: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c == category)
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    /// All embeddings in chunk order; errors naming the first chunk without one.
    pub fn embeddings(&self) -> Result<Vec<Vec<f64>>> {
        self.chunks
            .iter()
            .map(|c| {
                c.embedding
                    .clone()
                    .ok_or_else(|| Error::validation(&c.id, "missing embedding"))
            })
            .collect()
    }

    /// Entity totals per category, in category order.
    pub fn entity_counts(&self) -> Vec<(String, usize)> {
        self.categories
            .iter()
            .map(|cat| {
                let total = self.chunks.iter().map(|c| c.entities_of(cat).len()).sum();
                (cat.clone(), total)
            })
            .collect()
    }
}

fn validate_chunk(chunk: &Chunk, categories: &BTreeSet<&str>, d: usize) -> Result<()> {
    if chunk.id.is_empty() {
        return Err(Error::validation("<chunk>", "empty chunk id"));
    }
    if chunk.doc_id.is_empty() {
        return Err(Error::validation(&chunk.id, "empty doc_id"));
    }
    for (category, list) in &chunk.entities {
        if !categories.contains(category.as_str()) {
            return Err(Error::validation(&chunk.id, format!("unknown category {category:?}")));
        }
        for entity in list {
            if entity.is_empty() {
                return Err(Error::validation(&chunk.id, format!("empty entity in {category}")));
            }
            if !chunk.text.contains(entity.as_str()) {
                return Err(Error::validation(
                    &chunk.id,
                    format!("entity {entity:?} ({category}) is not a substring of the text"),
                ));
            }
        }
    }
    if let Some(e) = &chunk.embedding {
        if e.len() != d {
            return Err(Error::validation(
                &chunk.id,
                format!("embedding has dimension {}, expected {d}", e.len()),
            ));
        }
        let norm = math::norm(e);
        if !((norm - 1.0).abs() <= UNIT_NORM_TOLERANCE) {
            return Err(Error::validation(&chunk.id, format!("embedding norm {norm} is not 1")));
        }
    }
    Ok(())
}

/// Something that finds non-overlapping matches in a text and names the
/// placeholder that replaces them.
pub trait Matcher {
    fn placeholder(&self) -> &str;
    /// Non-overlapping byte ranges, left to right.
    fn find_all(&self, haystack: &str) -> Vec<Range<usize>>;
}

/// Literal direct-identifier rule, optionally ASCII case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuppressionRule {
    pub pattern: String,
    pub placeholder: String,
    #[serde(default)]
    pub case_insensitive: bool,
}

impl SuppressionRule {
    pub fn new(pattern: impl Into<String>, placeholder: impl Into<String>, case_insensitive: bool) -> Result<Self> {
        let rule = SuppressionRule {
            pattern: pattern.into(),
            placeholder: placeholder.into(),
            case_insensitive,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pattern.is_empty() {
            return Err(Error::validation("rule", "empty pattern"));
        }
        validate_placeholder(&self.placeholder)
    }
}

pub fn validate_placeholder(placeholder: &str) -> Result<()> {
    if placeholder.len() < 3 || !placeholder.starts_with('[') || !placeholder.ends_with(']') {
        return Err(Error::validation(
            "rule",
            format!("placeholder {placeholder:?} must be non-empty and bracketed"),
        ));
    }
    Ok(())
}

impl Matcher for SuppressionRule {
    fn placeholder(&self) -> &str {
        &self.placeholder
    }

    fn find_all(&self, haystack: &str) -> Vec<Range<usize>> {
        if !self.case_insensitive {
            return haystack
                .match_indices(self.pattern.as_str())
                .map(|(i, m)| i..i + m.len())
                .collect();
        }
        let pat = self.pattern.as_bytes();
        let bytes = haystack.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i + pat.len() <= bytes.len() {
            if haystack.is_char_boundary(i)
                && haystack.is_char_boundary(i + pat.len())
                && bytes[i..i + pat.len()].eq_ignore_ascii_case(pat)
            {
                out.push(i..i + pat.len());
                i += pat.len();
            } else {
                i += 1;
            }
        }
        out
    }
}

impl<M: Matcher + ?Sized> Matcher for &M {
    fn placeholder(&self) -> &str {
        (**self).placeholder()
    }
    fn find_all(&self, haystack: &str) -> Vec<Range<usize>> {
        (**self).find_all(haystack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suppressed {
    pub corpus: Corpus,
    /// Text replacements performed.
    pub replacements: usize,
    /// Entity annotations dropped because they were (part of) a suppressed span.
    pub entities_dropped: usize,
}

/// Replaces every match of every rule by its placeholder, in rule order.
///
/// Existing placeholder occurrences are never matched, so applying the same
/// rules twice is a no-op.
pub fn suppress_direct_identifiers<M: Matcher>(corpus: &Corpus, rules: &[M]) -> Result<Suppressed> {
    if rules.is_empty() {
        return Err(Error::Empty("suppression rules"));
    }
    let placeholders: Vec<&str> = rules.iter().map(|r| r.placeholder()).collect();
    let mut replacements = 0;
    let mut entities_dropped = 0;
    let mut chunks = corpus.chunks.clone();
    for chunk in &mut chunks {
        let mut text = core::mem::take(&mut chunk.text);
        for rule in rules {
            let (next, count) = replace_unprotected(&text, rule, &placeholders);
            text = next;
            replacements += count;
        }
        for list in chunk.entities.values_mut() {
            let before = list.len();
            list.retain(|entity| {
                text.contains(entity.as_str())
                    && rules
                        .iter()
                        .all(|r| replace_unprotected(entity, r, &placeholders).1 == 0)
            });
            entities_dropped += before - list.len();
        }
        chunk.entities.retain(|_, list| !list.is_empty());
        chunk.text = text;
    }
    Ok(Suppressed {
        corpus: Corpus::from_parts_unchecked(corpus.categories.clone(), corpus.d, chunks),
        replacements,
        entities_dropped,
    })
}

fn replace_unprotected<M: Matcher>(text: &str, rule: &M, placeholders: &[&str]) -> (String, usize) {
    let protected: Vec<Range<usize>> = placeholders
        .iter()
        .flat_map(|p| text.match_indices(*p).map(|(i, m)| i..i + m.len()))
        .collect();
    let overlaps = |r: &Range<usize>| protected.iter().any(|p| r.start < p.end && p.start < r.end);
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut count = 0;
    for m in rule.find_all(text) {
        if m.start < last || m.is_empty() || overlaps(&m) {
            continue;
        }
        out.push_str(&text[last..m.start]);
        out.push_str(rule.placeholder());
        last = m.end;
        count += 1;
    }
    out.push_str(&text[last..]);
    (out, count)
}

/// Splits one document's ordered sentences into contiguous chunks.
///
/// A breakpoint follows sentence `i` iff the cosine distance between
/// sentences `i` and `i + 1` is strictly greater than the `threshold`-th
/// percentile (linear interpolation) of all consecutive distances.
pub fn semantic_chunk<E: AsRef<[f64]>>(embeddings: &[E], threshold: f64) -> Result<Vec<Range<usize>>> {
    if embeddings.is_empty() {
        return Err(Error::Empty("sentences"));
    }
    if !(0.0..=100.0).contains(&threshold) {
        return Err(Error::Domain(format!("breakpoint threshold {threshold} outside [0, 100]")));
    }
    let d = embeddings[0].as_ref().len();
    for (i, e) in embeddings.iter().enumerate() {
        let e = e.as_ref();
        if e.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: e.len() });
        }
        if !((math::norm(e) - 1.0).abs() <= UNIT_NORM_TOLERANCE) {
            return Err(Error::validation(format!("sentence {i}"), "embedding is not unit norm"));
        }
    }
    if embeddings.len() == 1 {
        return Ok(alloc::vec![0..1]);
    }
    let distances: Vec<f64> = embeddings
        .windows(2)
        .map(|w| 1.0 - math::dot(w[0].as_ref(), w[1].as_ref()))
        .collect();
    let cut = math::percentile(&distances, threshold);
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &dist) in distances.iter().enumerate() {
        if dist > cut {
            out.push(start..i + 1);
            start = i + 1;
        }
    }
    out.push(start..embeddings.len());
    Ok(out)
}
