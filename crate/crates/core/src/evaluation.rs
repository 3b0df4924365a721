//! Accuracy and McNemar's test for metadata predictions made on pre- and
//! post-swap chunks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Pre,
    Post,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Pre => "pre",
            Condition::Post => "post",
        })
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre" => Ok(Condition::Pre),
            "post" => Ok(Condition::Post),
            other => Err(Error::Domain(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub chunk_id: String,
    pub predicted: String,
    pub truth: String,
}

impl Prediction {
    /// Exact match after trimming and upper-casing both labels.
    pub fn is_correct(&self) -> bool {
        normalize_label(&self.predicted) == normalize_label(&self.truth)
    }
}

pub fn normalize_label(label: &str) -> String {
    label.trim().to_uppercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    entries: Vec<Prediction>,
    pub condition: Condition,
    pub run: u32,
}

impl PredictionSet {
    pub fn new(entries: Vec<Prediction>, condition: Condition, run: u32) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.chunk_id.as_str()) {
                return Err(Error::validation(&e.chunk_id, format!("duplicate chunk id in {condition} run {run}")));
            }
        }
        Ok(PredictionSet { entries, condition, run })
    }

    pub fn entries(&self) -> &[Prediction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn accuracy(preds: &PredictionSet) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("prediction set"));
    }
    let correct = preds.entries.iter().filter(|p| p.is_correct()).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Paired outcomes: `a` both correct, `b` pre correct only, `c` post
/// correct only, `d` both wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairedTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl PairedTable {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn pre_accuracy(&self) -> f64 {
        (self.a + self.b) as f64 / self.total() as f64
    }

    pub fn post_accuracy(&self) -> f64 {
        (self.a + self.c) as f64 / self.total() as f64
    }
}

impl core::ops::Add for PairedTable {
    type Output = PairedTable;

    fn add(self, o: PairedTable) -> PairedTable {
        PairedTable {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
            d: self.d + o.d,
        }
    }
}

impl core::iter::Sum for PairedTable {
    fn sum<I: Iterator<Item = PairedTable>>(iter: I) -> PairedTable {
        iter.fold(PairedTable::default(), |x, y| x + y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub chi_square: f64,
    pub p_value: f64,
    pub exact_p: f64,
}

/// χ² = (b − c)²/(b + c) without continuity correction, its df = 1 upper
/// tail, and the two-sided exact binomial p-value.
pub fn mcnemar(table: &PairedTable) -> Result<McNemar> {
    let (b, c) = (table.b, table.c);
    if b + c == 0 {
        return Err(Error::Undefined("McNemar test with no discordant pairs"));
    }
    let diff = b as f64 - c as f64;
    let chi_square = diff * diff / (b + c) as f64;
    Ok(McNemar {
        chi_square,
        p_value: math::chi2_sf_df1(chi_square),
        exact_p: math::binomial_two_sided_half(b, b + c),
    })
}

/// Counts paired outcomes by chunk id; both sets must cover the same ids.
pub fn pair_predictions(pre: &PredictionSet, post: &PredictionSet) -> Result<PairedTable> {
    let pre_map: BTreeMap<&str, bool> = pre.entries.iter().map(|p| (p.chunk_id.as_str(), p.is_correct())).collect();
    let post_map: BTreeMap<&str, bool> = post.entries.iter().map(|p| (p.chunk_id.as_str(), p.is_correct())).collect();
    let only_pre: Vec<String> = pre_map.keys().filter(|k| !post_map.contains_key(*k)).map(|k| String::from(*k)).collect();
    let only_post: Vec<String> = post_map.keys().filter(|k| !pre_map.contains_key(*k)).map(|k| String::from(*k)).collect();
    if !only_pre.is_empty() || !only_post.is_empty() {
        return Err(Error::IdMismatch { only_pre, only_post });
    }
    let mut t = PairedTable::default();
    for (id, &pre_ok) in &pre_map {
        match (pre_ok, post_map[id]) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn set(rows: &[(&str, &str, &str)], cond: Condition) -> PredictionSet {
        PredictionSet::new(
            rows.iter()
                .map(|(id, p, t)| Prediction {
                    chunk_id: id.to_string(),
                    predicted: p.to_string(),
                    truth: t.to_string(),
                })
                .collect(),
            cond,
            0,
        )
        .unwrap()
    }

    #[test]
    fn accuracy_normalizes_labels() {
        let s = set(&[("1", " amd ", "AMD"), ("2", "X", "Y"), ("3", "a", "A"), ("4", "B", "B")], Condition::Pre);
        assert_eq!(accuracy(&s).unwrap(), 0.75);
        assert!(accuracy(&set(&[], Condition::Pre)).is_err());
    }

    #[test]
    fn mcnemar_symmetric_and_balanced() {
        let t = PairedTable { a: 0, b: 5, c: 5, d: 0 };
        let m = mcnemar(&t).unwrap();
        assert_eq!(m.chi_square, 0.0);
        assert_eq!(m.p_value, 1.0);
        let x = mcnemar(&PairedTable { a: 1, b: 9, c: 2, d: 0 }).unwrap();
        let y = mcnemar(&PairedTable { a: 1, b: 2, c: 9, d: 0 }).unwrap();
        assert_eq!(x.chi_square, y.chi_square);
        assert_eq!(x.exact_p, y.exact_p);
        assert!(mcnemar(&PairedTable { a: 3, b: 0, c: 0, d: 1 }).is_err());
    }

    #[test]
    fn pairing_requires_same_ids() {
        let pre = set(&[("1", "A", "A"), ("2", "B", "A")], Condition::Pre);
        let post = set(&[("1", "C", "A"), ("2", "A", "A")], Condition::Post);
        assert_eq!(pair_predictions(&pre, &post).unwrap(), PairedTable { a: 0, b: 1, c: 1, d: 0 });
        let other = set(&[("3", "A", "A")], Condition::Post);
        match pair_predictions(&pre, &other) {
            Err(Error::IdMismatch { only_pre, only_post }) => {
                assert_eq!(only_pre, vec!["1".to_string(), "2".to_string()]);
                assert_eq!(only_post, vec!["3".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let rows = vec![
            Prediction {
                chunk_id: "1".into(),
                predicted: "A".into(),
                truth: "A".into(),
            };
            2
        ];
        assert!(PredictionSet::new(rows, Condition::Pre, 0).is_err());
    }
}
