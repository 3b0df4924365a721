//! File formats: ingest JSON, table and model exports, CSV artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use entswap_core::contingency::{CellValue, ContingencyTable, FrequencyCounts};
use entswap_core::corpus::{Chunk, Corpus};
use entswap_core::evaluation::{Condition, Prediction, PredictionSet};
use entswap_core::mixture::{ComponentParams, Family, MixtureModel};
use entswap_core::risk_utility::{release_id, RiskUtilityPoint};
use entswap_core::swap::SwapRecord;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

#[derive(Deserialize)]
struct RawIngest {
    d: usize,
    categories: Vec<String>,
    chunks: Vec<serde_json::Value>,
}

#[derive(Serialize)]
struct IngestOut<'a> {
    d: usize,
    categories: &'a [String],
    chunks: &'a [Chunk],
}

/// Parses and validates an ingest document. Schema errors name the record.
pub fn parse_corpus(text: &str, origin: &Path) -> Result<Corpus> {
    let raw: RawIngest = serde_json::from_str(text).map_err(|e| AppError::parse(origin, e))?;
    let mut chunks = Vec::with_capacity(raw.chunks.len());
    for (i, value) in raw.chunks.into_iter().enumerate() {
        let id = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(|s| format!("chunks[{i}] (id {s:?})"))
            .unwrap_or_else(|| format!("chunks[{i}]"));
        let chunk: Chunk = serde_json::from_value(value).map_err(|e| {
            AppError::Core(entswap_core::Error::Validation {
                record: id,
                reason: e.to_string(),
            })
        })?;
        chunks.push(chunk);
    }
    Ok(Corpus::new(raw.categories, raw.d, chunks)?)
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(&read_to_string(path)?, path)
}

pub fn corpus_json(corpus: &Corpus) -> String {
    to_json(&IngestOut {
        d: corpus.dim(),
        categories: corpus.categories(),
        chunks: corpus.chunks(),
    })
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_string(path, &corpus_json(corpus))
}

#[derive(Serialize)]
struct TableRow<'a> {
    /// `null` marks a category without entities.
    key: Vec<Option<&'a str>>,
    count: usize,
    chunk_ids: &'a [String],
}

pub fn table_json(table: &ContingencyTable) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        categories: &'a [String],
        n: usize,
        cells: Vec<TableRow<'a>>,
    }
    let cells = table
        .cells()
        .iter()
        .map(|(k, c)| TableRow {
            key: k
                .values()
                .iter()
                .map(|v| match v {
                    CellValue::Empty => None,
                    CellValue::Value(s) => Some(s.as_str()),
                })
                .collect(),
            count: c.count,
            chunk_ids: &c.chunk_ids,
        })
        .collect();
    to_json(&Out {
        categories: table.categories(),
        n: table.n(),
        cells,
    })
}

pub fn frequency_csv(counts: &FrequencyCounts) -> String {
    let mut out = String::from("j,s_j\n");
    for (j, s) in counts.iter() {
        out.push_str(&format!("{j},{s}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: Family,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentParams>,
}

impl From<&MixtureModel> for ModelFile {
    fn from(m: &MixtureModel) -> Self {
        ModelFile {
            family: m.family(),
            k: m.k(),
            eps: m.eps(),
            weights: m.weights().to_vec(),
            components: m.components().to_vec(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<MixtureModel> {
        if self.k != self.weights.len() {
            return Err(entswap_core::Error::LengthMismatch {
                expected: self.k,
                got: self.weights.len(),
            }
            .into());
        }
        Ok(MixtureModel::new(self.family, self.weights, self.components, self.eps)?)
    }
}

pub fn model_json(model: &MixtureModel) -> String {
    to_json(&ModelFile::from(model))
}

pub fn read_model(path: &Path) -> Result<MixtureModel> {
    let file: ModelFile = serde_json::from_str(&read_to_string(path)?).map_err(|e| AppError::parse(path, e))?;
    file.into_model()
}

pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iter,loglik\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

/// One sweep CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "J")]
    pub j: String,
    pub swap_count: usize,
    pub r: f64,
    #[serde(rename = "DU")]
    pub du: f64,
    #[serde(rename = "DR")]
    pub dr: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n_pop: f64,
    pub family: Family,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
}

pub const SUBSET_SEPARATOR: char = '+';

impl SweepRow {
    pub fn new(p: &RiskUtilityPoint, family: Family, k: usize, eps: f64) -> Self {
        SweepRow {
            j: p.j.join(&SUBSET_SEPARATOR.to_string()),
            swap_count: p.swap_count,
            r: p.r,
            du: p.du,
            dr: p.dr,
            seed: p.seed,
            n_pop: p.n_pop,
            family,
            k,
            eps,
        }
    }

    pub fn point(&self) -> RiskUtilityPoint {
        let j: Vec<String> = self.j.split(SUBSET_SEPARATOR).map(str::to_string).collect();
        RiskUtilityPoint {
            release_id: release_id(&j, self.swap_count, self.seed, self.n_pop),
            j,
            swap_count: self.swap_count,
            r: self.r,
            du: self.du,
            dr: self.dr,
            seed: self.seed,
            n_pop: self.n_pop,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| AppError::Config(e.to_string()))?;
    }
    // an empty sweep still gets its header
    if rows.is_empty() {
        return Ok("J,swap_count,r,DU,DR,seed,N,family,K,eps\n".into());
    }
    let bytes = w.into_inner().map_err(|e| AppError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| AppError::parse(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn swap_log_jsonl(records: &[SwapRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub chunk_id: String,
    pub predicted: String,
    pub truth: String,
    pub condition: String,
    pub run: u32,
}

pub fn predictions_csv(rows: &[PredictionRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

/// Reads prediction rows and groups them into sets keyed by (condition, run).
pub fn read_predictions(paths: &[impl AsRef<Path>]) -> Result<BTreeMap<(Condition, u32), PredictionSet>> {
    let mut grouped: BTreeMap<(Condition, u32), Vec<Prediction>> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let text = read_to_string(path)?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for (i, row) in reader.deserialize::<PredictionRow>().enumerate() {
            let row = row.map_err(|e| AppError::parse(path, format!("row {}: {e}", i + 1)))?;
            let condition: Condition = row
                .condition
                .parse()
                .map_err(|e| AppError::parse(path, format!("row {}: {e}", i + 1)))?;
            grouped.entry((condition, row.run)).or_default().push(Prediction {
                chunk_id: row.chunk_id,
                predicted: row.predicted,
                truth: row.truth,
            });
        }
    }
    grouped
        .into_iter()
        .map(|((c, r), entries)| Ok(((c, r), PredictionSet::new(entries, c, r)?)))
        .collect()
}

pub fn json<T: Serialize>(value: &T) -> String {
    to_json(value)
}
