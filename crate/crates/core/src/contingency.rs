//! Sparse p-way named-entity contingency tables.
//!
//! Each chunk lands in exactly one cell. A cell is keyed by one value per
//! category: either [`CellValue::Empty`] (no entity of that category) or the
//! alphabetically sorted, `" & "`-joined set of the chunk's entity strings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, Corpus};
use crate::error::{Error, Result};

pub const VALUE_SEPARATOR: &str = " & ";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CellValue {
    Empty,
    Value(String),
}

impl CellValue {
    /// Canonical value for a list of entity strings.
    pub fn encode<S: AsRef<str>>(entities: &[S]) -> CellValue {
        if entities.is_empty() {
            return CellValue::Empty;
        }
        let set: BTreeSet<&str> = entities.iter().map(AsRef::as_ref).collect();
        CellValue::Value(set.into_iter().collect::<Vec<_>>().join(VALUE_SEPARATOR))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Empty)
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Empty => f.write_str("∅"),
            CellValue::Value(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey(pub Vec<CellValue>);

impl CellKey {
    pub fn of_chunk(chunk: &Chunk, categories: &[String]) -> CellKey {
        CellKey(categories.iter().map(|c| CellValue::encode(chunk.entities_of(c))).collect())
    }

    pub fn values(&self) -> &[CellValue] {
        &self.0
    }

    pub fn is_all_empty(&self) -> bool {
        self.0.iter().all(CellValue::is_empty)
    }

    fn project(&self, positions: &[usize]) -> CellKey {
        CellKey(positions.iter().map(|&i| self.0[i].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub count: usize,
    /// Sorted, so tables compare equal regardless of construction order.
    pub chunk_ids: Vec<String>,
}

impl Cell {
    fn insert(&mut self, id: String) {
        let pos = self.chunk_ids.binary_search(&id).unwrap_or_else(|p| p);
        self.chunk_ids.insert(pos, id);
        self.count += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    categories: Vec<String>,
    cells: BTreeMap<CellKey, Cell>,
    n: usize,
}

impl ContingencyTable {
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn p(&self) -> usize {
        self.categories.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &BTreeMap<CellKey, Cell> {
        &self.cells
    }

    pub fn get(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.get(key)
    }

    fn add(&mut self, key: CellKey, id: String) {
        self.cells.entry(key).or_default().insert(id);
        self.n += 1;
    }

    /// Moves a chunk between cells, dropping the source cell when it empties.
    pub fn move_chunk(&mut self, id: &str, from: &CellKey, to: CellKey) -> Result<()> {
        let cell = self
            .cells
            .get_mut(from)
            .ok_or_else(|| Error::validation(id, "source cell not present in table"))?;
        let pos = cell
            .chunk_ids
            .binary_search_by(|x| x.as_str().cmp(id))
            .map_err(|_| Error::validation(id, "chunk not in its recorded cell"))?;
        cell.chunk_ids.remove(pos);
        cell.count -= 1;
        if cell.count == 0 {
            self.cells.remove(from);
        }
        self.n -= 1;
        self.add(to, id.to_string());
        Ok(())
    }
}

/// One cell increment per chunk under the canonical key.
pub fn build_table(corpus: &Corpus) -> ContingencyTable {
    let categories = corpus.categories().to_vec();
    let mut table = ContingencyTable {
        categories,
        cells: BTreeMap::new(),
        n: 0,
    };
    for chunk in corpus.chunks() {
        let key = CellKey::of_chunk(chunk, &table.categories);
        table.add(key, chunk.id.clone());
    }
    table
}

/// Sums cells over the categories outside `keep`. The result lists the kept
/// categories in the table's own order.
pub fn marginalize<S: AsRef<str>>(table: &ContingencyTable, keep: &[S]) -> Result<ContingencyTable> {
    if keep.is_empty() {
        return Err(Error::Empty("marginal category set"));
    }
    for c in keep {
        if !table.categories.iter().any(|t| t == c.as_ref()) {
            return Err(Error::UnknownCategory(c.as_ref().to_string()));
        }
    }
    let positions: Vec<usize> = (0..table.p())
        .filter(|&i| keep.iter().any(|c| c.as_ref() == table.categories[i]))
        .collect();
    let mut out = ContingencyTable {
        categories: positions.iter().map(|&i| table.categories[i].clone()).collect(),
        cells: BTreeMap::new(),
        n: 0,
    };
    for (key, cell) in &table.cells {
        let target = out.cells.entry(key.project(&positions)).or_default();
        target.count += cell.count;
        target.chunk_ids.extend(cell.chunk_ids.iter().cloned());
        out.n += cell.count;
    }
    for cell in out.cells.values_mut() {
        cell.chunk_ids.sort_unstable();
    }
    Ok(out)
}

/// Frequency-of-frequency counts: `s[j]` cells hold exactly `j` chunks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrequencyCounts {
    s: BTreeMap<u64, u64>,
    k: u64,
    n: u64,
}

impl FrequencyCounts {
    /// From a sparse `j → s_j` map; zero entries are dropped.
    pub fn new(s: BTreeMap<u64, u64>) -> Result<Self> {
        if s.contains_key(&0) {
            return Err(Error::Domain("frequency class j = 0".into()));
        }
        let s: BTreeMap<u64, u64> = s.into_iter().filter(|&(_, c)| c > 0).collect();
        let k = s.values().sum();
        let n = s.iter().map(|(j, c)| j * c).sum();
        Ok(FrequencyCounts { s, k, n })
    }

    /// From raw cell sizes (zeros ignored).
    pub fn from_cell_sizes<I: IntoIterator<Item = u64>>(sizes: I) -> Self {
        let mut s = BTreeMap::new();
        for size in sizes.into_iter().filter(|&x| x > 0) {
            *s.entry(size).or_insert(0) += 1;
        }
        FrequencyCounts::new(s).expect("sizes are positive")
    }

    pub fn s(&self, j: u64) -> u64 {
        self.s.get(&j).copied().unwrap_or(0)
    }

    pub fn s1(&self) -> u64 {
        self.s(1)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.s.iter().map(|(&j, &c)| (j, c))
    }
}

pub fn frequency_counts(table: &ContingencyTable) -> FrequencyCounts {
    FrequencyCounts::from_cell_sizes(table.cells.values().map(|c| c.count as u64))
}

/// Ids of chunks alone in their cell.
pub fn sample_uniques(table: &ContingencyTable) -> BTreeSet<String> {
    table
        .cells
        .values()
        .filter(|c| c.count == 1)
        .flat_map(|c| c.chunk_ids.iter().cloned())
        .collect()
}
