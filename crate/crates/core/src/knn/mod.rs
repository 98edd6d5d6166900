//! Per-level nearest-neighbor indices over snapshot embeddings.
//!
//! Each hierarchy level gets its own [`LevelIndex`]. Levels with fewer than
//! `brute_force_below` records are scanned exactly; larger levels use a
//! layered navigable small-world graph. Distances are Euclidean.

mod hnsw;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{ByteReader, ByteWriter};
use crate::embed::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::hierarchy::SnapshotHierarchy;
use crate::summarize::SummaryType;

use hnsw::{Builder, HnswGraph, Scored};

pub const MAGIC: &[u8; 4] = b"MSSI";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexParams {
    /// Maximum neighbors per node on upper layers; layer 0 allows twice this.
    pub m: usize,
    pub ef_construction: usize,
    /// Lower bound on the search beam; the beam is at least `4k`.
    pub ef_search: usize,
    pub brute_force_below: usize,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 64,
            brute_force_below: 64,
            seed: 42,
        }
    }
}

/// Identity of one indexed vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexKey {
    pub level: u32,
    #[serde(rename = "k")]
    pub index: u32,
    pub summary_type: SummaryType,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    Exact,
    Graph(HnswGraph),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelIndex {
    level: u32,
    dim: usize,
    params: IndexParams,
    keys: Vec<IndexKey>,
    vectors: Vec<f32>,
    mode: Mode,
}

/// Builds the index of one level. Sentinel (all-zero) records are skipped.
pub fn build_level_index(
    records: &[EmbeddingRecord],
    hierarchy: &SnapshotHierarchy,
    params: &IndexParams,
) -> Result<LevelIndex> {
    let level = records.first().map_or(0, |r| r.level);
    let mut keys = Vec::with_capacity(records.len());
    let mut vectors = Vec::with_capacity(records.len());
    for r in records {
        if r.level != level {
            return Err(Error::InvalidArgument(format!(
                "records from levels {level} and {} in one index",
                r.level
            )));
        }
        let iv = hierarchy
            .get(r.level, r.index)
            .ok_or_else(|| Error::NotFound(format!("interval ({}, {})", r.level, r.index)))?;
        if r.is_sentinel() {
            continue;
        }
        keys.push(IndexKey {
            level: r.level,
            index: r.index,
            summary_type: r.summary_type,
            start: iv.start,
            end: iv.end,
        });
        vectors.push(r.vector.clone());
    }
    LevelIndex::from_vectors(level, keys, vectors, params)
}

/// Groups `records` by level and builds one index per level, ascending.
pub fn build_indices(
    records: &[EmbeddingRecord],
    hierarchy: &SnapshotHierarchy,
    params: &IndexParams,
) -> Result<Vec<LevelIndex>> {
    let levels: BTreeSet<u32> = records.iter().map(|r| r.level).collect();
    levels
        .into_iter()
        .map(|l| {
            let subset: Vec<EmbeddingRecord> = records.iter().filter(|r| r.level == l).cloned().collect();
            build_level_index(&subset, hierarchy, params)
        })
        .collect()
}

impl LevelIndex {
    pub fn from_vectors(level: u32, keys: Vec<IndexKey>, vectors: Vec<Vec<f32>>, params: &IndexParams) -> Result<Self> {
        if keys.len() != vectors.len() {
            return Err(Error::InvalidArgument("keys and vectors differ in length".into()));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(dim * vectors.len());
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite vector".into()));
            }
            flat.extend_from_slice(v);
        }
        let mode = if keys.len() < params.brute_force_below.max(1) {
            Mode::Exact
        } else {
            Mode::Graph(Builder::new(&flat, dim, params.m, params.ef_construction).build(params.seed))
        };
        Ok(Self {
            level,
            dim,
            params: *params,
            keys,
            vectors: flat,
            mode,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, Mode::Exact)
    }

    pub fn keys(&self) -> &[IndexKey] {
        &self.keys
    }

    pub fn vector(&self, slot: usize) -> &[f32] {
        &self.vectors[slot * self.dim..(slot + 1) * self.dim]
    }

    /// True when every slot can be reached from the graph entry point.
    pub fn is_connected(&self) -> bool {
        match &self.mode {
            Mode::Exact => true,
            Mode::Graph(g) => hnsw::reachable(g).iter().all(|&r| r),
        }
    }

    fn exact_scan(&self, query: &[f32], keep: &dyn Fn(&IndexKey) -> bool) -> Vec<Scored> {
        let mut all: Vec<Scored> = (0..self.keys.len())
            .filter(|&i| keep(&self.keys[i]))
            .map(|i| Scored(hnsw::squared_distance(query, self.vector(i)), i as u32))
            .collect();
        all.sort_unstable();
        all
    }

    /// Up to `k` nearest slots passing `keep`, ascending by distance.
    fn search(&self, query: &[f32], k: usize, keep: &dyn Fn(&IndexKey) -> bool) -> Vec<Scored> {
        let graph = match &self.mode {
            Mode::Exact => {
                let mut all = self.exact_scan(query, keep);
                all.truncate(k);
                return all;
            }
            Mode::Graph(g) => g,
        };
        let n = self.keys.len();
        let mut ef = self.params.ef_search.max(4 * k);
        loop {
            let found: Vec<Scored> = hnsw::search(graph, &self.vectors, self.dim, query, ef.min(n))
                .into_iter()
                .filter(|s| keep(&self.keys[s.1 as usize]))
                .take(k)
                .collect();
            if found.len() >= k {
                return found;
            }
            if ef >= n {
                // The beam already covers the whole level; settle with an exact scan.
                let mut all = self.exact_scan(query, keep);
                all.truncate(k);
                return all;
            }
            ef *= 2;
        }
    }

    /// Exact `k` nearest neighbors, ignoring the graph.
    pub fn exact_knn(&self, query: &[f32], k: usize) -> Vec<(IndexKey, f64)> {
        let mut all = self.exact_scan(query, &|_| true);
        all.truncate(k);
        all.into_iter()
            .map(|s| (self.keys[s.1 as usize], f64::from(s.0).sqrt()))
            .collect()
    }

    pub fn encode(&self, content_hash: &[u8; 32]) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u16(VERSION);
        w.bytes(content_hash);
        w.u32(self.level);
        w.u32(self.dim as u32);
        w.u32(self.params.m as u32);
        w.u32(self.params.ef_construction as u32);
        w.u32(self.params.ef_search as u32);
        w.u32(self.params.brute_force_below as u32);
        w.u64(self.params.seed);
        w.u32(self.keys.len() as u32);
        for k in &self.keys {
            w.u32(k.level);
            w.u32(k.index);
            w.u8(k.summary_type as u8);
            w.u64(k.start as u64);
            w.u64(k.end as u64);
        }
        for &x in &self.vectors {
            w.f32(x);
        }
        match &self.mode {
            Mode::Exact => w.u8(0),
            Mode::Graph(g) => {
                w.u8(1);
                w.u32(g.entry);
                for node in &g.links {
                    w.u32(node.len() as u32);
                    for layer in node {
                        w.u32(layer.len() as u32);
                        for &x in layer {
                            w.u32(x);
                        }
                    }
                }
            }
        }
        w.into_inner()
    }

    /// Decodes an index, checking its embedded hash when `expected_hash` is set.
    pub fn decode(data: &[u8], expected_hash: Option<&[u8; 32]>) -> Result<Self> {
        let mut r = ByteReader::new(data, "index");
        r.expect_magic(MAGIC)?;
        r.expect_version(VERSION)?;
        let hash = r.take(32)?;
        if let Some(expected) = expected_hash {
            if hash != expected {
                return Err(Error::Format("index does not match the embedding file".into()));
            }
        }
        let level = r.u32()?;
        let dim = r.u32()? as usize;
        let params = IndexParams {
            m: r.u32()? as usize,
            ef_construction: r.u32()? as usize,
            ef_search: r.u32()? as usize,
            brute_force_below: r.u32()? as usize,
            seed: r.u64()?,
        };
        let count = r.len(25)?;
        let mut keys = Vec::with_capacity(count);
        for _ in 0..count {
            let key_level = r.u32()?;
            let index = r.u32()?;
            let summary_type =
                SummaryType::from_u8(r.u8()?).ok_or_else(|| Error::Format("unknown summary type".into()))?;
            keys.push(IndexKey {
                level: key_level,
                index,
                summary_type,
                start: r.u64()? as usize,
                end: r.u64()? as usize,
            });
        }
        let total = count
            .checked_mul(dim)
            .ok_or_else(|| Error::Format("index size overflow".into()))?;
        if total.saturating_mul(4) > data.len() {
            return Err(Error::Format("index truncated".into()));
        }
        let vectors = (0..total).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let mode = match r.u8()? {
            0 => Mode::Exact,
            1 => {
                let entry = r.u32()?;
                let mut links = Vec::with_capacity(count);
                for _ in 0..count {
                    let layers = r.len(4)?;
                    let mut node = Vec::with_capacity(layers);
                    for _ in 0..layers {
                        let n = r.len(4)?;
                        let ids = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                        if ids.iter().any(|&x| x as usize >= count) {
                            return Err(Error::Format("index link out of range".into()));
                        }
                        node.push(ids);
                    }
                    if layers == 0 {
                        return Err(Error::Format("index node without layers".into()));
                    }
                    links.push(node);
                }
                if count > 0 && entry as usize >= count {
                    return Err(Error::Format("index entry point out of range".into()));
                }
                Mode::Graph(HnswGraph { entry, links })
            }
            other => return Err(Error::Format(format!("unknown index mode {other}"))),
        };
        r.finish()?;
        Ok(Self {
            level,
            dim,
            params,
            keys,
            vectors,
            mode,
        })
    }

    pub fn save(&self, path: &Path, content_hash: &[u8; 32]) -> Result<()> {
        std::fs::write(path, self.encode(content_hash))?;
        Ok(())
    }

    pub fn load(path: &Path, expected_hash: Option<&[u8; 32]>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?, expected_hash)
    }
}

/// One retrieved record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub level: u32,
    #[serde(rename = "k")]
    pub index: u32,
    pub summary_type: SummaryType,
    pub start: usize,
    pub end: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnQuery {
    pub k: usize,
    pub summary_filter: Option<SummaryType>,
    /// `None` searches every index.
    pub levels: Option<BTreeSet<u32>>,
    /// Half-open bucket range; records must overlap it.
    pub time_range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMeta {
    pub k: usize,
    pub levels: Vec<u32>,
    pub summary_filter: Option<SummaryType>,
    pub time_range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnResult {
    pub neighbors: Vec<Neighbor>,
    pub query: QueryMeta,
}

/// Searches the selected levels and merges the results into one ranking.
pub fn knn(indices: &[LevelIndex], query: &[f32], q: &KnnQuery) -> Result<KnnResult> {
    if q.k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let selected: Vec<&LevelIndex> = indices
        .iter()
        .filter(|ix| q.levels.as_ref().is_none_or(|ls| ls.contains(&ix.level)))
        .collect();
    if selected.is_empty() {
        return Err(Error::InvalidArgument("no levels selected".into()));
    }
    if let Some((a, b)) = q.time_range {
        if a >= b {
            return Err(Error::InvalidArgument(format!("empty time range [{a}, {b})")));
        }
    }
    for ix in &selected {
        if !ix.is_empty() && ix.dim != query.len() {
            return Err(Error::DimensionMismatch {
                expected: ix.dim,
                actual: query.len(),
            });
        }
    }
    let keep = |key: &IndexKey| {
        q.summary_filter.is_none_or(|t| key.summary_type == t)
            && q.time_range.is_none_or(|(a, b)| key.start < b && a < key.end)
    };
    let mut neighbors: Vec<Neighbor> = selected
        .iter()
        .filter(|ix| !ix.is_empty())
        .flat_map(|ix| {
            ix.search(query, q.k, &keep).into_iter().map(|s| {
                let key = ix.keys[s.1 as usize];
                Neighbor {
                    level: key.level,
                    index: key.index,
                    summary_type: key.summary_type,
                    start: key.start,
                    end: key.end,
                    distance: f64::from(s.0).sqrt(),
                }
            })
        })
        .collect();
    neighbors.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.level.cmp(&b.level))
            .then(a.index.cmp(&b.index))
            .then((a.summary_type as u8).cmp(&(b.summary_type as u8)))
    });
    neighbors.truncate(q.k);
    Ok(KnnResult {
        neighbors,
        query: QueryMeta {
            k: q.k,
            levels: selected.iter().map(|ix| ix.level).collect(),
            summary_filter: q.summary_filter,
            time_range: q.time_range,
        },
    })
}
