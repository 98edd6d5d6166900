//! Window-query accuracy experiment.
//!
//! For each run and interval length `L` a random window of the dynamic graph
//! is drawn and perturbed by deleting one random node from each of its
//! graphs. Every method retrieves the `k` most similar windows among all
//! sliding windows of length `L`; the score is the fraction of the
//! ground-truth `k` nearest windows (by [`madist`](super::madist) between
//! union graphs) that was retrieved, ignoring order.
//!
//! Single-graph methods represent a window by the coordinate-wise median of
//! its per-graph embeddings. Multiscale methods embed the union graph of
//! every hierarchy snapshot above level 1, query with the embedding of the
//! perturbed window's union graph on the level whose nominal width is
//! closest to `L`, and map each retrieved interval `[s, e)` to the window
//! starting at `min(s, T - L)`.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fnorm, ground_truth_from_norms};
use crate::embed::{median_embedding, DocEmbedParams, Embedder, EmbeddingMethod, EmbeddingParams, FgsdParams};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, StaticGraph};
use crate::hierarchy::SnapshotHierarchy;
use crate::knn::{knn, IndexKey, IndexParams, KnnQuery, LevelIndex};
use crate::summarize::{union_graph, SummaryType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    #[serde(rename = "graph2vec")]
    Graph2Vec,
    #[serde(rename = "gl2vec")]
    Gl2Vec,
    Fgsd,
    #[serde(rename = "multiscale_graph2vec")]
    MultiscaleGraph2Vec,
    #[serde(rename = "multiscale_gl2vec")]
    MultiscaleGl2Vec,
    MultiscaleFgsd,
    /// Independent random vectors: the chance-level reference.
    #[serde(rename = "random")]
    RandomVector,
}

impl BenchMethod {
    /// The six embedding methods of the comparison.
    pub const PAPER: [BenchMethod; 6] = [
        Self::Graph2Vec,
        Self::Gl2Vec,
        Self::Fgsd,
        Self::MultiscaleGraph2Vec,
        Self::MultiscaleGl2Vec,
        Self::MultiscaleFgsd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Graph2Vec => "Graph2Vec",
            Self::Gl2Vec => "GL2Vec",
            Self::Fgsd => "FGSD",
            Self::MultiscaleGraph2Vec => "Multiscale Graph2Vec",
            Self::MultiscaleGl2Vec => "Multiscale GL2Vec",
            Self::MultiscaleFgsd => "Multiscale FGSD",
            Self::RandomVector => "Random",
        }
    }

    pub fn is_multiscale(self) -> bool {
        matches!(
            self,
            Self::MultiscaleGraph2Vec | Self::MultiscaleGl2Vec | Self::MultiscaleFgsd
        )
    }

    fn embedding(self) -> Option<EmbeddingMethod> {
        match self {
            Self::Graph2Vec | Self::MultiscaleGraph2Vec => Some(EmbeddingMethod::WlDoc),
            Self::Gl2Vec | Self::MultiscaleGl2Vec => Some(EmbeddingMethod::WlDocLine),
            Self::Fgsd | Self::MultiscaleFgsd => Some(EmbeddingMethod::Fgsd),
            Self::RandomVector => None,
        }
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Ok(match key.as_str() {
            "graph2vec" => Self::Graph2Vec,
            "gl2vec" => Self::Gl2Vec,
            "fgsd" => Self::Fgsd,
            "multiscalegraph2vec" => Self::MultiscaleGraph2Vec,
            "multiscalegl2vec" => Self::MultiscaleGl2Vec,
            "multiscalefgsd" => Self::MultiscaleFgsd,
            "random" | "randomvector" => Self::RandomVector,
            _ => return Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub lengths: Vec<usize>,
    pub runs: usize,
    pub k: usize,
    pub seed: u64,
    /// Delete one random node per query graph.
    pub perturb: bool,
    pub doc: DocEmbedParams,
    pub fgsd: FgsdParams,
    pub wl_iterations: usize,
    pub index: IndexParams,
    pub dataset: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1, 2, 3, 4, 8],
            runs: 5,
            k: 5,
            seed: 42,
            perturb: true,
            doc: DocEmbedParams::default(),
            fgsd: FgsdParams::default(),
            wl_iterations: 2,
            index: IndexParams::default(),
            dataset: "synthetic".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: BenchMethod,
    /// One average accuracy per configured length.
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub dataset: String,
    pub k: usize,
    pub runs: usize,
    pub lengths: Vec<usize>,
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyTable {
    pub fn get(&self, method: BenchMethod, length: usize) -> Option<f64> {
        let col = self.lengths.iter().position(|&l| l == length)?;
        self.rows.iter().find(|r| r.method == method).map(|r| r.accuracies[col])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for l in &self.lengths {
            let _ = write!(out, ",L{l}");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(r.method.name());
            for a in &r.accuracies {
                let _ = write!(out, ",{a:.3}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.name().len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "dataset: {}  k={}  runs={}\n{:<width$}",
            self.dataset, self.k, self.runs, "method"
        );
        for l in &self.lengths {
            let _ = write!(out, "  {:>6}", format!("L={l}"));
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{:<width$}", r.method.name());
            for a in &r.accuracies {
                let _ = write!(out, "  {a:>6.3}");
            }
            out.push('\n');
        }
        out
    }
}

/// Mean and standard deviation of the run-averaged accuracy of a retriever
/// that returns `k` of `n` candidates uniformly at random.
pub fn chance_level(n: usize, k: usize, runs: usize) -> (f64, f64) {
    let (n, kf) = (n as f64, k as f64);
    let mean = kf / n;
    // hypergeometric variance of |retrieved ∩ truth|, scaled to accuracy
    let var_hits = if n > 1.0 {
        kf * mean * (1.0 - mean) * (n - kf) / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var_hits / (kf * kf) / runs.max(1) as f64).sqrt())
}

struct Query {
    start: usize,
    length: usize,
    graphs: Vec<StaticGraph>,
    union: StaticGraph,
}

fn draw_queries(dg: &DynamicGraph, cfg: &ExperimentConfig) -> Result<Vec<Vec<Query>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.runs)
        .map(|_| {
            cfg.lengths
                .iter()
                .map(|&length| {
                    let start = rng.gen_range(0..=dg.len() - length);
                    let graphs: Vec<StaticGraph> = dg
                        .window(start, start + length)
                        .iter()
                        .map(|g| {
                            let mut g = g.clone();
                            if cfg.perturb {
                                if let Some(v) = g.nodes().choose(&mut rng) {
                                    g.remove_node(v);
                                }
                            }
                            g
                        })
                        .collect();
                    let union = union_graph(&graphs)?;
                    Ok(Query {
                        start,
                        length,
                        graphs,
                        union,
                    })
                })
                .collect()
        })
        .collect()
}

/// A method fitted on the whole dynamic graph, able to rank windows.
trait Retriever: Sync {
    fn retrieve(&self, q: &Query, k: usize) -> Result<Vec<usize>>;
}

fn nearest_windows(vectors: &[Vec<f32>], query: &[f32], k: usize) -> Vec<usize> {
    let mut ranked: Vec<(f32, usize)> = vectors
        .iter()
        .enumerate()
        .map(|(s, v)| (v.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), s))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, s)| s).collect()
}

struct SingleGraph {
    embedder: Embedder,
    per_graph: Vec<Vec<f32>>,
}

impl Retriever for SingleGraph {
    fn retrieve(&self, q: &Query, k: usize) -> Result<Vec<usize>> {
        let windows = (0..=self.per_graph.len() - q.length)
            .map(|s| median_embedding(&self.per_graph[s..s + q.length]))
            .collect::<Result<Vec<_>>>()?;
        let inferred = q.graphs.iter().map(|g| self.embedder.embed(g)).collect::<Result<Vec<_>>>()?;
        Ok(nearest_windows(&windows, &median_embedding(&inferred)?, k))
    }
}

struct Multiscale {
    embedder: Embedder,
    hierarchy: SnapshotHierarchy,
    indices: Vec<LevelIndex>,
}

impl Multiscale {
    /// Level above 1 whose nominal width is closest to `length`; ties go to
    /// the narrower level.
    fn level_for(&self, length: usize) -> u32 {
        self.hierarchy
            .window_levels()
            .min_by_key(|&l| {
                let w = self.hierarchy.nominal_width(l);
                (w.abs_diff(length), w)
            })
            .unwrap_or_else(|| self.hierarchy.root_level())
    }
}

impl Retriever for Multiscale {
    fn retrieve(&self, q: &Query, k: usize) -> Result<Vec<usize>> {
        let t = self.hierarchy.buckets();
        let level = self.level_for(q.length);
        let vector = self.embedder.embed(&q.union)?;
        let available = self.indices.iter().find(|ix| ix.level() == level).map_or(0, LevelIndex::len);
        let mut fetch = k;
        loop {
            let result = knn(
                &self.indices,
                &vector,
                &KnnQuery {
                    k: fetch,
                    summary_filter: Some(SummaryType::Union),
                    levels: Some(BTreeSet::from([level])),
                    time_range: None,
                },
            )?;
            let mut seen = HashSet::new();
            let starts: Vec<usize> = result
                .neighbors
                .iter()
                .map(|n| n.start.min(t - q.length))
                .filter(|s| seen.insert(*s))
                .take(k)
                .collect();
            if starts.len() >= k || fetch >= available {
                return Ok(starts);
            }
            fetch = (fetch * 2).min(available.max(1));
        }
    }
}

struct RandomWindows {
    seed: u64,
    dims: usize,
    windows: usize,
}

impl Retriever for RandomWindows {
    fn retrieve(&self, q: &Query, k: usize) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((q.length as u64) << 32) ^ q.start as u64);
        let n = self.windows + 1 - q.length;
        let windows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..self.dims).map(|_| rng.gen::<f32>()).collect())
            .collect();
        let query: Vec<f32> = (0..self.dims).map(|_| rng.gen::<f32>()).collect();
        Ok(nearest_windows(&windows, &query, k))
    }
}

fn fit(dg: &DynamicGraph, method: BenchMethod, cfg: &ExperimentConfig, run_salt: u64) -> Result<Box<dyn Retriever>> {
    let Some(embedding) = method.embedding() else {
        return Ok(Box::new(RandomWindows {
            seed: cfg.seed ^ run_salt,
            dims: 16,
            windows: dg.len(),
        }));
    };
    let params = EmbeddingParams {
        method: embedding,
        fgsd: cfg.fgsd,
        doc: cfg.doc,
        wl_iterations: cfg.wl_iterations,
    };
    if !method.is_multiscale() {
        let graphs: Vec<&StaticGraph> = dg.graphs.iter().collect();
        let (embedder, per_graph) = Embedder::fit(&params, &graphs)?;
        return Ok(Box::new(SingleGraph { embedder, per_graph }));
    }
    let hierarchy = SnapshotHierarchy::new(dg.len())?;
    let intervals: Vec<_> = hierarchy.intervals().filter(|iv| iv.level > 1).copied().collect();
    let unions = intervals
        .par_iter()
        .map(|iv| union_graph(dg.window(iv.start, iv.end)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&StaticGraph> = unions.iter().collect();
    let (embedder, vectors) = Embedder::fit(&params, &refs)?;
    let mut indices = Vec::new();
    for level in hierarchy.window_levels().chain([hierarchy.root_level()]) {
        let (keys, vecs): (Vec<IndexKey>, Vec<Vec<f32>>) = intervals
            .iter()
            .zip(&vectors)
            .filter(|(iv, v)| iv.level == level && v.iter().any(|&x| x != 0.0))
            .map(|(iv, v)| {
                (
                    IndexKey {
                        level,
                        index: iv.index,
                        summary_type: SummaryType::Union,
                        start: iv.start,
                        end: iv.end,
                    },
                    v.clone(),
                )
            })
            .unzip();
        indices.push(LevelIndex::from_vectors(level, keys, vecs, &cfg.index)?);
    }
    Ok(Box::new(Multiscale {
        embedder,
        hierarchy,
        indices,
    }))
}

/// Runs the protocol for every method and returns the averaged accuracies.
/// Methods are fitted on the unperturbed graph before queries are scored;
/// all methods answer the same queries.
pub fn run_accuracy_experiment(dg: &DynamicGraph, methods: &[BenchMethod], cfg: &ExperimentConfig) -> Result<AccuracyTable> {
    if cfg.k == 0 || cfg.runs == 0 || cfg.lengths.is_empty() {
        return Err(Error::InvalidArgument("k, runs and lengths must be non-empty".into()));
    }
    for &l in &cfg.lengths {
        if l == 0 || l > dg.len() {
            return Err(Error::InvalidArgument(format!("interval length {l} outside 1..={}", dg.len())));
        }
        if cfg.k > dg.len() + 1 - l {
            return Err(Error::InvalidArgument(format!("k exceeds the windows of length {l}")));
        }
    }
    let queries = draw_queries(dg, cfg)?;

    let truths: Vec<Vec<BTreeSet<usize>>> = {
        let norms_by_length: Vec<Vec<(usize, f64)>> = cfg
            .lengths
            .iter()
            .map(|&l| {
                (0..=dg.len() - l)
                    .into_par_iter()
                    .map(|s| Ok((s, fnorm(&union_graph(dg.window(s, s + l))?))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        queries
            .iter()
            .map(|run| {
                run.iter()
                    .zip(&norms_by_length)
                    .map(|(q, norms)| ground_truth_from_norms(fnorm(&q.union), norms, cfg.k))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?
    };

    let mut rows = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let retriever = fit(dg, method, cfg, mi as u64)?;
        let mut sums = vec![0.0; cfg.lengths.len()];
        for (run, truth) in queries.iter().zip(&truths) {
            for (li, (q, gt)) in run.iter().zip(truth).enumerate() {
                let got = retriever.retrieve(q, cfg.k)?;
                let hits = got.iter().filter(|s| gt.contains(s)).count();
                sums[li] += hits as f64 / cfg.k as f64;
            }
        }
        rows.push(AccuracyRow {
            method,
            accuracies: sums.into_iter().map(|s| s / cfg.runs as f64).collect(),
        });
    }
    Ok(AccuracyTable {
        dataset: cfg.dataset.clone(),
        k: cfg.k,
        runs: cfg.runs,
        lengths: cfg.lengths.clone(),
        rows,
    })
}
