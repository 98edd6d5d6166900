//! Whole-graph embeddings of snapshot summaries.

mod doc2vec;
mod fgsd;
mod matrix;
mod wl;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use doc2vec::{doc_embed_train, DocEmbedParams, DocModel};
pub use fgsd::{bucket_of, fgsd_embed, harmonic_distances, FgsdParams};
pub use matrix::EmbeddingMatrix;
pub use wl::{line_graph, wl_features, WlDocument};

use crate::error::{Error, Result};
use crate::graph::StaticGraph;
use crate::summarize::{SummaryStore, SummaryType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum EmbeddingMethod {
    /// Spectral-distance histogram.
    #[default]
    Fgsd = 0,
    /// WL subtree document embedding.
    WlDoc = 1,
    /// WL document embedding of the line graph.
    WlDocLine = 2,
}

impl EmbeddingMethod {
    pub fn from_u8(v: u8) -> Option<Self> {
        [Self::Fgsd, Self::WlDoc, Self::WlDocLine].get(v as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingParams {
    pub method: EmbeddingMethod,
    pub fgsd: FgsdParams,
    pub doc: DocEmbedParams,
    pub wl_iterations: usize,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        Self::new(EmbeddingMethod::default())
    }
}

impl EmbeddingParams {
    pub fn new(method: EmbeddingMethod) -> Self {
        Self {
            method,
            fgsd: FgsdParams::default(),
            doc: DocEmbedParams::default(),
            wl_iterations: 2,
        }
    }
}

/// Vector for one `(snapshot, summary type)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub level: u32,
    #[serde(rename = "k")]
    pub index: u32,
    pub summary_type: SummaryType,
    pub method: EmbeddingMethod,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    /// Empty summaries embed to the all-zeros vector, which is never indexed.
    pub fn is_sentinel(&self) -> bool {
        self.vector.iter().all(|&x| x == 0.0)
    }
}

/// Coordinate-wise median; even counts average the two middle values.
pub fn median_embedding(vectors: &[Vec<f32>]) -> Result<Vec<f32>> {
    let first = vectors.first().ok_or(Error::Empty("vector list for median"))?;
    let dim = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let mut column = vec![0f32; vectors.len()];
    Ok((0..dim)
        .map(|d| {
            for (c, v) in column.iter_mut().zip(vectors) {
                *c = v[d];
            }
            column.sort_by(f32::total_cmp);
            let mid = column.len() / 2;
            if column.len() % 2 == 1 {
                column[mid]
            } else {
                (column[mid - 1] + column[mid]) / 2.0
            }
        })
        .collect())
}

/// A fitted embedding method able to embed both its training graphs and
/// unseen graphs.
#[derive(Debug, Clone)]
pub enum Embedder {
    Fgsd(FgsdParams),
    Doc {
        model: Box<DocModel>,
        line: bool,
        wl_iterations: usize,
    },
}

fn document(g: &StaticGraph, line: bool, iterations: usize) -> WlDocument {
    match line.then(|| line_graph(g)) {
        Some(Ok(lg)) => wl_features(&lg, iterations),
        // Edgeless graphs fall back to the plain WL document.
        _ => wl_features(g, iterations),
    }
}

impl Embedder {
    /// Fits the method on `graphs` and returns the vector of each. Empty
    /// graphs get the zero sentinel and are left out of training.
    pub fn fit(params: &EmbeddingParams, graphs: &[&StaticGraph]) -> Result<(Embedder, Vec<Vec<f32>>)> {
        match params.method {
            EmbeddingMethod::Fgsd => {
                let embedder = Embedder::Fgsd(params.fgsd);
                let vectors = graphs
                    .par_iter()
                    .map(|g| embedder.embed(g))
                    .collect::<Result<Vec<_>>>()?;
                Ok((embedder, vectors))
            }
            EmbeddingMethod::WlDoc | EmbeddingMethod::WlDocLine => {
                let line = params.method == EmbeddingMethod::WlDocLine;
                let docs: Vec<Option<WlDocument>> = graphs
                    .par_iter()
                    .map(|g| (!g.is_empty()).then(|| document(g, line, params.wl_iterations)))
                    .collect();
                let corpus: Vec<WlDocument> = docs.iter().flatten().cloned().collect();
                if corpus.is_empty() {
                    return Err(Error::Empty("non-empty graphs to train on"));
                }
                let model = doc_embed_train(&corpus, &params.doc)?;
                let mut next = 0;
                let vectors = docs
                    .iter()
                    .map(|d| match d {
                        Some(_) => {
                            next += 1;
                            model.vector(next - 1).to_vec()
                        }
                        None => vec![0.0; model.dims()],
                    })
                    .collect();
                let embedder = Embedder::Doc {
                    model: Box::new(model),
                    line,
                    wl_iterations: params.wl_iterations,
                };
                Ok((embedder, vectors))
            }
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Embedder::Fgsd(p) => p.bins,
            Embedder::Doc { model, .. } => model.dims(),
        }
    }

    /// Embeds a graph; for document methods this infers a fresh vector.
    pub fn embed(&self, g: &StaticGraph) -> Result<Vec<f32>> {
        if g.is_empty() {
            return Ok(vec![0.0; self.dims()]);
        }
        match self {
            Embedder::Fgsd(p) => fgsd_embed(g, p),
            Embedder::Doc {
                model,
                line,
                wl_iterations,
            } => Ok(model.infer(&document(g, *line, *wl_iterations))),
        }
    }
}

/// Embeds every summary of every snapshot above level 1: `2T - 1`
/// snapshots when `T` is a power of two. `summaries` selects which summary
/// types are embedded. Records come out in (level, k, summary type) order.
pub fn embed_hierarchy(
    store: &SummaryStore,
    params: &EmbeddingParams,
    summaries: &[SummaryType],
) -> Result<Vec<EmbeddingRecord>> {
    let h = store.hierarchy();
    let keys: Vec<(u32, u32, SummaryType)> = h
        .intervals()
        .filter(|iv| iv.level > 1)
        .flat_map(|iv| summaries.iter().map(move |&t| (iv.level, iv.index, t)))
        .collect();
    let snapshots = keys
        .par_iter()
        .map(|&(l, k, _)| store.snapshot(l, k))
        .collect::<Result<Vec<_>>>()?;
    let graphs: Vec<&StaticGraph> = snapshots
        .iter()
        .zip(&keys)
        .map(|(s, &(_, _, t))| s.summary(t))
        .collect();
    let (_, vectors) = Embedder::fit(params, &graphs)?;
    Ok(keys
        .into_iter()
        .zip(vectors)
        .map(|((level, index, summary_type), vector)| EmbeddingRecord {
            level,
            index,
            summary_type,
            method: params.method,
            vector,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median_embedding(&[vec![3.0, 1.0]]).unwrap(), vec![3.0, 1.0]);
        assert_eq!(
            median_embedding(&[vec![0.0, 0.0], vec![1.0, 10.0], vec![2.0, 2.0]]).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(median_embedding(&[vec![0.0, 0.0], vec![2.0, 4.0]]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn median_errors() {
        assert!(median_embedding(&[]).is_err());
        assert!(matches!(
            median_embedding(&[vec![0.0], vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_graphs_get_the_sentinel() {
        let empty = StaticGraph::new();
        let tri = StaticGraph::from_edges(&[(0, 1), (1, 2), (0, 2)]);
        for method in [EmbeddingMethod::Fgsd, EmbeddingMethod::WlDoc, EmbeddingMethod::WlDocLine] {
            let mut p = EmbeddingParams::new(method);
            p.doc.epochs = 3;
            p.doc.min_count = 1;
            p.doc.dims = 8;
            let (e, v) = Embedder::fit(&p, &[&tri, &empty]).unwrap();
            assert!(v[1].iter().all(|&x| x == 0.0));
            assert!(v[0].iter().any(|&x| x != 0.0));
            assert_eq!(e.embed(&empty).unwrap(), vec![0.0; e.dims()]);
        }
    }
}
