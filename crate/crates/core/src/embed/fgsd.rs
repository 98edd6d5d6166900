//! Spectral-distance histogram features.
//!
//! The harmonic spectral distance between nodes `x` and `y` is
//! `S(x, y) = sum over lambda_j > 0 of (phi_j(x) - phi_j(y))^2 / lambda_j`
//! for eigenpairs of the unnormalized Laplacian, i.e.
//! `L+[x,x] + L+[y,y] - 2 L+[x,y]` with `L+` the Moore–Penrose pseudoinverse.
//! The feature vector is a fixed-width histogram of all `n^2` ordered pair
//! distances, diagonal zeros included.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::StaticGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FgsdParams {
    pub bins: usize,
    pub hist_range: f64,
}

impl Default for FgsdParams {
    fn default() -> Self {
        Self {
            bins: 200,
            hist_range: 20.0,
        }
    }
}

/// Eigenvalues at or below this are treated as the Laplacian null space.
const ZERO_EIGENVALUE: f64 = 1e-9;

/// Bucket-edge slack so values sitting on an edge up to rounding error land
/// in the upper bucket.
const EDGE_SLACK: f64 = 1e-9;

/// Pairwise harmonic spectral distances in node-id order, row-major `n x n`.
pub fn harmonic_distances(g: &StaticGraph) -> Vec<f64> {
    let (_, adj) = g.compact_adjacency();
    let n = adj.len();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (i, neigh) in adj.iter().enumerate() {
        lap[(i, i)] = neigh.len() as f64;
        for &j in neigh {
            lap[(i, j)] = -1.0;
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut pinv = DMatrix::<f64>::zeros(n, n);
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > ZERO_EIGENVALUE {
            let phi = eig.eigenvectors.column(j);
            pinv += (phi * phi.transpose()) / lambda;
        }
    }
    let mut out = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            if x != y {
                out[x * n + y] = (pinv[(x, x)] + pinv[(y, y)] - 2.0 * pinv[(x, y)]).max(0.0);
            }
        }
    }
    out
}

/// Histogram bucket of `value` over `[0, range)`; values beyond the range
/// clamp into the last bucket.
pub fn bucket_of(value: f64, bins: usize, range: f64) -> usize {
    let width = range / bins as f64;
    let raw = (value / width + EDGE_SLACK).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(bins - 1)
    }
}

pub fn fgsd_embed(g: &StaticGraph, params: &FgsdParams) -> Result<Vec<f32>> {
    if g.is_empty() {
        return Err(Error::Empty("graph for spectral embedding"));
    }
    if params.bins == 0 || params.hist_range.is_nan() || params.hist_range <= 0.0 {
        return Err(Error::InvalidArgument("histogram needs bins > 0 and range > 0".into()));
    }
    let mut hist = vec![0f32; params.bins];
    for d in harmonic_distances(g) {
        hist[bucket_of(d, params.bins, params.hist_range)] += 1.0;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(n: u32) -> StaticGraph {
        let mut e = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                e.push((u, v));
            }
        }
        StaticGraph::from_edges(&e)
    }

    #[test]
    fn single_edge() {
        let h = fgsd_embed(&k(2), &FgsdParams::default()).unwrap();
        assert_eq!(h[0], 2.0);
        assert_eq!(h[10], 2.0); // [1.0, 1.1)
        assert_eq!(h.iter().sum::<f32>(), 4.0);
    }

    #[test]
    fn complete_graph_distance_is_two_over_n() {
        for n in 3..8u32 {
            let d = harmonic_distances(&k(n));
            for x in 0..n as usize {
                for y in 0..n as usize {
                    let want = if x == y { 0.0 } else { 2.0 / n as f64 };
                    assert!((d[x * n as usize + y] - want).abs() < 1e-10);
                }
            }
        }
        let h = fgsd_embed(&k(3), &FgsdParams::default()).unwrap();
        assert_eq!(h[0], 3.0);
        assert_eq!(h[6], 6.0); // 0.667 lies in [0.6, 0.7)
    }

    #[test]
    fn path_matches_effective_resistance() {
        // On a tree the harmonic distance equals the hop distance.
        let d = harmonic_distances(&StaticGraph::from_edges(&[(0, 1), (1, 2), (2, 3)]));
        assert!((d[3] - 3.0).abs() < 1e-9);
        assert!((d[4 + 2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_graph_is_an_error() {
        assert!(fgsd_embed(&StaticGraph::new(), &FgsdParams::default()).is_err());
    }

    #[test]
    fn isolated_node_yields_zero_row() {
        let mut g = StaticGraph::new();
        g.add_node(5);
        assert_eq!(fgsd_embed(&g, &FgsdParams::default()).unwrap()[0], 1.0);
    }

    #[test]
    fn out_of_range_clamps_to_last_bucket() {
        assert_eq!(bucket_of(1e6, 200, 20.0), 199);
        assert_eq!(bucket_of(-1e-17, 200, 20.0), 0);
    }

    proptest! {
        #[test]
        fn counts_sum_to_n_squared_and_ignore_relabeling(seed in any::<u64>(), n in 1u32..=14) {
            use rand::{Rng, SeedableRng, seq::SliceRandom};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.35) {
                        edges.push((u, v));
                    }
                }
            }
            let mut g = StaticGraph::from_edges(&edges);
            for v in 0..n {
                g.add_node(v);
            }
            let mut perm: Vec<u32> = (100..100 + n).collect();
            perm.shuffle(&mut rng);
            let mut relabeled = StaticGraph::from_edges(
                &edges.iter().map(|&(u, v)| (perm[u as usize], perm[v as usize])).collect::<Vec<_>>(),
            );
            for v in 0..n {
                relabeled.add_node(perm[v as usize]);
            }
            let p = FgsdParams::default();
            let a = fgsd_embed(&g, &p).unwrap();
            let b = fgsd_embed(&relabeled, &p).unwrap();
            prop_assert_eq!(a.iter().sum::<f32>(), (n * n) as f32);
            prop_assert_eq!(a, b);
        }
    }
}
