//! Ground-truth graph distance, synthetic benchmark data and the k-NN
//! accuracy experiment.
//!
//! The ground-truth distance between two graphs is the absolute difference
//! of the Frobenius norms of their (count-weighted) adjacency matrices,
//! where the norm is computed from singular values.

mod experiment;
mod sbm;

use std::collections::BTreeSet;

use nalgebra::DMatrix;

pub use experiment::{
    chance_level, run_accuracy_experiment, AccuracyRow, AccuracyTable, BenchMethod, ExperimentConfig,
};
pub use sbm::{synth_dynamic_sbm, synth_dynamic_sbm_with_memberships, SbmConfig};

use crate::error::{Error, Result};
use crate::graph::StaticGraph;

/// Square root of the sum of squared singular values of the adjacency matrix.
pub fn fnorm(g: &StaticGraph) -> f64 {
    let n = g.node_count();
    if n == 0 {
        return 0.0;
    }
    let (_, a) = g.weighted_adjacency();
    let m = DMatrix::from_row_slice(n, n, &a);
    m.singular_values().iter().map(|s| s * s).sum::<f64>().sqrt()
}

/// Entry-wise Frobenius norm of the adjacency matrix, without forming it.
pub fn fnorm_entrywise(g: &StaticGraph) -> f64 {
    g.edges()
        .map(|(_, d)| 2.0 * f64::from(d.count).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn madist(a: &StaticGraph, b: &StaticGraph) -> f64 {
    (fnorm(a) - fnorm(b)).abs()
}

/// Ids of the `k` candidates closest to `query` under [`madist`], ties to
/// the smaller id.
pub fn ground_truth_knn(query: &StaticGraph, candidates: &[(usize, &StaticGraph)], k: usize) -> Result<BTreeSet<usize>> {
    use rayon::prelude::*;
    let norms: Vec<(usize, f64)> = candidates.par_iter().map(|&(id, g)| (id, fnorm(g))).collect();
    ground_truth_from_norms(fnorm(query), &norms, k)
}

/// [`ground_truth_knn`] over precomputed norms.
pub fn ground_truth_from_norms(query_norm: f64, candidates: &[(usize, f64)], k: usize) -> Result<BTreeSet<usize>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    if k > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds {} candidates",
            candidates.len()
        )));
    }
    let mut ranked: Vec<(f64, usize)> = candidates.iter().map(|&(id, n)| ((n - query_norm).abs(), id)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(k).map(|(_, id)| id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeData;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, n: u32, p: f64) -> StaticGraph {
        let mut g = StaticGraph::new();
        for v in 0..n {
            g.add_node(v);
        }
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(p) {
                    let count = rng.gen_range(1..5);
                    g.set_edge(u, v, EdgeData { count, ..EdgeData::default() });
                }
            }
        }
        g
    }

    #[test]
    fn fnorm_examples() {
        assert_eq!(fnorm(&StaticGraph::new()), 0.0);
        let k2 = StaticGraph::from_edges(&[(0, 1)]);
        assert!((fnorm(&k2) - 2f64.sqrt()).abs() < 1e-12);
        let k3 = StaticGraph::from_edges(&[(0, 1), (1, 2), (0, 2)]);
        let p3 = StaticGraph::from_edges(&[(0, 1), (1, 2)]);
        assert!((madist(&k3, &p3) - (6f64.sqrt() - 2.0)).abs() < 1e-12);
        assert!((madist(&k2, &StaticGraph::new()) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(madist(&k3, &k3), 0.0);
    }

    #[test]
    fn svd_matches_entrywise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = random_graph(&mut rng, 15, 0.3);
            assert!((fnorm(&g) - fnorm_entrywise(&g)).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_truth_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let graphs: Vec<StaticGraph> = (0..20).map(|i| random_graph(&mut rng, 4 + i % 7, 0.5)).collect();
        let cands: Vec<(usize, &StaticGraph)> = graphs.iter().enumerate().collect();
        let got = ground_truth_knn(&graphs[4], &cands, 1).unwrap();
        assert!(got.contains(&4) || graphs.iter().any(|g| madist(g, &graphs[4]) == 0.0));
        assert_eq!(ground_truth_knn(&graphs[0], &cands, 20).unwrap().len(), 20);
        assert!(ground_truth_knn(&graphs[0], &cands, 21).is_err());
        assert!(ground_truth_knn(&graphs[0], &[], 1).is_err());

        // independent oracle: compute every distance, sort by (distance, id)
        let q = random_graph(&mut rng, 6, 0.5);
        let mut all: Vec<(f64, usize)> = graphs
            .iter()
            .enumerate()
            .map(|(i, g)| ((fnorm_entrywise(g) - fnorm_entrywise(&q)).abs(), i))
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want: BTreeSet<usize> = all[..5].iter().map(|x| x.1).collect();
        assert_eq!(ground_truth_knn(&q, &cands, 5).unwrap(), want);
    }

    proptest! {
        #[test]
        fn madist_is_a_pseudometric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gs: Vec<StaticGraph> = (0..3).map(|_| {
                let n = rng.gen_range(0..12);
                random_graph(&mut rng, n, 0.4)
            }).collect();
            let (a, b, c) = (&gs[0], &gs[1], &gs[2]);
            prop_assert!(madist(a, b) >= 0.0);
            prop_assert!((madist(a, b) - madist(b, a)).abs() < 1e-12);
            prop_assert!(madist(a, c) <= madist(a, b) + madist(b, c) + 1e-9);
        }
    }
}
