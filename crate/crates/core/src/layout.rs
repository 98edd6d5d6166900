//! Deterministic force-directed layouts.
//!
//! One layout is computed for the root supergraph and shared by every view,
//! so a node keeps its position across snapshots. Both algorithms use an
//! ideal edge length of 1 and return positions centered on their centroid.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, StaticGraph};

/// Ideal edge length shared by both algorithms.
pub const IDEAL_EDGE_LENGTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutAlgorithm {
    #[default]
    FruchtermanReingold,
    KamadaKawai,
}

impl std::str::FromStr for LayoutAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fruchterman_reingold" | "fr" => Ok(Self::FruchtermanReingold),
            "kamada_kawai" | "kk" => Ok(Self::KamadaKawai),
            _ => Err(Error::InvalidArgument(format!("unknown layout {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub positions: BTreeMap<NodeId, (f64, f64)>,
    pub algorithm: LayoutAlgorithm,
    pub seed: u64,
}

pub fn global_layout(g: &StaticGraph, algorithm: LayoutAlgorithm, seed: u64) -> Result<LayoutResult> {
    if g.node_count() == 0 {
        return Err(Error::Empty("graph to lay out"));
    }
    let (ids, adj) = g.compact_adjacency();
    let n = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = (n as f64).sqrt();
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)])
        .collect();
    if n > 1 {
        match algorithm {
            LayoutAlgorithm::FruchtermanReingold => fruchterman_reingold(&adj, &mut pos, 200),
            LayoutAlgorithm::KamadaKawai => kamada_kawai(&adj, &mut pos),
        }
    }
    let cx = pos.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = pos.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    Ok(LayoutResult {
        positions: ids
            .into_iter()
            .zip(pos)
            .map(|(id, p)| (id, (p[0] - cx, p[1] - cy)))
            .collect(),
        algorithm,
        seed,
    })
}

/// Repulsion `k²/d` between all pairs, attraction `d²/k` along edges, with
/// displacement capped by a linearly cooling temperature.
fn fruchterman_reingold(adj: &[Vec<usize>], pos: &mut [[f64; 2]], iterations: usize) {
    let k = IDEAL_EDGE_LENGTH;
    let n = pos.len();
    let t0 = 0.1 * (n as f64).sqrt().max(1.0) * k;
    for it in 0..iterations {
        let temp = t0 * (1.0 - it as f64 / iterations as f64) + 1e-4;
        let snapshot = pos.to_vec();
        let disp: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut d = [0.0, 0.0];
                for u in 0..n {
                    if u == v {
                        continue;
                    }
                    let (dx, dy) = (snapshot[v][0] - snapshot[u][0], snapshot[v][1] - snapshot[u][1]);
                    let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
                    let f = k * k / dist;
                    d[0] += dx / dist * f;
                    d[1] += dy / dist * f;
                }
                for &u in &adj[v] {
                    let (dx, dy) = (snapshot[v][0] - snapshot[u][0], snapshot[v][1] - snapshot[u][1]);
                    let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
                    let f = dist * dist / k;
                    d[0] -= dx / dist * f;
                    d[1] -= dy / dist * f;
                }
                d
            })
            .collect();
        for (p, d) in pos.iter_mut().zip(disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                let step = len.min(temp);
                p[0] += d[0] / len * step;
                p[1] += d[1] / len * step;
            }
        }
    }
}

fn hop_distances(adj: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n = adj.len();
    let mut dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut d = vec![f64::INFINITY; n];
            d[s] = 0.0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if d[u].is_infinite() {
                        d[u] = d[v] + 1.0;
                        queue.push_back(u);
                    }
                }
            }
            d
        })
        .collect();
    // disconnected pairs sit one hop beyond the graph's diameter
    let far = dist.iter().flatten().filter(|d| d.is_finite()).fold(0.0f64, |a, &b| a.max(b)) + 1.0;
    for row in &mut dist {
        for d in row.iter_mut().filter(|d| d.is_infinite()) {
            *d = far;
        }
    }
    dist
}

/// Spring energy `Σ (|p_i - p_j| - l_ij)² / (2 d_ij²)` with `l_ij` the hop
/// distance times the ideal edge length, minimized one node at a time by
/// Newton steps on the node with the largest gradient.
fn kamada_kawai(adj: &[Vec<usize>], pos: &mut [[f64; 2]]) {
    let n = pos.len();
    let d = hop_distances(adj);
    let gradient = |pos: &[[f64; 2]], m: usize| {
        let (mut gx, mut gy) = (0.0, 0.0);
        for i in 0..n {
            if i == m {
                continue;
            }
            let (dx, dy) = (pos[m][0] - pos[i][0], pos[m][1] - pos[i][1]);
            let r = (dx * dx + dy * dy).sqrt().max(1e-9);
            let (k, l) = (1.0 / (d[m][i] * d[m][i]), IDEAL_EDGE_LENGTH * d[m][i]);
            gx += k * (dx - l * dx / r);
            gy += k * (dy - l * dy / r);
        }
        (gx, gy)
    };
    let mut grads: Vec<(f64, f64)> = (0..n).map(|m| gradient(pos, m)).collect();
    let max_steps = 200 * n;
    for _ in 0..max_steps {
        let (m, delta) = grads
            .iter()
            .enumerate()
            .map(|(i, g)| (i, (g.0 * g.0 + g.1 * g.1).sqrt()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if delta < 1e-5 {
            break;
        }
        for _ in 0..50 {
            let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
            for i in 0..n {
                if i == m {
                    continue;
                }
                let (dx, dy) = (pos[m][0] - pos[i][0], pos[m][1] - pos[i][1]);
                let r = (dx * dx + dy * dy).sqrt().max(1e-9);
                let r3 = r * r * r;
                let (k, l) = (1.0 / (d[m][i] * d[m][i]), IDEAL_EDGE_LENGTH * d[m][i]);
                hxx += k * (1.0 - l * dy * dy / r3);
                hxy += k * (l * dx * dy / r3);
                hyy += k * (1.0 - l * dx * dx / r3);
            }
            let (gx, gy) = gradient(pos, m);
            let det = hxx * hyy - hxy * hxy;
            if det.abs() < 1e-12 || (gx * gx + gy * gy).sqrt() < 1e-6 {
                break;
            }
            pos[m][0] -= (hyy * gx - hxy * gy) / det;
            pos[m][1] -= (hxx * gy - hxy * gx) / det;
        }
        grads = (0..n).map(|i| gradient(pos, i)).collect();
    }
}
