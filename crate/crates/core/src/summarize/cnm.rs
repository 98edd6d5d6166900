//! Greedy modularity maximization (Clauset–Newman–Moore).
//!
//! Starts from singleton communities and repeatedly merges the pair of
//! adjacent communities with the largest modularity gain, using a lazily
//! invalidated max-heap over the sparse gain matrix. Edge occurrence counts
//! act as weights.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeData, NodeId, StaticGraph};

/// Result of community detection over one graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityPartition {
    /// Node id to community id; community ids are contiguous from 0 and
    /// ordered by each community's smallest member.
    pub assignment: BTreeMap<NodeId, u32>,
    /// Sorted members of each community.
    pub members: Vec<Vec<NodeId>>,
    /// One meta-node per community; meta-edge weight is the summed
    /// occurrence count of the edges running between two communities.
    #[serde(skip)]
    pub meta_graph: StaticGraph,
    pub modularity: f64,
}

impl CommunityPartition {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Gain(f64);

impl Eq for Gain {}

impl PartialOrd for Gain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Gain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub fn cluster_communities(g: &StaticGraph) -> Result<CommunityPartition> {
    if g.is_empty() {
        return Err(Error::Empty("graph for community detection"));
    }
    let ids: Vec<NodeId> = g.nodes().collect();
    let n = ids.len();
    let local = |id: NodeId| ids.binary_search(&id).expect("edge endpoint is a node");

    let total: f64 = g.total_weight() as f64;
    let mut degree = vec![0.0f64; n];
    for ((u, v), d) in g.edges() {
        degree[local(u)] += f64::from(d.count);
        degree[local(v)] += f64::from(d.count);
    }

    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    if total > 0.0 {
        let a: Vec<f64> = degree.iter().map(|k| k / (2.0 * total)).collect();
        merge_greedily(g, &ids, total, a, &mut groups);
    }

    let mut communities: Vec<Vec<NodeId>> = groups
        .into_iter()
        .filter(|grp| !grp.is_empty())
        .map(|grp| {
            let mut m: Vec<NodeId> = grp.into_iter().map(|i| ids[i]).collect();
            m.sort_unstable();
            m
        })
        .collect();
    communities.sort_by_key(|m| m[0]);

    let mut assignment = BTreeMap::new();
    for (c, members) in communities.iter().enumerate() {
        for &node in members {
            assignment.insert(node, c as u32);
        }
    }
    let mut meta_graph = StaticGraph::new();
    for c in 0..communities.len() {
        meta_graph.add_node(c as NodeId);
    }
    for ((u, v), d) in g.edges() {
        let (cu, cv) = (assignment[&u], assignment[&v]);
        if cu != cv {
            meta_graph.add_edge(cu, cv, *d);
        }
    }
    let modularity = modularity(g, &assignment);
    Ok(CommunityPartition {
        assignment,
        members: communities,
        meta_graph,
        modularity,
    })
}

fn merge_greedily(
    g: &StaticGraph,
    ids: &[NodeId],
    total: f64,
    mut a: Vec<f64>,
    groups: &mut [Vec<usize>],
) {
    let n = ids.len();
    let local = |id: NodeId| ids.binary_search(&id).expect("edge endpoint is a node");
    let mut dq: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut heap = BinaryHeap::new();
    for ((u, v), d) in g.edges() {
        let (i, j) = (local(u), local(v));
        let gain = f64::from(d.count) / total - 2.0 * a[i] * a[j];
        dq[i].insert(j, gain);
        dq[j].insert(i, gain);
        heap.push((Gain(gain), Reverse((i.min(j), i.max(j)))));
    }
    let mut alive = vec![true; n];

    while let Some((Gain(gain), Reverse((i, j)))) = heap.pop() {
        if !alive[i] || !alive[j] || dq[i].get(&j).map(|v| v.to_bits()) != Some(gain.to_bits()) {
            continue;
        }
        if gain <= 0.0 {
            break;
        }
        // Merge j into i (i < j).
        let row_i = std::mem::take(&mut dq[i]);
        let row_j = std::mem::take(&mut dq[j]);
        let mut merged = BTreeMap::new();
        let mut keys: Vec<usize> = row_i.keys().chain(row_j.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        for k in keys {
            if k == i || k == j {
                continue;
            }
            let value = match (row_i.get(&k), row_j.get(&k)) {
                (Some(x), Some(y)) => x + y,
                (Some(x), None) => x - 2.0 * a[j] * a[k],
                (None, Some(y)) => y - 2.0 * a[i] * a[k],
                (None, None) => unreachable!(),
            };
            merged.insert(k, value);
            dq[k].remove(&j);
            dq[k].insert(i, value);
            heap.push((Gain(value), Reverse((i.min(k), i.max(k)))));
        }
        dq[i] = merged;
        alive[j] = false;
        a[i] += a[j];
        let moved = std::mem::take(&mut groups[j]);
        groups[i].extend(moved);
    }
}

/// Weighted Newman modularity of a node partition.
pub fn modularity(g: &StaticGraph, assignment: &BTreeMap<NodeId, u32>) -> f64 {
    let total = g.total_weight() as f64;
    if total == 0.0 {
        return 0.0;
    }
    let communities = assignment.values().max().map_or(0, |&c| c as usize + 1);
    let mut internal = vec![0.0; communities];
    let mut degree = vec![0.0; communities];
    for ((u, v), d) in g.edges() {
        let w = f64::from(d.count);
        let (cu, cv) = (assignment[&u] as usize, assignment[&v] as usize);
        degree[cu] += w;
        degree[cv] += w;
        if cu == cv {
            internal[cu] += w;
        }
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / total - (d / (2.0 * total)).powi(2))
        .sum()
}

/// Weight of the meta-edge between communities `a` and `b`.
pub fn meta_edge_weight(partition: &CommunityPartition, a: u32, b: u32) -> Option<EdgeData> {
    partition.meta_graph.edge(a, b).copied()
}
