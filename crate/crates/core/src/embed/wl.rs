//! Weisfeiler–Lehman subtree tokens and the line-graph transform.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{EdgeData, NodeId, Sign, StaticGraph};

/// Bag of rooted-subtree labels describing one graph. Tokens are kept sorted
/// so equal multisets compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WlDocument {
    pub tokens: Vec<String>,
}

fn relabel(own: &str, neighbors: &mut [&str]) -> String {
    neighbors.sort_unstable();
    let mut h = Sha256::new();
    h.update(own.as_bytes());
    for n in neighbors.iter() {
        h.update(b"_");
        h.update(n.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// WL document of `g`: degree labels at iteration 0, then `iterations`
/// rounds of hashing each label together with its sorted neighbor labels.
pub fn wl_features(g: &StaticGraph, iterations: usize) -> WlDocument {
    let (_, adj) = g.compact_adjacency();
    let mut labels: Vec<String> = adj.iter().map(|n| n.len().to_string()).collect();
    let mut tokens = labels.clone();
    for _ in 0..iterations {
        let next: Vec<String> = adj
            .iter()
            .enumerate()
            .map(|(v, neigh)| {
                let mut around: Vec<&str> = neigh.iter().map(|&u| labels[u].as_str()).collect();
                relabel(&labels[v], &mut around)
            })
            .collect();
        tokens.extend(next.iter().cloned());
        labels = next;
    }
    tokens.sort_unstable();
    WlDocument { tokens }
}

/// Edge-to-vertex dual: one node per edge of `g`, adjacent when the
/// underlying edges share an endpoint.
pub fn line_graph(g: &StaticGraph) -> Result<StaticGraph> {
    if g.edge_count() == 0 {
        return Err(Error::InvalidArgument("line graph of an edgeless graph".into()));
    }
    let mut incident: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut out = StaticGraph::new();
    for (i, ((u, v), _)) in g.edges().enumerate() {
        let id = i as NodeId;
        out.add_node(id);
        incident.entry(u).or_default().push(id);
        incident.entry(v).or_default().push(id);
    }
    for edges in incident.values() {
        for (a, &x) in edges.iter().enumerate() {
            for &y in &edges[a + 1..] {
                out.set_edge(x, y, EdgeData::single(Sign::None));
            }
        }
    }
    Ok(out)
}
