use serde::{Deserialize, Serialize};

use super::StaticGraph;

/// Structural summary statistics of an undirected graph.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub node_count: usize,
    pub edge_count: usize,
    pub density: f64,
    pub avg_clustering: f64,
    pub transitivity: f64,
    pub components: usize,
}

/// Selects one [`GraphMetrics`] field, e.g. for metric-to-color mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricField {
    #[default]
    NodeCount,
    EdgeCount,
    Density,
    AvgClustering,
    Transitivity,
    Components,
}

impl GraphMetrics {
    pub fn get(&self, field: MetricField) -> f64 {
        match field {
            MetricField::NodeCount => self.node_count as f64,
            MetricField::EdgeCount => self.edge_count as f64,
            MetricField::Density => self.density,
            MetricField::AvgClustering => self.avg_clustering,
            MetricField::Transitivity => self.transitivity,
            MetricField::Components => self.components as f64,
        }
    }
}

/// Computes node/edge counts, density, average local clustering,
/// transitivity and the number of connected components.
pub fn graph_metrics(g: &StaticGraph) -> GraphMetrics {
    let (_, adj) = g.compact_adjacency();
    let n = adj.len();
    let m = g.edge_count();

    let density = if n < 2 {
        0.0
    } else {
        2.0 * m as f64 / (n as f64 * (n as f64 - 1.0))
    };

    let mut local_sum = 0.0;
    // Closed neighbor pairs summed over nodes equals 3 * triangles.
    let mut closed = 0u64;
    let mut triads = 0u64;
    for neigh in &adj {
        let d = neigh.len() as u64;
        if d < 2 {
            continue;
        }
        let mut pairs = 0u64;
        for (i, &u) in neigh.iter().enumerate() {
            pairs += sorted_intersection(&neigh[i + 1..], &adj[u]) as u64;
        }
        let possible = d * (d - 1) / 2;
        local_sum += pairs as f64 / possible as f64;
        closed += pairs;
        triads += possible;
    }
    let avg_clustering = if n == 0 { 0.0 } else { local_sum / n as f64 };
    let transitivity = if triads == 0 {
        0.0
    } else {
        closed as f64 / triads as f64
    };

    GraphMetrics {
        node_count: n,
        edge_count: m,
        density,
        avg_clustering,
        transitivity,
        components: count_components(&adj),
    }
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn count_components(adj: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    components
}
