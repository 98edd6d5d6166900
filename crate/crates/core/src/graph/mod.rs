//! Graph data model: interned node ids, undirected static graphs with
//! occurrence-count edge weights, and the bucketed dynamic graph.

mod bucket;
pub mod container;
mod ingest;
mod metrics;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use bucket::bucket_by_hour;
pub use container::{BlockKey, ContainerKind, GraphContainer};
pub use ingest::{parse_edge_stream, ColumnRef, EdgeSchema, LineError, ParsedEdges};
pub use metrics::{graph_metrics, GraphMetrics, MetricField};

/// Dense integer id of an interned node label.
pub type NodeId = u32;

/// Sentiment label carried by an edge occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
    #[default]
    None,
}

/// One raw edge event from an edge stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampedEdge {
    pub source: String,
    pub target: String,
    pub timestamp: i64,
    pub weight: f64,
    pub sign: Sign,
}

impl TimestampedEdge {
    pub fn new(source: impl Into<String>, target: impl Into<String>, timestamp: i64) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            timestamp,
            weight: 1.0,
            sign: Sign::None,
        }
    }
}

/// Aggregated attributes of an undirected edge.
///
/// `count` is the occurrence count (the edge weight); `positive` and
/// `negative` tally signed occurrences so the majority sign survives merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeData {
    pub count: u32,
    pub positive: u32,
    pub negative: u32,
}

impl EdgeData {
    pub fn single(sign: Sign) -> Self {
        let mut data = Self {
            count: 1,
            ..Self::default()
        };
        match sign {
            Sign::Positive => data.positive = 1,
            Sign::Negative => data.negative = 1,
            Sign::None => {}
        }
        data
    }

    /// Majority sign over occurrences; ties resolve to [`Sign::None`].
    pub fn sign(&self) -> Sign {
        use std::cmp::Ordering::*;
        match self.positive.cmp(&self.negative) {
            Greater => Sign::Positive,
            Less => Sign::Negative,
            Equal => Sign::None,
        }
    }

    pub fn absorb(&mut self, other: &EdgeData) {
        self.count += other.count;
        self.positive += other.positive;
        self.negative += other.negative;
    }
}

/// Normalized key of an undirected edge, smaller endpoint first.
pub fn edge_key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Undirected simple graph over interned node ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticGraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeMap<(NodeId, NodeId), EdgeData>,
}

impl StaticGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit-weight graph from an edge list. Self-loops are dropped.
    pub fn from_edges(edges: &[(NodeId, NodeId)]) -> Self {
        let mut g = Self::new();
        for &(u, v) in edges {
            g.add_edge(u, v, EdgeData::single(Sign::None));
        }
        g
    }

    pub fn add_node(&mut self, node: NodeId) {
        self.nodes.insert(node);
    }

    /// Merges `data` into the edge `{u, v}`, adding both endpoints.
    /// Returns false (and changes nothing) for a self-loop.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, data: EdgeData) -> bool {
        if u == v {
            return false;
        }
        self.nodes.insert(u);
        self.nodes.insert(v);
        self.edges.entry(edge_key(u, v)).or_default().absorb(&data);
        true
    }

    /// Sets the edge attributes, replacing anything already stored.
    pub fn set_edge(&mut self, u: NodeId, v: NodeId, data: EdgeData) {
        if u == v {
            return;
        }
        self.nodes.insert(u);
        self.nodes.insert(v);
        self.edges.insert(edge_key(u, v), data);
    }

    pub fn remove_node(&mut self, node: NodeId) -> bool {
        if !self.nodes.remove(&node) {
            return false;
        }
        self.edges.retain(|&(u, v), _| u != node && v != node);
        true
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    pub fn edge(&self, u: NodeId, v: NodeId) -> Option<&EdgeData> {
        self.edges.get(&edge_key(u, v))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_set(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = ((NodeId, NodeId), &EdgeData)> + '_ {
        self.edges.iter().map(|(k, v)| (*k, v))
    }

    /// Sum of occurrence counts over all edges.
    pub fn total_weight(&self) -> u64 {
        self.edges.values().map(|e| u64::from(e.count)).sum()
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> StaticGraph {
        let nodes: BTreeSet<NodeId> = self.nodes.intersection(keep).copied().collect();
        let edges = self
            .edges
            .iter()
            .filter(|((u, v), _)| nodes.contains(u) && nodes.contains(v))
            .map(|(k, d)| (*k, *d))
            .collect();
        StaticGraph { nodes, edges }
    }

    /// Compact adjacency lists. Position `i` in the returned id vector is
    /// local index `i` in the adjacency lists; neighbor lists are sorted.
    pub fn compact_adjacency(&self) -> (Vec<NodeId>, Vec<Vec<usize>>) {
        let ids: Vec<NodeId> = self.nodes.iter().copied().collect();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for &(u, v) in self.edges.keys() {
            let (a, b) = (index[&u], index[&v]);
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        (ids, adj)
    }

    /// Dense adjacency matrix in node-id order, entries are occurrence counts.
    pub fn weighted_adjacency(&self) -> (Vec<NodeId>, Vec<f64>) {
        let ids: Vec<NodeId> = self.nodes.iter().copied().collect();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let n = ids.len();
        let mut a = vec![0.0; n * n];
        for (&(u, v), d) in &self.edges {
            let (i, j) = (index[&u], index[&v]);
            a[i * n + j] = f64::from(d.count);
            a[j * n + i] = f64::from(d.count);
        }
        (ids, a)
    }
}

/// Bidirectional map between node labels and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeDictionary {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as NodeId;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Contiguous sequence of static graphs, one per time bucket.
///
/// Empty buckets are kept as empty graphs so bucket index is a true time axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicGraph {
    pub graphs: Vec<StaticGraph>,
    /// Bucket width in seconds.
    pub bucket_width: u64,
    /// Timestamp of the start of bucket 0.
    pub origin: i64,
    pub dictionary: NodeDictionary,
}

impl DynamicGraph {
    /// Number of buckets (`T`).
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn window(&self, start: usize, end: usize) -> &[StaticGraph] {
        &self.graphs[start..end]
    }

    pub fn label(&self, id: NodeId) -> String {
        self.dictionary
            .label(id)
            .map(str::to_owned)
            .unwrap_or_else(|| id.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loops_are_rejected() {
        let mut g = StaticGraph::new();
        assert!(!g.add_edge(1, 1, EdgeData::single(Sign::None)));
        assert!(g.is_empty());
    }

    #[test]
    fn parallel_edges_aggregate() {
        let mut g = StaticGraph::new();
        g.add_edge(1, 2, EdgeData::single(Sign::Positive));
        g.add_edge(2, 1, EdgeData::single(Sign::Negative));
        g.add_edge(1, 2, EdgeData::single(Sign::Negative));
        let e = g.edge(1, 2).unwrap();
        assert_eq!(e.count, 3);
        assert_eq!(e.sign(), Sign::Negative);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn sign_tie_is_none() {
        let mut e = EdgeData::single(Sign::Positive);
        e.absorb(&EdgeData::single(Sign::Negative));
        assert_eq!(e.sign(), Sign::None);
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let mut g = StaticGraph::from_edges(&[(0, 1), (1, 2), (2, 0)]);
        assert!(g.remove_node(1));
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn dictionary_interns_once() {
        let mut d = NodeDictionary::new();
        assert_eq!(d.intern("a"), 0);
        assert_eq!(d.intern("b"), 1);
        assert_eq!(d.intern("a"), 0);
        assert_eq!(d.label(1), Some("b"));
    }
}
