//! Summary graphs of graph sequences and the lazily filled per-snapshot cache.
//!
//! For a window of graphs and a threshold `i`:
//! * union keeps every node and edge; edge weight is the number of member
//!   graphs containing the edge,
//! * intersection keeps nodes (and edges) appearing in more than `i` graphs,
//! * disjoint keeps nodes (and edges) appearing in fewer than `i` graphs
//!   (and at least once).
//!
//! Intersection and disjoint edges additionally require both endpoints to
//! qualify. An element appearing exactly `i` times belongs to neither.

mod cnm;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cnm::{cluster_communities, meta_edge_weight, modularity, CommunityPartition};

use crate::error::{Error, Result};
use crate::graph::container::{BlockKey, ContainerKind, GraphContainer};
use crate::graph::{graph_metrics, DynamicGraph, EdgeData, GraphMetrics, NodeId, StaticGraph};
use crate::hierarchy::{Interval, SnapshotHierarchy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum SummaryType {
    #[default]
    Union = 0,
    Intersection = 1,
    Disjoint = 2,
}

impl SummaryType {
    pub const ALL: [SummaryType; 3] = [SummaryType::Union, SummaryType::Intersection, SummaryType::Disjoint];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SummaryType::Union => "union",
            SummaryType::Intersection => "intersection",
            SummaryType::Disjoint => "disjoint",
        }
    }
}

impl std::str::FromStr for SummaryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown summary type {s:?}")))
    }
}

#[derive(Default)]
struct Counts {
    nodes: BTreeMap<NodeId, usize>,
    edges: BTreeMap<(NodeId, NodeId), EdgeData>,
}

fn count(graphs: &[StaticGraph]) -> Result<Counts> {
    if graphs.is_empty() {
        return Err(Error::Empty("graph list for summarization"));
    }
    let mut c = Counts::default();
    for g in graphs {
        for n in g.nodes() {
            *c.nodes.entry(n).or_default() += 1;
        }
        for (key, d) in g.edges() {
            let e = c.edges.entry(key).or_default();
            e.count += 1;
            e.positive += d.positive;
            e.negative += d.negative;
        }
    }
    Ok(c)
}

fn select(c: &Counts, keep: impl Fn(usize) -> bool) -> StaticGraph {
    let mut g = StaticGraph::new();
    for (&n, &k) in &c.nodes {
        if keep(k) {
            g.add_node(n);
        }
    }
    for (&(u, v), d) in &c.edges {
        if keep(d.count as usize) && g.contains_node(u) && g.contains_node(v) {
            g.set_edge(u, v, *d);
        }
    }
    g
}

fn check_threshold(graphs: &[StaticGraph], i: usize) -> Result<()> {
    if i > graphs.len() {
        return Err(Error::InvalidArgument(format!(
            "threshold {i} exceeds window of {} graphs",
            graphs.len()
        )));
    }
    Ok(())
}

pub fn union_graph(graphs: &[StaticGraph]) -> Result<StaticGraph> {
    Ok(select(&count(graphs)?, |_| true))
}

pub fn intersection_graph(graphs: &[StaticGraph], i: usize) -> Result<StaticGraph> {
    check_threshold(graphs, i)?;
    Ok(select(&count(graphs)?, |k| k > i))
}

pub fn disjoint_graph(graphs: &[StaticGraph], i: usize) -> Result<StaticGraph> {
    check_threshold(graphs, i)?;
    Ok(select(&count(graphs)?, |k| k >= 1 && k < i))
}

/// The three summaries of one window, from a single counting pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Summaries {
    pub union: StaticGraph,
    pub intersection: StaticGraph,
    pub disjoint: StaticGraph,
}

impl Summaries {
    pub fn compute(graphs: &[StaticGraph], i: usize) -> Result<Self> {
        check_threshold(graphs, i)?;
        let c = count(graphs)?;
        Ok(Self {
            union: select(&c, |_| true),
            intersection: select(&c, |k| k > i),
            disjoint: select(&c, |k| k >= 1 && k < i),
        })
    }

    pub fn get(&self, kind: SummaryType) -> &StaticGraph {
        match kind {
            SummaryType::Union => &self.union,
            SummaryType::Intersection => &self.intersection,
            SummaryType::Disjoint => &self.disjoint,
        }
    }
}

/// How the per-snapshot threshold `i` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Half the level's nominal width (the window overlap).
    #[default]
    Overlap,
    Fixed(usize),
}

/// One hierarchy interval with its summaries and their metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub interval: Interval,
    pub summaries: Summaries,
    pub i_threshold: usize,
    pub metrics: BTreeMap<SummaryType, GraphMetrics>,
}

impl Snapshot {
    fn new(interval: Interval, summaries: Summaries, i_threshold: usize) -> Self {
        let metrics = SummaryType::ALL
            .into_iter()
            .map(|t| (t, graph_metrics(summaries.get(t))))
            .collect();
        Self {
            interval,
            summaries,
            i_threshold,
            metrics,
        }
    }

    pub fn summary(&self, kind: SummaryType) -> &StaticGraph {
        self.summaries.get(kind)
    }
}

/// Summaries for every hierarchy interval, computed on first access and
/// cached. Safe to share across threads.
pub struct SummaryStore {
    graph: Arc<DynamicGraph>,
    hierarchy: Arc<SnapshotHierarchy>,
    policy: ThresholdPolicy,
    slots: HashMap<(u32, u32), OnceLock<Arc<Snapshot>>>,
}

impl SummaryStore {
    pub fn new(graph: Arc<DynamicGraph>, hierarchy: Arc<SnapshotHierarchy>, policy: ThresholdPolicy) -> Self {
        let slots = hierarchy
            .intervals()
            .map(|iv| ((iv.level, iv.index), OnceLock::new()))
            .collect();
        Self {
            graph,
            hierarchy,
            policy,
            slots,
        }
    }

    pub fn graph(&self) -> &Arc<DynamicGraph> {
        &self.graph
    }

    pub fn hierarchy(&self) -> &Arc<SnapshotHierarchy> {
        &self.hierarchy
    }

    /// Threshold used for an interval, clamped to its actual length.
    pub fn threshold(&self, iv: &Interval) -> usize {
        let i = match self.policy {
            ThresholdPolicy::Overlap => self.hierarchy.overlap_threshold(iv.level),
            ThresholdPolicy::Fixed(i) => i,
        };
        i.min(iv.len())
    }

    pub fn snapshot(&self, level: u32, k: u32) -> Result<Arc<Snapshot>> {
        let slot = self
            .slots
            .get(&(level, k))
            .ok_or_else(|| Error::NotFound(format!("snapshot ({level}, {k})")))?;
        if let Some(s) = slot.get() {
            return Ok(s.clone());
        }
        let iv = self.hierarchy.get(level, k).expect("slot exists");
        let i = self.threshold(&iv);
        let summaries = Summaries::compute(self.graph.window(iv.start, iv.end), i)?;
        Ok(slot
            .get_or_init(|| Arc::new(Snapshot::new(iv, summaries, i)))
            .clone())
    }

    /// Fills the cache for every interval, levels in parallel.
    pub fn compute_all(&self) -> Result<()> {
        let keys: Vec<(u32, u32)> = self.hierarchy.intervals().map(|iv| (iv.level, iv.index)).collect();
        keys.par_iter()
            .try_for_each(|&(l, k)| self.snapshot(l, k).map(|_| ()))
    }

    /// Serializes every summary into an `MSSG` container keyed by
    /// `(level, k, summary_type)`. Computes missing snapshots first.
    pub fn to_container(&self) -> Result<GraphContainer> {
        self.compute_all()?;
        let mut blocks = Vec::new();
        for iv in self.hierarchy.intervals() {
            let snap = self.snapshot(iv.level, iv.index)?;
            for t in SummaryType::ALL {
                blocks.push((
                    BlockKey {
                        a: iv.level,
                        b: iv.index,
                        c: t as u8,
                    },
                    snap.summary(t).clone(),
                ));
            }
        }
        Ok(GraphContainer {
            kind: ContainerKind::Summaries,
            origin: self.graph.origin,
            bucket_width: self.graph.bucket_width,
            labels: self.graph.dictionary.labels().to_vec(),
            blocks,
        })
    }

    /// Seeds the cache from a container written by [`Self::to_container`].
    pub fn load_container(&self, container: GraphContainer) -> Result<()> {
        if container.kind != ContainerKind::Summaries {
            return Err(Error::Format("container does not hold summaries".into()));
        }
        let mut grouped: BTreeMap<(u32, u32), [Option<StaticGraph>; 3]> = BTreeMap::new();
        for (key, g) in container.blocks {
            let t = SummaryType::from_u8(key.c)
                .ok_or_else(|| Error::Format(format!("unknown summary type {}", key.c)))?;
            grouped.entry((key.a, key.b)).or_default()[t as usize] = Some(g);
        }
        for ((level, k), [u, i, d]) in grouped {
            let iv = self
                .hierarchy
                .get(level, k)
                .ok_or_else(|| Error::Format(format!("summary for unknown interval ({level}, {k})")))?;
            let (Some(union), Some(intersection), Some(disjoint)) = (u, i, d) else {
                return Err(Error::Format(format!("incomplete summaries for ({level}, {k})")));
            };
            let snap = Snapshot::new(
                iv,
                Summaries {
                    union,
                    intersection,
                    disjoint,
                },
                self.threshold(&iv),
            );
            let _ = self.slots[&(level, k)].set(Arc::new(snap));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Sign;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(edges: &[(u32, u32)]) -> StaticGraph {
        StaticGraph::from_edges(edges)
    }

    #[test]
    fn union_of_one_graph_is_identity() {
        let a = g(&[(0, 1), (1, 2)]);
        assert_eq!(union_graph(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn union_of_disjoint_graphs() {
        let u = union_graph(&[g(&[(0, 1)]), g(&[(2, 3)])]).unwrap();
        assert_eq!(u, g(&[(0, 1), (2, 3)]));
    }

    #[test]
    fn union_counts_occurrences() {
        let u = union_graph(&[g(&[(0, 1)]), g(&[(0, 1), (1, 2)])]).unwrap();
        assert_eq!(u.edge(0, 1).unwrap().count, 2);
        assert_eq!(u.edge(1, 2).unwrap().count, 1);
    }

    #[test]
    fn union_sign_is_majority() {
        let mut a = StaticGraph::new();
        a.add_edge(0, 1, EdgeData::single(Sign::Negative));
        let mut b = StaticGraph::new();
        b.add_edge(0, 1, EdgeData::single(Sign::Negative));
        let mut c = StaticGraph::new();
        c.add_edge(0, 1, EdgeData::single(Sign::Positive));
        let u = union_graph(&[a, b, c]).unwrap();
        assert_eq!(u.edge(0, 1).unwrap().sign(), Sign::Negative);
    }

    #[test]
    fn empty_list_is_an_error() {
        assert!(union_graph(&[]).is_err());
        assert!(intersection_graph(&[], 0).is_err());
    }

    #[test]
    fn threshold_above_window_is_an_error() {
        assert!(intersection_graph(&[g(&[(0, 1)])], 2).is_err());
        assert!(disjoint_graph(&[g(&[(0, 1)])], 2).is_err());
    }

    #[test]
    fn strict_inequalities() {
        let both = [g(&[(0, 1)]), g(&[(0, 2)])];
        assert!(intersection_graph(&both, 1).unwrap().contains_node(0));
        // node 0 appears exactly twice: in neither summary for i = 2
        let s = Summaries::compute(&both, 2).unwrap();
        assert!(!s.intersection.contains_node(0));
        assert!(!s.disjoint.contains_node(0));
    }

    #[test]
    fn disjoint_examples() {
        let four = [g(&[(0, 1)]), g(&[(1, 2)]), g(&[(1, 3)]), g(&[(1, 4)])];
        let d = disjoint_graph(&four, 2).unwrap();
        assert!(d.contains_node(0));
        assert!(!d.contains_node(1));
        assert!(disjoint_graph(&four, 0).unwrap().is_empty());
    }

    #[test]
    fn zero_threshold_intersection_is_union_node_set() {
        let four = [g(&[(0, 1)]), g(&[(1, 2)]), g(&[(5, 3)]), g(&[])];
        let u = union_graph(&four).unwrap();
        let i = intersection_graph(&four, 0).unwrap();
        assert_eq!(u, i);
    }

    /// Per-node and per-edge counting written independently of `select`.
    fn oracle(graphs: &[StaticGraph], i: usize, keep: fn(usize, usize) -> bool) -> StaticGraph {
        let mut out = StaticGraph::new();
        let universe: std::collections::BTreeSet<u32> = graphs.iter().flat_map(|g| g.nodes()).collect();
        for &n in &universe {
            let c = graphs.iter().filter(|g| g.contains_node(n)).count();
            if keep(c, i) {
                out.add_node(n);
            }
        }
        for &u in &universe {
            for &v in &universe {
                if u >= v || !out.contains_node(u) || !out.contains_node(v) {
                    continue;
                }
                let c = graphs.iter().filter(|g| g.edge(u, v).is_some()).count();
                if c > 0 && keep(c, i) {
                    out.set_edge(u, v, EdgeData { count: c as u32, positive: 0, negative: 0 });
                }
            }
        }
        out
    }

    fn random_graphs(rng: &mut ChaCha8Rng, count: usize, n: u32) -> Vec<StaticGraph> {
        (0..count)
            .map(|_| {
                let mut g = StaticGraph::new();
                for u in 0..n {
                    if rng.gen_bool(0.7) {
                        g.add_node(u);
                    }
                }
                let nodes: Vec<u32> = g.nodes().collect();
                for (a, &u) in nodes.iter().enumerate() {
                    for &v in &nodes[a + 1..] {
                        if rng.gen_bool(0.3) {
                            g.add_edge(u, v, EdgeData::single(Sign::None));
                        }
                    }
                }
                g
            })
            .collect()
    }

    #[test]
    fn four_random_graphs_match_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let graphs = random_graphs(&mut rng, 4, 10);
        let s = Summaries::compute(&graphs, 2).unwrap();
        assert_eq!(s.intersection, oracle(&graphs, 2, |c, i| c > i));
        assert_eq!(s.disjoint, oracle(&graphs, 2, |c, i| c >= 1 && c < i));
        assert_eq!(s.union, oracle(&graphs, 2, |c, _| c >= 1));
    }

    proptest! {
        #[test]
        fn snapshot_summaries_are_consistent(seed in any::<u64>(), count in 1usize..=6, n in 1u32..=20, i_raw in 0usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let graphs = random_graphs(&mut rng, count, n);
            let i = i_raw.min(count);
            let s = Summaries::compute(&graphs, i).unwrap();
            for node in s.intersection.nodes() {
                prop_assert!(!s.disjoint.contains_node(node));
                prop_assert!(s.union.contains_node(node));
            }
            for node in s.disjoint.nodes() {
                prop_assert!(s.union.contains_node(node));
            }
        }

        #[test]
        fn union_is_commutative_and_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let graphs = random_graphs(&mut rng, 4, 8);
            let whole = union_graph(&graphs).unwrap();
            let mut shuffled = graphs.clone();
            shuffled.reverse();
            prop_assert_eq!(&union_graph(&shuffled).unwrap(), &whole);
            // Nested unions agree on structure and on summed counts.
            let left = union_graph(&graphs[..2]).unwrap();
            let right = union_graph(&graphs[2..]).unwrap();
            let mut nested = left.clone();
            for n in right.nodes() {
                nested.add_node(n);
            }
            for ((u, v), d) in right.edges() {
                nested.add_edge(u, v, *d);
            }
            prop_assert_eq!(nested, whole);
        }
    }

    #[test]
    fn store_is_lazy_and_round_trips() {
        use crate::graph::{bucket_by_hour, TimestampedEdge};
        let edges: Vec<TimestampedEdge> = (0..8)
            .flat_map(|t| {
                [
                    TimestampedEdge::new("a", "b", t * 3600),
                    TimestampedEdge::new(format!("n{t}"), "a", t * 3600 + 5),
                ]
            })
            .collect();
        let dg = Arc::new(bucket_by_hour(&edges, 3600).unwrap());
        let h = Arc::new(SnapshotHierarchy::new(dg.len()).unwrap());
        let store = SummaryStore::new(dg.clone(), h.clone(), ThresholdPolicy::Overlap);
        let root = store.snapshot(h.root_level(), 0).unwrap();
        assert_eq!(root.i_threshold, 4);
        // a-b appears in all 8 buckets, the n_t spokes in one each
        assert_eq!(root.summary(SummaryType::Intersection).edge_count(), 1);
        assert_eq!(root.summary(SummaryType::Disjoint).node_count(), 8);
        assert!(store.snapshot(9, 0).is_err());

        let container = store.to_container().unwrap();
        let bytes = container.encode();
        let fresh = SummaryStore::new(dg, h.clone(), ThresholdPolicy::Overlap);
        fresh.load_container(GraphContainer::decode(&bytes).unwrap()).unwrap();
        for iv in h.intervals() {
            assert_eq!(
                fresh.snapshot(iv.level, iv.index).unwrap(),
                store.snapshot(iv.level, iv.index).unwrap()
            );
        }
    }
}
