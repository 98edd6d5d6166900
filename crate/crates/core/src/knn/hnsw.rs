//! Hierarchical navigable small-world graph over a fixed set of vectors.
//!
//! Insertion follows the layered greedy construction: each point draws a top
//! layer from an exponential distribution, descends greedily through the
//! upper layers and links to neighbors chosen by the diversity heuristic on
//! every layer at or below its own. Layer 0 allows `2M` links, upper layers
//! `M`; a new node fills its own lists up to that capacity. Levels come from a seeded generator so builds are reproducible.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(distance, id)` with a total order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scored(pub f32, pub u32);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct HnswGraph {
    pub entry: u32,
    /// `links[node][layer]`; the outer length of a node is its top layer + 1.
    pub links: Vec<Vec<Vec<u32>>>,
}

pub(crate) struct Builder<'a> {
    vectors: &'a [f32],
    dim: usize,
    m: usize,
    ef_construction: usize,
}

impl<'a> Builder<'a> {
    pub fn new(vectors: &'a [f32], dim: usize, m: usize, ef_construction: usize) -> Self {
        Self {
            vectors,
            dim,
            m: m.max(2),
            ef_construction: ef_construction.max(1),
        }
    }

    fn vector(&self, id: u32) -> &[f32] {
        &self.vectors[id as usize * self.dim..(id as usize + 1) * self.dim]
    }

    fn dist(&self, a: u32, b: u32) -> f32 {
        squared_distance(self.vector(a), self.vector(b))
    }

    fn capacity(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    pub fn build(&self, seed: u64) -> HnswGraph {
        let n = self.vectors.len() / self.dim.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ml = 1.0 / (self.m as f64).ln();
        let mut graph = HnswGraph {
            entry: 0,
            links: Vec::with_capacity(n),
        };
        for id in 0..n as u32 {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let level = (-u.ln() * ml).floor() as usize;
            self.insert(&mut graph, id, level);
        }
        self.repair_connectivity(&mut graph);
        graph
    }

    fn insert(&self, graph: &mut HnswGraph, id: u32, level: usize) {
        graph.links.push(vec![Vec::new(); level + 1]);
        if id == 0 {
            graph.entry = 0;
            return;
        }
        let query = self.vector(id);
        let top = graph.links[graph.entry as usize].len() - 1;
        let mut entry = Scored(squared_distance(query, self.vector(graph.entry)), graph.entry);
        for layer in (level + 1..=top).rev() {
            entry = greedy_closest(graph, self.vectors, self.dim, query, entry, layer);
        }
        let mut entries = vec![entry];
        for layer in (0..=level.min(top)).rev() {
            let candidates = search_layer(graph, self.vectors, self.dim, query, &entries, self.ef_construction, layer);
            let chosen = self.select(&candidates, self.capacity(layer));
            graph.links[id as usize][layer] = chosen.iter().map(|s| s.1).collect();
            for s in &chosen {
                let neighbor = s.1 as usize;
                graph.links[neighbor][layer].push(id);
                if graph.links[neighbor][layer].len() > self.capacity(layer) {
                    let mut scored: Vec<Scored> = graph.links[neighbor][layer]
                        .iter()
                        .map(|&x| Scored(self.dist(neighbor as u32, x), x))
                        .collect();
                    scored.sort_unstable();
                    graph.links[neighbor][layer] = self
                        .select(&scored, self.capacity(layer))
                        .iter()
                        .map(|s| s.1)
                        .collect();
                }
            }
            entries = candidates;
        }
        if level > top {
            graph.entry = id;
        }
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the
    /// query than to every neighbor already kept, then top up with the
    /// closest discarded candidates. `sorted` must be ascending.
    fn select(&self, sorted: &[Scored], limit: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(limit);
        let mut discarded = Vec::new();
        for &c in sorted {
            if kept.len() >= limit {
                break;
            }
            if kept.iter().all(|k| self.dist(c.1, k.1) > c.0) {
                kept.push(c);
            } else {
                discarded.push(c);
            }
        }
        for c in discarded {
            if kept.len() >= limit {
                break;
            }
            kept.push(c);
        }
        kept
    }

    /// Links every node unreachable on layer 0 from its nearest reachable node.
    fn repair_connectivity(&self, graph: &mut HnswGraph) {
        loop {
            let reached = reachable(graph);
            let Some(orphan) = reached.iter().position(|&r| !r) else {
                return;
            };
            let orphan = orphan as u32;
            let anchor = (0..graph.links.len() as u32)
                .filter(|&x| reached[x as usize])
                .map(|x| Scored(self.dist(orphan, x), x))
                .min()
                .expect("entry point is reachable");
            graph.links[anchor.1 as usize][0].push(orphan);
            graph.links[orphan as usize][0].push(anchor.1);
        }
    }
}

pub(crate) fn reachable(graph: &HnswGraph) -> Vec<bool> {
    let mut seen = vec![false; graph.links.len()];
    if graph.links.is_empty() {
        return seen;
    }
    let mut stack = vec![graph.entry];
    seen[graph.entry as usize] = true;
    while let Some(v) = stack.pop() {
        for &u in &graph.links[v as usize][0] {
            if !seen[u as usize] {
                seen[u as usize] = true;
                stack.push(u);
            }
        }
    }
    seen
}

fn greedy_closest(graph: &HnswGraph, vectors: &[f32], dim: usize, query: &[f32], mut best: Scored, layer: usize) -> Scored {
    loop {
        let mut improved = false;
        for &n in &graph.links[best.1 as usize][layer] {
            let d = Scored(squared_distance(query, &vectors[n as usize * dim..(n as usize + 1) * dim]), n);
            if d < best {
                best = d;
                improved = true;
            }
        }
        if !improved {
            return best;
        }
    }
}

/// Beam search on one layer; returns up to `ef` results, ascending.
pub(crate) fn search_layer(
    graph: &HnswGraph,
    vectors: &[f32],
    dim: usize,
    query: &[f32],
    entries: &[Scored],
    ef: usize,
    layer: usize,
) -> Vec<Scored> {
    let mut visited = vec![false; graph.links.len()];
    let mut frontier: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
    let mut best: BinaryHeap<Scored> = BinaryHeap::new();
    for &e in entries {
        if !visited[e.1 as usize] {
            visited[e.1 as usize] = true;
            frontier.push(Reverse(e));
            best.push(e);
        }
    }
    while best.len() > ef {
        best.pop();
    }
    while let Some(Reverse(current)) = frontier.pop() {
        if best.len() >= ef && current > *best.peek().expect("non-empty") {
            break;
        }
        for &n in &graph.links[current.1 as usize][layer] {
            if visited[n as usize] {
                continue;
            }
            visited[n as usize] = true;
            let d = Scored(squared_distance(query, &vectors[n as usize * dim..(n as usize + 1) * dim]), n);
            if best.len() < ef || d < *best.peek().expect("non-empty") {
                frontier.push(Reverse(d));
                best.push(d);
                if best.len() > ef {
                    best.pop();
                }
            }
        }
    }
    best.into_sorted_vec()
}

/// Full descent from the entry point; returns up to `ef` nearest, ascending.
pub(crate) fn search(graph: &HnswGraph, vectors: &[f32], dim: usize, query: &[f32], ef: usize) -> Vec<Scored> {
    if graph.links.is_empty() {
        return Vec::new();
    }
    let top = graph.links[graph.entry as usize].len() - 1;
    let entry_vec = &vectors[graph.entry as usize * dim..(graph.entry as usize + 1) * dim];
    let mut entry = Scored(squared_distance(query, entry_vec), graph.entry);
    for layer in (1..=top).rev() {
        entry = greedy_closest(graph, vectors, dim, query, entry, layer);
    }
    search_layer(graph, vectors, dim, query, &[entry], ef.max(1), 0)
}
