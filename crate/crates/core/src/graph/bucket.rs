use std::collections::BTreeSet;

use super::{DynamicGraph, EdgeData, NodeDictionary, StaticGraph, TimestampedEdge};
use crate::error::{Error, Result};

/// Groups edge events into contiguous buckets of `width` seconds.
///
/// Bucket 0 starts at the smallest timestamp. Occurrences of the same
/// undirected edge inside a bucket merge into one edge whose weight is the
/// occurrence count; self-loops are dropped. Node labels are interned in
/// sorted order so the result does not depend on input order.
pub fn bucket_by_hour(edges: &[TimestampedEdge], width: u64) -> Result<DynamicGraph> {
    if width == 0 {
        return Err(Error::InvalidArgument("bucket width must be > 0".into()));
    }
    let (min_ts, max_ts) = edges
        .iter()
        .fold(None, |acc: Option<(i64, i64)>, e| match acc {
            None => Some((e.timestamp, e.timestamp)),
            Some((lo, hi)) => Some((lo.min(e.timestamp), hi.max(e.timestamp))),
        })
        .ok_or(Error::Empty("edge list (no time origin definable)"))?;

    let labels: BTreeSet<&str> = edges
        .iter()
        .filter(|e| e.source != e.target)
        .flat_map(|e| [e.source.as_str(), e.target.as_str()])
        .collect();
    let mut dictionary = NodeDictionary::new();
    for label in labels {
        dictionary.intern(label);
    }

    let span = (max_ts - min_ts) as u64;
    let buckets = (span / width + 1) as usize;
    let mut graphs = vec![StaticGraph::new(); buckets];
    for e in edges {
        if e.source == e.target {
            continue;
        }
        let bucket = ((e.timestamp - min_ts) as u64 / width) as usize;
        let u = dictionary.get(&e.source).expect("interned");
        let v = dictionary.get(&e.target).expect("interned");
        graphs[bucket].add_edge(u, v, EdgeData::single(e.sign));
    }
    Ok(DynamicGraph {
        graphs,
        bucket_width: width,
        origin: min_ts,
        dictionary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Sign;

    fn e(s: &str, t: &str, ts: i64) -> TimestampedEdge {
        TimestampedEdge::new(s, t, ts)
    }

    #[test]
    fn same_bucket() {
        let dg = bucket_by_hour(&[e("a", "b", 0), e("c", "d", 1800)], 3600).unwrap();
        assert_eq!(dg.len(), 1);
        assert_eq!(dg.graphs[0].edge_count(), 2);
    }

    #[test]
    fn bucket_boundary() {
        let dg = bucket_by_hour(&[e("a", "b", 0), e("a", "b", 3600)], 3600).unwrap();
        assert_eq!(dg.len(), 2);
    }

    #[test]
    fn empty_buckets_are_kept() {
        let dg = bucket_by_hour(&[e("a", "b", 100), e("a", "b", 100 + 5 * 3600)], 3600).unwrap();
        assert_eq!(dg.len(), 6);
        assert!(dg.graphs[1..5].iter().all(StaticGraph::is_empty));
        assert_eq!(dg.origin, 100);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(bucket_by_hour(&[], 3600), Err(Error::Empty(_))));
    }

    #[test]
    fn zero_width_is_an_error() {
        assert!(bucket_by_hour(&[e("a", "b", 0)], 0).is_err());
    }

    #[test]
    fn duplicates_merge_and_loops_drop() {
        let mut neg = e("b", "a", 10);
        neg.sign = Sign::Negative;
        let dg = bucket_by_hour(&[e("a", "b", 0), neg.clone(), neg, e("a", "a", 5)], 60).unwrap();
        let g = &dg.graphs[0];
        assert_eq!(g.edge_count(), 1);
        let data = g.edge(0, 1).unwrap();
        assert_eq!(data.count, 3);
        assert_eq!(data.sign(), Sign::Negative);
    }
}
