//! `MSSG` binary graph container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "MSSG" | version u16 | kind u8 | origin i64 | bucket_width u64
//! node_count u32 | node_count x (len u32, utf-8 label)
//! block_count u32 | per block:
//!     key (a u32, b u32, c u8)
//!     node_count u32 | node ids u32...
//!     edge_count u32 | per edge: u u32, v u32, count u32, positive u32, negative u32
//! ```
//!
//! A dynamic graph stores one block per bucket keyed `(bucket, 0, 0)`;
//! a summary store keys blocks by `(level, k, summary_type)`.

use super::{DynamicGraph, EdgeData, NodeDictionary, StaticGraph};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSSG";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ContainerKind {
    DynamicGraph = 0,
    Summaries = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockKey {
    pub a: u32,
    pub b: u32,
    pub c: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphContainer {
    pub kind: ContainerKind,
    pub origin: i64,
    pub bucket_width: u64,
    pub labels: Vec<String>,
    pub blocks: Vec<(BlockKey, StaticGraph)>,
}

impl GraphContainer {
    pub fn from_dynamic(dg: &DynamicGraph) -> Self {
        Self {
            kind: ContainerKind::DynamicGraph,
            origin: dg.origin,
            bucket_width: dg.bucket_width,
            labels: dg.dictionary.labels().to_vec(),
            blocks: dg
                .graphs
                .iter()
                .enumerate()
                .map(|(i, g)| (BlockKey { a: i as u32, b: 0, c: 0 }, g.clone()))
                .collect(),
        }
    }

    pub fn into_dynamic(self) -> Result<DynamicGraph> {
        if self.kind != ContainerKind::DynamicGraph {
            return Err(Error::Format("container does not hold a dynamic graph".into()));
        }
        let mut dictionary = NodeDictionary::new();
        for label in &self.labels {
            dictionary.intern(label);
        }
        let mut graphs = Vec::with_capacity(self.blocks.len());
        for (i, (key, g)) in self.blocks.into_iter().enumerate() {
            if key.a as usize != i {
                return Err(Error::Format(format!("bucket block {i} out of order")));
            }
            graphs.push(g);
        }
        if graphs.is_empty() {
            return Err(Error::Format("dynamic graph container has no buckets".into()));
        }
        Ok(DynamicGraph {
            graphs,
            bucket_width: self.bucket_width,
            origin: self.origin,
            dictionary,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u16(VERSION);
        w.u8(self.kind as u8);
        w.i64(self.origin);
        w.u64(self.bucket_width);
        w.u32(self.labels.len() as u32);
        for label in &self.labels {
            w.str(label);
        }
        w.u32(self.blocks.len() as u32);
        for (key, g) in &self.blocks {
            w.u32(key.a);
            w.u32(key.b);
            w.u8(key.c);
            w.u32(g.node_count() as u32);
            for n in g.nodes() {
                w.u32(n);
            }
            w.u32(g.edge_count() as u32);
            for ((u, v), d) in g.edges() {
                w.u32(u);
                w.u32(v);
                w.u32(d.count);
                w.u32(d.positive);
                w.u32(d.negative);
            }
        }
        w.into_inner()
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data, "graph container");
        r.expect_magic(MAGIC)?;
        r.expect_version(VERSION)?;
        let kind = match r.u8()? {
            0 => ContainerKind::DynamicGraph,
            1 => ContainerKind::Summaries,
            other => return Err(Error::Format(format!("unknown container kind {other}"))),
        };
        let origin = r.i64()?;
        let bucket_width = r.u64()?;
        let n_labels = r.len(4)?;
        let labels = (0..n_labels).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let n_blocks = r.len(17)?;
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let key = BlockKey {
                a: r.u32()?,
                b: r.u32()?,
                c: r.u8()?,
            };
            let mut g = StaticGraph::new();
            for _ in 0..r.len(4)? {
                let id = r.u32()?;
                check_id(id, labels.len())?;
                g.add_node(id);
            }
            for _ in 0..r.len(20)? {
                let (u, v) = (r.u32()?, r.u32()?);
                let data = EdgeData {
                    count: r.u32()?,
                    positive: r.u32()?,
                    negative: r.u32()?,
                };
                if u >= v || !g.contains_node(u) || !g.contains_node(v) {
                    return Err(Error::Format(format!("invalid edge ({u}, {v})")));
                }
                g.set_edge(u, v, data);
            }
            blocks.push((key, g));
        }
        r.finish()?;
        Ok(Self {
            kind,
            origin,
            bucket_width,
            labels,
            blocks,
        })
    }
}

fn check_id(id: u32, n: usize) -> Result<()> {
    if id as usize >= n {
        return Err(Error::Format(format!("node id {id} outside dictionary of {n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bucket_by_hour, Sign, TimestampedEdge};

    fn fixture() -> DynamicGraph {
        let mut edges = vec![
            TimestampedEdge::new("a", "b", 0),
            TimestampedEdge::new("b", "c", 10),
            TimestampedEdge::new("c", "d", 7300),
        ];
        edges[1].sign = Sign::Positive;
        bucket_by_hour(&edges, 3600).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dg = fixture();
        let bytes = GraphContainer::from_dynamic(&dg).encode();
        assert_eq!(&bytes[..4], b"MSSG");
        let back = GraphContainer::decode(&bytes).unwrap().into_dynamic().unwrap();
        assert_eq!(back, dg);
        assert_eq!(GraphContainer::from_dynamic(&back).encode(), bytes);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = GraphContainer::from_dynamic(&fixture()).encode();
        bytes[0] = b'X';
        assert!(matches!(GraphContainer::decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_is_rejected() {
        let bytes = GraphContainer::from_dynamic(&fixture()).encode();
        for cut in [3, 10, bytes.len() - 1] {
            assert!(GraphContainer::decode(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = GraphContainer::from_dynamic(&fixture()).encode();
        bytes[4] = 9;
        assert!(GraphContainer::decode(&bytes).is_err());
    }
}
