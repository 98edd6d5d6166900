//! Multiscale temporal snapshots for dynamic graph analysis.
//!
//! The pipeline buckets a timestamped edge stream into a [`DynamicGraph`],
//! builds a [`SnapshotHierarchy`] of overlapping intervals, summarizes every
//! interval into union/intersection/disjoint graphs, embeds the summaries
//! into fixed-size vectors and indexes them per level for k-nearest-neighbor
//! search.

mod binio;
pub mod abstraction;
pub mod artifact;
pub mod config;
pub mod embed;
pub mod error;
pub mod graph;
pub mod hierarchy;
pub mod knn;
pub mod layout;
pub mod oracle;
pub mod service;
pub mod summarize;

pub use error::{Error, Result};
pub use graph::{DynamicGraph, GraphMetrics, NodeId, Sign, StaticGraph, TimestampedEdge};
pub use hierarchy::{build_hierarchy, Interval, SnapshotHierarchy};
pub use summarize::{Snapshot, SummaryStore, SummaryType};
pub use embed::{EmbeddingMethod, EmbeddingRecord};
pub use knn::{knn, KnnQuery, KnnResult, LevelIndex};
