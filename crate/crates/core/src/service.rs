//! Request handling behind the HTTP API, independent of any web framework.
//!
//! The artifact is immutable and shared; per-analyst state (node filter,
//! clustering preference, view state) lives in [`Session`]s that expire
//! after a period of inactivity. Each session has its own lock, so requests
//! on different sessions never wait for each other.
//!
//! Every response type has a JSON schema under `schemas/v1/`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::abstraction::{auto_abstract, metric_color, Metaphor, ViewState};
use crate::artifact::Artifact;
use crate::error::Error;
use crate::graph::{graph_metrics, GraphMetrics, NodeId, Sign, StaticGraph};
use crate::hierarchy::Interval;
use crate::knn::{knn, KnnQuery, KnnResult};
use crate::layout::LayoutAlgorithm;
use crate::summarize::{cluster_communities, SummaryType};

pub const SCHEMA_VERSION: &str = "v1";

/// Graphs with more nodes than this are always served clustered.
pub const CLUSTER_NODE_LIMIT: usize = 100;

/// Error body returned by every endpoint on failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub error: String,
    pub message: String,
}

impl ApiError {
    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: 404,
            error: "not_found".into(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: 400,
            error: "bad_request".into(),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotFound(_) => Self::not_found(e.to_string()),
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Schema(_) | Error::Empty(_) => {
                Self::bad_request(e.to_string())
            }
            _ => Self {
                status: 500,
                error: "internal".into(),
                message: e.to_string(),
            },
        }
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub level: u32,
    pub width: usize,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyResponse {
    pub schema_version: String,
    pub buckets: usize,
    pub origin: i64,
    pub bucket_width: u64,
    pub root_level: u32,
    pub levels: Vec<LevelInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePayload {
    pub id: NodeId,
    pub label: String,
    pub x: f64,
    pub y: f64,
    /// Member node ids when this node stands for a community.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePayload {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: u32,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPayload {
    pub nodes: Vec<NodePayload>,
    pub edges: Vec<EdgePayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotResponse {
    pub schema_version: String,
    pub level: u32,
    pub k: u32,
    pub start: usize,
    pub end: usize,
    pub summary_type: SummaryType,
    pub clustered: bool,
    pub graph: GraphPayload,
    /// Metrics of the (filtered) summary graph before clustering.
    pub metrics: GraphMetrics,
    /// Per-bucket graphs of the interval, for the animation metaphor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<GraphPayload>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnapshotOptions {
    pub summary_type: SummaryType,
    pub cluster: bool,
    pub session: Option<String>,
    pub metaphor: Metaphor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub schema_version: String,
    pub level: u32,
    pub k: u32,
    pub start: usize,
    pub end: usize,
    pub i_threshold: usize,
    pub summaries: BTreeMap<SummaryType, GraphMetrics>,
    /// Metrics of each bucket graph in the interval, in time order.
    pub series: Vec<GraphMetrics>,
    /// Color of each summary under the session's color metric, scaled over
    /// the interval's level.
    pub colors: BTreeMap<SummaryType, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRef {
    pub level: u32,
    pub k: u32,
    pub summary_type: SummaryType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRequest {
    #[serde(default)]
    pub vector: Option<Vec<f32>>,
    #[serde(default)]
    pub reference: Option<SnapshotRef>,
    pub k: usize,
    #[serde(default)]
    pub levels: Option<Vec<u32>>,
    #[serde(default)]
    pub summary_filter: Option<SummaryType>,
    #[serde(default)]
    pub time_range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRequest {
    #[serde(default)]
    pub session: Option<String>,
    /// Node labels to keep; intersected with any existing filter.
    #[serde(default)]
    pub nodes: Vec<String>,
    /// Drops the filter instead of narrowing it.
    #[serde(default)]
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractRequest {
    #[serde(default)]
    pub session: Option<String>,
    /// Replaces the session's view state before abstraction when present.
    #[serde(default)]
    pub views: Option<ViewState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResponse {
    pub schema_version: String,
    pub algorithm: LayoutAlgorithm,
    pub seed: u64,
    pub nodes: Vec<NodePayload>,
}

/// Everything the UI needs before its first data request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub schema_version: String,
    pub buckets: usize,
    pub root_level: u32,
    pub summary_types: Vec<SummaryType>,
    pub metaphors: Vec<Metaphor>,
    pub cluster_node_limit: usize,
    /// Default view state for a new session.
    pub views: ViewState,
    pub embedding_dims: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: String,
    pub id: String,
    /// Allowed node ids; `None` means unfiltered.
    pub filter: Option<Vec<NodeId>>,
    pub cluster: bool,
    pub views: ViewState,
}

#[derive(Debug, Clone)]
struct Session {
    filter: Option<BTreeSet<NodeId>>,
    cluster: bool,
    views: ViewState,
    touched: Instant,
}

impl Session {
    fn new() -> Self {
        Self {
            filter: None,
            cluster: false,
            views: ViewState::default(),
            touched: Instant::now(),
        }
    }
}

pub struct Service {
    artifact: Arc<Artifact>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
    ttl: Duration,
}

fn graph_payload(g: &StaticGraph, artifact: &Artifact) -> GraphPayload {
    GraphPayload {
        nodes: g
            .nodes()
            .map(|id| {
                let (x, y) = artifact.layout.positions.get(&id).copied().unwrap_or((0.0, 0.0));
                NodePayload {
                    id,
                    label: artifact.graph.label(id),
                    x,
                    y,
                    members: None,
                }
            })
            .collect(),
        edges: g
            .edges()
            .map(|((u, v), d)| EdgePayload {
                source: u,
                target: v,
                weight: d.count,
                sign: d.sign(),
            })
            .collect(),
    }
}

impl Service {
    pub fn new(artifact: Artifact, ttl: Duration) -> Self {
        Self {
            artifact: Arc::new(artifact),
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            ttl,
        }
    }

    pub fn artifact(&self) -> &Artifact {
        &self.artifact
    }

    /// Returns the named live session, or a fresh one when `id` is absent,
    /// unknown or expired. Expired sessions are dropped on the way.
    fn session(&self, id: Option<&str>) -> (String, Arc<Mutex<Session>>) {
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        let now = Instant::now();
        sessions.retain(|_, s| now.duration_since(s.lock().map(|s| s.touched).unwrap_or(now)) < self.ttl);
        if let Some(id) = id {
            if let Some(s) = sessions.get(id) {
                s.lock().expect("session poisoned").touched = now;
                return (id.to_owned(), s.clone());
            }
        }
        let id = format!("s{:08x}", self.next_session.fetch_add(1, Ordering::Relaxed));
        let s = Arc::new(Mutex::new(Session::new()));
        sessions.insert(id.clone(), s.clone());
        (id, s)
    }

    fn state_of(&self, id: String, s: &Session) -> SessionState {
        SessionState {
            schema_version: SCHEMA_VERSION.into(),
            id,
            filter: s.filter.as_ref().map(|f| f.iter().copied().collect()),
            cluster: s.cluster,
            views: s.views.clone(),
        }
    }

    fn interval(&self, level: u32, k: u32) -> ApiResult<Interval> {
        self.artifact
            .hierarchy
            .get(level, k)
            .ok_or_else(|| ApiError::not_found(format!("no snapshot ({level}, {k})")))
    }

    pub fn bootstrap(&self) -> Bootstrap {
        let h = &self.artifact.hierarchy;
        Bootstrap {
            schema_version: SCHEMA_VERSION.into(),
            buckets: h.buckets(),
            root_level: h.root_level(),
            summary_types: self.artifact.manifest.params.summaries.clone(),
            metaphors: vec![Metaphor::NodeLink, Metaphor::Matrix, Metaphor::MetricsSeries, Metaphor::Animation],
            cluster_node_limit: CLUSTER_NODE_LIMIT,
            views: ViewState::default(),
            embedding_dims: self.artifact.indices.first().map_or(0, |ix| ix.dim()),
        }
    }

    pub fn hierarchy(&self) -> HierarchyResponse {
        let h = &self.artifact.hierarchy;
        HierarchyResponse {
            schema_version: SCHEMA_VERSION.into(),
            buckets: h.buckets(),
            origin: self.artifact.graph.origin,
            bucket_width: self.artifact.graph.bucket_width,
            root_level: h.root_level(),
            levels: h
                .levels()
                .map(|(level, ivs)| LevelInfo {
                    level,
                    width: h.nominal_width(level),
                    intervals: ivs.to_vec(),
                })
                .collect(),
        }
    }

    pub fn snapshot(&self, level: u32, k: u32, opts: &SnapshotOptions) -> ApiResult<SnapshotResponse> {
        let iv = self.interval(level, k)?;
        let snap = self.artifact.store.snapshot(level, k)?;
        let (filter, session_cluster) = match &opts.session {
            Some(id) => {
                let (_, s) = self.session(Some(id));
                let s = s.lock().expect("session poisoned");
                (s.filter.clone(), s.cluster)
            }
            None => (None, false),
        };
        let restrict = |g: &StaticGraph| match &filter {
            Some(keep) => g.induced(keep),
            None => g.clone(),
        };
        let g = restrict(snap.summary(opts.summary_type));
        let clustered = opts.cluster || session_cluster || g.node_count() > CLUSTER_NODE_LIMIT;
        let graph = if clustered && !g.is_empty() {
            let partition = cluster_communities(&g)?;
            let positions = &self.artifact.layout.positions;
            GraphPayload {
                nodes: partition
                    .members
                    .iter()
                    .enumerate()
                    .map(|(c, members)| {
                        let (sx, sy) = members.iter().fold((0.0, 0.0), |acc, m| {
                            let p = positions.get(m).copied().unwrap_or((0.0, 0.0));
                            (acc.0 + p.0, acc.1 + p.1)
                        });
                        let n = members.len() as f64;
                        NodePayload {
                            id: c as NodeId,
                            label: format!("community {c}"),
                            x: sx / n,
                            y: sy / n,
                            members: Some(members.clone()),
                        }
                    })
                    .collect(),
                edges: graph_payload(&partition.meta_graph, &self.artifact).edges,
            }
        } else {
            graph_payload(&g, &self.artifact)
        };
        let frames = (opts.metaphor == Metaphor::Animation).then(|| {
            self.artifact
                .graph
                .window(iv.start, iv.end)
                .iter()
                .map(|b| graph_payload(&restrict(b), &self.artifact))
                .collect()
        });
        Ok(SnapshotResponse {
            schema_version: SCHEMA_VERSION.into(),
            level,
            k,
            start: iv.start,
            end: iv.end,
            summary_type: opts.summary_type,
            clustered,
            graph,
            metrics: graph_metrics(&g),
            frames,
        })
    }

    pub fn metrics(&self, level: u32, k: u32, session: Option<&str>) -> ApiResult<MetricsResponse> {
        let iv = self.interval(level, k)?;
        let snap = self.artifact.store.snapshot(level, k)?;
        let field = match session {
            Some(id) => self.session(Some(id)).1.lock().expect("session poisoned").views.color_metric,
            None => ViewState::default().color_metric,
        };
        let mut colors = BTreeMap::new();
        for t in SummaryType::ALL {
            let values = self
                .artifact
                .hierarchy
                .level(level)
                .iter()
                .map(|other| Ok(self.artifact.store.snapshot(other.level, other.index)?.metrics[&t].get(field)))
                .collect::<crate::Result<Vec<f64>>>()?;
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            colors.insert(t, metric_color(snap.metrics[&t].get(field), lo, hi).hex());
        }
        Ok(MetricsResponse {
            schema_version: SCHEMA_VERSION.into(),
            level,
            k,
            start: iv.start,
            end: iv.end,
            i_threshold: snap.i_threshold,
            summaries: snap.metrics.clone(),
            series: self.artifact.graph.window(iv.start, iv.end).iter().map(graph_metrics).collect(),
            colors,
        })
    }

    pub fn knn(&self, req: &KnnRequest) -> ApiResult<KnnResult> {
        let vector = match (&req.vector, &req.reference) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => self
                .artifact
                .embeddings
                .records
                .iter()
                .find(|e| e.level == r.level && e.index == r.k && e.summary_type == r.summary_type)
                .map(|e| e.vector.clone())
                .ok_or_else(|| {
                    ApiError::not_found(format!(
                        "no embedding for ({}, {}, {})",
                        r.level,
                        r.k,
                        r.summary_type.as_str()
                    ))
                })?,
            _ => return Err(ApiError::bad_request("give exactly one of vector or reference")),
        };
        let query = KnnQuery {
            k: req.k,
            summary_filter: req.summary_filter,
            levels: req.levels.as_ref().map(|l| l.iter().copied().collect()),
            time_range: req.time_range,
        };
        Ok(knn(&self.artifact.indices, &vector, &query)?)
    }

    pub fn filter(&self, req: &FilterRequest) -> ApiResult<SessionState> {
        let dict = &self.artifact.graph.dictionary;
        let requested: BTreeSet<NodeId> = req
            .nodes
            .iter()
            .map(|label| {
                dict.get(label)
                    .ok_or_else(|| ApiError::bad_request(format!("unknown node {label:?}")))
            })
            .collect::<ApiResult<_>>()?;
        let (id, s) = self.session(req.session.as_deref());
        let mut s = s.lock().expect("session poisoned");
        s.filter = if req.reset {
            None
        } else {
            Some(match s.filter.take() {
                Some(existing) => existing.intersection(&requested).copied().collect(),
                None => requested,
            })
        };
        Ok(self.state_of(id, &s))
    }

    pub fn abstract_views(&self, req: &AbstractRequest) -> ApiResult<SessionState> {
        let (id, s) = self.session(req.session.as_deref());
        let mut s = s.lock().expect("session poisoned");
        if let Some(views) = &req.views {
            for v in &views.visible {
                if self.artifact.hierarchy.get(v.interval.level, v.interval.index) != Some(v.interval) {
                    return Err(ApiError::bad_request(format!(
                        "view references unknown interval ({}, {})",
                        v.interval.level, v.interval.index
                    )));
                }
            }
            s.views = views.clone();
        }
        s.views = auto_abstract(&s.views, &self.artifact.hierarchy);
        Ok(self.state_of(id, &s))
    }

    pub fn layout(&self) -> LayoutResponse {
        let l = &self.artifact.layout;
        LayoutResponse {
            schema_version: SCHEMA_VERSION.into(),
            algorithm: l.algorithm,
            seed: l.seed,
            nodes: l
                .positions
                .iter()
                .map(|(&id, &(x, y))| NodePayload {
                    id,
                    label: self.artifact.graph.label(id),
                    x,
                    y,
                    members: None,
                })
                .collect(),
        }
    }

    /// Returns (creating if needed) a session; `cluster` updates the
    /// session's clustering preference when given.
    pub fn session_state(&self, id: Option<&str>, cluster: Option<bool>) -> SessionState {
        let (id, s) = self.session(id);
        let mut s = s.lock().expect("session poisoned");
        if let Some(c) = cluster {
            s.cluster = c;
        }
        self.state_of(id, &s)
    }
}
