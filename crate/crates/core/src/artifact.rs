//! Build artifacts: everything the server needs, written once by
//! [`cmd_build`] and loaded read-only by [`Artifact::load`].
//!
//! ```text
//! artifact/
//!   graph.mssg        bucketed dynamic graph
//!   intervals.tsv     hierarchy table
//!   summaries.mssg    union/intersection/disjoint graph of every interval
//!   embeddings.mse    embedding matrix
//!   index/level_<l>.mssi
//!   layout.json       global layout of the root union graph
//!   manifest.json     counts, parameters and sha256 of every file above
//! ```
//!
//! The directory is assembled under a temporary name next to the target and
//! renamed into place, so a failed build leaves no partial output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::BuildConfig;
use crate::embed::{embed_hierarchy, EmbeddingMatrix, EmbeddingParams};
use crate::error::{Error, Result};
use crate::graph::{bucket_by_hour, parse_edge_stream, ContainerKind, DynamicGraph, EdgeSchema, GraphContainer};
use crate::hierarchy::SnapshotHierarchy;
use crate::knn::{build_indices, IndexParams, LevelIndex};
use crate::layout::{global_layout, LayoutResult};
use crate::summarize::{SummaryStore, SummaryType, ThresholdPolicy};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub buckets: usize,
    pub nodes: usize,
    pub edges_ingested: usize,
    pub malformed_lines: usize,
    pub intervals: usize,
    pub embedded_snapshots: usize,
    pub embedding_records: usize,
    pub indexed_records: usize,
}

/// Parameters that influence the artifact contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub schema: EdgeSchema,
    pub bucket_width: u64,
    pub embedding: EmbeddingParams,
    pub summaries: Vec<SummaryType>,
    pub threshold: ThresholdPolicy,
    pub index: IndexParams,
    pub layout: crate::config::LayoutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub input_sha256: String,
    pub params: BuildParams,
    pub counts: Counts,
    /// Relative file path to sha256 hex digest.
    pub files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn index_file(level: u32) -> String {
    format!("index/level_{level}.mssi")
}

/// Runs the whole pipeline and writes the artifact to `config.output`,
/// replacing any previous artifact there.
pub fn cmd_build(config: &BuildConfig) -> Result<Manifest> {
    config.validate()?;
    let input = std::fs::read(&config.input)
        .map_err(|e| Error::Config(format!("cannot read input {}: {e}", config.input.display())))?;
    let parsed = parse_edge_stream(input.as_slice(), &config.schema)?;
    let dg = Arc::new(bucket_by_hour(&parsed.edges, config.bucket_width)?);
    let hierarchy = Arc::new(SnapshotHierarchy::new(dg.len())?);
    let store = SummaryStore::new(dg.clone(), hierarchy.clone(), config.threshold);
    store.compute_all()?;
    let records = embed_hierarchy(&store, &config.embedding, &config.summaries)?;
    let matrix = EmbeddingMatrix::new(config.embedding.method, records)?;
    let indices = build_indices(&matrix.records, &hierarchy, &config.index)?;
    let root = store.snapshot(hierarchy.root_level(), 0)?;
    let layout = match global_layout(root.summary(SummaryType::Union), config.layout.algorithm, config.layout.seed) {
        Ok(l) => l,
        Err(Error::Empty(_)) => LayoutResult {
            positions: BTreeMap::new(),
            algorithm: config.layout.algorithm,
            seed: config.layout.seed,
        },
        Err(e) => return Err(e),
    };

    let embeddings = matrix.encode();
    let embedding_hash: [u8; 32] = Sha256::digest(&embeddings).into();
    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("graph.mssg".into(), GraphContainer::from_dynamic(&dg).encode()),
        ("intervals.tsv".into(), hierarchy.to_table().into_bytes()),
        ("summaries.mssg".into(), store.to_container()?.encode()),
        ("embeddings.mse".into(), embeddings),
        ("layout.json".into(), serde_json::to_vec_pretty(&layout)?),
    ];
    for ix in &indices {
        files.push((index_file(ix.level()), ix.encode(&embedding_hash)));
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        input_sha256: sha256_hex(&input),
        params: BuildParams {
            schema: config.schema.clone(),
            bucket_width: config.bucket_width,
            embedding: config.embedding,
            summaries: config.summaries.clone(),
            threshold: config.threshold,
            index: config.index,
            layout: config.layout,
        },
        counts: Counts {
            buckets: dg.len(),
            nodes: dg.dictionary.len(),
            edges_ingested: parsed.edges.len(),
            malformed_lines: parsed.errors.len(),
            intervals: hierarchy.len(),
            embedded_snapshots: hierarchy.intervals().filter(|iv| iv.level > 1).count(),
            embedding_records: matrix.records.len(),
            indexed_records: indices.iter().map(LevelIndex::len).sum(),
        },
        files: files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect(),
    };
    files.push(("manifest.json".into(), serde_json::to_vec_pretty(&manifest)?));
    write_atomically(&config.output, &files)?;
    Ok(manifest)
}

fn write_atomically(target: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let name = target
        .file_name()
        .ok_or_else(|| Error::Config(format!("invalid output path {}", target.display())))?
        .to_string_lossy()
        .into_owned();
    let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
    let result = (|| -> Result<()> {
        if staging.exists() {
            std::fs::remove_dir_all(&staging)?;
        }
        for (rel, bytes) in files {
            let path = staging.join(rel);
            std::fs::create_dir_all(path.parent().expect("joined path has a parent"))?;
            std::fs::write(path, bytes)?;
        }
        if target.exists() {
            std::fs::remove_dir_all(target)?;
        }
        std::fs::rename(&staging, target)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&staging);
    }
    result
}

/// A loaded, verified artifact.
pub struct Artifact {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub graph: Arc<DynamicGraph>,
    pub hierarchy: Arc<SnapshotHierarchy>,
    pub store: SummaryStore,
    pub embeddings: EmbeddingMatrix,
    pub indices: Vec<LevelIndex>,
    pub layout: LayoutResult,
}

impl Artifact {
    /// Loads every file, checking each against the manifest digest.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join("manifest.json"))?))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Format(format!("unsupported manifest version {}", manifest.version)));
        }
        let read = |rel: &str| -> Result<Vec<u8>> {
            let expected = manifest
                .files
                .get(rel)
                .ok_or_else(|| Error::Format(format!("manifest does not list {rel}")))?;
            let bytes = std::fs::read(dir.join(rel))?;
            if &sha256_hex(&bytes) != expected {
                return Err(Error::Format(format!("{rel} does not match its manifest digest")));
            }
            Ok(bytes)
        };
        let graph = Arc::new(GraphContainer::decode(&read("graph.mssg")?)?.into_dynamic()?);
        let table = String::from_utf8(read("intervals.tsv")?).map_err(|e| Error::Format(e.to_string()))?;
        let hierarchy = Arc::new(SnapshotHierarchy::from_table(&table)?);
        if hierarchy.buckets() != graph.len() {
            return Err(Error::Format("hierarchy and graph disagree on the bucket count".into()));
        }
        let store = SummaryStore::new(graph.clone(), hierarchy.clone(), manifest.params.threshold);
        let summaries = GraphContainer::decode(&read("summaries.mssg")?)?;
        if summaries.kind != ContainerKind::Summaries {
            return Err(Error::Format("summaries.mssg holds the wrong container kind".into()));
        }
        store.load_container(summaries)?;
        let embedding_bytes = read("embeddings.mse")?;
        let embedding_hash: [u8; 32] = Sha256::digest(&embedding_bytes).into();
        let embeddings = EmbeddingMatrix::decode(&embedding_bytes)?;
        let indices = manifest
            .files
            .keys()
            .filter(|k| k.starts_with("index/"))
            .map(|rel| LevelIndex::decode(&read(rel)?, Some(&embedding_hash)))
            .collect::<Result<Vec<_>>>()?;
        let mut indices = indices;
        indices.sort_by_key(LevelIndex::level);
        let layout = serde_json::from_slice(&read("layout.json")?)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            graph,
            hierarchy,
            store,
            embeddings,
            indices,
            layout,
        })
    }
}
