//! Build configuration, read from TOML.
//!
//! ```toml
//! input = "edges.tsv"
//! output = "artifact"
//! bucket_width = 3600
//! summaries = ["union", "intersection", "disjoint"]
//! threshold = "overlap"            # or { fixed = 3 }
//!
//! [schema]
//! source = 0
//! target = 1
//! timestamp = 2
//!
//! [embedding]
//! method = "fgsd"                  # fgsd | wl_doc | wl_doc_line
//! wl_iterations = 2
//! fgsd = { bins = 200, hist_range = 20.0 }
//! doc = { dims = 128, epochs = 80, lr = 0.025, seed = 42 }
//!
//! [index]
//! m = 16
//! ef_construction = 200
//!
//! [layout]
//! algorithm = "fruchterman_reingold"
//! seed = 42
//! ```
//!
//! Relative `input` and `output` paths are resolved against the directory
//! of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingParams;
use crate::error::{Error, Result};
use crate::graph::EdgeSchema;
use crate::knn::IndexParams;
use crate::layout::LayoutAlgorithm;
use crate::summarize::{SummaryType, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub algorithm: LayoutAlgorithm,
    pub seed: u64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            algorithm: LayoutAlgorithm::FruchtermanReingold,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub input: PathBuf,
    #[serde(default = "default_schema")]
    pub schema: EdgeSchema,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Bucket width in seconds.
    #[serde(default = "default_bucket_width")]
    pub bucket_width: u64,
    #[serde(default = "default_embedding")]
    pub embedding: EmbeddingParams,
    #[serde(default = "default_summaries")]
    pub summaries: Vec<SummaryType>,
    #[serde(default)]
    pub threshold: ThresholdPolicy,
    #[serde(default)]
    pub index: IndexParams,
    #[serde(default)]
    pub layout: LayoutConfig,
}

fn default_schema() -> EdgeSchema {
    EdgeSchema::positional('\t', false, false)
}

fn default_output() -> PathBuf {
    PathBuf::from("artifact")
}

fn default_bucket_width() -> u64 {
    3600
}

/// Interactive builds train for 80 epochs; benchmarks use 250.
fn default_embedding() -> EmbeddingParams {
    let mut p = EmbeddingParams::default();
    p.doc.epochs = 80;
    p
}

fn default_summaries() -> Vec<SummaryType> {
    SummaryType::ALL.to_vec()
}

impl BuildConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            schema: default_schema(),
            output: default_output(),
            bucket_width: default_bucket_width(),
            embedding: default_embedding(),
            summaries: default_summaries(),
            threshold: ThresholdPolicy::default(),
            index: IndexParams::default(),
            layout: LayoutConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a configuration file, resolving relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.input.is_relative() {
            cfg.input = base.join(&cfg.input);
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        let e = &self.embedding;
        if self.bucket_width == 0 {
            return bad("bucket_width must be >= 1");
        }
        if e.doc.dims == 0 || e.doc.epochs == 0 {
            return bad("embedding dims and epochs must be >= 1");
        }
        if !(e.doc.lr.is_finite() && e.doc.lr > 0.0 && e.doc.lr <= 1.0) {
            return bad("learning rate must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&e.doc.sample) {
            return bad("sample must be in [0, 1)");
        }
        if e.wl_iterations > 16 {
            return bad("wl_iterations must be <= 16");
        }
        if e.fgsd.bins == 0 || !(e.fgsd.hist_range.is_finite() && e.fgsd.hist_range > 0.0) {
            return bad("fgsd bins must be >= 1 and hist_range > 0");
        }
        if self.summaries.is_empty() {
            return bad("at least one summary type is required");
        }
        if self.index.m < 2 || self.index.ef_construction == 0 || self.index.ef_search == 0 {
            return bad("index needs m >= 2 and positive ef values");
        }
        if self.threshold == ThresholdPolicy::Fixed(0) {
            return bad("a fixed threshold must be >= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingMethod;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = BuildConfig::from_toml("input = \"edges.tsv\"\n").unwrap();
        assert_eq!(cfg, BuildConfig::new("edges.tsv"));
        assert_eq!(cfg.embedding.doc.epochs, 80);
        assert_eq!(cfg.embedding.wl_iterations, 2);
        assert_eq!(cfg.index.m, 16);
    }

    #[test]
    fn round_trip_is_stable() {
        let mut cfg = BuildConfig::new("in.tsv");
        cfg.embedding.method = EmbeddingMethod::WlDocLine;
        cfg.threshold = ThresholdPolicy::Fixed(3);
        cfg.summaries = vec![SummaryType::Union];
        let text = cfg.to_toml().unwrap();
        let back = BuildConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn rejects_out_of_range_values() {
        for bad in [
            "input = \"a\"\nbucket_width = 0\n",
            "input = \"a\"\n[embedding]\ndoc = { epochs = 0 }\n",
            "input = \"a\"\n[embedding]\nfgsd = { bins = 0 }\n",
            "input = \"a\"\nsummaries = []\n",
            "input = \"a\"\nunknown = 1\n",
            "bucket_width = 10\n",
        ] {
            assert!(BuildConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("build.toml");
        std::fs::write(&path, "input = \"e.tsv\"\noutput = \"out\"\n").unwrap();
        let cfg = BuildConfig::load(&path).unwrap();
        assert_eq!(cfg.input, dir.path().join("e.tsv"));
        assert_eq!(cfg.output, dir.path().join("out"));
        assert!(BuildConfig::load(&dir.path().join("missing.toml")).is_err());
    }
}
