//! Delimited edge-list ingestion.

use std::io::BufRead;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{Sign, TimestampedEdge};
use crate::error::{Error, Result};

/// A column selected by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_owned())
    }
}

/// Column mapping for an edge stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSchema {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub has_header: bool,
    pub source: ColumnRef,
    pub target: ColumnRef,
    pub timestamp: ColumnRef,
    #[serde(default)]
    pub weight: Option<ColumnRef>,
    #[serde(default)]
    pub sign: Option<ColumnRef>,
}

fn default_delimiter() -> char {
    '\t'
}

impl EdgeSchema {
    /// Positional schema `source, target, timestamp[, weight[, sign]]`.
    pub fn positional(delimiter: char, weight: bool, sign: bool) -> Self {
        Self {
            delimiter,
            has_header: false,
            source: 0.into(),
            target: 1.into(),
            timestamp: 2.into(),
            weight: weight.then(|| 3.into()),
            sign: sign.then_some(ColumnRef::Index(if weight { 4 } else { 3 })),
        }
    }
}

impl Default for EdgeSchema {
    fn default() -> Self {
        Self::positional('\t', false, false)
    }
}

/// A malformed input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    /// One-based line number in the input.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedEdges {
    pub edges: Vec<TimestampedEdge>,
    pub errors: Vec<LineError>,
}

struct Resolved {
    source: usize,
    target: usize,
    timestamp: usize,
    weight: Option<usize>,
    sign: Option<usize>,
}

fn resolve(col: &ColumnRef, header: Option<&[&str]>, what: &str) -> Result<usize> {
    match (col, header) {
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(name), Some(h)) => h
            .iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::Schema(format!("{what} column {name:?} not in header"))),
        (ColumnRef::Name(name), None) => Err(Error::Schema(format!(
            "{what} column {name:?} referenced by name but input has no header"
        ))),
    }
}

/// Parses a line-oriented edge list. Well-formed lines become edges in file
/// order; malformed lines are reported with their line numbers. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_edge_stream<R: BufRead>(input: R, schema: &EdgeSchema) -> Result<ParsedEdges> {
    let mut out = ParsedEdges::default();
    let mut columns: Option<Resolved> = None;
    let mut header_pending = schema.has_header;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter).collect();
        if header_pending {
            header_pending = false;
            columns = Some(resolve_all(schema, Some(&fields))?);
            continue;
        }
        if columns.is_none() {
            columns = Some(resolve_all(schema, None)?);
        }
        let cols = columns.as_ref().expect("resolved above");
        match parse_line(&fields, cols) {
            Ok(edge) => out.edges.push(edge),
            Err(message) => out.errors.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    if columns.is_none() && !schema.has_header {
        // Validate name references even on empty input.
        resolve_all(schema, None)?;
    }
    Ok(out)
}

fn resolve_all(schema: &EdgeSchema, header: Option<&[&str]>) -> Result<Resolved> {
    Ok(Resolved {
        source: resolve(&schema.source, header, "source")?,
        target: resolve(&schema.target, header, "target")?,
        timestamp: resolve(&schema.timestamp, header, "timestamp")?,
        weight: schema
            .weight
            .as_ref()
            .map(|c| resolve(c, header, "weight"))
            .transpose()?,
        sign: schema
            .sign
            .as_ref()
            .map(|c| resolve(c, header, "sign"))
            .transpose()?,
    })
}

fn field<'a>(fields: &[&'a str], i: usize, what: &str) -> Result<&'a str, String> {
    fields
        .get(i)
        .map(|f| f.trim())
        .ok_or_else(|| format!("missing {what} field (column {i})"))
}

fn parse_line(fields: &[&str], cols: &Resolved) -> Result<TimestampedEdge, String> {
    let source = field(fields, cols.source, "source")?;
    let target = field(fields, cols.target, "target")?;
    if source.is_empty() || target.is_empty() {
        return Err("empty node id".into());
    }
    let timestamp = parse_timestamp(field(fields, cols.timestamp, "timestamp")?)?;
    let weight = match cols.weight {
        Some(i) => {
            let raw = field(fields, i, "weight")?;
            let w: f64 = raw
                .parse()
                .map_err(|_| format!("unparseable weight {raw:?}"))?;
            if !w.is_finite() {
                return Err(format!("non-finite weight {raw:?}"));
            }
            w
        }
        None => 1.0,
    };
    let sign = match cols.sign {
        Some(i) => parse_sign(field(fields, i, "sign")?)?,
        None => Sign::None,
    };
    Ok(TimestampedEdge {
        source: source.to_owned(),
        target: target.to_owned(),
        timestamp,
        weight,
        sign,
    })
}

/// Accepts integer epoch seconds or `YYYY-MM-DD HH:MM:SS` (UTC).
fn parse_timestamp(raw: &str) -> Result<i64, String> {
    let ts = match raw.parse::<i64>() {
        Ok(ts) => ts,
        Err(_) => NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S")
            .map(|dt| dt.and_utc().timestamp())
            .map_err(|_| format!("unparseable timestamp {raw:?}"))?,
    };
    if ts < 0 {
        return Err(format!("negative timestamp {ts}"));
    }
    Ok(ts)
}

fn parse_sign(raw: &str) -> Result<Sign, String> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "+1" | "+" | "pos" | "positive" => Ok(Sign::Positive),
        "-1" | "-" | "neg" | "negative" => Ok(Sign::Negative),
        "" | "0" | "none" => Ok(Sign::None),
        _ => Err(format!("unparseable sign {raw:?}")),
    }
}
