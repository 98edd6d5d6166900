//! Multiscale hierarchy of overlapping temporal intervals.
//!
//! Level 1 holds one interval per bucket. Level `l >= 2` holds rolling
//! windows of width `2^(l-1)` whose starts advance by half a width, clipped
//! at `T`, so each level has `ceil(T / (w/2))` intervals. The widths stop at
//! `2^ceil(log2 T)`; a final root level holds the single interval `[0, T)`.

mod interval_tree;

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use interval_tree::IntervalTree;

use crate::error::{Error, Result};

/// A half-open bucket range `[start, end)` at position `k` of its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub level: u32,
    #[serde(rename = "k")]
    pub index: u32,
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }

    /// Number of buckets shared with `[start, end)`.
    pub fn overlap(&self, start: usize, end: usize) -> usize {
        self.end.min(end).saturating_sub(self.start.max(start))
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotHierarchy {
    buckets: usize,
    levels: Vec<Vec<Interval>>,
    tree: IntervalTree<Interval>,
}

/// Builds the interval hierarchy for `buckets` time steps.
pub fn build_hierarchy(buckets: usize) -> Result<SnapshotHierarchy> {
    SnapshotHierarchy::new(buckets)
}

impl SnapshotHierarchy {
    pub fn new(buckets: usize) -> Result<Self> {
        if buckets < 1 {
            return Err(Error::InvalidArgument("hierarchy needs T >= 1".into()));
        }
        let mut levels = vec![(0..buckets)
            .map(|t| Interval {
                level: 1,
                index: t as u32,
                start: t,
                end: t + 1,
            })
            .collect::<Vec<_>>()];

        let top_width = buckets.next_power_of_two();
        let mut width = 2;
        while width <= top_width {
            let level = levels.len() as u32 + 1;
            let stride = width / 2;
            let row = (0..buckets)
                .step_by(stride)
                .enumerate()
                .map(|(k, start)| Interval {
                    level,
                    index: k as u32,
                    start,
                    end: (start + width).min(buckets),
                })
                .collect();
            levels.push(row);
            width *= 2;
        }
        let root_level = levels.len() as u32 + 1;
        levels.push(vec![Interval {
            level: root_level,
            index: 0,
            start: 0,
            end: buckets,
        }]);

        let tree = IntervalTree::new(
            levels
                .iter()
                .flatten()
                .map(|iv| (iv.start, iv.end, *iv))
                .collect(),
        );
        Ok(Self {
            buckets,
            levels,
            tree,
        })
    }

    /// Number of buckets `T` covered.
    pub fn buckets(&self) -> usize {
        self.buckets
    }

    /// Number of levels including level 1 and the root level.
    pub fn level_count(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn root_level(&self) -> u32 {
        self.level_count()
    }

    pub fn root(&self) -> Interval {
        self.levels.last().expect("root level")[0]
    }

    pub fn level(&self, level: u32) -> &[Interval] {
        level
            .checked_sub(1)
            .and_then(|i| self.levels.get(i as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, &[Interval])> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, row)| (i as u32 + 1, row.as_slice()))
    }

    pub fn get(&self, level: u32, k: u32) -> Option<Interval> {
        self.level(level).get(k as usize).copied()
    }

    /// All intervals in (level, k) order.
    pub fn intervals(&self) -> impl Iterator<Item = &Interval> {
        self.levels.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nominal window width of a level (`T` for the root).
    pub fn nominal_width(&self, level: u32) -> usize {
        if level == self.root_level() {
            self.buckets
        } else if level <= 1 {
            1
        } else {
            1 << (level - 1)
        }
    }

    /// Default summary threshold `i`: the overlap between consecutive windows
    /// of the level (half the nominal width; zero for singleton intervals).
    pub fn overlap_threshold(&self, level: u32) -> usize {
        self.nominal_width(level) / 2
    }

    /// Levels with rolling windows (excludes level 1 and the root).
    pub fn window_levels(&self) -> impl Iterator<Item = u32> + '_ {
        2..self.root_level()
    }

    /// Interval maximizing Jaccard overlap with `[start, end)`; ties go to the
    /// smaller level, then the smaller start.
    ///
    /// Within a level every untruncated interval has the same width, so the
    /// Jaccard index is unimodal in the interval start and its maximum (and
    /// the earliest start attaining it) lies next to `start` or `end - width`.
    /// Only those positions and the truncated intervals at the end of each
    /// level are scored.
    pub fn window_query(&self, start: usize, end: usize) -> Result<Interval> {
        self.check_range(start, end)?;
        let mut best: Option<(Interval, usize, usize)> = None;
        let mut consider = |iv: Interval| {
            let inter = iv.overlap(start, end);
            let union = iv.len() + (end - start) - inter;
            let better = match best {
                None => true,
                Some((b, bi, bu)) => match (inter * bu).cmp(&(bi * union)) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => (iv.level, iv.start) < (b.level, b.start),
                },
            };
            if better {
                best = Some((iv, inter, union));
            }
        };
        for (level, row) in self.levels() {
            if row.len() <= 6 {
                row.iter().copied().for_each(&mut consider);
                continue;
            }
            let width = self.nominal_width(level);
            let stride = (width / 2).max(1);
            let anchors = [start / stride, end.saturating_sub(width) / stride];
            for a in anchors {
                let hi = (a + 1).min(row.len() - 1);
                row[a.saturating_sub(1).min(hi)..=hi].iter().copied().for_each(&mut consider);
            }
            // truncated intervals at the end of the level
            for iv in row.iter().rev().take_while(|iv| iv.len() < width) {
                consider(*iv);
            }
        }
        Ok(best.expect("root overlaps every valid range").0)
    }

    /// All intervals containing bucket `t`, sorted by (level, start).
    pub fn stabbing_query(&self, t: usize) -> Result<Vec<Interval>> {
        if t >= self.buckets {
            return Err(Error::InvalidArgument(format!(
                "bucket {t} outside [0, {})",
                self.buckets
            )));
        }
        let mut hits = self.tree.stab(t);
        hits.sort_by_key(|iv| (iv.level, iv.start));
        Ok(hits)
    }

    /// Intervals overlapping `[start, end)`, sorted by (level, start).
    pub fn overlapping(&self, start: usize, end: usize) -> Vec<Interval> {
        let mut hits = self.tree.overlapping(start, end);
        hits.sort_by_key(|iv| (iv.level, iv.start));
        hits
    }

    fn check_range(&self, start: usize, end: usize) -> Result<()> {
        if start >= end || end > self.buckets {
            return Err(Error::InvalidArgument(format!(
                "invalid range [{start}, {end}) for T = {}",
                self.buckets
            )));
        }
        Ok(())
    }

    /// Tab-separated interval table with a header, in (level, k) order.
    pub fn to_table(&self) -> String {
        let mut out = String::from("level\tk\tstart\tend\n");
        for iv in self.intervals() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", iv.level, iv.index, iv.start, iv.end);
        }
        out
    }

    /// Parses a table written by [`Self::to_table`] and checks that it
    /// matches the canonical hierarchy for its `T`.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<&str> = line.split('\t').collect();
            let parse = |j: usize| -> Result<usize> {
                cols.get(j)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Format(format!("interval table line {}", i + 1)))
            };
            rows.push(Interval {
                level: parse(0)? as u32,
                index: parse(1)? as u32,
                start: parse(2)?,
                end: parse(3)?,
            });
        }
        let root = rows
            .last()
            .ok_or_else(|| Error::Format("empty interval table".into()))?;
        let h = Self::new(root.end)?;
        if !h.intervals().copied().eq(rows.iter().copied()) {
            return Err(Error::Format("interval table is not a canonical hierarchy".into()));
        }
        Ok(h)
    }
}
