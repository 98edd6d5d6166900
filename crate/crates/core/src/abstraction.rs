//! Automatic abstraction of snapshot views and the metric color scale.
//!
//! A view shows one hierarchy interval. When a coarse view's time span is
//! mostly shown by finer views, or a level holds more views than its budget,
//! views are collapsed to abstracted (colored rectangle) form. Abstracted
//! views stay in the state; only the level limit removes views.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::MetricField;
use crate::hierarchy::{Interval, SnapshotHierarchy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metaphor {
    #[default]
    NodeLink,
    Matrix,
    MetricsSeries,
    Animation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct View {
    pub interval: Interval,
    #[serde(default)]
    pub metaphor: Metaphor,
    #[serde(default)]
    pub abstracted: bool,
}

impl View {
    pub fn new(interval: Interval) -> Self {
        Self {
            interval,
            metaphor: Metaphor::default(),
            abstracted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewState {
    pub visible: Vec<View>,
    pub max_levels: usize,
    pub per_level_budget: usize,
    pub color_metric: MetricField,
}

impl Default for ViewState {
    fn default() -> Self {
        Self {
            visible: Vec::new(),
            max_levels: 4,
            per_level_budget: 6,
            color_metric: MetricField::Density,
        }
    }
}

impl ViewState {
    pub fn levels(&self) -> BTreeSet<u32> {
        self.visible.iter().map(|v| v.interval.level).collect()
    }

    /// True when both the level limit and every per-level budget hold.
    pub fn is_valid(&self) -> bool {
        self.levels().len() <= self.max_levels
            && self.levels().into_iter().all(|l| {
                self.visible
                    .iter()
                    .filter(|v| v.interval.level == l && !v.abstracted)
                    .count()
                    <= self.per_level_budget
            })
    }
}

/// Number of buckets of `iv` covered by the union of `others`.
fn covered(iv: &Interval, others: &[Interval]) -> usize {
    let mut spans: Vec<(usize, usize)> = others
        .iter()
        .filter_map(|o| {
            let (s, e) = (o.start.max(iv.start), o.end.min(iv.end));
            (s < e).then_some((s, e))
        })
        .collect();
    spans.sort_unstable();
    let (mut total, mut reach) = (0, iv.start);
    for (s, e) in spans {
        let s = s.max(reach);
        if e > s {
            total += e - s;
            reach = e;
        }
    }
    total
}

/// Applies, in order: the level limit (views of the finest excess levels
/// are removed), then per level from the root downwards the coverage rule
/// (a view more than half covered by non-abstracted finer views is
/// abstracted) and the budget rule (abstract by decreasing covered length,
/// ties to the earlier start, then the lower index). Views whose interval
/// is not in `h` are dropped. Views are only ever abstracted, never
/// restored, so the function is idempotent.
pub fn auto_abstract(state: &ViewState, h: &SnapshotHierarchy) -> ViewState {
    let mut out = state.clone();
    out.visible.retain(|v| h.get(v.interval.level, v.interval.index) == Some(v.interval));

    let levels = out.levels();
    if levels.len() > out.max_levels {
        let keep: BTreeSet<u32> = levels.iter().rev().take(out.max_levels).copied().collect();
        out.visible.retain(|v| keep.contains(&v.interval.level));
    }

    for level in out.levels().into_iter().rev() {
        let finer: Vec<Interval> = out
            .visible
            .iter()
            .filter(|v| v.interval.level < level && !v.abstracted)
            .map(|v| v.interval)
            .collect();
        let mut active: Vec<(usize, usize)> = Vec::new();
        for (i, v) in out.visible.iter_mut().enumerate() {
            if v.interval.level != level || v.abstracted {
                continue;
            }
            let c = covered(&v.interval, &finer);
            if 2 * c > v.interval.len() {
                v.abstracted = true;
            } else {
                active.push((c, i));
            }
        }
        if active.len() > out.per_level_budget {
            active.sort_by(|a, b| {
                b.0.cmp(&a.0)
                    .then(out.visible[a.1].interval.start.cmp(&out.visible[b.1].interval.start))
                    .then(out.visible[a.1].interval.index.cmp(&out.visible[b.1].interval.index))
            });
            let excess = active.len() - out.per_level_budget;
            for &(_, i) in &active[..excess] {
                out.visible[i].abstracted = true;
            }
        }
    }
    out
}

/// An sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const LIGHT: Rgb = Rgb(0xDE, 0xEB, 0xF7);
    pub const DARK: Rgb = Rgb(0x08, 0x51, 0x9C);

    pub fn hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

/// Linear light-to-dark blue scale; `value` is clamped to `[lo, hi]` and a
/// degenerate range maps to the light end.
pub fn metric_color(value: f64, lo: f64, hi: f64) -> Rgb {
    let f = if hi > lo && value.is_finite() {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * f).round() as u8;
    Rgb(
        mix(Rgb::LIGHT.0, Rgb::DARK.0),
        mix(Rgb::LIGHT.1, Rgb::DARK.1),
        mix(Rgb::LIGHT.2, Rgb::DARK.2),
    )
}
