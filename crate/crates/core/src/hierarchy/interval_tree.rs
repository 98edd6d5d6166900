//! Static augmented interval tree over half-open `[start, end)` ranges.
//!
//! Items are sorted by start and laid out as an implicit balanced binary
//! search tree; every node records the largest `end` in its subtree so
//! overlap queries prune whole subtrees.

#[derive(Debug, Clone, Default)]
pub struct IntervalTree<T> {
    items: Vec<(usize, usize, T)>,
    max_end: Vec<usize>,
}

impl<T: Clone> IntervalTree<T> {
    pub fn new(mut items: Vec<(usize, usize, T)>) -> Self {
        items.sort_by_key(|&(s, e, _)| (s, e));
        let mut max_end = vec![0; items.len()];
        fill_max(&items, &mut max_end, 0, items.len());
        Self { items, max_end }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Values of all intervals containing `point`.
    pub fn stab(&self, point: usize) -> Vec<T> {
        self.overlapping(point, point + 1)
    }

    /// Values of all intervals overlapping `[start, end)`, in start order.
    pub fn overlapping(&self, start: usize, end: usize) -> Vec<T> {
        let mut out = Vec::new();
        if start < end {
            self.visit(0, self.items.len(), start, end, &mut out);
        }
        out
    }

    fn visit(&self, lo: usize, hi: usize, start: usize, end: usize, out: &mut Vec<T>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        if self.max_end[mid] <= start {
            return;
        }
        self.visit(lo, mid, start, end, out);
        let (s, e, ref value) = self.items[mid];
        if s < end {
            if e > start {
                out.push(value.clone());
            }
            self.visit(mid + 1, hi, start, end, out);
        }
    }
}

fn fill_max<T>(items: &[(usize, usize, T)], max_end: &mut [usize], lo: usize, hi: usize) -> usize {
    if lo >= hi {
        return 0;
    }
    let mid = lo + (hi - lo) / 2;
    let left = fill_max(items, max_end, lo, mid);
    let right = fill_max(items, max_end, mid + 1, hi);
    max_end[mid] = items[mid].1.max(left).max(right);
    max_end[mid]
}
