//! Half-open tick intervals and the interval-set algebra used by every
//! other module.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One simulation tick. All timeline arithmetic is exact integer arithmetic.
pub type Tick = u64;

/// A half-open interval `[start, end)` during which regulated EH power is
/// usable. Never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct AvailabilityWindow {
    pub start: Tick,
    pub end: Tick,
}

#[derive(Deserialize)]
struct RawWindow {
    start: Tick,
    end: Tick,
}

impl TryFrom<RawWindow> for AvailabilityWindow {
    type Error = String;

    fn try_from(raw: RawWindow) -> Result<Self, Self::Error> {
        AvailabilityWindow::new(raw.start, raw.end).ok_or_else(|| format!("empty window [{}, {})", raw.start, raw.end))
    }
}

impl AvailabilityWindow {
    /// Returns `None` for empty intervals.
    pub fn new(start: Tick, end: Tick) -> Option<Self> {
        (start < end).then_some(Self { start, end })
    }

    pub fn duration(&self) -> Tick {
        self.end - self.start
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.start <= t && t < self.end
    }

    pub fn intersect(&self, other: &AvailabilityWindow) -> Option<AvailabilityWindow> {
        AvailabilityWindow::new(self.start.max(other.start), self.end.min(other.end))
    }

    pub fn overlaps(&self, start: Tick, end: Tick) -> bool {
        self.start < end && start < self.end
    }
}

impl fmt::Display for AvailabilityWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("window list {list} is not sorted and disjoint at index {index}: {prev} then {next}")]
pub struct ContractViolation {
    pub list: usize,
    pub index: usize,
    pub prev: AvailabilityWindow,
    pub next: AvailabilityWindow,
}

/// Checks that `windows` is sorted and pairwise disjoint. Touching windows
/// (`a.end == b.start`) are accepted.
pub fn check_sorted_disjoint(windows: &[AvailabilityWindow]) -> Result<(), ContractViolation> {
    for (i, pair) in windows.windows(2).enumerate() {
        if pair[0].end > pair[1].start {
            return Err(ContractViolation {
                list: 0,
                index: i + 1,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(())
}

/// Minimal sorted disjoint cover of the union of several window lists.
/// Touching windows are merged.
pub fn union_windows(lists: &[Vec<AvailabilityWindow>]) -> Result<Vec<AvailabilityWindow>, ContractViolation> {
    for (i, list) in lists.iter().enumerate() {
        check_sorted_disjoint(list).map_err(|e| ContractViolation { list: i, ..e })?;
    }
    let mut all: Vec<AvailabilityWindow> = lists.iter().flatten().copied().collect();
    all.sort_unstable();
    Ok(coalesce(all))
}

/// Merges an already start-sorted list of windows.
fn coalesce(sorted: Vec<AvailabilityWindow>) -> Vec<AvailabilityWindow> {
    let mut out: Vec<AvailabilityWindow> = Vec::with_capacity(sorted.len());
    for w in sorted {
        match out.last_mut() {
            Some(last) if w.start <= last.end => last.end = last.end.max(w.end),
            _ => out.push(w),
        }
    }
    out
}

/// Builds a normalized window list from arbitrary (possibly empty or
/// overlapping) `(start, end)` pairs.
pub fn normalize<I: IntoIterator<Item = (Tick, Tick)>>(pairs: I) -> Vec<AvailabilityWindow> {
    let mut all: Vec<AvailabilityWindow> = pairs
        .into_iter()
        .filter_map(|(s, e)| AvailabilityWindow::new(s, e))
        .collect();
    all.sort_unstable();
    coalesce(all)
}

/// Index of the window containing `t`, if any. `windows` must be sorted and
/// disjoint.
pub fn find_containing(windows: &[AvailabilityWindow], t: Tick) -> Option<usize> {
    let idx = windows.partition_point(|w| w.end <= t);
    (idx < windows.len() && windows[idx].start <= t).then_some(idx)
}

pub fn contains(windows: &[AvailabilityWindow], t: Tick) -> bool {
    find_containing(windows, t).is_some()
}

/// Windows whose extent intersects `[start, end)`, unclipped.
pub fn intersecting(windows: &[AvailabilityWindow], start: Tick, end: Tick) -> &[AvailabilityWindow] {
    let lo = windows.partition_point(|w| w.end <= start);
    let hi = windows.partition_point(|w| w.start < end);
    if lo >= hi {
        &[]
    } else {
        &windows[lo..hi]
    }
}

/// Intersection of two sorted disjoint lists.
pub fn intersect_lists(a: &[AvailabilityWindow], b: &[AvailabilityWindow]) -> Vec<AvailabilityWindow> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        if let Some(w) = a[i].intersect(&b[j]) {
            out.push(w);
        }
        if a[i].end <= b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Parts of `[start, end)` not covered by `windows`.
pub fn subtract_from(start: Tick, end: Tick, windows: &[AvailabilityWindow]) -> Vec<AvailabilityWindow> {
    let mut out = Vec::new();
    let mut cursor = start;
    for w in intersecting(windows, start, end) {
        if w.start > cursor {
            out.extend(AvailabilityWindow::new(cursor, w.start));
        }
        cursor = cursor.max(w.end);
    }
    out.extend(AvailabilityWindow::new(cursor, end));
    out
}

/// Clips every window to `[start, end)`.
pub fn clip(windows: &[AvailabilityWindow], start: Tick, end: Tick) -> Vec<AvailabilityWindow> {
    intersecting(windows, start, end)
        .iter()
        .filter_map(|w| AvailabilityWindow::new(w.start.max(start), w.end.min(end)))
        .collect()
}

pub fn covered_ticks(windows: &[AvailabilityWindow]) -> Tick {
    windows.iter().map(AvailabilityWindow::duration).sum()
}

/// Mean window duration, or 0 for an empty list.
pub fn mean_duration(windows: &[AvailabilityWindow]) -> f64 {
    if windows.is_empty() {
        0.0
    } else {
        covered_ticks(windows) as f64 / windows.len() as f64
    }
}

/// Largest spacing between consecutive window starts, including the wrap
/// from the last start through `horizon` back to the first start.
pub fn max_gap(windows: &[AvailabilityWindow], horizon: Tick) -> Tick {
    let (Some(first), Some(last)) = (windows.first(), windows.last()) else {
        return 0;
    };
    let wrap = horizon.saturating_sub(last.start) + first.start;
    windows
        .windows(2)
        .map(|p| p[1].start - p[0].start)
        .fold(wrap, Tick::max)
}

/// Earliest `s >= from` such that `[s, s + len)` lies inside one window.
pub fn earliest_fit(windows: &[AvailabilityWindow], from: Tick, len: Tick) -> Option<Tick> {
    let lo = windows.partition_point(|w| w.end <= from);
    windows[lo..].iter().find_map(|w| {
        let s = w.start.max(from);
        (w.end - s >= len).then_some(s)
    })
}
