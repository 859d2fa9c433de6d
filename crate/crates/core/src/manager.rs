//! EH management software of one device: status management, indicator,
//! switcher and the source-output planner.
//!
//! The manager owns materialized window lists for its sources. External task
//! logic talks to it through two queries: [`EhManager::indicate`] for
//! temporal availability and [`EhManager::plan_sources`] for covering a
//! power demand with source windows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sources::SourceId;
use crate::window::{self, AvailabilityWindow, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManagerError {
    #[error("unknown source {0:?}")]
    NotFound(SourceId),
    #[error("source {0:?} is already registered")]
    Duplicate(SourceId),
    #[error("windows of source {id:?} are not sorted and disjoint")]
    UnsortedWindows { id: SourceId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceState {
    Active,
    Idle,
    /// Enabled, but yields no usable output anywhere in the horizon.
    Faulted,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceStatus {
    pub source_id: SourceId,
    pub state: SourceState,
    pub current_window: Option<AvailabilityWindow>,
    pub next_window_start: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceProfile {
    pub source_id: SourceId,
    pub windows: Vec<AvailabilityWindow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EhIndication {
    pub t: Tick,
    /// Sources with at least one window intersecting the lookahead span.
    pub profile: Vec<SourceProfile>,
    pub available_now: bool,
    pub active_source: Option<SourceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchPolicy {
    #[default]
    RoundRobin,
    LongestRemainingWindow,
    /// Listed sources first, in order; unlisted ones follow in registration
    /// order.
    FixedPriority(Vec<SourceId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub window: AvailabilityWindow,
    pub source_id: SourceId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SourcePlan {
    pub assignments: Vec<Assignment>,
    pub uncovered: Vec<AvailabilityWindow>,
    pub switch_count: usize,
}

impl SourcePlan {
    pub fn covered_ticks(&self) -> Tick {
        self.assignments.iter().map(|a| a.window.duration()).sum()
    }

    pub fn uncovered_ticks(&self) -> Tick {
        window::covered_ticks(&self.uncovered)
    }
}

#[derive(Debug, Clone)]
struct Registered {
    id: SourceId,
    windows: Vec<AvailabilityWindow>,
    disabled: bool,
}

#[derive(Debug, Clone, Default)]
pub struct EhManager {
    sources: Vec<Registered>,
    policy: SwitchPolicy,
    /// Source index and window end of the last round-robin selection.
    cursor: Option<(usize, Tick)>,
}

impl EhManager {
    pub fn new(policy: SwitchPolicy) -> Self {
        Self {
            sources: Vec::new(),
            policy,
            cursor: None,
        }
    }

    pub fn policy(&self) -> &SwitchPolicy {
        &self.policy
    }

    pub fn set_policy(&mut self, policy: SwitchPolicy) {
        self.policy = policy;
    }

    pub fn register(&mut self, id: impl Into<SourceId>, windows: Vec<AvailabilityWindow>) -> Result<(), ManagerError> {
        let id = id.into();
        if self.index_of(&id).is_ok() {
            return Err(ManagerError::Duplicate(id));
        }
        if window::check_sorted_disjoint(&windows).is_err() {
            return Err(ManagerError::UnsortedWindows { id });
        }
        self.sources.push(Registered {
            id,
            windows,
            disabled: false,
        });
        Ok(())
    }

    pub fn source_ids(&self) -> impl Iterator<Item = &str> {
        self.sources.iter().map(|s| s.id.as_str())
    }

    fn index_of(&self, id: &str) -> Result<usize, ManagerError> {
        self.sources
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| ManagerError::NotFound(id.to_string()))
    }

    pub fn enable(&mut self, id: &str) -> Result<(), ManagerError> {
        let i = self.index_of(id)?;
        self.sources[i].disabled = false;
        Ok(())
    }

    pub fn disable(&mut self, id: &str) -> Result<(), ManagerError> {
        let i = self.index_of(id)?;
        self.sources[i].disabled = true;
        if matches!(self.cursor, Some((c, _)) if c == i) {
            self.cursor = None;
        }
        Ok(())
    }

    /// Windows of an enabled source; empty for disabled ones.
    pub fn windows(&self, id: &str) -> Result<&[AvailabilityWindow], ManagerError> {
        let s = &self.sources[self.index_of(id)?];
        Ok(if s.disabled { &[] } else { &s.windows })
    }

    /// Union of all enabled sources' windows.
    pub fn available_windows(&self) -> Vec<AvailabilityWindow> {
        let lists: Vec<Vec<AvailabilityWindow>> = self.enabled().map(|(_, s)| s.windows.clone()).collect();
        window::union_windows(&lists).expect("registered windows are sorted")
    }

    fn enabled(&self) -> impl Iterator<Item = (usize, &Registered)> {
        self.sources.iter().enumerate().filter(|(_, s)| !s.disabled)
    }

    /// Enabled sources with a window containing `t`, with that window.
    fn powered_at(&self, t: Tick) -> impl Iterator<Item = (usize, AvailabilityWindow)> + '_ {
        self.enabled()
            .filter_map(move |(i, s)| window::find_containing(&s.windows, t).map(|w| (i, s.windows[w])))
    }

    pub fn status(&self, id: &str, t: Tick) -> Result<SourceStatus, ManagerError> {
        let s = &self.sources[self.index_of(id)?];
        if s.disabled {
            return Ok(SourceStatus {
                source_id: s.id.clone(),
                state: SourceState::Disabled,
                current_window: None,
                next_window_start: None,
            });
        }
        let current = window::find_containing(&s.windows, t).map(|i| s.windows[i]);
        let next = s.windows[s.windows.partition_point(|w| w.start <= t)..]
            .first()
            .map(|w| w.start);
        let state = match (current, s.windows.is_empty()) {
            (Some(_), _) => SourceState::Active,
            (None, true) => SourceState::Faulted,
            (None, false) => SourceState::Idle,
        };
        Ok(SourceStatus {
            source_id: s.id.clone(),
            state,
            current_window: current,
            next_window_start: next,
        })
    }

    /// Availability at `t` plus every enabled source's windows intersecting
    /// `[t, t + lookahead)`. The active source is picked with the manager's
    /// configured policy.
    pub fn indicate(&mut self, t: Tick, lookahead: Tick) -> EhIndication {
        let end = t.saturating_add(lookahead);
        let profile = self
            .enabled()
            .filter_map(|(_, s)| {
                let ws = window::intersecting(&s.windows, t, end);
                (!ws.is_empty()).then(|| SourceProfile {
                    source_id: s.id.clone(),
                    windows: ws.to_vec(),
                })
            })
            .collect();
        let policy = self.policy.clone();
        let active_source = self.select_source(t, &policy);
        EhIndication {
            t,
            profile,
            available_now: active_source.is_some(),
            active_source,
        }
    }

    /// Picks a source whose window contains `t`. Round-robin keeps the
    /// current source until its window ends, then moves to the next powered
    /// source after it in registration order.
    pub fn select_source(&mut self, t: Tick, policy: &SwitchPolicy) -> Option<SourceId> {
        let powered: Vec<(usize, AvailabilityWindow)> = self.powered_at(t).collect();
        if powered.is_empty() {
            return None;
        }
        let chosen = match policy {
            SwitchPolicy::RoundRobin => {
                let keep = self.cursor.and_then(|(c, end)| {
                    powered
                        .iter()
                        .find(|(i, w)| *i == c && w.end == end && t < end)
                        .copied()
                });
                let pick = keep.unwrap_or_else(|| {
                    let n = self.sources.len();
                    let from = self.cursor.map_or(0, |(c, _)| c + 1);
                    (0..n)
                        .map(|k| (from + k) % n)
                        .find_map(|i| powered.iter().find(|(j, _)| *j == i).copied())
                        .expect("powered is non-empty")
                });
                self.cursor = Some((pick.0, pick.1.end));
                pick.0
            }
            SwitchPolicy::LongestRemainingWindow => {
                powered
                    .iter()
                    .max_by(|a, b| (a.1.end).cmp(&b.1.end).then(b.0.cmp(&a.0)))
                    .expect("powered is non-empty")
                    .0
            }
            SwitchPolicy::FixedPriority(order) => {
                let rank = |i: usize| {
                    order
                        .iter()
                        .position(|id| *id == self.sources[i].id)
                        .unwrap_or(order.len() + i)
                };
                powered
                    .iter()
                    .map(|(i, _)| *i)
                    .min_by_key(|&i| rank(i))
                    .expect("non-empty")
            }
        };
        Some(self.sources[chosen].id.clone())
    }

    /// Covers each demand interval with pieces of source windows.
    ///
    /// Covered ticks are maximal by construction (any demand tick inside an
    /// enabled window is covered). At each point the piece reaching furthest
    /// is taken, which minimizes the number of pieces; ties prefer the
    /// source already in use, then registration order.
    pub fn plan_sources(&self, demand: &[AvailabilityWindow], horizon: Tick) -> SourcePlan {
        let mut plan = SourcePlan::default();
        let mut last: Option<usize> = None;
        for d in demand {
            let end = d.end.min(horizon);
            let mut p = d.start;
            while p < end {
                let best = self.powered_at(p).max_by(|a, b| {
                    a.1.end
                        .cmp(&b.1.end)
                        .then((Some(a.0) == last).cmp(&(Some(b.0) == last)))
                        .then(b.0.cmp(&a.0))
                });
                match best {
                    Some((i, w)) => {
                        let piece_end = w.end.min(end);
                        if last.is_some_and(|l| l != i) {
                            plan.switch_count += 1;
                        }
                        last = Some(i);
                        plan.assignments.push(Assignment {
                            window: AvailabilityWindow {
                                start: p,
                                end: piece_end,
                            },
                            source_id: self.sources[i].id.clone(),
                        });
                        p = piece_end;
                    }
                    None => {
                        let next = self
                            .enabled()
                            .filter_map(|(_, s)| {
                                s.windows
                                    .get(s.windows.partition_point(|w| w.start <= p))
                                    .map(|w| w.start)
                            })
                            .min()
                            .unwrap_or(end)
                            .min(end);
                        plan.uncovered.push(AvailabilityWindow { start: p, end: next });
                        p = next;
                    }
                }
            }
            if d.end > end {
                plan.uncovered.extend(AvailabilityWindow::new(end.max(d.start), d.end));
            }
        }
        plan
    }
}
