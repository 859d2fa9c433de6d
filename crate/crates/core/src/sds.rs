//! Superframe duration scheduling for beacon-enabled coordinators, its
//! truncation by EH outages, EH-aligned superframes and TDMA slot fitting.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::TaskId;
use crate::seed;
use crate::sources::{self, OnOffSource, PeriodicSawtoothSource, SourceError};
use crate::window::{self, AvailabilityWindow, Tick};

pub type CoordinatorId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("infeasible superframe configuration: {0}")]
    InfeasibleConfig(String),
    #[error("task {task:?} references unknown coordinator {coordinator:?}")]
    UnknownCoordinator { task: TaskId, coordinator: CoordinatorId },
    #[error("coordinator {coordinator:?} mixes slot lengths {a} and {b}")]
    MixedSlotLengths {
        coordinator: CoordinatorId,
        a: Tick,
        b: Tick,
    },
    #[error("task {task:?}: {reason}")]
    InvalidTask { task: TaskId, reason: String },
    #[error(transparent)]
    Source(#[from] SourceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperframeConfig {
    pub beacon_len: Tick,
    pub active_len: Tick,
    /// Beacon interval.
    pub period: Tick,
}

impl SuperframeConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.period == 0 {
            return Err(ScheduleError::InfeasibleConfig("period must be at least 1 tick".into()));
        }
        if self.beacon_len + self.active_len > self.period {
            return Err(ScheduleError::InfeasibleConfig(format!(
                "beacon {} + active {} exceeds period {}",
                self.beacon_len, self.active_len, self.period
            )));
        }
        Ok(())
    }

    pub fn inactive_len(&self) -> Tick {
        self.period - self.beacon_len - self.active_len
    }

    /// Beacon plus active length: the shift between consecutive coordinators.
    pub fn busy_len(&self) -> Tick {
        self.beacon_len + self.active_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Beacon,
    Active,
    Inactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: Tick,
    pub end: Tick,
}

impl Segment {
    pub fn len(&self) -> Tick {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinatorTimeline {
    pub coordinator: CoordinatorId,
    /// Start of superframe 0.
    pub origin: Tick,
    pub period: Tick,
    /// Contiguous segments tiling `[0, horizon)`.
    pub segments: Vec<Segment>,
}

impl CoordinatorTimeline {
    pub fn superframe_index(&self, t: Tick) -> u64 {
        t.saturating_sub(self.origin) / self.period
    }

    /// Beacon plus active ticks.
    pub fn busy_ticks(&self) -> Tick {
        self.segments
            .iter()
            .filter(|s| s.kind != SegmentKind::Inactive)
            .map(Segment::len)
            .sum()
    }

    pub fn windows_of(&self, kind: SegmentKind) -> Vec<AvailabilityWindow> {
        self.segments
            .iter()
            .filter(|s| s.kind == kind)
            .filter_map(|s| AvailabilityWindow::new(s.start, s.end))
            .collect()
    }

    fn push(&mut self, seg: Segment) {
        if seg.is_empty() {
            return;
        }
        match self.segments.last_mut() {
            Some(last)
                if last.kind == SegmentKind::Inactive && seg.kind == SegmentKind::Inactive && last.end == seg.start =>
            {
                last.end = seg.end
            }
            _ => self.segments.push(seg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleTimeline {
    pub horizon: Tick,
    pub coordinators: Vec<CoordinatorTimeline>,
}

impl ScheduleTimeline {
    pub fn coordinator(&self, id: &str) -> Option<&CoordinatorTimeline> {
        self.coordinators.iter().find(|c| c.coordinator == id)
    }
}

/// Tiles superframes for each coordinator, coordinator `k` shifted by
/// `anchor + k * (beacon_len + active_len)`.
pub fn tile_superframes(
    config: &SuperframeConfig,
    coordinators: &[CoordinatorId],
    anchor: Tick,
    horizon: Tick,
) -> Result<ScheduleTimeline, ScheduleError> {
    config.validate()?;
    let needed = config.busy_len().saturating_mul(coordinators.len() as Tick);
    if needed > config.period {
        return Err(ScheduleError::InfeasibleConfig(format!(
            "{} coordinators need {} ticks of beacon+active per period of {}",
            coordinators.len(),
            needed,
            config.period
        )));
    }
    let coordinators = coordinators
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let origin = anchor + k as Tick * config.busy_len();
            let mut tl = CoordinatorTimeline {
                coordinator: id.clone(),
                origin,
                period: config.period,
                segments: Vec::new(),
            };
            let clip = |t: Tick| t.min(horizon);
            tl.push(Segment {
                kind: SegmentKind::Inactive,
                start: 0,
                end: clip(origin),
            });
            let mut sf = origin;
            while sf < horizon {
                let b_end = sf + config.beacon_len;
                let a_end = b_end + config.active_len;
                tl.push(Segment {
                    kind: SegmentKind::Beacon,
                    start: sf,
                    end: clip(b_end),
                });
                tl.push(Segment {
                    kind: SegmentKind::Active,
                    start: clip(b_end),
                    end: clip(a_end),
                });
                tl.push(Segment {
                    kind: SegmentKind::Inactive,
                    start: clip(a_end),
                    end: clip(sf + config.period),
                });
                sf += config.period;
            }
            tl
        })
        .collect();
    Ok(ScheduleTimeline { horizon, coordinators })
}

/// Two-or-more-coordinator superframe duration scheduling: every child's
/// beacon and active portion sits in its parent's inactive portion.
pub fn baseline_sds(
    config: &SuperframeConfig,
    coordinators: &[CoordinatorId],
    horizon: Tick,
) -> Result<ScheduleTimeline, ScheduleError> {
    tile_superframes(config, coordinators, 0, horizon)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuperframeLoss {
    pub coordinator: CoordinatorId,
    pub superframe: u64,
    pub start: Tick,
    /// Beacon time lost to EH outage.
    pub beacon_lost: Tick,
    /// Active time lost to EH outage.
    pub active_lost: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoordinatorLoss {
    pub coordinator: CoordinatorId,
    pub original_busy: Tick,
    pub surviving_busy: Tick,
    pub beacon_lost: Tick,
    pub active_lost: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TruncationReport {
    pub superframes: Vec<SuperframeLoss>,
    pub coordinators: Vec<CoordinatorLoss>,
    pub total_beacon_lost: Tick,
    pub total_active_lost: Tick,
}

/// Intersects every beacon and active segment with the EH windows; the cut
/// time becomes inactive. Losses are booked per superframe.
pub fn eh_truncate(
    timeline: &ScheduleTimeline,
    eh_windows: &[AvailabilityWindow],
) -> (ScheduleTimeline, TruncationReport) {
    let mut report = TruncationReport::default();
    let mut out = ScheduleTimeline {
        horizon: timeline.horizon,
        coordinators: Vec::new(),
    };
    for tl in &timeline.coordinators {
        let mut cut = CoordinatorTimeline {
            segments: Vec::new(),
            ..tl.clone()
        };
        let mut losses: BTreeMap<u64, SuperframeLoss> = BTreeMap::new();
        for seg in &tl.segments {
            if seg.kind == SegmentKind::Inactive {
                cut.push(*seg);
                continue;
            }
            let idx = tl.superframe_index(seg.start);
            let entry = losses.entry(idx).or_insert_with(|| SuperframeLoss {
                coordinator: tl.coordinator.clone(),
                superframe: idx,
                start: tl.origin + idx * tl.period,
                beacon_lost: 0,
                active_lost: 0,
            });
            let kept = window::clip(eh_windows, seg.start, seg.end);
            let lost = window::subtract_from(seg.start, seg.end, &kept);
            let lost_ticks = window::covered_ticks(&lost);
            match seg.kind {
                SegmentKind::Beacon => entry.beacon_lost += lost_ticks,
                _ => entry.active_lost += lost_ticks,
            }
            let mut pieces: Vec<Segment> = kept
                .iter()
                .map(|w| Segment {
                    kind: seg.kind,
                    start: w.start,
                    end: w.end,
                })
                .chain(lost.iter().map(|w| Segment {
                    kind: SegmentKind::Inactive,
                    start: w.start,
                    end: w.end,
                }))
                .collect();
            pieces.sort_by_key(|p| p.start);
            for p in pieces {
                cut.push(p);
            }
        }
        let (b, a) = losses
            .values()
            .fold((0, 0), |(b, a), l| (b + l.beacon_lost, a + l.active_lost));
        report.coordinators.push(CoordinatorLoss {
            coordinator: tl.coordinator.clone(),
            original_busy: tl.busy_ticks(),
            surviving_busy: cut.busy_ticks(),
            beacon_lost: b,
            active_lost: a,
        });
        report.total_beacon_lost += b;
        report.total_active_lost += a;
        report.superframes.extend(losses.into_values());
        out.coordinators.push(cut);
    }
    (out, report)
}

/// Superframe matched to the EH duty cycle: the period is the rounded mean
/// resultant cycle, and beacon plus active fill the shortest source window.
pub fn eh_align(sources: &[PeriodicSawtoothSource], beacon_budget: Tick) -> Result<SuperframeConfig, ScheduleError> {
    let est = sources::resultant_cycle(sources)?;
    let smallest = sources.iter().map(PeriodicSawtoothSource::on_ticks).min().unwrap_or(0);
    if beacon_budget >= smallest {
        return Err(ScheduleError::InfeasibleConfig(format!(
            "beacon budget {beacon_budget} leaves no active time in a {smallest}-tick window"
        )));
    }
    Ok(SuperframeConfig {
        beacon_len: beacon_budget,
        active_len: smallest - beacon_budget,
        period: est.rounded_mean(),
    })
}

/// First full window start over all sources, where aligned superframes are
/// anchored.
pub fn alignment_anchor(sources: &[PeriodicSawtoothSource]) -> Tick {
    sources
        .iter()
        .filter(|s| s.on_ticks() > 0)
        .map(|s| s.next_start_at_or_after(0))
        .min()
        .unwrap_or(0)
}

/// Aligned superframes tiled from the first EH window start.
pub fn aligned_sds(
    sources: &[PeriodicSawtoothSource],
    beacon_budget: Tick,
    coordinators: &[CoordinatorId],
    horizon: Tick,
) -> Result<(SuperframeConfig, ScheduleTimeline), ScheduleError> {
    let config = eh_align(sources, beacon_budget)?;
    let timeline = tile_superframes(&config, coordinators, alignment_anchor(sources), horizon)?;
    Ok((config, timeline))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxTask {
    pub id: TaskId,
    pub slots_needed: u32,
    pub slot_len: Tick,
    pub release: Tick,
    pub deadline: Tick,
    pub coordinator: CoordinatorId,
}

impl TxTask {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |reason: &str| {
            Err(ScheduleError::InvalidTask {
                task: self.id.clone(),
                reason: reason.into(),
            })
        };
        if self.slots_needed == 0 {
            return bad("slots_needed must be at least 1");
        }
        if self.slot_len == 0 {
            return bad("slot_len must be at least 1 tick");
        }
        if self.release >= self.deadline {
            return bad("release must precede deadline");
        }
        Ok(())
    }

    fn edf_key(&self) -> (Tick, Tick, &str) {
        (self.deadline, self.release, &self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub start: Tick,
    pub end: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotAssignment {
    pub task_id: TaskId,
    pub coordinator: CoordinatorId,
    /// Empty when the task could not be fully placed.
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Schedulable,
    Unschedulable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchedulabilityResult {
    pub verdict: Verdict,
    /// One entry per task, in input order.
    pub assignments: Vec<SlotAssignment>,
    pub first_failure: Option<TaskId>,
    pub failed: Vec<TaskId>,
}

impl SchedulabilityResult {
    pub fn is_assigned(&self, task: &str) -> bool {
        !self.failed.iter().any(|t| t == task)
    }
}

/// Slots a coordinator can transmit in: grid-aligned runs of `slot_len`
/// ticks lying wholly inside active time that is also EH-powered. The slot
/// grid starts at the coordinator's superframe origin.
pub fn usable_slots(timeline: &CoordinatorTimeline, eh_windows: &[AvailabilityWindow], slot_len: Tick) -> Vec<Slot> {
    let active = timeline.windows_of(SegmentKind::Active);
    let usable = window::intersect_lists(&active, eh_windows);
    let phase = timeline.origin % slot_len;
    let mut out = Vec::new();
    for u in usable {
        let mut g = u.start + (phase + slot_len - u.start % slot_len) % slot_len;
        while g + slot_len <= u.end {
            out.push(Slot {
                start: g,
                end: g + slot_len,
            });
            g += slot_len;
        }
    }
    out
}

/// TDMA fitting. Tasks are taken in earliest-deadline order (ties by
/// release, then id) and each claims the earliest free usable slots inside
/// `[release, deadline)`. A task that cannot get all its slots claims none.
pub fn schedulability_check(
    tasks: &[TxTask],
    timeline: &ScheduleTimeline,
    eh_windows: &[AvailabilityWindow],
) -> Result<SchedulabilityResult, ScheduleError> {
    let mut slot_len: BTreeMap<&str, Tick> = BTreeMap::new();
    for t in tasks {
        t.validate()?;
        if timeline.coordinator(&t.coordinator).is_none() {
            return Err(ScheduleError::UnknownCoordinator {
                task: t.id.clone(),
                coordinator: t.coordinator.clone(),
            });
        }
        let len = *slot_len.entry(&t.coordinator).or_insert(t.slot_len);
        if len != t.slot_len {
            return Err(ScheduleError::MixedSlotLengths {
                coordinator: t.coordinator.clone(),
                a: len,
                b: t.slot_len,
            });
        }
    }

    let mut placed: Vec<Option<Vec<Slot>>> = vec![None; tasks.len()];
    for (coord, len) in &slot_len {
        let tl = timeline.coordinator(coord).expect("checked above");
        let candidates = usable_slots(tl, eh_windows, *len);
        let mut taken = vec![false; candidates.len()];
        let mut order: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].coordinator == *coord).collect();
        order.sort_by(|&a, &b| tasks[a].edf_key().cmp(&tasks[b].edf_key()));
        for i in order {
            let task = &tasks[i];
            let first = candidates.partition_point(|s| s.start < task.release);
            let picks: Vec<usize> = (first..candidates.len())
                .take_while(|&k| candidates[k].end <= task.deadline)
                .filter(|&k| !taken[k])
                .take(task.slots_needed as usize)
                .collect();
            if picks.len() == task.slots_needed as usize {
                for &k in &picks {
                    taken[k] = true;
                }
                placed[i] = Some(picks.iter().map(|&k| candidates[k]).collect());
            }
        }
    }

    let mut failed: Vec<&TxTask> = tasks
        .iter()
        .zip(&placed)
        .filter(|(_, p)| p.is_none())
        .map(|(t, _)| t)
        .collect();
    failed.sort_by(|a, b| a.edf_key().cmp(&b.edf_key()));
    let assignments = tasks
        .iter()
        .zip(placed)
        .map(|(t, p)| SlotAssignment {
            task_id: t.id.clone(),
            coordinator: t.coordinator.clone(),
            slots: p.unwrap_or_default(),
        })
        .collect();
    Ok(SchedulabilityResult {
        verdict: if failed.is_empty() {
            Verdict::Schedulable
        } else {
            Verdict::Unschedulable
        },
        assignments,
        first_failure: failed.first().map(|t| t.id.clone()),
        failed: failed.iter().map(|t| t.id.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskPredictability {
    pub task_id: TaskId,
    pub met: u64,
    pub replications: u64,
    pub probability: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub half_width: f64,
}

/// Normal-approximation 95% half-width for a proportion.
pub fn proportion_half_width(p: f64, n: u64) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Per-task probability of being fully placed when the synchronized EH
/// supply follows `onoff`.
///
/// Replication `r` draws the on-off windows with
/// `source_seed(replication_seed(seed, r), 0)`, the same stream a scenario
/// run gives its first declared source, truncates the baseline timeline and
/// runs [`schedulability_check`].
pub fn opportunistic_predictability(
    tasks: &[TxTask],
    config: &SuperframeConfig,
    coordinators: &[CoordinatorId],
    horizon: Tick,
    onoff: &OnOffSource,
    replications: u64,
    seed: u64,
) -> Result<Vec<TaskPredictability>, ScheduleError> {
    let replications = replications.max(1);
    let timeline = baseline_sds(config, coordinators, horizon)?;
    onoff.validate()?;
    // surface task errors before fanning out
    schedulability_check(tasks, &timeline, &[])?;

    let met = (0..replications)
        .into_par_iter()
        .map(|r| {
            let run_seed = seed::replication_seed(seed, r);
            let eh = onoff
                .windows(horizon, seed::source_seed(run_seed, 0))
                .expect("validated source");
            let (cut, _) = eh_truncate(&timeline, &eh);
            let res = schedulability_check(tasks, &cut, &eh).expect("validated tasks");
            tasks
                .iter()
                .map(|t| u64::from(res.is_assigned(&t.id)))
                .collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0; tasks.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );

    Ok(tasks
        .iter()
        .zip(met)
        .map(|(t, met)| {
            let p = met as f64 / replications as f64;
            TaskPredictability {
                task_id: t.id.clone(),
                met,
                replications,
                probability: p,
                half_width: proportion_half_width(p, replications),
            }
        })
        .collect())
}
