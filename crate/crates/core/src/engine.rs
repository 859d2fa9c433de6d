//! Deterministic discrete-event kernel.
//!
//! Windows are materialized eagerly for the whole horizon; the kernel then
//! replays them together with superframe, slot and retrieval events in
//! `(time, seq)` order. Window events are queued first, so at equal ticks a
//! window opening or closing is always seen before a hop starts.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::manager::{EhManager, SwitchPolicy};
use crate::network::{
    Hop, HopWait, NetworkError, NodeId, PowerMap, PowerModel, RetrievalProgress, RetrievalStep, TaskOutcome, TaskStatus,
};
use crate::scenario::{Mode, Scenario, ValidationErrors};
use crate::sds::{
    self, SchedulabilityResult, ScheduleError, ScheduleTimeline, SegmentKind, Slot, SuperframeConfig, TruncationReport,
};
use crate::seed;
use crate::sources::{SourceError, SourceId};
use crate::trace::{TraceKind, TraceRecord, TraceSink};
use crate::window::{self, AvailabilityWindow, Tick};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("trace sink failed: {0}")]
    Sink(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    WindowOpen { source: usize, window: AvailabilityWindow },
    WindowClose { source: usize, window: AvailabilityWindow },
    Truncation { loss: usize },
    BeaconTx { coordinator: usize, start: Tick, end: Tick },
    TaskRelease(TaskRef),
    HopStart { task: usize, hop: Hop },
    HopEnd { task: usize, hop: Hop },
    SlotTx { task: usize, slot: Slot },
    TaskFinish { task: TaskRef, completed: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskRef {
    Retrieval(usize),
    Tx(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub time: Tick,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue on `(time, seq)`; `seq` is the insertion counter.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<SimEvent>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: Tick, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(SimEvent { time, seq, kind }));
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Retrieval,
    Tx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskMetric {
    pub id: String,
    pub kind: TaskKind,
    pub status: TaskStatus,
    pub latency: Option<Tick>,
    pub deferred: Tick,
}

impl TaskMetric {
    pub fn met(&self) -> bool {
        self.status == TaskStatus::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub seed: u64,
    pub total_tasks: usize,
    pub tasks_completed: usize,
    pub deadlines_missed: usize,
    pub deferred_time_total: Tick,
    pub mean_latency: f64,
    pub max_latency: Tick,
    pub eh_available_ticks: Tick,
    pub assigned_slot_ticks: Tick,
    /// Assigned slot ticks over EH-available ticks.
    pub eh_utilization: f64,
    pub beacon_lost_total: Tick,
    pub active_lost_total: Tick,
    pub power_model: PowerModel,
    pub tasks: Vec<TaskMetric>,
}

impl MetricsSummary {
    pub fn task(&self, id: &str) -> Option<&TaskMetric> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

/// Superframe artifacts of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperframeRun {
    pub mode: Mode,
    pub config: SuperframeConfig,
    /// Timeline the slots were fitted into (after truncation, if any).
    pub timeline: ScheduleTimeline,
    pub truncation: Option<TruncationReport>,
    pub schedule: SchedulabilityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub metrics: MetricsSummary,
    /// Per source, in declaration order; disabled sources have none.
    pub windows: Vec<(SourceId, Vec<AvailabilityWindow>)>,
    pub superframe: Option<SuperframeRun>,
    pub retrievals: Vec<TaskOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    #[serde(flatten)]
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn metrics(&self) -> &MetricsSummary {
        &self.summary.metrics
    }
}

/// Runs `scenario` with its own seed.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    run_with_seed(scenario, scenario.seed)
}

pub fn run_with_seed(scenario: &Scenario, seed: u64) -> Result<RunOutput, SimError> {
    let mut trace = Vec::new();
    let summary = run_into(scenario, seed, &mut trace)?;
    Ok(RunOutput { trace, summary })
}

/// Runs `scenario` with `seed`, streaming trace records into `sink`.
pub fn run_into(scenario: &Scenario, seed: u64, sink: &mut dyn TraceSink) -> Result<RunSummary, SimError> {
    scenario.validate()?;
    let horizon = scenario.horizon;

    let windows: Vec<(SourceId, Vec<AvailabilityWindow>)> = scenario
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ws = if s.disabled {
                Vec::new()
            } else {
                s.kind.windows(horizon, seed::source_seed(seed, i))?
            };
            Ok((s.id.clone(), ws))
        })
        .collect::<Result<_, SourceError>>()?;
    let window_map: BTreeMap<SourceId, Vec<AvailabilityWindow>> = windows.iter().cloned().collect();

    let topology = scenario.topology();
    let power = PowerMap::resolve(&topology, &window_map)?;
    let mut managers = node_managers(scenario, &window_map);
    let harvested: BTreeSet<SourceId> = scenario
        .sources
        .iter()
        .filter(|s| s.kind.is_harvested())
        .map(|s| s.id.clone())
        .collect();

    let eh_lists: Vec<Vec<AvailabilityWindow>> = match &scenario.superframe {
        Some(sf) if !sf.eh_sources.is_empty() => sf.eh_sources.iter().map(|id| window_map[id].clone()).collect(),
        _ => windows.iter().map(|(_, w)| w.clone()).collect(),
    };
    let eh = window::union_windows(&eh_lists).expect("generated windows are sorted");

    let superframe = match &scenario.superframe {
        Some(sf) => {
            let full = AvailabilityWindow::new(0, horizon).into_iter().collect::<Vec<_>>();
            let (config, base, eh_for_slots) = match scenario.mode {
                Mode::Baseline | Mode::Truncated => {
                    let tl = sds::baseline_sds(&sf.config(), &sf.coordinators, horizon)?;
                    let slots_eh = if scenario.mode == Mode::Baseline { &full } else { &eh };
                    (sf.config(), tl, slots_eh)
                }
                Mode::Aligned => {
                    let (cfg, tl) = sds::aligned_sds(
                        &scenario.periodic_sources(),
                        sf.beacon_budget(),
                        &sf.coordinators,
                        horizon,
                    )?;
                    (cfg, tl, &eh)
                }
            };
            let (timeline, truncation) = if scenario.mode == Mode::Baseline {
                (base, None)
            } else {
                let (cut, report) = sds::eh_truncate(&base, &eh);
                (cut, Some(report))
            };
            let schedule = sds::schedulability_check(&scenario.tx_tasks, &timeline, eh_for_slots)?;
            Some(SuperframeRun {
                mode: scenario.mode,
                config,
                timeline,
                truncation,
                schedule,
            })
        }
        None => None,
    };

    let mut queue = EventQueue::default();
    for (i, (_, ws)) in windows.iter().enumerate() {
        for w in ws {
            queue.push(w.start, EventKind::WindowOpen { source: i, window: *w });
            queue.push(w.end, EventKind::WindowClose { source: i, window: *w });
        }
    }
    if let Some(sf) = &superframe {
        if let Some(rep) = &sf.truncation {
            for (k, loss) in rep.superframes.iter().enumerate() {
                if loss.beacon_lost + loss.active_lost > 0 {
                    queue.push(loss.start, EventKind::Truncation { loss: k });
                }
            }
        }
        for (c, tl) in sf.timeline.coordinators.iter().enumerate() {
            for seg in tl.segments.iter().filter(|s| s.kind == SegmentKind::Beacon) {
                queue.push(
                    seg.start,
                    EventKind::BeaconTx {
                        coordinator: c,
                        start: seg.start,
                        end: seg.end,
                    },
                );
            }
        }
        for (i, task) in scenario.tx_tasks.iter().enumerate() {
            queue.push(task.release, EventKind::TaskRelease(TaskRef::Tx(i)));
            let slots = &sf.schedule.assignments[i].slots;
            for slot in slots {
                queue.push(slot.start, EventKind::SlotTx { task: i, slot: *slot });
            }
            match slots.last() {
                Some(last) if sf.schedule.is_assigned(&task.id) => queue.push(
                    last.end,
                    EventKind::TaskFinish {
                        task: TaskRef::Tx(i),
                        completed: true,
                    },
                ),
                _ => queue.push(
                    task.deadline,
                    EventKind::TaskFinish {
                        task: TaskRef::Tx(i),
                        completed: false,
                    },
                ),
            }
        }
    }

    let mut progress: Vec<RetrievalProgress<'_>> = scenario
        .retrieval_tasks
        .iter()
        .map(|t| RetrievalProgress::new(t, &topology, &power))
        .collect::<Result<_, _>>()?;
    let mut outcomes: Vec<TaskOutcome> = scenario
        .retrieval_tasks
        .iter()
        .map(|t| TaskOutcome {
            task_id: t.id.clone(),
            status: TaskStatus::Deferred,
            completion: None,
            waits: Vec::new(),
            hops: Vec::new(),
        })
        .collect();
    for (i, t) in scenario.retrieval_tasks.iter().enumerate() {
        queue.push(t.release, EventKind::TaskRelease(TaskRef::Retrieval(i)));
    }

    let task_id = |r: TaskRef| match r {
        TaskRef::Retrieval(i) => scenario.retrieval_tasks[i].id.as_str(),
        TaskRef::Tx(i) => scenario.tx_tasks[i].id.as_str(),
    };

    while let Some(ev) = queue.pop() {
        let now = ev.time;
        match ev.kind {
            EventKind::WindowOpen { source, window } => {
                sink.record(
                    TraceRecord::new(now, TraceKind::WindowOpen, &windows[source].0).span(window.start, window.end),
                )?;
            }
            EventKind::WindowClose { source, window } => {
                sink.record(
                    TraceRecord::new(now, TraceKind::WindowClose, &windows[source].0).span(window.start, window.end),
                )?;
            }
            EventKind::Truncation { loss } => {
                let sf = superframe.as_ref().expect("queued with superframe");
                let l = &sf.truncation.as_ref().expect("queued with report").superframes[loss];
                let mut rec = TraceRecord::new(now, TraceKind::Truncation, &l.coordinator);
                rec.superframe = Some(l.superframe);
                rec.beacon_lost = Some(l.beacon_lost);
                rec.active_lost = Some(l.active_lost);
                sink.record(rec)?;
            }
            EventKind::BeaconTx {
                coordinator,
                start,
                end,
            } => {
                let sf = superframe.as_ref().expect("queued with superframe");
                let tl = &sf.timeline.coordinators[coordinator];
                let mut rec = TraceRecord::new(now, TraceKind::BeaconTx, &tl.coordinator).span(start, end);
                rec.superframe = Some(tl.superframe_index(start));
                sink.record(rec)?;
            }
            EventKind::TaskRelease(r) => {
                sink.record(TraceRecord::new(now, TraceKind::TaskRelease, task_id(r)))?;
                if let TaskRef::Retrieval(i) = r {
                    advance_retrieval(i, now, &mut progress, &mut outcomes, &mut queue, sink)?;
                }
            }
            EventKind::HopStart { task, hop } => {
                let link = topology.links.iter().find(|l| l.id == hop.link).expect("route link");
                let mut rec = TraceRecord::new(now, TraceKind::HopStart, task_id(TaskRef::Retrieval(task)))
                    .span(hop.start, hop.end);
                rec.link = Some(hop.link.clone());
                rec.source = [&link.endpoint_a, &link.endpoint_b].into_iter().find_map(|n| {
                    managers.get_mut(n).and_then(|m| {
                        let policy = m.policy().clone();
                        m.select_source(hop.start, &policy)
                    })
                });
                sink.record(rec)?;
                queue.push(hop.end, EventKind::HopEnd { task, hop });
            }
            EventKind::HopEnd { task, hop } => {
                let mut rec = TraceRecord::new(now, TraceKind::HopEnd, task_id(TaskRef::Retrieval(task)))
                    .span(hop.start, hop.end);
                rec.link = Some(hop.link.clone());
                sink.record(rec)?;
                outcomes[task].hops.push(hop);
                advance_retrieval(task, now, &mut progress, &mut outcomes, &mut queue, sink)?;
            }
            EventKind::SlotTx { task, slot } => {
                let mut rec =
                    TraceRecord::new(now, TraceKind::SlotTx, task_id(TaskRef::Tx(task))).span(slot.start, slot.end);
                rec.coordinator = Some(scenario.tx_tasks[task].coordinator.clone());
                sink.record(rec)?;
            }
            EventKind::TaskFinish { task, completed } => {
                let kind = if completed {
                    TraceKind::TaskCompleted
                } else {
                    TraceKind::DeadlineMissed
                };
                let mut rec = TraceRecord::new(now, kind, task_id(task));
                if completed {
                    let release = match task {
                        TaskRef::Retrieval(i) => scenario.retrieval_tasks[i].release,
                        TaskRef::Tx(i) => scenario.tx_tasks[i].release,
                    };
                    rec.latency = Some(now - release);
                }
                sink.record(rec)?;
            }
        }
    }

    let metrics = summarize(
        scenario,
        seed,
        &outcomes,
        superframe.as_ref(),
        &eh,
        topology.power_model(&harvested),
    );
    Ok(RunSummary {
        metrics,
        windows,
        superframe,
        retrievals: outcomes,
    })
}

/// Plans the next hop of retrieval `i`, which is ready at `now`.
fn advance_retrieval(
    i: usize,
    now: Tick,
    progress: &mut [RetrievalProgress<'_>],
    outcomes: &mut [TaskOutcome],
    queue: &mut EventQueue,
    sink: &mut dyn TraceSink,
) -> Result<(), SimError> {
    let task_id = progress[i].task().id.clone();
    match progress[i].step(now) {
        RetrievalStep::Hop(hop) => {
            let wait = hop.start - hop.ready;
            outcomes[i].waits.push(HopWait {
                link: hop.link.clone(),
                wait,
            });
            if wait > 0 {
                let mut rec = TraceRecord::new(now, TraceKind::TaskDeferred, &task_id);
                rec.link = Some(hop.link.clone());
                rec.wait = Some(wait);
                sink.record(rec)?;
            }
            queue.push(hop.start, EventKind::HopStart { task: i, hop });
        }
        RetrievalStep::Missed => {
            outcomes[i].status = TaskStatus::DeadlineMissed;
            let deadline = progress[i].task().deadline;
            queue.push(
                deadline,
                EventKind::TaskFinish {
                    task: TaskRef::Retrieval(i),
                    completed: false,
                },
            );
        }
        RetrievalStep::Done => {
            outcomes[i].status = TaskStatus::Completed;
            outcomes[i].completion = Some(now);
            queue.push(
                now,
                EventKind::TaskFinish {
                    task: TaskRef::Retrieval(i),
                    completed: true,
                },
            );
        }
    }
    Ok(())
}

/// One EH manager per powered node, holding that node's sources.
fn node_managers(
    scenario: &Scenario,
    windows: &BTreeMap<SourceId, Vec<AvailabilityWindow>>,
) -> BTreeMap<NodeId, EhManager> {
    let policy: SwitchPolicy = scenario.switch_policy.clone();
    scenario
        .nodes
        .iter()
        .filter(|n| !n.powered_by.is_empty())
        .map(|n| {
            let mut m = EhManager::new(policy.clone());
            for s in &n.powered_by {
                if m.register(s.clone(), windows[s].clone()).is_ok()
                    && scenario.sources.iter().any(|spec| spec.id == *s && spec.disabled)
                {
                    m.disable(s).expect("just registered");
                }
            }
            (n.id.clone(), m)
        })
        .collect()
}

fn summarize(
    scenario: &Scenario,
    seed: u64,
    outcomes: &[TaskOutcome],
    superframe: Option<&SuperframeRun>,
    eh: &[AvailabilityWindow],
    power_model: PowerModel,
) -> MetricsSummary {
    let mut tasks: Vec<TaskMetric> = scenario
        .retrieval_tasks
        .iter()
        .zip(outcomes)
        .map(|(t, o)| TaskMetric {
            id: t.id.clone(),
            kind: TaskKind::Retrieval,
            status: o.status,
            latency: o.completion.map(|c| c - t.release),
            deferred: o.total_wait(),
        })
        .collect();
    let mut assigned_slot_ticks = 0;
    if let Some(sf) = superframe {
        for (t, a) in scenario.tx_tasks.iter().zip(&sf.schedule.assignments) {
            let ok = sf.schedule.is_assigned(&t.id);
            if ok {
                assigned_slot_ticks += a.slots.iter().map(|s| s.end - s.start).sum::<Tick>();
            }
            tasks.push(TaskMetric {
                id: t.id.clone(),
                kind: TaskKind::Tx,
                status: if ok {
                    TaskStatus::Completed
                } else {
                    TaskStatus::DeadlineMissed
                },
                latency: a.slots.last().filter(|_| ok).map(|s| s.end - t.release),
                deferred: 0,
            });
        }
    }
    let latencies: Vec<Tick> = tasks.iter().filter_map(|t| t.latency).collect();
    let eh_available_ticks = window::covered_ticks(eh);
    let (beacon_lost_total, active_lost_total) = superframe
        .and_then(|sf| sf.truncation.as_ref())
        .map_or((0, 0), |r| (r.total_beacon_lost, r.total_active_lost));
    MetricsSummary {
        seed,
        total_tasks: tasks.len(),
        tasks_completed: tasks.iter().filter(|t| t.met()).count(),
        deadlines_missed: tasks.iter().filter(|t| !t.met()).count(),
        deferred_time_total: tasks.iter().map(|t| t.deferred).sum(),
        mean_latency: if latencies.is_empty() {
            0.0
        } else {
            latencies.iter().sum::<Tick>() as f64 / latencies.len() as f64
        },
        max_latency: latencies.iter().copied().max().unwrap_or(0),
        eh_available_ticks,
        assigned_slot_ticks,
        eh_utilization: if eh_available_ticks == 0 {
            0.0
        } else {
            assigned_slot_ticks as f64 / eh_available_ticks as f64
        },
        beacon_lost_total,
        active_lost_total,
        power_model,
        tasks,
    }
}

/// Metrics of `replications` runs; run `r` uses
/// `replication_seed(base_seed, r)`. Ordered by `r`.
pub fn replicate(scenario: &Scenario, replications: u64, base_seed: u64) -> Result<Vec<MetricsSummary>, SimError> {
    scenario.validate()?;
    (0..replications.max(1))
        .into_par_iter()
        .map(|r| run_replication(scenario, base_seed, r))
        .collect()
}

/// Same as [`replicate`] on a dedicated pool of `threads` workers.
pub fn replicate_with_threads(
    scenario: &Scenario,
    replications: u64,
    base_seed: u64,
    threads: usize,
) -> Result<Vec<MetricsSummary>, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    pool.install(|| replicate(scenario, replications, base_seed))
}

fn run_replication(scenario: &Scenario, base_seed: u64, r: u64) -> Result<MetricsSummary, SimError> {
    let mut sink = NullSink;
    Ok(run_into(scenario, seed::replication_seed(base_seed, r), &mut sink)?.metrics)
}

struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: TraceRecord) -> std::io::Result<()> {
        Ok(())
    }
}

/// Fraction of replications in which each task met its deadline.
pub fn deadline_met_fraction(runs: &[MetricsSummary]) -> BTreeMap<String, f64> {
    let mut met: BTreeMap<String, u64> = BTreeMap::new();
    for m in runs {
        for t in &m.tasks {
            *met.entry(t.id.clone()).or_default() += u64::from(t.met());
        }
    }
    met.into_iter()
        .map(|(id, n)| (id, n as f64 / runs.len().max(1) as f64))
        .collect()
}
