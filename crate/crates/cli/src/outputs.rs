//! Output documents. Every JSON document embeds the fully-defaulted scenario
//! and the seed it ran with.

use std::fs;
use std::path::Path;

use ehnet_core::engine::{deadline_met_fraction, MetricsSummary, RunOutput, SuperframeRun};
use ehnet_core::scenario::Scenario;
use ehnet_core::sds::{proportion_half_width, SegmentKind};
use ehnet_core::trace::write_jsonl;
use ehnet_core::Tick;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub type File = (String, Vec<u8>);

pub fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn scenario_value(s: &Scenario) -> Value {
    serde_json::to_value(s).expect("scenario serializes")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Creates `dir` and writes `files` into it.
pub fn write_files(dir: &Path, files: &[File]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, CliError> {
    let to_io = |e: csv::Error| CliError::Io {
        path: "<csv>".into(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(to_io)?;
    }
    w.into_inner().map_err(|e| CliError::Io {
        path: "<csv>".into(),
        source: e.into_error(),
    })
}

#[derive(Serialize)]
struct WindowRow<'a> {
    source: &'a str,
    start: Tick,
    end: Tick,
}

#[derive(Serialize)]
struct SegmentRow<'a> {
    coordinator: &'a str,
    superframe: u64,
    kind: SegmentKind,
    start: Tick,
    end: Tick,
}

#[derive(Serialize)]
struct LossRow<'a> {
    coordinator: &'a str,
    superframe: u64,
    start: Tick,
    beacon_lost: Tick,
    active_lost: Tick,
}

/// Everything `run` writes, rendered in memory so that nothing is written
/// unless the whole run succeeded.
pub fn run_files(scenario: &Scenario, out: &RunOutput) -> Result<Vec<File>, CliError> {
    let mut trace = Vec::new();
    write_jsonl(&out.trace, &mut trace).map_err(|source| CliError::Io {
        path: "trace.jsonl".into(),
        source,
    })?;
    let summary = &out.summary;
    let metrics = json!({
        "scenario": scenario_value(scenario),
        "seed": scenario.seed,
        "metrics": summary.metrics,
        "retrievals": summary.retrievals,
        "superframe": summary.superframe.as_ref().map(|sf| json!({
            "mode": sf.mode,
            "config": sf.config,
            "schedule": sf.schedule,
        })),
    });
    let windows = summary.windows.iter().flat_map(|(id, ws)| {
        ws.iter().map(move |w| WindowRow {
            source: id,
            start: w.start,
            end: w.end,
        })
    });
    let mut files = vec![
        ("scenario.json".to_string(), scenario.to_json_pretty().into_bytes()),
        ("trace.jsonl".to_string(), trace),
        ("metrics.json".to_string(), pretty(&metrics).into_bytes()),
        ("windows.csv".to_string(), csv_bytes(windows)?),
    ];
    if let Some(sf) = &summary.superframe {
        let segments = sf.timeline.coordinators.iter().flat_map(|c| {
            c.segments.iter().map(move |s| SegmentRow {
                coordinator: &c.coordinator,
                superframe: c.superframe_index(s.start),
                kind: s.kind,
                start: s.start,
                end: s.end,
            })
        });
        files.push(("timeline.csv".to_string(), csv_bytes(segments)?));
        if let Some(report) = &sf.truncation {
            let doc = json!({
                "scenario": scenario_value(scenario),
                "seed": scenario.seed,
                "mode": sf.mode,
                "config": sf.config,
                "report": report,
            });
            files.push(("truncation.json".to_string(), pretty(&doc).into_bytes()));
            let rows = report.superframes.iter().map(|l| LossRow {
                coordinator: &l.coordinator,
                superframe: l.superframe,
                start: l.start,
                beacon_lost: l.beacon_lost,
                active_lost: l.active_lost,
            });
            files.push(("losses.csv".to_string(), csv_bytes(rows)?));
        }
    }
    Ok(files)
}

pub fn sched_report(scenario: &Scenario, sf: &SuperframeRun) -> Value {
    json!({
        "scenario": scenario_value(scenario),
        "seed": scenario.seed,
        "mode": sf.mode,
        "config": sf.config,
        "verdict": sf.schedule.verdict,
        "first_failure": sf.schedule.first_failure,
        "failed": sf.schedule.failed,
        "assignments": sf.schedule.assignments,
    })
}

pub fn replicate_report(scenario: &Scenario, runs: &[MetricsSummary]) -> Value {
    let n = runs.len() as u64;
    let fractions = deadline_met_fraction(runs);
    let tasks: Vec<Value> = runs
        .first()
        .map(|m| m.tasks.iter().map(|t| t.id.clone()).collect::<Vec<_>>())
        .unwrap_or_default()
        .into_iter()
        .map(|id| {
            let p = fractions[&id];
            json!({"task_id": id, "deadline_met_fraction": p, "half_width": proportion_half_width(p, n)})
        })
        .collect();
    let mean = |f: fn(&MetricsSummary) -> f64| runs.iter().map(f).sum::<f64>() / n.max(1) as f64;
    json!({
        "scenario": scenario_value(scenario),
        "seed": scenario.seed,
        "replications": n,
        "summary": {
            "tasks": tasks,
            "mean_tasks_completed": mean(|m| m.tasks_completed as f64),
            "mean_deadlines_missed": mean(|m| m.deadlines_missed as f64),
            "mean_latency": mean(|m| m.mean_latency),
            "mean_eh_utilization": mean(|m| m.eh_utilization),
        },
        "runs": runs,
    })
}

#[derive(Serialize)]
struct ReplicationRow {
    replication: usize,
    seed: u64,
    tasks_completed: usize,
    deadlines_missed: usize,
    mean_latency: f64,
    max_latency: Tick,
    deferred_time_total: Tick,
    eh_utilization: f64,
}

pub fn replications_csv(runs: &[MetricsSummary]) -> Result<Vec<u8>, CliError> {
    csv_bytes(runs.iter().enumerate().map(|(r, m)| ReplicationRow {
        replication: r,
        seed: m.seed,
        tasks_completed: m.tasks_completed,
        deadlines_missed: m.deadlines_missed,
        mean_latency: m.mean_latency,
        max_latency: m.max_latency,
        deferred_time_total: m.deferred_time_total,
        eh_utilization: m.eh_utilization,
    }))
}
