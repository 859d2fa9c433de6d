//! Trace records and sinks.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::window::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    WindowOpen,
    WindowClose,
    TaskRelease,
    /// A task is waiting for its next hop to fit; `wait` holds the delay.
    TaskDeferred,
    HopStart,
    HopEnd,
    SlotTx,
    BeaconTx,
    Truncation,
    TaskCompleted,
    DeadlineMissed,
}

/// One timestamped simulation event. Unused detail fields are omitted from
/// the serialized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: Tick,
    pub kind: TraceKind,
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superframe: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beacon_lost: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_lost: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<Tick>,
}

impl TraceRecord {
    pub fn new(time: Tick, kind: TraceKind, subject: impl Into<String>) -> Self {
        Self {
            time,
            kind,
            subject: subject.into(),
            start: None,
            end: None,
            link: None,
            wait: None,
            source: None,
            coordinator: None,
            superframe: None,
            beacon_lost: None,
            active_lost: None,
            latency: None,
        }
    }

    pub fn span(mut self, start: Tick, end: Tick) -> Self {
        self.start = Some(start);
        self.end = Some(end);
        self
    }
}

/// Receives trace records in time order.
pub trait TraceSink {
    fn record(&mut self, rec: TraceRecord) -> io::Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: TraceRecord) -> io::Result<()> {
        self.push(rec);
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for JsonLinesSink<W> {
    fn record(&mut self, rec: TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, &rec)?;
        self.out.write_all(b"\n")
    }
}

pub fn write_jsonl<W: Write>(records: &[TraceRecord], out: W) -> io::Result<()> {
    let mut sink = JsonLinesSink::new(out);
    for r in records {
        sink.record(r.clone())?;
    }
    sink.out.flush()
}
