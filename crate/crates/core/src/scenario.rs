//! Scenario documents: one JSON file describing sources, topology, tasks,
//! superframe parameters and run mode.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manager::SwitchPolicy;
use crate::network::{EnergyAwareLink, Node, RetrievalTask, Topology};
use crate::sds::{self, CoordinatorId, SuperframeConfig, TxTask};
use crate::sources::{PeriodicSawtoothSource, SourceError, SourceId, SourceSpec};
use crate::window::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// EH-unaware superframes.
    Baseline,
    /// Baseline superframes cut by EH outages.
    Truncated,
    /// Superframes matched to the EH duty cycle.
    #[default]
    Aligned,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "truncated" => Ok(Mode::Truncated),
            "aligned" => Ok(Mode::Aligned),
            _ => Err(format!("unknown mode {s:?} (expected baseline, truncated or aligned)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperframeSpec {
    pub beacon_len: Tick,
    pub active_len: Tick,
    pub period: Tick,
    /// Parent first; each child is shifted past its parent's active portion.
    pub coordinators: Vec<CoordinatorId>,
    /// Beacon length of aligned superframes; `beacon_len` when absent.
    #[serde(default)]
    pub beacon_budget: Option<Tick>,
    /// Sources feeding the coordinators; all enabled sources when empty.
    #[serde(default)]
    pub eh_sources: Vec<SourceId>,
}

impl SuperframeSpec {
    pub fn config(&self) -> SuperframeConfig {
        SuperframeConfig {
            beacon_len: self.beacon_len,
            active_len: self.active_len,
            period: self.period,
        }
    }

    pub fn beacon_budget(&self) -> Tick {
        self.beacon_budget.unwrap_or(self.beacon_len)
    }
}

fn default_tick_length() -> String {
    "1ms".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    /// Unit label only; never used in computation.
    #[serde(default = "default_tick_length")]
    pub tick_length: String,
    pub horizon: Tick,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub links: Vec<EnergyAwareLink>,
    #[serde(default)]
    pub retrieval_tasks: Vec<RetrievalTask>,
    #[serde(default)]
    pub tx_tasks: Vec<TxTask>,
    #[serde(default)]
    pub superframe: Option<SuperframeSpec>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub switch_policy: SwitchPolicy,
}

/// One validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    /// What is wrong, e.g. `source "E"` or `link "L_SG"`.
    pub subject: String,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.subject, self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scenario has {} problem(s):\n{}", .0.len(), .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
pub struct ValidationErrors(pub Vec<Issue>);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

struct Collector(Vec<Issue>);

impl Collector {
    fn push(&mut self, subject: impl fmt::Display, field: &str, message: impl Into<String>) {
        self.0.push(Issue {
            subject: subject.to_string(),
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn duplicates<'a>(&mut self, what: &str, ids: impl Iterator<Item = &'a str>) {
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(id) {
                self.push(format!("{what} {id:?}"), "id", "duplicate id");
            }
        }
    }
}

fn source_field(e: &SourceError) -> (&'static str, String) {
    match e {
        SourceError::InvalidSource { field, reason } => (field, reason.clone()),
        other => ("kind", other.to_string()),
    }
}

impl Scenario {
    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn topology(&self) -> Topology {
        Topology {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
        }
    }

    /// Enabled periodic sources in declaration order.
    pub fn periodic_sources(&self) -> Vec<PeriodicSawtoothSource> {
        self.sources
            .iter()
            .filter(|s| !s.disabled)
            .filter_map(|s| s.kind.as_periodic().cloned())
            .collect()
    }

    pub fn has_stochastic_sources(&self) -> bool {
        self.sources.iter().any(|s| s.kind.is_stochastic())
    }

    /// Checks every cross-reference and parameter, reporting all failures.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut c = Collector(Vec::new());
        if self.horizon == 0 {
            c.push("scenario", "horizon", "must be at least 1 tick");
        }

        c.duplicates("source", self.sources.iter().map(|s| s.id.as_str()));
        c.duplicates("node", self.nodes.iter().map(|n| n.id.as_str()));
        c.duplicates("link", self.links.iter().map(|l| l.id.as_str()));
        c.duplicates(
            "task",
            self.retrieval_tasks
                .iter()
                .map(|t| t.id.as_str())
                .chain(self.tx_tasks.iter().map(|t| t.id.as_str())),
        );

        let source_ids: BTreeSet<&str> = self.sources.iter().map(|s| s.id.as_str()).collect();
        for s in &self.sources {
            if let Err(e) = s.kind.validate() {
                let (field, msg) = source_field(&e);
                c.push(format!("source {:?}", s.id), field, msg);
            }
        }

        let node_ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        for n in &self.nodes {
            for s in &n.powered_by {
                if !source_ids.contains(s.as_str()) {
                    c.push(
                        format!("node {:?}", n.id),
                        "powered_by",
                        format!("unknown source {s:?}"),
                    );
                }
            }
        }

        for l in &self.links {
            for (field, n) in [("endpoint_a", &l.endpoint_a), ("endpoint_b", &l.endpoint_b)] {
                if !node_ids.contains(n.as_str()) {
                    c.push(format!("link {:?}", l.id), field, format!("unknown node {n:?}"));
                }
            }
            if l.hop_time == 0 {
                c.push(format!("link {:?}", l.id), "hop_time", "must be at least 1 tick");
            }
        }

        let topo = self.topology();
        for t in &self.retrieval_tasks {
            let subject = format!("retrieval task {:?}", t.id);
            if t.release >= t.deadline {
                c.push(&subject, "deadline", "release must precede deadline");
            }
            let mut nodes_ok = true;
            for (field, n) in std::iter::once(("initiator", &t.initiator))
                .chain(std::iter::once(("target", &t.target)))
                .chain(t.sensors.iter().map(|s| ("sensors", s)))
            {
                if !node_ids.contains(n.as_str()) {
                    c.push(&subject, field, format!("unknown node {n:?}"));
                    nodes_ok = false;
                }
            }
            if nodes_ok {
                if topo.link_between(&t.initiator, &t.target).is_none() {
                    c.push(
                        &subject,
                        "initiator",
                        format!("no link between {:?} and {:?}", t.initiator, t.target),
                    );
                }
                for s in &t.sensors {
                    if topo.link_between(&t.target, s).is_none() {
                        c.push(&subject, "sensors", format!("no link between {:?} and {s:?}", t.target));
                    }
                }
            }
        }

        let coordinators: BTreeSet<&str> = self
            .superframe
            .iter()
            .flat_map(|sf| sf.coordinators.iter().map(String::as_str))
            .collect();
        let mut slot_lens: BTreeMap<&str, Tick> = BTreeMap::new();
        for t in &self.tx_tasks {
            let subject = format!("tx task {:?}", t.id);
            if let Err(e) = t.validate() {
                c.push(&subject, "task", e.to_string());
            }
            if self.superframe.is_none() {
                c.push(&subject, "coordinator", "tx tasks need a superframe section");
            } else if !coordinators.contains(t.coordinator.as_str()) {
                c.push(
                    &subject,
                    "coordinator",
                    format!("unknown coordinator {:?}", t.coordinator),
                );
            }
            let len = *slot_lens.entry(&t.coordinator).or_insert(t.slot_len);
            if len != t.slot_len {
                c.push(
                    &subject,
                    "slot_len",
                    format!("coordinator {:?} already uses slot length {len}", t.coordinator),
                );
            }
        }

        if let Some(sf) = &self.superframe {
            c.duplicates("coordinator", sf.coordinators.iter().map(String::as_str));
            for s in &sf.eh_sources {
                if !source_ids.contains(s.as_str()) {
                    c.push("superframe", "eh_sources", format!("unknown source {s:?}"));
                }
            }
            if let Err(e) = sds::baseline_sds(&sf.config(), &sf.coordinators, 1) {
                c.push("superframe", "period", e.to_string());
            }
            if self.mode == Mode::Aligned {
                let periodic = self.periodic_sources();
                if periodic.is_empty() {
                    c.push(
                        "superframe",
                        "mode",
                        "aligned mode needs at least one enabled periodic source",
                    );
                } else if periodic.iter().all(|p| p.validate().is_ok()) {
                    match sds::eh_align(&periodic, sf.beacon_budget()) {
                        Ok(cfg) => {
                            if let Err(e) = sds::baseline_sds(&cfg, &sf.coordinators, 1) {
                                c.push("superframe", "coordinators", format!("aligned superframe: {e}"));
                            }
                        }
                        Err(e) => c.push("superframe", "beacon_budget", e.to_string()),
                    }
                }
            }
        }

        if let SwitchPolicy::FixedPriority(order) = &self.switch_policy {
            for s in order {
                if !source_ids.contains(s.as_str()) {
                    c.push("switch_policy", "fixed_priority", format!("unknown source {s:?}"));
                }
            }
        }

        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(c.0))
        }
    }
}
