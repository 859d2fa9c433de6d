//! Energy-dependent links and the sensing-information retrieval flow.
//!
//! A gateway asks a sensor node for data; the node reads each attached
//! sensor in turn and answers. Every hop needs its link usable for
//! `hop_time` consecutive ticks, and a link is usable only while both of its
//! endpoints are powered.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sources::SourceId;
use crate::window::{self, AvailabilityWindow, Tick};

pub type NodeId = String;
pub type LinkId = String;
pub type TaskId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("link {link:?} references unknown node {node:?}")]
    DanglingNode { link: LinkId, node: NodeId },
    #[error("no link between {a:?} and {b:?} for task {task:?}")]
    MissingLink { task: TaskId, a: NodeId, b: NodeId },
    #[error("task {task:?} references unknown node {node:?}")]
    UnknownTaskNode { task: TaskId, node: NodeId },
    #[error("no power data for source {0:?}")]
    UnknownSource(SourceId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Gateway,
    SensorNode,
    Sensor,
    EhModule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub role: NodeRole,
    /// Empty means always powered.
    #[serde(default)]
    pub powered_by: Vec<SourceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyAwareLink {
    pub id: LinkId,
    pub endpoint_a: NodeId,
    pub endpoint_b: NodeId,
    pub hop_time: Tick,
}

impl EnergyAwareLink {
    pub fn joins(&self, a: &str, b: &str) -> bool {
        (self.endpoint_a == a && self.endpoint_b == b) || (self.endpoint_a == b && self.endpoint_b == a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalTask {
    pub id: TaskId,
    pub initiator: NodeId,
    pub target: NodeId,
    #[serde(default)]
    pub sensors: Vec<NodeId>,
    pub release: Tick,
    pub deadline: Tick,
}

/// Power model of a whole topology, by who supplies the sensing nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModel {
    /// Every sensor node and sensor is powered by harvested sources only.
    FullyHarvested,
    /// Some sensing node draws on a non-harvested supply or is unpowered by EH.
    PartiallyHarvested,
    /// No sensing node is EH-powered.
    NotHarvested,
}

/// Nodes and links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<EnergyAwareLink>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<EnergyAwareLink>) -> Result<Self, NetworkError> {
        let topo = Self { nodes, links };
        topo.check_links()?;
        Ok(topo)
    }

    fn check_links(&self) -> Result<(), NetworkError> {
        for l in &self.links {
            for n in [&l.endpoint_a, &l.endpoint_b] {
                if self.node(n).is_none() {
                    return Err(NetworkError::DanglingNode {
                        link: l.id.clone(),
                        node: n.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&EnergyAwareLink> {
        self.links.iter().find(|l| l.joins(a, b))
    }

    /// Classifies the topology given which sources are harvested.
    pub fn power_model(&self, harvested: &BTreeSet<SourceId>) -> PowerModel {
        let sensing: Vec<&Node> = self
            .nodes
            .iter()
            .filter(|n| matches!(n.role, NodeRole::SensorNode | NodeRole::Sensor))
            .collect();
        let eh_only = |n: &&Node| !n.powered_by.is_empty() && n.powered_by.iter().all(|s| harvested.contains(s));
        let any_eh = |n: &&Node| n.powered_by.iter().any(|s| harvested.contains(s));
        if !sensing.is_empty() && sensing.iter().all(eh_only) {
            PowerModel::FullyHarvested
        } else if sensing.iter().any(any_eh) {
            PowerModel::PartiallyHarvested
        } else {
            PowerModel::NotHarvested
        }
    }

    /// The hop sequence of a retrieval task: request, one read per sensor in
    /// listed order, response.
    pub fn retrieval_route<'a>(&'a self, task: &RetrievalTask) -> Result<Vec<&'a EnergyAwareLink>, NetworkError> {
        for n in std::iter::once(&task.initiator)
            .chain(std::iter::once(&task.target))
            .chain(&task.sensors)
        {
            if self.node(n).is_none() {
                return Err(NetworkError::UnknownTaskNode {
                    task: task.id.clone(),
                    node: n.clone(),
                });
            }
        }
        let find = |a: &NodeId, b: &NodeId| {
            self.link_between(a, b).ok_or_else(|| NetworkError::MissingLink {
                task: task.id.clone(),
                a: a.clone(),
                b: b.clone(),
            })
        };
        let uplink = find(&task.initiator, &task.target)?;
        let mut route = vec![uplink];
        for s in &task.sensors {
            route.push(find(&task.target, s)?);
        }
        route.push(uplink);
        Ok(route)
    }
}

/// Availability of one node: always powered, or powered inside a window
/// union.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Power {
    Always,
    Windows(Vec<AvailabilityWindow>),
}

impl Power {
    pub fn at(&self, t: Tick) -> bool {
        match self {
            Power::Always => true,
            Power::Windows(ws) => window::contains(ws, t),
        }
    }

    pub fn and(&self, other: &Power) -> Power {
        match (self, other) {
            (Power::Always, p) | (p, Power::Always) => p.clone(),
            (Power::Windows(a), Power::Windows(b)) => Power::Windows(window::intersect_lists(a, b)),
        }
    }

    /// Earliest `s >= from` with `[s, s + len)` powered throughout.
    pub fn earliest_fit(&self, from: Tick, len: Tick) -> Option<Tick> {
        match self {
            Power::Always => Some(from),
            Power::Windows(ws) => window::earliest_fit(ws, from, len),
        }
    }
}

/// Per-node power availability resolved from source windows.
#[derive(Debug, Clone, Default)]
pub struct PowerMap {
    nodes: BTreeMap<NodeId, Power>,
}

impl PowerMap {
    /// Resolves each node's `powered_by` against `source_windows`.
    pub fn resolve(
        topology: &Topology,
        source_windows: &BTreeMap<SourceId, Vec<AvailabilityWindow>>,
    ) -> Result<Self, NetworkError> {
        let mut nodes = BTreeMap::new();
        for n in &topology.nodes {
            let power = if n.powered_by.is_empty() {
                Power::Always
            } else {
                let lists = n
                    .powered_by
                    .iter()
                    .map(|s| {
                        source_windows
                            .get(s)
                            .cloned()
                            .ok_or_else(|| NetworkError::UnknownSource(s.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Power::Windows(window::union_windows(&lists).expect("generated windows are sorted"))
            };
            nodes.insert(n.id.clone(), power);
        }
        Ok(Self { nodes })
    }

    /// Every node always powered.
    pub fn always_on(topology: &Topology) -> Self {
        Self {
            nodes: topology.nodes.iter().map(|n| (n.id.clone(), Power::Always)).collect(),
        }
    }

    pub fn set(&mut self, node: impl Into<NodeId>, power: Power) {
        self.nodes.insert(node.into(), power);
    }

    pub fn node(&self, id: &str) -> Option<&Power> {
        self.nodes.get(id)
    }

    pub fn link(&self, link: &EnergyAwareLink) -> Result<Power, NetworkError> {
        let get = |n: &NodeId| {
            self.nodes.get(n).ok_or_else(|| NetworkError::DanglingNode {
                link: link.id.clone(),
                node: n.clone(),
            })
        };
        Ok(get(&link.endpoint_a)?.and(get(&link.endpoint_b)?))
    }
}

/// True iff both endpoints of `link` are powered at `t`.
pub fn link_available(link: &EnergyAwareLink, power: &PowerMap, t: Tick) -> Result<bool, NetworkError> {
    Ok(power.link(link)?.at(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Completed,
    Deferred,
    DeadlineMissed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HopWait {
    pub link: LinkId,
    pub wait: Tick,
}

/// One executed hop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub link: LinkId,
    /// When the hop became ready to start.
    pub ready: Tick,
    pub start: Tick,
    pub end: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    pub status: TaskStatus,
    pub completion: Option<Tick>,
    /// One entry per attempted hop, in order.
    pub waits: Vec<HopWait>,
    pub hops: Vec<Hop>,
}

impl TaskOutcome {
    pub fn total_wait(&self) -> Tick {
        self.waits.iter().map(|w| w.wait).sum()
    }
}

/// Outcome of asking a retrieval for its next hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetrievalStep {
    Hop(Hop),
    /// The next hop cannot end by the deadline.
    Missed,
    Done,
}

/// Hop-by-hop progress of one retrieval task.
///
/// A hop must fit entirely inside one stretch of link availability; the
/// task waits for the first tick where it does. The task misses its
/// deadline as soon as the next hop cannot end by `deadline`.
#[derive(Debug, Clone)]
pub struct RetrievalProgress<'a> {
    task: &'a RetrievalTask,
    route: Vec<(&'a EnergyAwareLink, Power)>,
    next: usize,
}

impl<'a> RetrievalProgress<'a> {
    pub fn new(task: &'a RetrievalTask, topology: &'a Topology, power: &PowerMap) -> Result<Self, NetworkError> {
        let route = topology
            .retrieval_route(task)?
            .into_iter()
            .map(|l| power.link(l).map(|p| (l, p)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { task, route, next: 0 })
    }

    pub fn task(&self) -> &RetrievalTask {
        self.task
    }

    pub fn hop_count(&self) -> usize {
        self.route.len()
    }

    /// Plans the next hop given the tick at which it becomes ready.
    pub fn step(&mut self, ready: Tick) -> RetrievalStep {
        let Some((link, power)) = self.route.get(self.next) else {
            return RetrievalStep::Done;
        };
        let fit = power
            .earliest_fit(ready, link.hop_time)
            .filter(|s| s + link.hop_time <= self.task.deadline);
        match fit {
            Some(start) => {
                self.next += 1;
                RetrievalStep::Hop(Hop {
                    link: link.id.clone(),
                    ready,
                    start,
                    end: start + link.hop_time,
                })
            }
            None => RetrievalStep::Missed,
        }
    }
}

/// Runs a retrieval task to completion or deadline miss.
pub fn execute_retrieval(
    task: &RetrievalTask,
    topology: &Topology,
    power: &PowerMap,
) -> Result<TaskOutcome, NetworkError> {
    let mut progress = RetrievalProgress::new(task, topology, power)?;
    let mut outcome = TaskOutcome {
        task_id: task.id.clone(),
        status: TaskStatus::Deferred,
        completion: None,
        waits: Vec::with_capacity(progress.hop_count()),
        hops: Vec::with_capacity(progress.hop_count()),
    };
    let mut t = task.release;
    loop {
        match progress.step(t) {
            RetrievalStep::Hop(hop) => {
                outcome.waits.push(HopWait {
                    link: hop.link.clone(),
                    wait: hop.start - hop.ready,
                });
                t = hop.end;
                outcome.hops.push(hop);
            }
            RetrievalStep::Missed => {
                outcome.status = TaskStatus::DeadlineMissed;
                return Ok(outcome);
            }
            RetrievalStep::Done => {
                outcome.status = TaskStatus::Completed;
                outcome.completion = Some(t);
                return Ok(outcome);
            }
        }
    }
}
