//! Implementation model: which node may run where, and how long it takes.
//!
//! Execution and transport times come from device characteristics
//! ([`Backend::Estimate`]), from measured tables ([`Backend::Table`]), or from
//! a table with penalized estimates filling the gaps ([`Backend::Mixed`]).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appgraph::{AppGraph, NodeId, NodeKind};
use crate::platform::{proc_rates, Platform, UnitId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("no measured execution time for node {node} on {unit:?}")]
    MissingExec { node: NodeId, unit: String },
    #[error("no measured transport time for node {node} from {from:?} to {to:?}")]
    MissingTransport { node: NodeId, from: String, to: String },
    #[error("invalid table entry: {0}")]
    BadEntry(String),
    #[error("compute node {0} has no task attributes")]
    MissingAttrs(NodeId),
    #[error("mixed backend needs a penalty >= 1, got {0}")]
    BadPenalty(f64),
    #[error("malformed timing JSON: {0}")]
    Json(String),
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Estimate,
    Table,
    Mixed,
}

/// Measured timings keyed by node id and unit name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasuredTable {
    exec: BTreeMap<(NodeId, String), f64>,
    transport: BTreeMap<(NodeId, String, String), f64>,
}

#[derive(Serialize, Deserialize, Default)]
struct RawTable {
    #[serde(default)]
    exec: Vec<(NodeId, String, f64)>,
    #[serde(default)]
    transport: Vec<(NodeId, String, String, f64)>,
}

impl MeasuredTable {
    pub fn insert_exec(&mut self, node: NodeId, unit: &str, seconds: f64) -> Result<(), TimingError> {
        check_entry(seconds)?;
        self.exec.insert((node, unit.to_string()), seconds);
        Ok(())
    }

    pub fn insert_transport(&mut self, node: NodeId, from: &str, to: &str, seconds: f64) -> Result<(), TimingError> {
        check_entry(seconds)?;
        self.transport.insert((node, from.to_string(), to.to_string()), seconds);
        Ok(())
    }

    pub fn exec(&self, node: NodeId, unit: &str) -> Option<f64> {
        self.exec.get(&(node, unit.to_string())).copied()
    }

    pub fn transport(&self, node: NodeId, from: &str, to: &str) -> Option<f64> {
        self.transport.get(&(node, from.to_string(), to.to_string())).copied()
    }

    pub fn from_json(text: &str) -> Result<Self, TimingError> {
        let raw: RawTable = serde_json::from_str(text).map_err(|e| TimingError::Json(e.to_string()))?;
        let mut table = MeasuredTable::default();
        for (node, unit, s) in raw.exec {
            table.insert_exec(node, &unit, s)?;
        }
        for (node, from, to, s) in raw.transport {
            table.insert_transport(node, &from, &to, s)?;
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let raw = RawTable {
            exec: self.exec.iter().map(|((n, u), s)| (*n, u.clone(), *s)).collect(),
            transport: self
                .transport
                .iter()
                .map(|((n, a, b), s)| (*n, a.clone(), b.clone(), *s))
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("table serialization is infallible")
    }
}

fn check_entry(seconds: f64) -> Result<(), TimingError> {
    if seconds.is_finite() && seconds >= 0.0 {
        Ok(())
    } else {
        Err(TimingError::BadEntry(format!("{seconds} is not a finite nonnegative time")))
    }
}

/// Extra restrictions on top of the role match (memory nodes on memories,
/// compute nodes on processing units).
#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct CompatRule {
    /// Largest `data_bytes` a memory may hold, by memory name.
    #[serde(default)]
    pub memory_byte_caps: BTreeMap<String, f64>,
    /// Nodes restricted to the listed unit names.
    #[serde(default)]
    pub pins: BTreeMap<NodeId, BTreeSet<String>>,
}

impl CompatRule {
    /// Pins every source and sink to the host memory.
    pub fn pin_terminals(graph: &AppGraph, platform: &Platform) -> Self {
        let host_mem = platform.unit_name(platform.host().1).to_string();
        let pins = graph
            .nodes()
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Source | NodeKind::Sink))
            .map(|n| (n.id, BTreeSet::from([host_mem.clone()])))
            .collect();
        CompatRule { memory_byte_caps: BTreeMap::new(), pins }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingModel {
    pub backend: Backend,
    pub table: MeasuredTable,
    /// Multiplier on estimates used where the table has no entry.
    pub mixed_penalty: f64,
    pub compat: CompatRule,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel::estimate()
    }
}

impl TimingModel {
    pub fn estimate() -> Self {
        TimingModel { backend: Backend::Estimate, table: MeasuredTable::default(), mixed_penalty: 1.0, compat: CompatRule::default() }
    }

    pub fn table(table: MeasuredTable) -> Self {
        TimingModel { backend: Backend::Table, table, mixed_penalty: 1.0, compat: CompatRule::default() }
    }

    pub fn mixed(table: MeasuredTable, penalty: f64) -> Result<Self, TimingError> {
        if !(penalty.is_finite() && penalty >= 1.0) {
            return Err(TimingError::BadPenalty(penalty));
        }
        Ok(TimingModel { backend: Backend::Mixed, table, mixed_penalty: penalty, compat: CompatRule::default() })
    }

    pub fn with_compat(mut self, compat: CompatRule) -> Self {
        self.compat = compat;
        self
    }

    pub fn compatible(&self, graph: &AppGraph, platform: &Platform, node: NodeId, unit: UnitId) -> bool {
        if unit.0 >= platform.unit_count() {
            return false;
        }
        let n = graph.node(node);
        if n.kind.is_memory() != platform.is_memory(unit) {
            return false;
        }
        let name = platform.unit_name(unit);
        if let Some(allowed) = self.compat.pins.get(&node) {
            if !allowed.contains(name) {
                return false;
            }
        }
        if let Some(&cap) = self.compat.memory_byte_caps.get(name) {
            if n.data_bytes > cap {
                return false;
            }
        }
        true
    }

    pub fn compatible_units(&self, graph: &AppGraph, platform: &Platform, node: NodeId) -> Vec<UnitId> {
        platform.units().filter(|&u| self.compatible(graph, platform, node, u)).collect()
    }

    /// Execution time of `node` on `unit`; infinite for incompatible pairs.
    pub fn exec_time(&self, graph: &AppGraph, platform: &Platform, node: NodeId, unit: UnitId) -> Result<f64, TimingError> {
        if !self.compatible(graph, platform, node, unit) {
            return Ok(f64::INFINITY);
        }
        if graph.kind(node).is_memory() {
            return Ok(0.0);
        }
        let measured = self.table.exec(node, platform.unit_name(unit));
        match (self.backend, measured) {
            (Backend::Table | Backend::Mixed, Some(s)) => Ok(s),
            (Backend::Table, None) => Err(TimingError::MissingExec { node, unit: platform.unit_name(unit).into() }),
            (Backend::Mixed, None) => Ok(estimate_exec(graph, platform, node, unit)? * self.mixed_penalty),
            (Backend::Estimate, _) => estimate_exec(graph, platform, node, unit),
        }
    }

    /// Time to move the output of `producer` from `from` to `to`.
    pub fn transport_time(
        &self,
        graph: &AppGraph,
        platform: &Platform,
        producer: NodeId,
        from: UnitId,
        to: UnitId,
    ) -> Result<f64, TimingError> {
        if from == to {
            return Ok(0.0);
        }
        let measured = self.table.transport(producer, platform.unit_name(from), platform.unit_name(to));
        match (self.backend, measured) {
            (Backend::Table | Backend::Mixed, Some(s)) => Ok(s),
            (Backend::Table, None) => Err(TimingError::MissingTransport {
                node: producer,
                from: platform.unit_name(from).into(),
                to: platform.unit_name(to).into(),
            }),
            (Backend::Mixed, None) => {
                Ok(estimate_transport(graph, platform, producer, from, to) * self.mixed_penalty)
            }
            (Backend::Estimate, _) => Ok(estimate_transport(graph, platform, producer, from, to)),
        }
    }
}

/// `complexity * input_bytes / (r_s * (1 - p + p * r_p))`, divided by the
/// streamability on a dataflow unit whose area fits the task.
pub fn estimate_exec(graph: &AppGraph, platform: &Platform, node: NodeId, unit: UnitId) -> Result<f64, TimingError> {
    let n = graph.node(node);
    if n.kind.is_memory() {
        return Ok(0.0);
    }
    let Some(dev) = platform.proc(unit) else {
        return Ok(f64::INFINITY);
    };
    let a = n.attrs.ok_or(TimingError::MissingAttrs(node))?;
    let (serial, parallel) = proc_rates(dev);
    let work = a.complexity * n.data_bytes;
    let p = a.parallelizability;
    let mut t = work / (serial * (1.0 - p + p * parallel));
    if dev.dataflow && a.area <= dev.area_capacity {
        t /= a.streamability;
    }
    Ok(t)
}

/// Effective rate between a memory and a processing unit: the memory's own
/// rate when associated, otherwise the best route through an associated
/// memory linked to it.
fn access_rate(platform: &Platform, mem: UnitId, proc: UnitId) -> f64 {
    if let Some(owner) = platform.virtual_owner(mem) {
        return if owner == proc { f64::INFINITY } else { 0.0 };
    }
    let assoc = platform.associated(proc);
    if assoc.contains(&mem) {
        return platform.rate(mem);
    }
    assoc
        .iter()
        .filter(|&&a| platform.virtual_owner(a).is_none())
        .filter_map(|&a| platform.link_limit(a, mem).map(|l| platform.rate(a).min(l)))
        .fold(0.0, f64::max)
        .min(platform.rate(mem))
}

/// Rate at which data moves between two distinct units (0 = unreachable).
pub fn route_rate(platform: &Platform, from: UnitId, to: UnitId) -> f64 {
    match (platform.is_memory(from), platform.is_memory(to)) {
        (true, true) => {
            if platform.virtual_owner(from).is_some() || platform.virtual_owner(to).is_some() {
                return 0.0;
            }
            match platform.link_limit(from, to) {
                Some(limit) => platform.rate(from).min(platform.rate(to)).min(limit),
                None => 0.0,
            }
        }
        (true, false) => access_rate(platform, from, to),
        (false, true) => access_rate(platform, to, from),
        (false, false) => 0.0,
    }
}

pub fn estimate_transport(graph: &AppGraph, platform: &Platform, producer: NodeId, from: UnitId, to: UnitId) -> f64 {
    if from == to {
        return 0.0;
    }
    let rate = route_rate(platform, from, to);
    if rate == f64::INFINITY {
        return 0.0;
    }
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    graph.output_bytes(producer) / rate
}

/// Dense cost tables for one (graph, platform, timing) instance.
///
/// Missing measured entries are stored as NaN and surface as errors where
/// they are consumed.
#[derive(Clone, Debug)]
pub struct Costs {
    units: usize,
    compat: Vec<Vec<UnitId>>,
    exec: Vec<f64>,
    transport: HashMap<NodeId, Vec<f64>>,
}

impl Costs {
    pub fn build(graph: &AppGraph, platform: &Platform, timing: &TimingModel) -> Result<Costs, TimingError> {
        let u = platform.unit_count();
        let n = graph.len();
        let mut compat = Vec::with_capacity(n);
        let mut exec = vec![f64::INFINITY; n * u];
        for i in 0..n {
            let c = timing.compatible_units(graph, platform, i);
            for &unit in &c {
                exec[i * u + unit.0] = match timing.exec_time(graph, platform, i, unit) {
                    Ok(s) => s,
                    Err(TimingError::MissingExec { .. }) => f64::NAN,
                    Err(e) => return Err(e),
                };
            }
            compat.push(c);
        }
        let mut transport = HashMap::new();
        for i in 0..n {
            if graph.successors(i).is_empty() {
                continue;
            }
            let mut d = vec![f64::INFINITY; u * u];
            for p in platform.units() {
                for q in platform.units() {
                    d[p.0 * u + q.0] = match timing.transport_time(graph, platform, i, p, q) {
                        Ok(s) => s,
                        Err(TimingError::MissingTransport { .. }) => f64::NAN,
                        Err(e) => return Err(e),
                    };
                }
            }
            transport.insert(i, d);
        }
        Ok(Costs { units: u, compat, exec, transport })
    }

    /// Table for `nodes` nodes with nothing compatible and infinite costs.
    pub fn blank(nodes: usize, units: usize) -> Costs {
        Costs { units, compat: vec![Vec::new(); nodes], exec: vec![f64::INFINITY; nodes * units], transport: HashMap::new() }
    }

    pub fn unit_count(&self) -> usize {
        self.units
    }

    pub fn node_count(&self) -> usize {
        self.compat.len()
    }

    pub fn compatible_units(&self, node: NodeId) -> &[UnitId] {
        &self.compat[node]
    }

    pub fn is_compatible(&self, node: NodeId, unit: UnitId) -> bool {
        self.compat[node].contains(&unit)
    }

    pub fn exec(&self, node: NodeId, unit: UnitId) -> f64 {
        self.exec[node * self.units + unit.0]
    }

    pub fn transport(&self, producer: NodeId, from: UnitId, to: UnitId) -> f64 {
        if from == to {
            return 0.0;
        }
        match self.transport.get(&producer) {
            Some(d) => d[from.0 * self.units + to.0],
            None => f64::INFINITY,
        }
    }

    pub fn set_compatible(&mut self, node: NodeId, units: Vec<UnitId>) {
        self.compat[node] = units;
    }

    pub fn set_exec(&mut self, node: NodeId, unit: UnitId, seconds: f64) {
        self.exec[node * self.units + unit.0] = seconds;
    }

    pub fn set_transport(&mut self, producer: NodeId, from: UnitId, to: UnitId, seconds: f64) {
        let u = self.units;
        let row = self.transport.entry(producer).or_insert_with(|| vec![f64::INFINITY; u * u]);
        row[from.0 * u + to.0] = seconds;
    }

    /// Copies the transport row of `src` in `other` onto `producer`.
    pub fn copy_transport_row(&mut self, producer: NodeId, other: &Costs, src: NodeId) {
        if let Some(row) = other.transport.get(&src) {
            self.transport.insert(producer, row.clone());
        }
    }
}
