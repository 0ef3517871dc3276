//! Cost of a mapping by simulated execution.
//!
//! Nodes are visited in breadth-first topological order while every unit
//! keeps its own clock. A task advances the clocks of its input memory,
//! processing unit and output memory together; a data transfer advances the
//! clocks of both memories. The makespan is the largest clock at the end.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appgraph::{topsort_bfs, AppGraph, GraphError, Node, NodeId, NodeKind};
use crate::platform::{Platform, UnitId};
use crate::timing::{route_rate, Costs, TimingError, TimingModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid mapping: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidMapping(Vec<MappingViolation>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error("no timing available for node {node} on unit {unit}")]
    MissingTiming { node: NodeId, unit: UnitId },
    #[error("node {0} breaks the task triple structure")]
    BrokenTriple(NodeId),
}

/// Assignment of every node to a unit, indexed by node id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mapping(Vec<UnitId>);

impl Mapping {
    pub fn new(units: Vec<UnitId>) -> Self {
        Mapping(units)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn unit(&self, node: NodeId) -> UnitId {
        self.0[node]
    }

    pub fn set(&mut self, node: NodeId, unit: UnitId) {
        self.0[node] = unit;
    }

    pub fn as_slice(&self) -> &[UnitId] {
        &self.0
    }

    /// Every compute node on the host processor, every memory node in host RAM.
    pub fn all_host(graph: &AppGraph, platform: &Platform) -> Self {
        let (cpu, ram) = platform.host();
        Mapping(graph.nodes().iter().map(|n| if n.kind.is_memory() { ram } else { cpu }).collect())
    }

    pub fn to_json(&self, platform: &Platform) -> String {
        let doc: BTreeMap<NodeId, &str> =
            self.0.iter().enumerate().map(|(i, &u)| (i, platform.unit_name(u))).collect();
        serde_json::to_string_pretty(&doc).expect("mapping serialization is infallible")
    }

    /// Parses `{"<node>": "<unit name>", ...}`; missing nodes and unknown
    /// units are reported as violations.
    pub fn from_json(text: &str, graph: &AppGraph, platform: &Platform) -> Result<Self, MappingParseError> {
        let doc: BTreeMap<NodeId, String> =
            serde_json::from_str(text).map_err(|e| MappingParseError::Json(e.to_string()))?;
        let mut violations = Vec::new();
        let mut units = Vec::with_capacity(graph.len());
        for id in 0..graph.len() {
            match doc.get(&id) {
                None => violations.push(MappingViolation::Missing(id)),
                Some(name) => match platform.unit_by_name(name) {
                    Some(u) => units.push(u),
                    None => violations.push(MappingViolation::UnknownUnit { node: id, name: name.clone() }),
                },
            }
        }
        for &id in doc.keys() {
            if id >= graph.len() {
                violations.push(MappingViolation::UnknownNode(id));
            }
        }
        if violations.is_empty() {
            Ok(Mapping(units))
        } else {
            Err(MappingParseError::Invalid(violations))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingParseError {
    #[error("malformed mapping JSON: {0}")]
    Json(String),
    #[error("invalid mapping: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<MappingViolation>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MappingViolation {
    Missing(NodeId),
    UnknownNode(NodeId),
    WrongLength { expected: usize, got: usize },
    UnknownUnit { node: NodeId, name: String },
    Incompatible { node: NodeId, unit: String },
    Capacity { unit: String, used: f64, capacity: f64 },
}

impl fmt::Display for MappingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MappingViolation::Missing(n) => write!(f, "node {n} is not mapped"),
            MappingViolation::UnknownNode(n) => write!(f, "node {n} does not exist"),
            MappingViolation::WrongLength { expected, got } => {
                write!(f, "mapping covers {got} nodes, graph has {expected}")
            }
            MappingViolation::UnknownUnit { node, name } => write!(f, "node {node} mapped to unknown unit {name:?}"),
            MappingViolation::Incompatible { node, unit } => write!(f, "node {node} cannot run on {unit}"),
            MappingViolation::Capacity { unit, used, capacity } => {
                write!(f, "{unit} needs {used} area units but has {capacity}")
            }
        }
    }
}

/// Totality, compatibility and dataflow capacity checks.
pub fn verify_mapping(graph: &AppGraph, platform: &Platform, timing: &TimingModel, mapping: &Mapping) -> Vec<MappingViolation> {
    let mut out = Vec::new();
    if mapping.len() != graph.len() {
        out.push(MappingViolation::WrongLength { expected: graph.len(), got: mapping.len() });
        return out;
    }
    for node in graph.nodes() {
        let u = mapping.unit(node.id);
        if u.0 >= platform.unit_count() {
            out.push(MappingViolation::UnknownUnit { node: node.id, name: format!("#{}", u.0) });
        } else if !timing.compatible(graph, platform, node.id, u) {
            out.push(MappingViolation::Incompatible { node: node.id, unit: platform.unit_name(u).into() });
        }
    }
    out.extend(capacity_violations(graph, platform, mapping));
    out
}

pub(crate) fn capacity_violations(graph: &AppGraph, platform: &Platform, mapping: &Mapping) -> Vec<MappingViolation> {
    let mut out = Vec::new();
    for p in platform.proc_ids().filter(|&p| platform.is_dataflow(p)) {
        let used: f64 = graph
            .tasks()
            .filter(|&t| mapping.unit(t) == p)
            .filter_map(|t| graph.attrs(t).map(|a| a.area))
            .sum();
        let capacity = platform.area_capacity(p);
        if used > capacity + 1e-9 {
            out.push(MappingViolation::Capacity { unit: platform.unit_name(p).into(), used, capacity });
        }
    }
    out
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Let the faster memory of a transfer return early.
    #[serde(default)]
    pub bus_overlap: bool,
    /// Compress same-device streamable chains before simulating.
    #[serde(default)]
    pub streaming: bool,
    #[serde(default)]
    pub order_seed: Option<u64>,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Compute,
    Read,
    Write,
    Transfer,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub node: NodeId,
    pub unit: UnitId,
    pub start: f64,
    pub end: f64,
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Timeline {
    pub unit_names: Vec<String>,
    pub clocks: Vec<f64>,
    pub events: Vec<Event>,
    /// Time at which each node's data is available.
    pub data_ready: BTreeMap<NodeId, f64>,
}

impl Timeline {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn makespan(&self) -> f64 {
        self.clocks.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub makespan: f64,
    pub timeline: Timeline,
    /// First edge whose transport or execution cost was infinite.
    pub infinite_edge: Option<(NodeId, NodeId)>,
}

/// Makespan and timeline of `mapping`.
pub fn evaluate(
    graph: &AppGraph,
    platform: &Platform,
    timing: &TimingModel,
    mapping: &Mapping,
    options: EvalOptions,
) -> Result<Evaluation, EvalError> {
    let violations = verify_mapping(graph, platform, timing, mapping);
    if !violations.is_empty() {
        return Err(EvalError::InvalidMapping(violations));
    }
    let costs = Costs::build(graph, platform, timing)?;
    evaluate_with_costs(graph, platform, &costs, mapping, options)
}

/// [`evaluate`] against precomputed costs; the mapping is assumed valid.
pub fn evaluate_with_costs(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    mapping: &Mapping,
    options: EvalOptions,
) -> Result<Evaluation, EvalError> {
    if options.streaming {
        let reduced = compress_streams(graph, mapping, platform, costs)?;
        let mut eval = simulate(&reduced.graph, platform, &reduced.costs, &reduced.mapping, options)?;
        let rep = |id: NodeId| reduced.origin[id][0];
        for e in &mut eval.timeline.events {
            e.node = rep(e.node);
        }
        eval.timeline.data_ready = eval.timeline.data_ready.iter().map(|(&k, &v)| (rep(k), v)).collect();
        eval.infinite_edge = eval.infinite_edge.map(|(a, b)| (rep(a), rep(b)));
        Ok(eval)
    } else {
        simulate(graph, platform, costs, mapping, options)
    }
}

/// Makespan only; cheaper entry point for search loops.
pub fn makespan(graph: &AppGraph, platform: &Platform, costs: &Costs, mapping: &Mapping, options: EvalOptions) -> Result<f64, EvalError> {
    evaluate_with_costs(graph, platform, costs, mapping, options).map(|e| e.makespan)
}

fn cost(value: f64, node: NodeId, unit: UnitId) -> Result<f64, EvalError> {
    if value.is_nan() {
        Err(EvalError::MissingTiming { node, unit })
    } else {
        Ok(value)
    }
}

fn simulate(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    mapping: &Mapping,
    options: EvalOptions,
) -> Result<Evaluation, EvalError> {
    let order = topsort_bfs(graph, options.order_seed)?;
    let mut clock = vec![0.0f64; platform.unit_count()];
    let mut ready = vec![0.0f64; graph.len()];
    let mut events = Vec::new();
    let mut infinite_edge = None;
    let mut flag_inf = |v: f64, edge: (NodeId, NodeId)| {
        if v.is_infinite() && infinite_edge.is_none() {
            infinite_edge = Some(edge);
        }
    };

    for &i in &order {
        match graph.kind(i) {
            NodeKind::InputMem => {
                let j = match graph.successors(i) {
                    [j] if graph.kind(*j) == NodeKind::Compute => *j,
                    _ => return Err(EvalError::BrokenTriple(i)),
                };
                let k = match graph.successors(j) {
                    [k] => *k,
                    _ => return Err(EvalError::BrokenTriple(j)),
                };
                let (pi, pj, pk) = (mapping.unit(i), mapping.unit(j), mapping.unit(k));
                let read = cost(costs.transport(i, pi, pj), i, pj)?;
                let exec = cost(costs.exec(j, pj), j, pj)?;
                let write = cost(costs.transport(j, pj, pk), j, pk)?;
                flag_inf(read, (i, j));
                flag_inf(exec, (i, j));
                flag_inf(write, (j, k));
                let start = clock[pi.0].max(clock[pj.0]).max(clock[pk.0]).max(ready[i]);
                let computed = start + read + exec;
                let end = computed + write;
                clock[pi.0] = end;
                clock[pj.0] = end;
                clock[pk.0] = end;
                ready[j] = computed;
                ready[k] = end;
                if read > 0.0 {
                    events.push(Event { node: i, unit: pi, start, end: start + read, kind: EventKind::Read });
                }
                events.push(Event { node: j, unit: pj, start: start + read, end: computed, kind: EventKind::Compute });
                if write > 0.0 {
                    events.push(Event { node: k, unit: pk, start: computed, end, kind: EventKind::Write });
                }
            }
            NodeKind::OutputMem | NodeKind::Source => {
                for &j in graph.successors(i) {
                    let (pi, pj) = (mapping.unit(i), mapping.unit(j));
                    let tau = cost(costs.transport(i, pi, pj), i, pj)?;
                    flag_inf(tau, (i, j));
                    let start = clock[pi.0].max(clock[pj.0]).max(ready[i]);
                    let arrival = start + tau;
                    if pi == pj {
                        ready[j] = ready[j].max(start);
                        continue;
                    }
                    let (busy_i, busy_j) = if options.bus_overlap && tau.is_finite() {
                        overlap_busy(platform, pi, pj, tau)
                    } else {
                        (tau, tau)
                    };
                    clock[pi.0] = start + busy_i;
                    clock[pj.0] = start + busy_j;
                    ready[j] = ready[j].max(arrival);
                    if tau > 0.0 {
                        events.push(Event { node: i, unit: pi, start, end: start + busy_i, kind: EventKind::Transfer });
                        events.push(Event { node: j, unit: pj, start, end: start + busy_j, kind: EventKind::Transfer });
                    }
                }
            }
            NodeKind::Compute | NodeKind::Sink => {}
        }
    }

    let makespan = clock.iter().copied().fold(0.0, f64::max);
    let data_ready = (0..graph.len()).map(|i| (i, ready[i])).collect();
    Ok(Evaluation {
        makespan,
        timeline: Timeline { unit_names: platform.unit_names().to_vec(), clocks: clock, events, data_ready },
        infinite_edge,
    })
}

/// Busy time charged to each side of a memory transfer of duration `tau`:
/// each memory is held for the fraction of its own rate the transfer uses.
fn overlap_busy(platform: &Platform, a: UnitId, b: UnitId, tau: f64) -> (f64, f64) {
    if !(platform.is_memory(a) && platform.is_memory(b)) {
        return (tau, tau);
    }
    let used = route_rate(platform, a, b);
    let share = |m: UnitId| {
        let r = platform.rate(m);
        if r.is_finite() && r > 0.0 && used.is_finite() {
            tau * (used / r).min(1.0)
        } else {
            tau
        }
    };
    (share(a), share(b))
}

/// Longest source-to-sink path counting only execution times under `mapping`.
pub fn critical_path_bound(graph: &AppGraph, costs: &Costs, mapping: &Mapping) -> Result<f64, EvalError> {
    let order = topsort_bfs(graph, None)?;
    let mut best = vec![0.0f64; graph.len()];
    for &i in &order {
        let here = costs.exec(i, mapping.unit(i));
        let before = graph.predecessors(i).iter().map(|&p| best[p]).fold(0.0, f64::max);
        best[i] = before + here;
    }
    Ok(best.into_iter().fold(0.0, f64::max))
}

/// A graph with same-device streamable chains folded, ready for simulation.
#[derive(Clone, Debug)]
pub struct StreamCompression {
    pub graph: AppGraph,
    pub mapping: Mapping,
    pub costs: Costs,
    /// Original node ids behind each node of the reduced graph; the first
    /// entry is the representative.
    pub origin: Vec<Vec<NodeId>>,
}

/// Folds streamable task chains.
///
/// A link from task A to task B qualifies when A's output memory feeds only
/// B, both are streamable, both run on the same processing unit, and the
/// intermediate data stays in one memory associated with that unit. On a
/// dataflow unit, runs of linked tasks are cut greedily in topological order
/// whenever the next task would exceed the area capacity; each run of two or
/// more tasks becomes one task costing its most expensive step. On other
/// units the linked tasks stay separate but skip the intermediate write and
/// read.
pub fn compress_streams(graph: &AppGraph, mapping: &Mapping, platform: &Platform, costs: &Costs) -> Result<StreamCompression, EvalError> {
    let order = topsort_bfs(graph, None)?;
    let mut next: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut has_prev = vec![false; graph.len()];
    for c in graph.tasks() {
        let Some((_, _, o1)) = graph.triple(c) else { continue };
        let [a2] = graph.successors(o1) else { continue };
        if graph.kind(*a2) != NodeKind::InputMem || graph.predecessors(*a2).len() != 1 {
            continue;
        }
        let [c2] = graph.successors(*a2) else { continue };
        let c2 = *c2;
        if graph.kind(c2) != NodeKind::Compute {
            continue;
        }
        let streamable = |t: NodeId| graph.attrs(t).is_some_and(|a| a.is_streamable());
        let p = mapping.unit(c);
        let m = mapping.unit(o1);
        if streamable(c)
            && streamable(c2)
            && mapping.unit(c2) == p
            && mapping.unit(*a2) == m
            && platform.associated(p).contains(&m)
        {
            next.insert(c, c2);
            has_prev[c2] = true;
        }
    }

    // chains in topological order of their heads
    let mut chains: Vec<Vec<NodeId>> = Vec::new();
    for &c in &order {
        if graph.kind(c) != NodeKind::Compute || has_prev[c] || !next.contains_key(&c) {
            continue;
        }
        let mut chain = vec![c];
        while let Some(&n) = next.get(chain.last().unwrap()) {
            chain.push(n);
        }
        chains.push(chain);
    }

    let mut groups: Vec<Vec<NodeId>> = Vec::new();
    let mut skip_links: Vec<(NodeId, NodeId)> = Vec::new();
    for chain in chains {
        let p = mapping.unit(chain[0]);
        if platform.is_dataflow(p) {
            let cap = platform.area_capacity(p);
            let mut run: Vec<NodeId> = Vec::new();
            let mut area = 0.0;
            for c in chain {
                let a = graph.attrs(c).map_or(0.0, |a| a.area);
                if !run.is_empty() && area + a > cap + 1e-9 {
                    groups.push(std::mem::take(&mut run));
                    area = 0.0;
                }
                run.push(c);
                area += a;
            }
            groups.push(run);
        } else {
            skip_links.extend(chain.windows(2).map(|w| (w[0], w[1])));
        }
    }
    groups.retain(|g| g.len() >= 2);

    let n = graph.len();
    // old id -> representative old id it folds into (None = dropped)
    let mut fold: Vec<Option<NodeId>> = (0..n).map(Some).collect();
    let mut members: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut collapsed: Vec<(NodeId, NodeId, NodeId, NodeId)> = Vec::new(); // (a_first, head, c_last, o_last)
    for group in &groups {
        let head = group[0];
        let (a_first, _, _) = graph.triple(head).ok_or(EvalError::BrokenTriple(head))?;
        let last = *group.last().unwrap();
        let (_, _, o_last) = graph.triple(last).ok_or(EvalError::BrokenTriple(last))?;
        let mut inner = Vec::new();
        for (k, &c) in group.iter().enumerate() {
            let (a, _, o) = graph.triple(c).ok_or(EvalError::BrokenTriple(c))?;
            if k > 0 {
                fold[a] = None;
                inner.push(a);
                fold[c] = Some(head);
                inner.push(c);
            }
            if k + 1 < group.len() {
                fold[o] = None;
                inner.push(o);
            }
        }
        members.insert(head, inner);
        collapsed.push((a_first, head, last, o_last));
    }

    let kept: Vec<NodeId> = (0..n).filter(|&i| fold[i] == Some(i)).collect();
    let mut new_id = vec![usize::MAX; n];
    for (k, &old) in kept.iter().enumerate() {
        new_id[old] = k;
    }
    let map = |old: NodeId| fold[old].map(|r| new_id[r]);

    let mut nodes: Vec<Node> = Vec::with_capacity(kept.len());
    let mut origin = Vec::with_capacity(kept.len());
    for (k, &old) in kept.iter().enumerate() {
        let mut node = graph.node(old).clone();
        node.id = k;
        let mut from = vec![old];
        if let Some(inner) = members.get(&old) {
            from.extend(inner);
        }
        origin.push(from);
        nodes.push(node);
    }
    for &(_, head, _, o_last) in &collapsed {
        let node = &mut nodes[new_id[head]];
        let input = node.data_bytes;
        let out = graph.node(o_last).data_bytes;
        if let Some(a) = node.attrs.as_mut() {
            a.data_ratio = if input > 0.0 && out > 0.0 { out / input } else { a.data_ratio };
            a.streamability = 1.0;
        }
    }
    let mut edges: Vec<(NodeId, NodeId)> = graph
        .edges()
        .iter()
        .filter_map(|&(u, v)| match (map(u), map(v)) {
            (Some(a), Some(b)) if a != b => Some((a, b)),
            _ => None,
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let reduced = AppGraph::new(nodes, edges)?;

    let mut rcosts = Costs::blank(kept.len(), costs.unit_count());
    for (k, &old) in kept.iter().enumerate() {
        rcosts.set_compatible(k, costs.compatible_units(old).to_vec());
        for u in 0..costs.unit_count() {
            rcosts.set_exec(k, UnitId(u), costs.exec(old, UnitId(u)));
        }
        rcosts.copy_transport_row(k, costs, old);
    }
    for &(a_first, head, last, o_last) in &collapsed {
        let group = groups.iter().find(|g| g[0] == head).unwrap();
        let p = mapping.unit(head);
        let (m_in, m_out) = (mapping.unit(a_first), mapping.unit(o_last));
        let mut step = costs.transport(a_first, m_in, p).max(costs.transport(last, p, m_out));
        for &c in group {
            step = step.max(costs.exec(c, p));
        }
        let h = new_id[head];
        rcosts.set_exec(h, p, step);
        rcosts.set_transport(new_id[a_first], m_in, p, 0.0);
        rcosts.copy_transport_row(h, costs, last);
        rcosts.set_transport(h, p, m_out, 0.0);
    }
    for &(c1, c2) in &skip_links {
        let (_, _, o1) = graph.triple(c1).ok_or(EvalError::BrokenTriple(c1))?;
        let (a2, _, _) = graph.triple(c2).ok_or(EvalError::BrokenTriple(c2))?;
        let p = mapping.unit(c1);
        rcosts.set_transport(new_id[c1], p, mapping.unit(o1), 0.0);
        rcosts.set_transport(new_id[a2], mapping.unit(a2), p, 0.0);
    }

    let rmapping = Mapping::new(kept.iter().map(|&old| mapping.unit(old)).collect());
    Ok(StreamCompression { graph: reduced, mapping: rmapping, costs: rcosts, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appgraph::{validate, TaskAttrs};
    use crate::platform::preset;
    use crate::timing::MeasuredTable;

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
    }

    fn attrs(p: f64, c: f64) -> TaskAttrs {
        TaskAttrs { parallelizability: p, complexity: c, data_ratio: 1.0, streamability: c.max(1.0), area: c }
    }

    /// source -> k chained tasks -> sink, every memory holding `bytes`.
    pub(crate) fn chain(tasks: &[TaskAttrs], bytes: f64) -> AppGraph {
        let mut nodes = vec![Node { id: 0, kind: NodeKind::Source, data_bytes: bytes, attrs: None }];
        let mut edges = Vec::new();
        let mut prev = 0;
        for a in tasks {
            let b = nodes.len();
            nodes.push(Node { id: b, kind: NodeKind::InputMem, data_bytes: bytes, attrs: None });
            nodes.push(Node { id: b + 1, kind: NodeKind::Compute, data_bytes: bytes, attrs: Some(*a) });
            nodes.push(Node { id: b + 2, kind: NodeKind::OutputMem, data_bytes: bytes, attrs: None });
            edges.extend([(prev, b), (b, b + 1), (b + 1, b + 2)]);
            prev = b + 2;
        }
        let s = nodes.len();
        nodes.push(Node { id: s, kind: NodeKind::Sink, data_bytes: bytes, attrs: None });
        edges.push((prev, s));
        AppGraph::new(nodes, edges).unwrap()
    }

    #[test]
    fn empty_graph_has_zero_makespan() {
        let p = preset("CG").unwrap();
        let e = evaluate(&AppGraph::empty(), &p, &TimingModel::estimate(), &Mapping::new(vec![]), EvalOptions::default()).unwrap();
        assert_eq!(e.makespan, 0.0);
        assert!(e.timeline.events.is_empty());
    }

    #[test]
    fn single_task_on_cpu_side() {
        let g = chain(&[attrs(0.0, 20.0)], 1e8);
        let p = preset("CG").unwrap();
        let m = Mapping::all_host(&g, &p);
        let e = evaluate(&g, &p, &TimingModel::estimate(), &m, EvalOptions::default()).unwrap();
        let expected = 1e8 / 170e9 + 2e9 / 2.4e9 + 1e8 / 170e9;
        assert!(rel_close(e.makespan, expected), "{} vs {expected}", e.makespan);
        let kinds: Vec<_> = e.timeline.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::Read, EventKind::Compute, EventKind::Write]);
    }

    #[test]
    fn invalid_mapping_is_rejected() {
        let g = chain(&[attrs(0.0, 20.0)], 1e8);
        let p = preset("CG").unwrap();
        let mut m = Mapping::all_host(&g, &p);
        m.set(2, p.unit_by_name("cpu_ram").unwrap());
        let v = verify_mapping(&g, &p, &TimingModel::estimate(), &m);
        assert_eq!(v.len(), 1);
        assert!(matches!(evaluate(&g, &p, &TimingModel::estimate(), &m, EvalOptions::default()), Err(EvalError::InvalidMapping(_))));
        assert_eq!(verify_mapping(&g, &p, &TimingModel::estimate(), &Mapping::all_host(&g, &p)), vec![]);
    }

    #[test]
    fn capacity_overflow_names_the_device() {
        let g = chain(&[attrs(0.0, 15.0), attrs(0.0, 15.0)], 1e8);
        let p = preset("CGF").unwrap();
        let fpga = p.unit_by_name("fpga0").unwrap();
        let mut m = Mapping::all_host(&g, &p);
        for t in g.tasks().collect::<Vec<_>>() {
            m.set(t, fpga);
        }
        let v = verify_mapping(&g, &p, &TimingModel::estimate(), &m);
        assert_eq!(v, vec![MappingViolation::Capacity { unit: "fpga0".into(), used: 30.0, capacity: 28.0 }]);
    }

    #[test]
    fn infinite_transport_is_reported() {
        let g = chain(&[attrs(0.0, 20.0)], 1e8);
        let p = crate::platform::add_virtual_memory(&preset("CG").unwrap(), "gpu").unwrap();
        let mut m = Mapping::all_host(&g, &p);
        m.set(1, p.unit_by_name("gpu_vmem0").unwrap());
        let e = evaluate(&g, &p, &TimingModel::estimate(), &m, EvalOptions::default()).unwrap();
        assert!(e.makespan.is_infinite());
        assert_eq!(e.infinite_edge, Some((0, 1)));
    }

    #[test]
    fn virtual_memory_access_is_free() {
        let g = chain(&[attrs(0.0, 20.0), attrs(0.0, 20.0)], 1e8);
        let p = crate::platform::add_virtual_memory(&preset("CG").unwrap(), "cpu").unwrap();
        let v = p.unit_by_name("cpu_vmem0").unwrap();
        let mut m = Mapping::all_host(&g, &p);
        m.set(3, v); // first output
        m.set(4, v); // second input
        let e = evaluate(&g, &p, &TimingModel::estimate(), &m, EvalOptions::default()).unwrap();
        let base = evaluate(&g, &p, &TimingModel::estimate(), &Mapping::all_host(&g, &p), EvalOptions::default()).unwrap();
        assert!(rel_close(base.makespan - e.makespan, 2.0 * 1e8 / 170e9));
        assert!(!e.timeline.events.iter().any(|ev| ev.unit == v));
    }

    fn table_chain(costs: &[f64]) -> (AppGraph, Platform, TimingModel, Mapping) {
        let g = chain(&costs.iter().map(|_| attrs(0.0, 5.0)).collect::<Vec<_>>(), 1.0);
        let p = preset("CGF").unwrap();
        let fpga = p.unit_by_name("fpga0").unwrap();
        let fram = p.unit_by_name("fpga0_ram").unwrap();
        let mut table = MeasuredTable::default();
        for (k, t) in g.tasks().enumerate() {
            table.insert_exec(t, "fpga0", costs[k]).unwrap();
        }
        let timing = TimingModel::mixed(table, 1.0).unwrap();
        let mut m = Mapping::all_host(&g, &p);
        for n in g.nodes() {
            if n.kind == NodeKind::Compute {
                m.set(n.id, fpga);
            } else if !matches!(n.kind, NodeKind::Source | NodeKind::Sink) {
                m.set(n.id, fram);
            }
        }
        (g, p, timing, m)
    }

    #[test]
    fn fpga_chain_collapses_to_slowest_step() {
        let (g, p, timing, m) = table_chain(&[0.1, 0.3, 0.2]);
        let costs = Costs::build(&g, &p, &timing).unwrap();
        let r = compress_streams(&g, &m, &p, &costs).unwrap();
        assert_eq!(r.graph.task_count(), 1);
        assert_eq!(validate(&r.graph), vec![]);
        let head = r.graph.tasks().next().unwrap();
        let fpga = p.unit_by_name("fpga0").unwrap();
        let read = 1.0 / 11e9;
        assert!(rel_close(r.costs.exec(head, fpga), 0.3f64.max(read)));
    }

    #[test]
    fn oversize_chain_is_split_greedily() {
        let (g, p, timing, m) = table_chain(&[0.1, 0.3, 0.2]);
        // areas 10 + 10 + 10 = 30 > 28
        let mut g = g;
        for t in g.tasks().collect::<Vec<_>>() {
            let mut a = *g.attrs(t).unwrap();
            a.area = 10.0;
            g.set_attrs(t, a);
        }
        let costs = Costs::build(&g, &p, &timing).unwrap();
        let r = compress_streams(&g, &m, &p, &costs).unwrap();
        assert_eq!(r.graph.task_count(), 2);
        let fpga = p.unit_by_name("fpga0").unwrap();
        let mut times: Vec<f64> = r.graph.tasks().map(|t| r.costs.exec(t, fpga)).collect();
        times.sort_by(f64::total_cmp);
        assert!(rel_close(times[0], 0.2) && rel_close(times[1], 0.3));
        for t in r.graph.tasks() {
            let area: f64 = r.origin[t].iter().filter(|&&o| g.kind(o) == NodeKind::Compute).map(|&o| g.attrs(o).unwrap().area).sum();
            assert!(area <= 28.0);
        }
    }

    #[test]
    fn cpu_chain_skips_intermediate_accesses() {
        let g = chain(&[attrs(0.0, 20.0), attrs(0.0, 20.0), attrs(0.0, 20.0)], 1e8);
        let p = preset("CG").unwrap();
        let t = TimingModel::estimate();
        let m = Mapping::all_host(&g, &p);
        let plain = evaluate(&g, &p, &t, &m, EvalOptions::default()).unwrap();
        let streamed = evaluate(&g, &p, &t, &m, EvalOptions { streaming: true, ..Default::default() }).unwrap();
        let count = |e: &Evaluation, k| e.timeline.events.iter().filter(|x| x.kind == k).count();
        assert_eq!(count(&plain, EventKind::Read), 3);
        assert_eq!(count(&streamed, EventKind::Read), 1);
        assert_eq!(count(&streamed, EventKind::Write), 1);
        let durations = |e: &Evaluation| -> Vec<f64> {
            e.timeline.events.iter().filter(|x| x.kind == EventKind::Compute).map(|x| x.end - x.start).collect()
        };
        for (a, b) in durations(&plain).into_iter().zip(durations(&streamed)) {
            assert!(rel_close(a, b));
        }
        assert!(rel_close(plain.makespan - streamed.makespan, 4.0 * 1e8 / 170e9));
    }

    #[test]
    fn non_streamable_graph_compresses_to_itself() {
        let g = chain(&[attrs(0.0, 1.0), attrs(0.5, 1.0)], 1e6);
        let p = preset("CGF").unwrap();
        let t = TimingModel::estimate();
        let costs = Costs::build(&g, &p, &t).unwrap();
        let m = Mapping::all_host(&g, &p);
        let r = compress_streams(&g, &m, &p, &costs).unwrap();
        assert_eq!(r.graph, g);
        assert_eq!(r.mapping, m);
    }
}
