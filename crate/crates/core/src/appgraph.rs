//! Memory-augmented task graphs.
//!
//! Every task is an `InputMem -> Compute -> OutputMem` triple. Data moves
//! between tasks only along edges that connect memory-role nodes, which makes
//! data placement an explicit part of a mapping.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("not a DAG: nodes {0:?} lie on or behind a cycle")]
    NotDag(Vec<NodeId>),
    #[error("node at position {position} carries id {id}; ids must be dense and in order")]
    NonDenseId { position: usize, id: NodeId },
    #[error("edge {0}->{1} references an unknown node")]
    UnknownNode(NodeId, NodeId),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid task graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Source,
    Sink,
    InputMem,
    Compute,
    OutputMem,
}

impl NodeKind {
    pub fn is_memory(self) -> bool {
        !matches!(self, NodeKind::Compute)
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeKind::Source => "source",
            NodeKind::Sink => "sink",
            NodeKind::InputMem => "input_mem",
            NodeKind::Compute => "compute",
            NodeKind::OutputMem => "output_mem",
        }
    }
}

/// Per-task characteristics used by the estimate-based timing model.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct TaskAttrs {
    /// Fraction of the execution that parallelizes perfectly.
    pub parallelizability: f64,
    /// Operations per input byte.
    pub complexity: f64,
    /// Output bytes per input byte.
    pub data_ratio: f64,
    /// Number of pipeline steps the task can be split into on a dataflow unit.
    pub streamability: f64,
    /// Area units occupied on a dataflow unit.
    pub area: f64,
}

impl TaskAttrs {
    pub fn check(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite();
        if !ok(self.parallelizability) || !(0.0..=1.0).contains(&self.parallelizability) {
            return Err(format!("parallelizability {} outside [0,1]", self.parallelizability));
        }
        if !ok(self.complexity) || self.complexity <= 0.0 {
            return Err(format!("complexity {} must be positive", self.complexity));
        }
        if !ok(self.data_ratio) || self.data_ratio <= 0.0 {
            return Err(format!("data_ratio {} must be positive", self.data_ratio));
        }
        if !ok(self.streamability) || self.streamability < 1.0 {
            return Err(format!("streamability {} below 1", self.streamability));
        }
        if !ok(self.area) || self.area < 0.0 {
            return Err(format!("area {} is negative", self.area));
        }
        Ok(())
    }

    pub fn is_streamable(&self) -> bool {
        self.streamability > 1.0
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Bytes held by a memory node; for a compute node, the bytes it reads.
    pub data_bytes: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attrs: Option<TaskAttrs>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
}

/// A memory-augmented task graph with cached adjacency.
///
/// Construction only checks that ids are dense and edges reference existing
/// nodes. Structural rules are reported by [`validate`].
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct AppGraph {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    succ: Vec<Vec<NodeId>>,
    pred: Vec<Vec<NodeId>>,
}

impl TryFrom<RawGraph> for AppGraph {
    type Error = GraphError;
    fn try_from(raw: RawGraph) -> Result<Self, GraphError> {
        AppGraph::new(raw.nodes, raw.edges)
    }
}

impl From<AppGraph> for RawGraph {
    fn from(g: AppGraph) -> Self {
        RawGraph { nodes: g.nodes, edges: g.edges }
    }
}

impl AppGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<(NodeId, NodeId)>) -> Result<Self, GraphError> {
        for (position, node) in nodes.iter().enumerate() {
            if node.id != position {
                return Err(GraphError::NonDenseId { position, id: node.id });
            }
        }
        let n = nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(GraphError::UnknownNode(u, v));
            }
            succ[u].push(v);
            pred[v].push(u);
        }
        Ok(AppGraph { nodes, edges, succ, pred })
    }

    pub fn empty() -> Self {
        AppGraph { nodes: Vec::new(), edges: Vec::new(), succ: Vec::new(), pred: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization is infallible")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        &self.succ[id]
    }

    pub fn predecessors(&self, id: NodeId) -> &[NodeId] {
        &self.pred[id]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id].kind
    }

    pub fn attrs(&self, id: NodeId) -> Option<&TaskAttrs> {
        self.nodes[id].attrs.as_ref()
    }

    /// Bytes leaving `id` along its outgoing edges.
    pub fn output_bytes(&self, id: NodeId) -> f64 {
        let node = &self.nodes[id];
        match (node.kind, node.attrs) {
            (NodeKind::Compute, Some(a)) => node.data_bytes * a.data_ratio,
            _ => node.data_bytes,
        }
    }

    /// Compute node ids in ascending order.
    pub fn tasks(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Compute).map(|n| n.id)
    }

    pub fn task_count(&self) -> usize {
        self.tasks().count()
    }

    /// The `(input, compute, output)` triple around a compute node, if intact.
    pub fn triple(&self, compute: NodeId) -> Option<(NodeId, NodeId, NodeId)> {
        match (self.pred[compute].as_slice(), self.succ[compute].as_slice()) {
            ([i], [o]) => Some((*i, compute, *o)),
            _ => None,
        }
    }

    pub fn set_data_bytes(&mut self, id: NodeId, bytes: f64) {
        self.nodes[id].data_bytes = bytes;
    }

    pub fn set_attrs(&mut self, id: NodeId, attrs: TaskAttrs) {
        self.nodes[id].attrs = Some(attrs);
    }

    /// Recomputes `data_bytes` from sources downwards.
    ///
    /// Sources receive `source_bytes`; an input memory or sink holds the sum of
    /// its predecessors; a compute node reads its input; an output memory holds
    /// `data_ratio` times the task input.
    pub fn propagate_sizes(&mut self, source_bytes: f64) -> Result<(), GraphError> {
        let order = topsort_bfs(self, None)?;
        for id in order {
            let bytes = match self.nodes[id].kind {
                NodeKind::Source => source_bytes,
                NodeKind::InputMem | NodeKind::Sink => {
                    self.pred[id].iter().map(|&p| self.output_bytes(p)).sum()
                }
                NodeKind::Compute => {
                    self.pred[id].iter().map(|&p| self.nodes[p].data_bytes).sum()
                }
                NodeKind::OutputMem => {
                    self.pred[id].iter().map(|&p| self.output_bytes(p)).sum()
                }
            };
            self.nodes[id].data_bytes = bytes;
        }
        Ok(())
    }

    /// Gives every task the same input load regardless of graph shape.
    pub fn apply_fixed_load(&mut self, bytes_per_task: f64) -> Result<(), GraphError> {
        let order = topsort_bfs(self, None)?;
        for id in order {
            let bytes = match self.nodes[id].kind {
                NodeKind::Source | NodeKind::InputMem | NodeKind::Compute => bytes_per_task,
                NodeKind::OutputMem => {
                    self.pred[id].iter().map(|&p| self.output_bytes(p)).sum()
                }
                NodeKind::Sink => self.pred[id].iter().map(|&p| self.output_bytes(p)).sum(),
            };
            self.nodes[id].data_bytes = bytes;
        }
        Ok(())
    }

    /// Overrides the complexity of every task (and the quantities tied to it).
    pub fn set_uniform_complexity(&mut self, complexity: f64) {
        for node in &mut self.nodes {
            if let Some(a) = node.attrs.as_mut() {
                a.complexity = complexity;
                a.streamability = complexity.max(1.0);
                a.area = complexity;
            }
        }
    }
}

/// A structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    DuplicateEdge(NodeId, NodeId),
    SelfLoop(NodeId),
    ComputeLink(NodeId, NodeId),
    BadEdge { from: NodeId, to: NodeId, from_kind: NodeKind, to_kind: NodeKind },
    Degree { node: NodeId, kind: NodeKind, incoming: usize, outgoing: usize },
    MissingAttrs(NodeId),
    UnexpectedAttrs(NodeId),
    BadAttrs(NodeId, String),
    BadDataBytes(NodeId),
    NotDag(Vec<NodeId>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateEdge(u, v) => write!(f, "duplicate edge {u}->{v}"),
            Violation::SelfLoop(u) => write!(f, "self loop on {u}"),
            Violation::ComputeLink(u, v) => {
                write!(f, "edge {u}->{v}: computation nodes must connect via memories")
            }
            Violation::BadEdge { from, to, from_kind, to_kind } => write!(
                f,
                "edge {from}->{to}: {} cannot feed {}",
                from_kind.label(),
                to_kind.label()
            ),
            Violation::Degree { node, kind, incoming, outgoing } => write!(
                f,
                "{} node {node} has {incoming} incoming and {outgoing} outgoing edges",
                kind.label()
            ),
            Violation::MissingAttrs(n) => write!(f, "compute node {n} lacks task attributes"),
            Violation::UnexpectedAttrs(n) => write!(f, "memory node {n} carries task attributes"),
            Violation::BadAttrs(n, why) => write!(f, "node {n}: {why}"),
            Violation::BadDataBytes(n) => write!(f, "node {n}: data_bytes must be finite and >= 0"),
            Violation::NotDag(nodes) => write!(f, "not a DAG (cycle through {nodes:?})"),
        }
    }
}

fn edge_allowed(from: NodeKind, to: NodeKind) -> bool {
    use NodeKind::*;
    matches!(
        (from, to),
        (Source, InputMem)
            | (Source, Sink)
            | (OutputMem, InputMem)
            | (OutputMem, Sink)
            | (InputMem, Compute)
            | (Compute, OutputMem)
    )
}

/// Reports every structural violation; an empty list means the graph is valid.
pub fn validate(graph: &AppGraph) -> Vec<Violation> {
    let mut out = Vec::new();

    for node in &graph.nodes {
        let id = node.id;
        let incoming = graph.pred[id].len();
        let outgoing = graph.succ[id].len();
        let degree_ok = match node.kind {
            NodeKind::Source => incoming == 0,
            NodeKind::Sink => outgoing == 0,
            NodeKind::Compute => incoming == 1 && outgoing == 1,
            NodeKind::InputMem => outgoing == 1,
            NodeKind::OutputMem => incoming == 1,
        };
        if !degree_ok {
            out.push(Violation::Degree { node: id, kind: node.kind, incoming, outgoing });
        }
        match (node.kind, &node.attrs) {
            (NodeKind::Compute, None) => out.push(Violation::MissingAttrs(id)),
            (NodeKind::Compute, Some(a)) => {
                if let Err(why) = a.check() {
                    out.push(Violation::BadAttrs(id, why));
                }
            }
            (_, Some(_)) => out.push(Violation::UnexpectedAttrs(id)),
            (_, None) => {}
        }
        if !node.data_bytes.is_finite() || node.data_bytes < 0.0 {
            out.push(Violation::BadDataBytes(id));
        }
    }

    let mut seen = BTreeSet::new();
    for &(u, v) in &graph.edges {
        if u == v {
            out.push(Violation::SelfLoop(u));
            continue;
        }
        if !seen.insert((u, v)) {
            out.push(Violation::DuplicateEdge(u, v));
            continue;
        }
        let (fk, tk) = (graph.kind(u), graph.kind(v));
        if !edge_allowed(fk, tk) {
            if fk == NodeKind::Compute || tk == NodeKind::Compute {
                out.push(Violation::ComputeLink(u, v));
            } else {
                out.push(Violation::BadEdge { from: u, to: v, from_kind: fk, to_kind: tk });
            }
        }
    }

    if let Err(GraphError::NotDag(nodes)) = topsort_bfs(graph, None) {
        out.push(Violation::NotDag(nodes));
    }
    out
}

/// Layered (Kahn) topological order.
///
/// Nodes of one layer are ordered by id, or shuffled with a seeded PRNG when
/// `seed` is given.
pub fn topsort_bfs(graph: &AppGraph, seed: Option<u64>) -> Result<Vec<NodeId>, GraphError> {
    let n = graph.len();
    let mut indeg: Vec<usize> = (0..n).map(|i| graph.pred[i].len()).collect();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut layer: Vec<NodeId> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !layer.is_empty() {
        if let Some(rng) = rng.as_mut() {
            layer.shuffle(rng);
        }
        let mut next = Vec::new();
        for &u in &layer {
            for &v in &graph.succ[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    next.push(v);
                }
            }
        }
        order.append(&mut layer);
        next.sort_unstable();
        layer = next;
    }
    if order.len() < n {
        let rest = (0..n).filter(|&i| indeg[i] > 0).collect();
        return Err(GraphError::NotDag(rest));
    }
    Ok(order)
}

/// Checks that `order` is a permutation of the nodes respecting every edge.
pub fn is_topological(graph: &AppGraph, order: &[NodeId]) -> bool {
    let n = graph.len();
    if order.len() != n {
        return false;
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &id) in order.iter().enumerate() {
        if id >= n || pos[id] != usize::MAX {
            return false;
        }
        pos[id] = k;
    }
    graph.edges.iter().all(|&(u, v)| pos[u] < pos[v])
}

/// A plain two-terminal DAG before tasks are attached to it.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct Skeleton {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Skeleton {
    pub fn sources(&self) -> Vec<usize> {
        let mut indeg = vec![0usize; self.node_count];
        for &(_, v) in &self.edges {
            indeg[v] += 1;
        }
        (0..self.node_count).filter(|&v| indeg[v] == 0).collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        let mut outdeg = vec![0usize; self.node_count];
        for &(u, _) in &self.edges {
            outdeg[u] += 1;
        }
        (0..self.node_count).filter(|&v| outdeg[v] == 0).collect()
    }
}

/// Random series-parallel skeleton with `target_edges` edges before
/// duplicate removal.
///
/// Starts from `0 -> 1`; each step picks a uniform edge and either splits it
/// with a new node (series) or copies it (parallel). The series probability is
/// `0.5 + 0.5 * added / target_edges`.
pub fn gen_series_parallel(target_edges: usize, seed: u64) -> Skeleton {
    let m = target_edges.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = vec![(0usize, 1usize)];
    let mut node_count = 2;
    while edges.len() < m {
        let added = edges.len() - 1;
        let p_series = 0.5 + 0.5 * added as f64 / m as f64;
        let idx = rng.random_range(0..edges.len());
        let (u, v) = edges[idx];
        if rng.random::<f64>() < p_series {
            let w = node_count;
            node_count += 1;
            edges[idx] = (u, w);
            edges.push((w, v));
        } else {
            edges.push((u, v));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Skeleton { node_count, edges }
}

/// A scalar distribution for task attribute sampling.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl Dist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Fixed(v) => v,
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Dist::LogNormal { mu, sigma } => LogNormal::new(mu, sigma)
                .map(|d| d.sample(rng))
                .unwrap_or(mu.exp()),
        }
    }
}

/// Draws [`TaskAttrs`]; `streamability` and `area` follow the complexity
/// when left unset.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TaskSampler {
    pub parallelizability: Dist,
    pub complexity: Dist,
    pub data_ratio: f64,
    #[serde(default)]
    pub streamability: Option<f64>,
    #[serde(default)]
    pub area: Option<f64>,
}

impl Default for TaskSampler {
    fn default() -> Self {
        TaskSampler {
            parallelizability: Dist::Uniform { lo: 0.0, hi: 1.0 },
            complexity: Dist::LogNormal { mu: 3.0, sigma: 0.5 },
            data_ratio: 1.0,
            streamability: None,
            area: None,
        }
    }
}

impl TaskSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskAttrs {
        let parallelizability = self.parallelizability.sample(rng).clamp(0.0, 1.0);
        let complexity = self.complexity.sample(rng);
        TaskAttrs {
            parallelizability,
            complexity,
            data_ratio: self.data_ratio,
            streamability: self.streamability.unwrap_or(complexity).max(1.0),
            area: self.area.unwrap_or(complexity),
        }
    }
}

/// Turns every inner skeleton node into a task triple.
///
/// Skeleton sources and sinks stay memory nodes. Ids are assigned in the
/// skeleton's breadth-first order; sizes are propagated from `source_bytes`.
pub fn expand_tasks(
    skeleton: &Skeleton,
    sampler: &TaskSampler,
    source_bytes: f64,
    seed: u64,
) -> Result<AppGraph, GraphError> {
    let n = skeleton.node_count;
    if n == 0 {
        return Err(GraphError::InvalidSkeleton("no nodes".into()));
    }
    let mut plain_nodes = Vec::with_capacity(n);
    for id in 0..n {
        plain_nodes.push(Node { id, kind: NodeKind::Source, data_bytes: 0.0, attrs: None });
    }
    let mut seen = BTreeSet::new();
    for &(u, v) in &skeleton.edges {
        if u == v {
            return Err(GraphError::InvalidSkeleton(format!("self loop on {u}")));
        }
        if !seen.insert((u, v)) {
            return Err(GraphError::InvalidSkeleton(format!("duplicate edge {u}->{v}")));
        }
    }
    let plain = AppGraph::new(plain_nodes, skeleton.edges.clone())
        .map_err(|e| GraphError::InvalidSkeleton(e.to_string()))?;
    let order = topsort_bfs(&plain, None)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    // skeleton node -> (entry id, exit id) in the expanded graph
    let mut ports = vec![(0usize, 0usize); n];
    for &s in &order {
        let (indeg, outdeg) = (plain.pred[s].len(), plain.succ[s].len());
        let base = nodes.len();
        match (indeg, outdeg) {
            (0, 0) => {
                return Err(GraphError::InvalidSkeleton(format!("isolated node {s}")));
            }
            (0, _) => {
                nodes.push(Node { id: base, kind: NodeKind::Source, data_bytes: 0.0, attrs: None });
                ports[s] = (base, base);
            }
            (_, 0) => {
                nodes.push(Node { id: base, kind: NodeKind::Sink, data_bytes: 0.0, attrs: None });
                ports[s] = (base, base);
            }
            _ => {
                let attrs = sampler.draw(&mut rng);
                nodes.push(Node { id: base, kind: NodeKind::InputMem, data_bytes: 0.0, attrs: None });
                nodes.push(Node {
                    id: base + 1,
                    kind: NodeKind::Compute,
                    data_bytes: 0.0,
                    attrs: Some(attrs),
                });
                nodes.push(Node {
                    id: base + 2,
                    kind: NodeKind::OutputMem,
                    data_bytes: 0.0,
                    attrs: None,
                });
                ports[s] = (base, base + 2);
            }
        }
    }
    let mut edges = Vec::new();
    for c in nodes.iter().filter(|n| n.kind == NodeKind::Compute) {
        edges.push((c.id - 1, c.id));
        edges.push((c.id, c.id + 1));
    }
    for &(u, v) in &skeleton.edges {
        edges.push((ports[u].1, ports[v].0));
    }
    edges.sort_unstable();
    let mut graph = AppGraph::new(nodes, edges)?;
    graph.propagate_sizes(source_bytes)?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn attrs(p: f64, c: f64) -> TaskAttrs {
        TaskAttrs { parallelizability: p, complexity: c, data_ratio: 1.0, streamability: c.max(1.0), area: c }
    }

    fn mem(id: NodeId, kind: NodeKind) -> Node {
        Node { id, kind, data_bytes: 1.0, attrs: None }
    }

    fn fig1() -> AppGraph {
        // source -> T1 -> {T2, T3} -> sink
        let mut nodes = vec![mem(0, NodeKind::Source)];
        for t in 0..3 {
            let b = 1 + 3 * t;
            nodes.push(mem(b, NodeKind::InputMem));
            nodes.push(Node { id: b + 1, kind: NodeKind::Compute, data_bytes: 1.0, attrs: Some(attrs(0.5, 2.0)) });
            nodes.push(mem(b + 2, NodeKind::OutputMem));
        }
        nodes.push(mem(10, NodeKind::Sink));
        let edges = vec![
            (0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (7, 8), (8, 9),
            (3, 4), (3, 7), (6, 10), (9, 10),
        ];
        AppGraph::new(nodes, edges).unwrap()
    }

    #[test]
    fn fig1_shaped_graph_is_valid() {
        assert_eq!(validate(&fig1()), vec![]);
    }

    #[test]
    fn compute_to_compute_edge_is_one_violation() {
        let nodes = vec![
            mem(0, NodeKind::Source),
            mem(1, NodeKind::InputMem),
            Node { id: 2, kind: NodeKind::Compute, data_bytes: 1.0, attrs: Some(attrs(0.0, 1.0)) },
            Node { id: 3, kind: NodeKind::Compute, data_bytes: 1.0, attrs: Some(attrs(0.0, 1.0)) },
            mem(4, NodeKind::OutputMem),
            mem(5, NodeKind::Sink),
        ];
        let g = AppGraph::new(nodes, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let v = validate(&g);
        assert_eq!(v, vec![Violation::ComputeLink(2, 3)]);
        assert!(v[0].to_string().contains("computation nodes must connect via memories"));
    }

    #[test]
    fn memory_two_cycle_is_not_a_dag() {
        let nodes = vec![mem(0, NodeKind::OutputMem), mem(1, NodeKind::InputMem)];
        let g = AppGraph::new(nodes, vec![(0, 1), (1, 0)]).unwrap();
        let v = validate(&g);
        assert!(v.iter().any(|x| matches!(x, Violation::NotDag(_))));
        assert!(v.iter().any(|x| x.to_string().contains("not a DAG")));
        assert!(matches!(topsort_bfs(&g, None), Err(GraphError::NotDag(_))));
    }

    #[test]
    fn non_dense_ids_are_rejected() {
        let nodes = vec![mem(1, NodeKind::Source)];
        assert!(matches!(AppGraph::new(nodes, vec![]), Err(GraphError::NonDenseId { .. })));
        let nodes = vec![mem(0, NodeKind::Source)];
        assert!(matches!(AppGraph::new(nodes, vec![(0, 3)]), Err(GraphError::UnknownNode(0, 3))));
    }

    #[test]
    fn topsort_single_edge() {
        let g = AppGraph::new(vec![mem(0, NodeKind::Source), mem(1, NodeKind::Sink)], vec![(0, 1)]).unwrap();
        assert_eq!(topsort_bfs(&g, None).unwrap(), vec![0, 1]);
    }

    fn diamond() -> AppGraph {
        let nodes = (0..4).map(|i| mem(i, NodeKind::InputMem)).collect();
        AppGraph::new(nodes, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn topsort_diamond_by_id() {
        assert_eq!(topsort_bfs(&diamond(), None).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn topsort_seeded_orders_are_topological_and_reproducible() {
        let g = fig1();
        for seed in [1u64, 2, 99] {
            let o = topsort_bfs(&g, Some(seed)).unwrap();
            assert!(is_topological(&g, &o));
            assert_eq!(o, topsort_bfs(&g, Some(seed)).unwrap());
        }
        let d = diamond();
        for seed in 0..8 {
            assert!(is_topological(&d, &topsort_bfs(&d, Some(seed)).unwrap()));
        }
    }

    #[test]
    fn series_parallel_single_edge() {
        let s = gen_series_parallel(1, 5);
        assert_eq!(s, Skeleton { node_count: 2, edges: vec![(0, 1)] });
    }

    #[test]
    fn series_parallel_is_deterministic_and_simple() {
        let a = gen_series_parallel(30, 7);
        assert_eq!(a, gen_series_parallel(30, 7));
        let set: BTreeSet<_> = a.edges.iter().collect();
        assert_eq!(set.len(), a.edges.len());
        assert!(a.edges.iter().all(|(u, v)| u != v));
        assert_eq!(a.sources(), vec![0]);
        assert_eq!(a.sinks(), vec![1]);
    }

    #[test]
    fn expand_single_inner_node() {
        let s = Skeleton { node_count: 3, edges: vec![(0, 2), (2, 1)] };
        let g = expand_tasks(&s, &TaskSampler::default(), 100.0, 1).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(validate(&g), vec![]);
        let kinds: Vec<_> = g.nodes().iter().map(|n| n.kind).collect();
        use NodeKind::*;
        assert_eq!(kinds, vec![Source, InputMem, Compute, OutputMem, Sink]);
        assert_eq!(g.node(4).data_bytes, 100.0);
    }

    #[test]
    fn expand_rejects_bad_skeletons() {
        let s = Skeleton { node_count: 2, edges: vec![(0, 1), (1, 0)] };
        assert!(expand_tasks(&s, &TaskSampler::default(), 1.0, 0).is_err());
        let s = Skeleton { node_count: 3, edges: vec![(0, 1)] };
        assert!(expand_tasks(&s, &TaskSampler::default(), 1.0, 0).is_err());
        let s = Skeleton { node_count: 2, edges: vec![(0, 1), (0, 1)] };
        assert!(expand_tasks(&s, &TaskSampler::default(), 1.0, 0).is_err());
    }

    #[test]
    fn join_sums_predecessor_bytes() {
        // source -> a, source -> b, a -> c, b -> c, c -> sink
        let s = Skeleton { node_count: 5, edges: vec![(0, 2), (0, 3), (2, 4), (3, 4), (4, 1)] };
        let sampler = TaskSampler { data_ratio: 2.0, ..TaskSampler::default() };
        let g = expand_tasks(&s, &sampler, 10.0, 3).unwrap();
        let join = g.tasks().last().unwrap();
        let (i, _, o) = g.triple(join).unwrap();
        assert_eq!(g.node(i).data_bytes, 40.0);
        assert_eq!(g.node(o).data_bytes, 80.0);
    }

    #[test]
    fn fixed_load_overrides_propagation() {
        let s = gen_series_parallel(12, 4);
        let mut g = expand_tasks(&s, &TaskSampler::default(), 5.0, 4).unwrap();
        g.apply_fixed_load(100e6).unwrap();
        for t in g.tasks().collect::<Vec<_>>() {
            let (i, _, o) = g.triple(t).unwrap();
            assert_eq!(g.node(i).data_bytes, 100e6);
            assert_eq!(g.node(o).data_bytes, 100e6);
        }
    }

    #[test]
    fn json_round_trip() {
        let g = expand_tasks(&gen_series_parallel(10, 2), &TaskSampler::default(), 1e6, 2).unwrap();
        let back = AppGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn lognormal_complexity_matches_reported_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = Dist::LogNormal { mu: 3.0, sigma: 0.5 };
        let mut xs: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let median = xs[5_000];
        let inside = xs.iter().filter(|&&c| (10.0..=50.0).contains(&c)).count() as f64 / 1e4;
        assert!((18.0..=22.0).contains(&median), "median {median}");
        assert!((0.86..=0.91).contains(&inside), "fraction {inside}");
    }
}
