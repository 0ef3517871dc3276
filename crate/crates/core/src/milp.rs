//! Mixed-integer formulations of the mapping problem.
//!
//! Two models are built over the same assignment variables `x_i_p`
//! (node `i` runs on unit `p`):
//!
//! * device-based: minimise the largest per-unit busy time, counting
//!   execution plus every transfer into or out of the unit;
//! * time-based: start/end times per node with edge precedence and
//!   big-M serialisation of nodes sharing a unit.
//!
//! Products of two binaries are linearised with McCormick envelopes. The
//! models are plain data and are handed to the solvers unchanged.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appgraph::{is_topological, AppGraph, NodeId};
use crate::evaluator::Mapping;
use crate::platform::{Platform, UnitId};
use crate::timing::{Costs, TimingError, TimingModel};

pub type VarId = usize;

/// Integrality tolerance when reading binaries back.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("variable {0} is not binary")]
    NonBinary(VarId),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("unknown variable {0}")]
    UnknownVar(VarId),
    #[error("node {0} has no compatible unit; the model is infeasible")]
    NoCompatibleUnit(NodeId),
    #[error("non-finite cost for node {node} on unit {unit}")]
    InfiniteCost { node: NodeId, unit: UnitId },
    #[error("order is not a topological order of the graph")]
    NotTopological,
    #[error("the streaming extension needs a time-based model")]
    NotTimeBased,
    #[error("fractional assignment for node {0}")]
    Fractional(NodeId),
    #[error("node {0} is assigned to more than one unit")]
    MultiAssigned(NodeId),
    #[error("node {0} is not assigned")]
    Unassigned(NodeId),
    #[error(transparent)]
    Timing(#[from] TimingError),
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Solver-agnostic MILP: minimise `objective` subject to `constraints`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
    names: HashMap<String, VarId>,
    row_names: HashMap<String, usize>,
    products: HashMap<(VarId, VarId), VarId>,
}

impl MilpModel {
    pub fn new() -> Self {
        MilpModel::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Result<VarId, MilpError> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(MilpError::DuplicateName(name));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        let id = self.variables.len();
        self.names.insert(name.clone(), id);
        self.variables.push(Variable { name, kind, lower, upper });
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, MilpError> {
        let name = name.into();
        if self.row_names.contains_key(&name) {
            return Err(MilpError::DuplicateName(name));
        }
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| *v >= self.variables.len()) {
            return Err(MilpError::UnknownVar(v));
        }
        let row = self.constraints.len();
        self.row_names.insert(name.clone(), row);
        self.constraints.push(Constraint { name, terms, sense, rhs });
        Ok(row)
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) -> Result<(), MilpError> {
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| *v >= self.variables.len()) {
            return Err(MilpError::UnknownVar(v));
        }
        self.objective = terms;
        Ok(())
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn row_by_name(&self, name: &str) -> Option<usize> {
        self.row_names.get(name).copied()
    }

    pub fn is_binary(&self, v: VarId) -> bool {
        self.variables.get(v).is_some_and(|x| x.kind == VarKind::Binary)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Rows violated by more than `tol`, with the violation amount.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.violation(values)))
            .filter(|&(_, v)| v > tol)
            .collect();
        for (k, var) in self.variables.iter().enumerate() {
            let x = values[k];
            let off = (var.lower - x).max(x - var.upper).max(0.0);
            let frac = if var.kind == VarKind::Binary { (x - x.round()).abs() } else { 0.0 };
            if off > tol || frac > tol {
                out.push((self.constraints.len() + k, off.max(frac)));
            }
        }
        out
    }

    /// Name of a row index returned by [`MilpModel::violations`]; indices past
    /// the constraint list refer to variable bounds.
    pub fn describe_row(&self, index: usize) -> String {
        match self.constraints.get(index) {
            Some(c) => c.name.clone(),
            None => format!("bounds of {}", self.variables[index - self.constraints.len()].name),
        }
    }

    /// Structural problems: unknown ids, binaries with bounds outside [0,1],
    /// non-finite coefficients.
    pub fn check(&self) -> Vec<String> {
        let n = self.variables.len();
        let mut out = Vec::new();
        for v in &self.variables {
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                out.push(format!("binary {} has bounds [{}, {}]", v.name, v.lower, v.upper));
            }
            if v.lower > v.upper {
                out.push(format!("{} has empty bounds", v.name));
            }
        }
        for c in &self.constraints {
            for &(v, a) in &c.terms {
                if v >= n {
                    out.push(format!("{} references unknown variable {v}", c.name));
                }
                if !a.is_finite() {
                    out.push(format!("{} has a non-finite coefficient", c.name));
                }
            }
            if !c.rhs.is_finite() {
                out.push(format!("{} has a non-finite right-hand side", c.name));
            }
        }
        for &(v, a) in &self.objective {
            if v >= n || !a.is_finite() {
                out.push(format!("objective term on {v} is invalid"));
            }
        }
        out
    }
}

/// Adds (or reuses) `w = a·b` for binaries `a`, `b` through the envelope
/// `w <= a`, `w <= b`, `w + 1 >= a + b`.
pub fn mccormick(model: &mut MilpModel, a: VarId, b: VarId) -> Result<VarId, MilpError> {
    for v in [a, b] {
        if !model.is_binary(v) {
            return Err(MilpError::NonBinary(v));
        }
    }
    let key = (a.min(b), a.max(b));
    if let Some(&w) = model.products.get(&key) {
        return Ok(w);
    }
    let name = product_name(&model.variables[key.0].name, &model.variables[key.1].name);
    let w = model.add_var(name.clone(), VarKind::Continuous, 0.0, 1.0)?;
    model.add_constraint(format!("{name}_a"), vec![(w, 1.0), (a, -1.0)], Sense::Le, 0.0)?;
    model.add_constraint(format!("{name}_b"), vec![(w, 1.0), (b, -1.0)], Sense::Le, 0.0)?;
    model.add_constraint(format!("{name}_c"), vec![(w, 1.0), (a, -1.0), (b, -1.0)], Sense::Ge, -1.0)?;
    model.products.insert(key, w);
    Ok(w)
}

/// `x_i_p` and `x_j_q` combine to `w_i_p_j_q`; other names join with `__`.
fn product_name(a: &str, b: &str) -> String {
    match (a.strip_prefix("x_"), b.strip_prefix("x_")) {
        (Some(a), Some(b)) => format!("w_{a}_{b}"),
        _ => format!("{a}__{b}"),
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Pairs {
    /// Every pair of nodes in the order.
    #[default]
    All,
    /// Only pairs with no directed path between them.
    PathPruned,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimeOptions {
    #[serde(default)]
    pub pairs: Pairs,
    #[serde(default)]
    pub streaming: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Device,
    Time(TimeOptions),
}

/// Variable ids of a built model keyed by their domain meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildMaps {
    pub kind: ModelKind,
    pub node_count: usize,
    pub x: BTreeMap<(NodeId, UnitId), VarId>,
    pub w: BTreeMap<(NodeId, UnitId, NodeId, UnitId), VarId>,
    /// `(node, 0)` is the start, `(node, 1)` the end.
    pub y: BTreeMap<(NodeId, u8), VarId>,
    pub z: VarId,
    pub order: Vec<NodeId>,
    pub big_m: f64,
}

impl BuildMaps {
    pub fn x_of(&self, node: NodeId) -> impl Iterator<Item = (UnitId, VarId)> + '_ {
        self.x.range((node, UnitId(0))..=(node, UnitId(usize::MAX))).map(|(&(_, u), &v)| (u, v))
    }
}

fn product(model: &mut MilpModel, maps: &mut BuildMaps, i: NodeId, p: UnitId, j: NodeId, q: UnitId) -> Result<VarId, MilpError> {
    let w = mccormick(model, maps.x[&(i, p)], maps.x[&(j, q)])?;
    maps.w.insert((i, p, j, q), w);
    Ok(w)
}

fn finite(v: f64, node: NodeId, unit: UnitId) -> Result<f64, MilpError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(MilpError::InfiniteCost { node, unit })
    }
}

/// Assignment variables, assignment rows, capacity rows and forbidden pairs.
fn assignment_core(graph: &AppGraph, platform: &Platform, costs: &Costs, model: &mut MilpModel, kind: ModelKind) -> Result<BuildMaps, MilpError> {
    let mut x = BTreeMap::new();
    for i in 0..graph.len() {
        let units = costs.compatible_units(i);
        if units.is_empty() {
            return Err(MilpError::NoCompatibleUnit(i));
        }
        for &p in units {
            finite(costs.exec(i, p), i, p)?;
            x.insert((i, p), model.add_var(format!("x_{i}_{}", p.0), VarKind::Binary, 0.0, 1.0)?);
        }
    }
    for i in 0..graph.len() {
        let terms = costs.compatible_units(i).iter().map(|&p| (x[&(i, p)], 1.0)).collect();
        model.add_constraint(format!("assign_{i}"), terms, Sense::Eq, 1.0)?;
    }
    for p in platform.proc_ids().filter(|&p| platform.is_dataflow(p)) {
        let terms: Vec<(VarId, f64)> = graph
            .tasks()
            .filter_map(|i| {
                let area = graph.attrs(i).map_or(0.0, |a| a.area);
                x.get(&(i, p)).filter(|_| area > 0.0).map(|&v| (v, area))
            })
            .collect();
        if !terms.is_empty() {
            model.add_constraint(format!("cap_{}", p.0), terms, Sense::Le, platform.area_capacity(p))?;
        }
    }
    // transfers that can never happen rule out the pair outright
    for &(i, j) in graph.edges() {
        for &p in costs.compatible_units(i) {
            for &q in costs.compatible_units(j) {
                let d = costs.transport(i, p, q);
                if d.is_nan() {
                    return Err(MilpError::InfiniteCost { node: i, unit: q });
                }
                if d.is_infinite() {
                    model.add_constraint(
                        format!("forbid_{i}_{}_{j}_{}", p.0, q.0),
                        vec![(x[&(i, p)], 1.0), (x[&(j, q)], 1.0)],
                        Sense::Le,
                        1.0,
                    )?;
                }
            }
        }
    }
    let z = model.add_var("z", VarKind::Continuous, 0.0, f64::INFINITY)?;
    Ok(BuildMaps { kind, node_count: graph.len(), x, w: BTreeMap::new(), y: BTreeMap::new(), z, order: Vec::new(), big_m: 0.0 })
}

pub fn build_device_based(graph: &AppGraph, platform: &Platform, timing: &TimingModel) -> Result<(MilpModel, BuildMaps), MilpError> {
    let costs = Costs::build(graph, platform, timing)?;
    build_device_based_with(graph, platform, &costs)
}

/// Device-based model: `z >= T_p + T_p^in + T_p^out` for every unit.
pub fn build_device_based_with(graph: &AppGraph, platform: &Platform, costs: &Costs) -> Result<(MilpModel, BuildMaps), MilpError> {
    let mut model = MilpModel::new();
    let mut maps = assignment_core(graph, platform, costs, &mut model, ModelKind::Device)?;
    let mut load: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); platform.unit_count()];
    for (&(i, p), &v) in &maps.x {
        let t = costs.exec(i, p);
        if t > 0.0 {
            load[p.0].push((v, t));
        }
    }
    for &(i, j) in graph.edges() {
        for &p in costs.compatible_units(i) {
            for &q in costs.compatible_units(j) {
                let d = costs.transport(i, p, q);
                if p == q || d <= 0.0 || d.is_infinite() {
                    continue;
                }
                let w = product(&mut model, &mut maps, i, p, j, q)?;
                load[p.0].push((w, d));
                load[q.0].push((w, d));
            }
        }
    }
    for (u, terms) in load.into_iter().enumerate() {
        let mut row = vec![(maps.z, 1.0)];
        row.extend(terms.into_iter().map(|(v, c)| (v, -c)));
        model.add_constraint(format!("load_{u}"), row, Sense::Ge, 0.0)?;
    }
    model.set_objective(vec![(maps.z, 1.0)])?;
    Ok((model, maps))
}

/// Closed-form device-based objective of a full assignment.
pub fn device_objective(graph: &AppGraph, costs: &Costs, mapping: &Mapping) -> f64 {
    device_loads(graph, costs, mapping).into_iter().fold(0.0, f64::max)
}

/// Busy time per unit: execution plus transfers in and out.
pub fn device_loads(graph: &AppGraph, costs: &Costs, mapping: &Mapping) -> Vec<f64> {
    let mut load = vec![0.0; costs.unit_count()];
    for i in 0..graph.len() {
        let p = mapping.unit(i);
        load[p.0] += costs.exec(i, p);
    }
    for &(i, j) in graph.edges() {
        let (p, q) = (mapping.unit(i), mapping.unit(j));
        if p != q {
            let d = costs.transport(i, p, q);
            load[p.0] += d;
            load[q.0] += d;
        }
    }
    load
}

pub fn big_m(graph: &AppGraph, platform: &Platform, timing: &TimingModel) -> Result<f64, MilpError> {
    big_m_with(graph, &Costs::build(graph, platform, timing)?)
}

/// Sum of every node's slowest execution plus every edge's slowest
/// realisable transfer; no schedule without idle gaps exceeds it.
pub fn big_m_with(graph: &AppGraph, costs: &Costs) -> Result<f64, MilpError> {
    let mut m = 0.0;
    for i in 0..graph.len() {
        let mut worst: f64 = 0.0;
        for &p in costs.compatible_units(i) {
            worst = worst.max(finite(costs.exec(i, p), i, p)?);
        }
        m += worst;
    }
    for &(i, j) in graph.edges() {
        let mut worst: f64 = 0.0;
        for &p in costs.compatible_units(i) {
            for &q in costs.compatible_units(j) {
                let d = costs.transport(i, p, q);
                if d.is_nan() {
                    return Err(MilpError::InfiniteCost { node: i, unit: q });
                }
                if d.is_finite() {
                    worst = worst.max(d);
                }
            }
        }
        m += worst;
    }
    Ok(m)
}

/// Reachability as bitsets; `reach[i]` holds every node with a path from `i`.
pub(crate) fn reachability(graph: &AppGraph, order: &[NodeId]) -> Vec<Vec<u64>> {
    let words = graph.len().div_ceil(64);
    let mut reach = vec![vec![0u64; words]; graph.len()];
    for &i in order.iter().rev() {
        let mut acc = vec![0u64; words];
        for &j in graph.successors(i) {
            acc[j / 64] |= 1 << (j % 64);
            for (a, b) in acc.iter_mut().zip(&reach[j]) {
                *a |= b;
            }
        }
        reach[i] = acc;
    }
    reach
}

pub(crate) fn has_path(reach: &[Vec<u64>], from: NodeId, to: NodeId) -> bool {
    reach[from][to / 64] >> (to % 64) & 1 == 1
}

/// Whether a transfer from `p` to `q` stays inside one dataflow domain.
pub(crate) fn in_domain(domains: &[Vec<UnitId>], p: UnitId, q: UnitId) -> bool {
    domains.iter().any(|d| d.contains(&p) && d.contains(&q))
}

pub fn build_time_based(
    graph: &AppGraph,
    platform: &Platform,
    timing: &TimingModel,
    order: &[NodeId],
    options: TimeOptions,
) -> Result<(MilpModel, BuildMaps), MilpError> {
    let costs = Costs::build(graph, platform, timing)?;
    build_time_based_with(graph, platform, &costs, order, options)
}

/// Time-based model over `order`.
///
/// With `options.streaming`, an edge whose endpoints share a dataflow
/// domain only requires the child to start no earlier than the parent,
/// every child ends no earlier than its parents, and units inside a
/// dataflow domain are not serialised.
pub fn build_time_based_with(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    order: &[NodeId],
    options: TimeOptions,
) -> Result<(MilpModel, BuildMaps), MilpError> {
    if !is_topological(graph, order) {
        return Err(MilpError::NotTopological);
    }
    let mut model = MilpModel::new();
    let mut maps = assignment_core(graph, platform, costs, &mut model, ModelKind::Time(options))?;
    let m = big_m_with(graph, costs)?;
    maps.big_m = m;
    maps.order = order.to_vec();
    let domains = if options.streaming { platform.dataflow_domains() } else { Vec::new() };
    for i in 0..graph.len() {
        for k in 0..2u8 {
            let v = model.add_var(format!("y_{i}_{k}"), VarKind::Continuous, 0.0, f64::INFINITY)?;
            maps.y.insert((i, k), v);
        }
    }
    let y = |maps: &BuildMaps, i: NodeId, k: u8| maps.y[&(i, k)];
    for i in 0..graph.len() {
        model.add_constraint(format!("end_{i}"), vec![(maps.z, 1.0), (y(&maps, i, 1), -1.0)], Sense::Ge, 0.0)?;
        let mut row = vec![(y(&maps, i, 1), 1.0), (y(&maps, i, 0), -1.0)];
        for &p in costs.compatible_units(i) {
            let t = costs.exec(i, p);
            if t > 0.0 {
                row.push((maps.x[&(i, p)], -t));
            }
        }
        model.add_constraint(format!("dur_{i}"), row, Sense::Ge, 0.0)?;
    }
    for &(i, j) in graph.edges() {
        let mut row = vec![(y(&maps, j, 0), 1.0), (y(&maps, i, 1), -1.0)];
        for &p in costs.compatible_units(i) {
            for &q in costs.compatible_units(j) {
                let d = costs.transport(i, p, q);
                if in_domain(&domains, p, q) {
                    let w = product(&mut model, &mut maps, i, p, j, q)?;
                    row.push((w, m));
                } else if p != q && d > 0.0 && d.is_finite() {
                    let w = product(&mut model, &mut maps, i, p, j, q)?;
                    row.push((w, -d));
                }
            }
        }
        model.add_constraint(format!("prec_{i}_{j}"), row, Sense::Ge, 0.0)?;
        if options.streaming {
            model.add_constraint(format!("sstart_{i}_{j}"), vec![(y(&maps, j, 0), 1.0), (y(&maps, i, 0), -1.0)], Sense::Ge, 0.0)?;
            model.add_constraint(format!("send_{i}_{j}"), vec![(y(&maps, j, 1), 1.0), (y(&maps, i, 1), -1.0)], Sense::Ge, 0.0)?;
        }
    }
    let reach = match options.pairs {
        Pairs::All => None,
        Pairs::PathPruned => Some(reachability(graph, order)),
    };
    let exempt = |p: UnitId| domains.iter().any(|d| d.contains(&p));
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            if reach.as_ref().is_some_and(|r| has_path(r, i, j)) {
                continue;
            }
            for &p in costs.compatible_units(i) {
                if exempt(p) || !costs.is_compatible(j, p) {
                    continue;
                }
                let w = product(&mut model, &mut maps, i, p, j, p)?;
                model.add_constraint(
                    format!("order_{i}_{j}_{}", p.0),
                    vec![(y(&maps, j, 0), 1.0), (y(&maps, i, 1), -1.0), (w, -m)],
                    Sense::Ge,
                    -m,
                )?;
            }
        }
    }
    model.set_objective(vec![(maps.z, 1.0)])?;
    Ok((model, maps))
}

/// Rebuilds a time-based model with the dataflow streaming rules switched on.
pub fn add_streaming_extension(
    model: &MilpModel,
    maps: &BuildMaps,
    graph: &AppGraph,
    platform: &Platform,
    timing: &TimingModel,
) -> Result<(MilpModel, BuildMaps), MilpError> {
    let ModelKind::Time(options) = maps.kind else {
        return Err(MilpError::NotTimeBased);
    };
    if options.streaming {
        return Ok((model.clone(), maps.clone()));
    }
    build_time_based(graph, platform, timing, &maps.order, TimeOptions { streaming: true, ..options })
}

/// Reads the assignment back from solution values.
pub fn extract_mapping(values: &[f64], maps: &BuildMaps) -> Result<Mapping, MilpError> {
    let mut units = Vec::with_capacity(maps.node_count);
    for i in 0..maps.node_count {
        let mut chosen = None;
        for (p, v) in maps.x_of(i) {
            let x = values[v];
            if x >= 1.0 - INTEGRALITY_TOL {
                if chosen.is_some() {
                    return Err(MilpError::MultiAssigned(i));
                }
                chosen = Some(p);
            } else if x > INTEGRALITY_TOL {
                return Err(MilpError::Fractional(i));
            }
        }
        units.push(chosen.ok_or(MilpError::Unassigned(i))?);
    }
    Ok(Mapping::new(units))
}
