use std::time::Instant;

use crate::appgraph::{is_topological, AppGraph, NodeId};
use crate::evaluator::Mapping;
use crate::milp::{device_objective, in_domain, BuildMaps, MilpModel, ModelKind};
use crate::platform::{Platform, UnitId};
use crate::timing::{Costs, TimingModel};

use super::{Solution, SolveError, SolveStats, SolverOptions, Status};

/// Which model an assignment is scored against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formulation {
    Device,
    Time { order: Vec<NodeId>, streaming: bool },
}

impl Formulation {
    fn order(&self) -> Option<&[NodeId]> {
        match self {
            Formulation::Device => None,
            Formulation::Time { order, .. } => Some(order),
        }
    }
}

/// Earliest start and end times of every node for a fixed assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub z: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

/// Smallest feasible time-based schedule for `mapping`.
///
/// All time-based constraints are lower bounds on later nodes in `order`,
/// so one forward pass gives the least solution: a node starts after its
/// edge parents (plus transfer) and after every earlier node on its unit.
/// With `streaming`, parents in the same dataflow domain only delay the
/// start to their own start, units in a domain are not serialised, and
/// a node ends no earlier than any parent.
pub fn schedule_from_assignment(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    mapping: &Mapping,
    order: &[NodeId],
    streaming: bool,
) -> Result<Schedule, SolveError> {
    if !is_topological(graph, order) {
        return Err(SolveError::Order);
    }
    let domains = if streaming { platform.dataflow_domains() } else { Vec::new() };
    let exempt: Vec<bool> = (0..costs.unit_count()).map(|u| domains.iter().any(|d| d.contains(&UnitId(u)))).collect();
    let n = graph.len();
    let mut start = vec![0.0; n];
    let mut end = vec![0.0; n];
    let mut unit_end = vec![0.0f64; costs.unit_count()];
    let mut z = 0.0f64;
    for &j in order {
        let q = mapping.unit(j);
        let mut s = if exempt[q.0] { 0.0 } else { unit_end[q.0] };
        let mut parents_end = 0.0f64;
        for &i in graph.predecessors(j) {
            let p = mapping.unit(i);
            let ready = if in_domain(&domains, p, q) { start[i] } else { end[i] + costs.transport(i, p, q) };
            s = s.max(ready);
            parents_end = parents_end.max(end[i]);
        }
        let mut e = s + costs.exec(j, q);
        if streaming {
            e = e.max(parents_end);
        }
        start[j] = s;
        end[j] = e;
        if !exempt[q.0] {
            unit_end[q.0] = unit_end[q.0].max(e);
        }
        z = z.max(e);
    }
    Ok(Schedule { z, start, end })
}

/// Objective of `mapping` under `formulation`; capacity is not checked.
pub fn formulation_objective(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    mapping: &Mapping,
    formulation: &Formulation,
) -> Result<f64, SolveError> {
    match formulation {
        Formulation::Device => Ok(device_objective(graph, costs, mapping)),
        Formulation::Time { order, streaming } => Ok(schedule_from_assignment(graph, platform, costs, mapping, order, *streaming)?.z),
    }
}

/// The model point that corresponds to an assignment: `x` from the mapping,
/// products from `x`, times from [`schedule_from_assignment`] and `z` from
/// the closed-form objective.
pub fn complete_solution(
    model: &MilpModel,
    maps: &BuildMaps,
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    mapping: &Mapping,
) -> Result<Vec<f64>, SolveError> {
    let mut values = vec![0.0; model.variables.len()];
    for (&(i, p), &v) in &maps.x {
        values[v] = if mapping.unit(i) == p { 1.0 } else { 0.0 };
    }
    for (&(i, p, j, q), &w) in &maps.w {
        values[w] = if mapping.unit(i) == p && mapping.unit(j) == q { 1.0 } else { 0.0 };
    }
    match maps.kind {
        ModelKind::Device => values[maps.z] = device_objective(graph, costs, mapping),
        ModelKind::Time(options) => {
            let s = schedule_from_assignment(graph, platform, costs, mapping, &maps.order, options.streaming)?;
            for i in 0..graph.len() {
                values[maps.y[&(i, 0)]] = s.start[i];
                values[maps.y[&(i, 1)]] = s.end[i];
            }
            values[maps.z] = s.z;
        }
    }
    Ok(values)
}

fn area_of(graph: &AppGraph, i: NodeId) -> f64 {
    graph.attrs(i).map_or(0.0, |a| a.area)
}

fn candidates(graph: &AppGraph, costs: &Costs) -> Result<Vec<Vec<UnitId>>, SolveError> {
    (0..graph.len())
        .map(|i| {
            let c = costs.compatible_units(i).to_vec();
            if c.is_empty() {
                Err(SolveError::NoCompatibleUnit(i))
            } else {
                Ok(c)
            }
        })
        .collect()
}

pub fn solve_exhaustive(
    graph: &AppGraph,
    platform: &Platform,
    timing: &TimingModel,
    formulation: &Formulation,
    options: &SolverOptions,
) -> Result<(Solution, Mapping), SolveError> {
    let costs = Costs::build(graph, platform, timing)?;
    solve_exhaustive_with(graph, platform, &costs, formulation, options)
}

/// Enumerates every compatible, capacity-respecting assignment in
/// lexicographic order and keeps the first minimum.
pub fn solve_exhaustive_with(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    formulation: &Formulation,
    options: &SolverOptions,
) -> Result<(Solution, Mapping), SolveError> {
    let clock = Instant::now();
    if let Some(order) = formulation.order() {
        if !is_topological(graph, order) {
            return Err(SolveError::Order);
        }
    }
    let cand = candidates(graph, costs)?;
    let combinations: f64 = cand.iter().map(|c| c.len() as f64).product();
    if combinations > options.budget {
        return Err(SolveError::Budget { combinations, budget: options.budget });
    }
    let n = graph.len();
    let dataflow: Vec<UnitId> = platform.proc_ids().filter(|&p| platform.is_dataflow(p)).collect();
    let mut digits = vec![0usize; n];
    let mut mapping = Mapping::new(cand.iter().map(|c| c[0]).collect());
    let mut best: Option<(f64, Mapping)> = None;
    let mut visited = 0u64;
    'outer: loop {
        visited += 1;
        let fits = dataflow.iter().all(|&p| {
            let used: f64 = (0..n).filter(|&i| mapping.unit(i) == p).map(|i| area_of(graph, i)).sum();
            used <= platform.area_capacity(p) + 1e-9
        });
        if fits {
            let obj = formulation_objective(graph, platform, costs, &mapping, formulation)?;
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, mapping.clone()));
            }
        }
        // odometer, last node fastest
        let mut k = n;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < cand[k].len() {
                mapping.set(k, cand[k][digits[k]]);
                continue 'outer;
            }
            digits[k] = 0;
            mapping.set(k, cand[k][0]);
        }
    }
    let stats = SolveStats { nodes: visited, lp_solves: 0, wall_s: clock.elapsed().as_secs_f64() };
    match best {
        Some((objective, mapping)) if objective.is_finite() => Ok((
            Solution { status: Status::Optimal, objective, best_bound: objective, values: Vec::new(), stats, detail: None },
            mapping,
        )),
        _ => Ok((Solution { stats, ..Solution::infeasible("no finite assignment respects capacity") }, mapping)),
    }
}

pub fn solve_search(
    graph: &AppGraph,
    platform: &Platform,
    timing: &TimingModel,
    formulation: &Formulation,
    options: &SolverOptions,
) -> Result<(Solution, Mapping), SolveError> {
    let costs = Costs::build(graph, platform, timing)?;
    solve_search_with(graph, platform, &costs, formulation, options, None)
}

/// Depth-first search over assignments with lower-bound pruning.
///
/// Nodes are assigned in topological order (the formulation's order for the
/// time-based model), trying the unit with the smallest immediate cost
/// first. A subtree is cut when its bound cannot beat the incumbent by more
/// than the relative gap. The result is optimal within the gap unless the
/// time limit hits first; ties go to the first assignment found.
pub fn solve_search_with(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    formulation: &Formulation,
    options: &SolverOptions,
    start: Option<&Mapping>,
) -> Result<(Solution, Mapping), SolveError> {
    if !(options.time_limit > 0.0) {
        return Err(SolveError::TimeLimit);
    }
    let clock = Instant::now();
    let order: Vec<NodeId> = match formulation.order() {
        Some(o) => {
            if !is_topological(graph, o) {
                return Err(SolveError::Order);
            }
            o.to_vec()
        }
        None => crate::appgraph::topsort_bfs(graph, None)?,
    };
    let cand = candidates(graph, costs)?;
    let mut s = Search::new(graph, platform, costs, formulation, &order, cand, options);
    for m in start.into_iter().cloned().chain([Mapping::new(s.cand.iter().map(|c| c[0]).collect())]) {
        if s.fits(&m) {
            let obj = formulation_objective(graph, platform, costs, &m, formulation)?;
            if obj < s.best {
                s.best = obj;
                s.best_mapping = Some(m);
            }
        }
    }
    let root_bound = s.tail_bound(0);
    s.dfs(0, &clock);
    let stats = SolveStats { nodes: s.visited, lp_solves: 0, wall_s: clock.elapsed().as_secs_f64() };
    let fallback = Mapping::new(s.cand.iter().map(|c| c[0]).collect());
    match s.best_mapping {
        Some(m) if s.best.is_finite() => {
            let status = if s.timed_out { Status::TimeLimit } else { Status::Optimal };
            let bound = if s.timed_out { root_bound.min(s.best) } else { s.best };
            Ok((Solution { status, objective: s.best, best_bound: bound, values: Vec::new(), stats, detail: None }, m))
        }
        _ => {
            let mut sol = Solution { stats, ..Solution::infeasible("no finite assignment respects capacity") };
            if s.timed_out {
                sol.status = Status::TimeLimit;
                sol.best_bound = root_bound;
            }
            Ok((sol, fallback))
        }
    }
}

struct Search<'a> {
    graph: &'a AppGraph,
    costs: &'a Costs,
    order: &'a [NodeId],
    cand: Vec<Vec<UnitId>>,
    device: bool,
    streaming: bool,
    domains: Vec<Vec<UnitId>>,
    exempt: Vec<bool>,
    capacity: Vec<f64>,
    // units that carry positive execution time for some node
    workers: Vec<usize>,
    min_exec: Vec<f64>,
    gap: f64,
    time_limit: f64,
    // state
    unit: Vec<Option<UnitId>>,
    start: Vec<f64>,
    end: Vec<f64>,
    unit_end: Vec<f64>,
    load: Vec<f64>,
    area: Vec<f64>,
    z: f64,
    // scratch: per (node, unit) bounds on start and end
    lb0: Vec<f64>,
    lb1: Vec<f64>,
    best: f64,
    best_mapping: Option<Mapping>,
    visited: u64,
    timed_out: bool,
}

impl<'a> Search<'a> {
    fn new(
        graph: &'a AppGraph,
        platform: &Platform,
        costs: &'a Costs,
        formulation: &Formulation,
        order: &'a [NodeId],
        cand: Vec<Vec<UnitId>>,
        options: &SolverOptions,
    ) -> Self {
        let u = costs.unit_count();
        let n = graph.len();
        let (device, streaming) = match formulation {
            Formulation::Device => (true, false),
            Formulation::Time { streaming, .. } => (false, *streaming),
        };
        let domains = if streaming { platform.dataflow_domains() } else { Vec::new() };
        let exempt = (0..u).map(|k| domains.iter().any(|d| d.contains(&UnitId(k)))).collect();
        let capacity = (0..u)
            .map(|k| {
                let p = UnitId(k);
                if k < platform.unit_count() && !platform.is_memory(p) && platform.is_dataflow(p) {
                    platform.area_capacity(p)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let min_exec: Vec<f64> =
            (0..n).map(|j| cand[j].iter().map(|&q| costs.exec(j, q)).fold(f64::INFINITY, f64::min)).collect();
        let workers = (0..u).filter(|&k| (0..n).any(|j| cand[j].contains(&UnitId(k)) && costs.exec(j, UnitId(k)) > 0.0)).collect();
        Search {
            graph,
            costs,
            order,
            cand,
            workers,
            min_exec,
            device,
            streaming,
            domains,
            exempt,
            capacity,
            gap: options.gap,
            time_limit: options.time_limit,
            unit: vec![None; n],
            start: vec![0.0; n],
            end: vec![0.0; n],
            unit_end: vec![0.0; u],
            load: vec![0.0; u],
            area: vec![0.0; u],
            z: 0.0,
            lb0: vec![0.0; n * u],
            lb1: vec![0.0; n * u],
            best: f64::INFINITY,
            best_mapping: None,
            visited: 0,
            timed_out: false,
        }
    }

    fn fits(&self, m: &Mapping) -> bool {
        let mut used = vec![0.0; self.capacity.len()];
        for i in 0..self.graph.len() {
            used[m.unit(i).0] += area_of(self.graph, i);
        }
        used.iter().zip(&self.capacity).all(|(a, c)| *a <= c + 1e-9)
    }

    fn prune(&self, bound: f64) -> bool {
        bound >= self.best - self.gap * self.best.abs()
    }

    /// Cost of putting `j` on `q` given the assigned prefix: (start, end) for
    /// the time model, or the updated makespan for the device model.
    fn place(&self, j: NodeId, q: UnitId) -> (f64, f64) {
        if self.device {
            let mut own = self.load[q.0] + self.costs.exec(j, q);
            let mut worst = 0.0f64;
            for (i, out) in self.neighbours(j) {
                let Some(p) = self.unit[i] else { continue };
                if p != q {
                    let d = if out { self.costs.transport(j, q, p) } else { self.costs.transport(i, p, q) };
                    own += d;
                    worst = worst.max(self.load[p.0] + d);
                }
            }
            return (own, own.max(worst));
        }
        let mut s = if self.exempt[q.0] { 0.0 } else { self.unit_end[q.0] };
        let mut parents_end = 0.0f64;
        for &i in self.graph.predecessors(j) {
            let p = self.unit[i].expect("predecessors come first in a topological order");
            let ready = if in_domain(&self.domains, p, q) { self.start[i] } else { self.end[i] + self.costs.transport(i, p, q) };
            s = s.max(ready);
            parents_end = parents_end.max(self.end[i]);
        }
        let mut e = s + self.costs.exec(j, q);
        if self.streaming {
            e = e.max(parents_end);
        }
        (s, e)
    }

    fn neighbours(&self, j: NodeId) -> impl Iterator<Item = (NodeId, bool)> + '_ {
        self.graph
            .successors(j)
            .iter()
            .map(|&i| (i, true))
            .chain(self.graph.predecessors(j).iter().map(|&i| (i, false)))
    }

    /// Lower bound on the objective of any completion of the first `k`
    /// positions of the order.
    fn tail_bound(&mut self, k: usize) -> f64 {
        if self.device {
            let mut bound = self.load.iter().copied().fold(0.0, f64::max);
            if !self.workers.is_empty() {
                // the busiest worker carries at least the average
                let placed: f64 = self.workers.iter().map(|&w| self.load[w]).sum();
                let rest: f64 = self.order[k..].iter().map(|&j| self.min_exec[j]).sum();
                bound = bound.max((placed + rest) / self.workers.len() as f64);
            }
            for &j in &self.order[k..] {
                let best = self.cand[j]
                    .iter()
                    .filter(|q| self.area[q.0] + area_of(self.graph, j) <= self.capacity[q.0] + 1e-9)
                    .map(|&q| self.place(j, q).1)
                    .fold(f64::INFINITY, f64::min);
                bound = bound.max(best);
            }
            return bound;
        }
        let u = self.costs.unit_count();
        let mut bound = self.z;
        for &j in &self.order[k..] {
            let mut node_best = f64::INFINITY;
            for &q in &self.cand[j] {
                let mut s = if self.exempt[q.0] { 0.0 } else { self.unit_end[q.0] };
                let mut parents_end = 0.0f64;
                for &i in self.graph.predecessors(j) {
                    let (ready, pend) = match self.unit[i] {
                        Some(p) => {
                            let r = if in_domain(&self.domains, p, q) { self.start[i] } else { self.end[i] + self.costs.transport(i, p, q) };
                            (r, self.end[i])
                        }
                        None => {
                            let mut r = f64::INFINITY;
                            let mut pe = f64::INFINITY;
                            for &p in &self.cand[i] {
                                let via = if in_domain(&self.domains, p, q) {
                                    self.lb0[i * u + p.0]
                                } else {
                                    self.lb1[i * u + p.0] + self.costs.transport(i, p, q)
                                };
                                r = r.min(via);
                                pe = pe.min(self.lb1[i * u + p.0]);
                            }
                            (r, pe)
                        }
                    };
                    s = s.max(ready);
                    parents_end = parents_end.max(pend);
                }
                let mut e = s + self.costs.exec(j, q);
                if self.streaming {
                    e = e.max(parents_end);
                }
                self.lb0[j * u + q.0] = s;
                self.lb1[j * u + q.0] = e;
                node_best = node_best.min(e);
            }
            bound = bound.max(node_best);
            if self.prune(bound) {
                return bound;
            }
        }
        bound
    }

    fn dfs(&mut self, k: usize, clock: &Instant) {
        self.visited += 1;
        if self.visited % 1024 == 0 && clock.elapsed().as_secs_f64() > self.time_limit {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        if k == self.order.len() {
            let obj = if self.device { self.load.iter().copied().fold(0.0, f64::max) } else { self.z };
            if obj < self.best {
                self.best = obj;
                self.best_mapping = Some(Mapping::new(self.unit.iter().map(|u| u.unwrap()).collect()));
            }
            return;
        }
        let j = self.order[k];
        let area = area_of(self.graph, j);
        let mut options: Vec<(f64, UnitId, f64, f64)> = self.cand[j]
            .iter()
            .filter(|q| self.area[q.0] + area <= self.capacity[q.0] + 1e-9)
            .map(|&q| {
                let (a, b) = self.place(j, q);
                (if self.device { b } else { b.max(self.z) }, q, a, b)
            })
            .filter(|o| o.0.is_finite())
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (score, q, a, b) in options {
            if self.prune(score) {
                break;
            }
            let saved_unit_end = self.unit_end[q.0];
            let saved_z = self.z;
            let saved_load = if self.device { Some(self.load.clone()) } else { None };
            self.unit[j] = Some(q);
            self.area[q.0] += area;
            if self.device {
                self.load[q.0] += self.costs.exec(j, q);
                for (i, out) in self.neighbours(j).collect::<Vec<_>>() {
                    let Some(p) = self.unit[i] else { continue };
                    if i != j && p != q {
                        let d = if out { self.costs.transport(j, q, p) } else { self.costs.transport(i, p, q) };
                        self.load[q.0] += d;
                        self.load[p.0] += d;
                    }
                }
            } else {
                self.start[j] = a;
                self.end[j] = b;
                if !self.exempt[q.0] {
                    self.unit_end[q.0] = self.unit_end[q.0].max(b);
                }
                self.z = self.z.max(b);
            }
            let bound = self.tail_bound(k + 1);
            if !self.prune(bound) {
                self.dfs(k + 1, clock);
            }
            self.unit[j] = None;
            self.area[q.0] -= area;
            self.unit_end[q.0] = saved_unit_end;
            self.z = saved_z;
            if let Some(l) = saved_load {
                self.load = l;
            }
            if self.timed_out {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appgraph::{Node, NodeKind, TaskAttrs};
    use crate::platform::preset;

    fn compute_chain(k: usize) -> AppGraph {
        let nodes = (0..k)
            .map(|id| Node {
                id,
                kind: NodeKind::Compute,
                data_bytes: 1.0,
                attrs: Some(TaskAttrs { parallelizability: 0.0, complexity: 1.0, data_ratio: 1.0, streamability: 2.0, area: 1.0 }),
            })
            .collect();
        AppGraph::new(nodes, (1..k).map(|i| (i - 1, i)).collect()).unwrap()
    }

    fn costs(exec: &[&[f64]], d: f64) -> Costs {
        let units = exec[0].len();
        let mut c = Costs::blank(exec.len(), units);
        for (i, row) in exec.iter().enumerate() {
            let mut compat = Vec::new();
            for (p, &t) in row.iter().enumerate() {
                if t.is_finite() {
                    compat.push(UnitId(p));
                    c.set_exec(i, UnitId(p), t);
                }
            }
            c.set_compatible(i, compat);
            for p in 0..units {
                for q in 0..units {
                    c.set_transport(i, UnitId(p), UnitId(q), if p == q { 0.0 } else { d });
                }
            }
        }
        c
    }

    #[test]
    fn chain_on_one_device() {
        let g = compute_chain(2);
        let p = preset("CG").unwrap();
        let c = costs(&[&[2.0], &[3.0]], 0.0);
        let s = schedule_from_assignment(&g, &p, &c, &Mapping::new(vec![UnitId(0); 2]), &[0, 1], false).unwrap();
        assert_eq!(s.z, 5.0);
        assert!(s.start[1] >= s.end[0]);
    }

    #[test]
    fn chain_across_devices_pays_transfer() {
        let g = compute_chain(2);
        let p = preset("CG").unwrap();
        let c = costs(&[&[2.0, f64::INFINITY], &[f64::INFINITY, 3.0]], 1.0);
        let s = schedule_from_assignment(&g, &p, &c, &Mapping::new(vec![UnitId(0), UnitId(1)]), &[0, 1], false).unwrap();
        assert_eq!(s.z, 6.0);
    }

    #[test]
    fn fpga_pipeline_overlaps() {
        let g = compute_chain(2);
        let p = preset("CGF").unwrap();
        let fpga = p.unit_by_name("fpga0").unwrap();
        let mut exec = vec![vec![f64::INFINITY; p.unit_count()]; 2];
        exec[0][fpga.0] = 0.3;
        exec[1][fpga.0] = 0.1;
        let rows: Vec<&[f64]> = exec.iter().map(|r| r.as_slice()).collect();
        let c = costs(&rows, 0.0);
        let m = Mapping::new(vec![fpga; 2]);
        let on = schedule_from_assignment(&g, &p, &c, &m, &[0, 1], true).unwrap();
        let off = schedule_from_assignment(&g, &p, &c, &m, &[0, 1], false).unwrap();
        assert!((on.z - 0.3).abs() < 1e-12);
        assert!((off.z - 0.4).abs() < 1e-12);
    }

    #[test]
    fn bad_order_is_rejected() {
        let g = compute_chain(2);
        let p = preset("CG").unwrap();
        let c = costs(&[&[2.0], &[3.0]], 0.0);
        assert_eq!(
            schedule_from_assignment(&g, &p, &c, &Mapping::new(vec![UnitId(0); 2]), &[1, 0], false).unwrap_err(),
            SolveError::Order
        );
    }

    #[test]
    fn exhaustive_picks_fastest_unit() {
        let g = compute_chain(1);
        let p = preset("CG").unwrap();
        let c = costs(&[&[2.0, 3.0]], 0.0);
        let (sol, m) = solve_exhaustive_with(&g, &p, &c, &Formulation::Device, &SolverOptions::default()).unwrap();
        assert_eq!(sol.objective, 2.0);
        assert_eq!(m.as_slice(), &[UnitId(0)]);
    }

    #[test]
    fn exhaustive_budget() {
        let g = compute_chain(30);
        let p = preset("CG").unwrap();
        let rows = vec![[1.0, 1.0]; 30];
        let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let c = costs(&rows, 0.0);
        let err = solve_exhaustive_with(&g, &p, &c, &Formulation::Device, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, SolveError::Budget { .. }));
    }

    #[test]
    fn exhaustive_breaks_ties_lexicographically() {
        let g = compute_chain(2);
        let p = preset("CG").unwrap();
        let c = costs(&[&[1.0, 1.0], &[1.0, 1.0]], 0.0);
        let (_, m) = solve_exhaustive_with(&g, &p, &c, &Formulation::Device, &SolverOptions::default()).unwrap();
        assert_eq!(m.as_slice(), &[UnitId(0), UnitId(1)]);
        let t = Formulation::Time { order: vec![0, 1], streaming: false };
        let (sol, m) = solve_exhaustive_with(&g, &p, &c, &t, &SolverOptions::default()).unwrap();
        assert_eq!(sol.objective, 2.0);
        assert_eq!(m.as_slice(), &[UnitId(0), UnitId(0)]);
    }

    #[test]
    fn search_matches_enumeration_on_small_chains() {
        let g = compute_chain(6);
        let p = preset("CG").unwrap();
        let rows = [[1.0, 2.5], [3.0, 1.0], [2.0, 2.0], [0.5, 4.0], [2.0, 1.5], [1.0, 1.0]];
        let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let c = costs(&rows, 0.4);
        for f in [Formulation::Device, Formulation::Time { order: (0..6).collect(), streaming: false }] {
            let (a, _) = solve_exhaustive_with(&g, &p, &c, &f, &SolverOptions::default()).unwrap();
            let (b, m) = solve_search_with(&g, &p, &c, &f, &SolverOptions::default(), None).unwrap();
            assert_eq!(b.status, Status::Optimal);
            assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective);
            assert!((formulation_objective(&g, &p, &c, &m, &f).unwrap() - b.objective).abs() < 1e-12);
        }
    }
}
