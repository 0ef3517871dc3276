use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::appgraph::AppGraph;
use crate::milp::{extract_mapping, BuildMaps, MilpModel, VarKind, INTEGRALITY_TOL};
use crate::platform::{Platform, UnitId};
use crate::timing::Costs;

use super::exhaustive::complete_solution;
use super::simplex::{Lp, LpStatus};
use super::{Solution, SolveStats, SolverOptions, Status};

/// Turns a relaxation point into a complete feasible point, if it can.
pub type Repair<'a> = &'a dyn Fn(&[f64]) -> Option<Vec<f64>>;

struct Open {
    bound: f64,
    seq: u64,
    fixes: Vec<(usize, f64)>,
    values: Vec<f64>,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // max-heap: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

pub fn solve_bnb(model: &MilpModel, options: &SolverOptions) -> Solution {
    solve_bnb_with(model, options, None)
}

/// Best-first branch-and-bound on the linear relaxation.
///
/// Branches on the most fractional binary (lowest id on ties). Incumbents
/// come from rounding every binary and re-solving for the continuous part,
/// and from `repair` when given.
pub fn solve_bnb_with(model: &MilpModel, options: &SolverOptions, repair: Option<Repair>) -> Solution {
    let clock = Instant::now();
    let base = Lp::relaxation(model);
    let binaries: Vec<usize> = (0..model.variables.len()).filter(|&v| model.variables[v].kind == VarKind::Binary).collect();
    let mut stats = SolveStats::default();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;

    let solve = |fixes: &[(usize, f64)], stats: &mut SolveStats| -> LpStatus {
        let mut lp = base.clone();
        for &(v, x) in fixes {
            lp.lower[v] = x;
            lp.upper[v] = x;
        }
        stats.lp_solves += 1;
        lp.solve()
    };

    let finish = |status: Status, incumbent: Option<(f64, Vec<f64>)>, bound: f64, mut stats: SolveStats| {
        stats.wall_s = clock.elapsed().as_secs_f64();
        let (objective, values) = incumbent.unwrap_or((f64::INFINITY, Vec::new()));
        let status = match status {
            Status::Optimal if objective.is_infinite() => Status::Infeasible,
            s => s,
        };
        Solution { status, objective, best_bound: bound.min(objective), values, stats, detail: None }
    };

    let root = match solve(&[], &mut stats) {
        LpStatus::Optimal { objective, values } => Open { bound: objective, seq: 0, fixes: Vec::new(), values },
        LpStatus::Infeasible => return finish(Status::Infeasible, None, f64::INFINITY, stats),
        LpStatus::Unbounded => return finish(Status::Unbounded, None, f64::NEG_INFINITY, stats),
        LpStatus::IterationLimit => return finish(Status::TimeLimit, None, f64::NEG_INFINITY, stats),
    };
    let tolerance = |inc: f64| options.gap * inc.abs().max(1.0);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(root);

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - tolerance(*inc) {
                return finish(Status::Optimal, incumbent, node.bound, stats);
            }
        }
        if clock.elapsed().as_secs_f64() > options.time_limit {
            let bound = node.bound;
            return finish(Status::TimeLimit, incumbent, bound, stats);
        }
        stats.nodes += 1;

        let fractional = binaries
            .iter()
            .map(|&v| (v, (node.values[v] - node.values[v].round()).abs()))
            .filter(|&(_, f)| f > INTEGRALITY_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));

        // incumbent candidates
        let mut candidates: Vec<Vec<(usize, f64)>> = Vec::new();
        let rounded: Vec<(usize, f64)> = binaries.iter().map(|&v| (v, node.values[v].round().clamp(0.0, 1.0))).collect();
        candidates.push(rounded);
        if let Some(fix) = repair {
            if let Some(point) = fix(&node.values) {
                if model.violations(&point, 1e-6).is_empty() {
                    offer(&mut incumbent, model.objective_value(&point), point);
                }
            }
        }
        if fractional.is_some() {
            for fixes in candidates {
                if let LpStatus::Optimal { objective, values } = solve(&fixes, &mut stats) {
                    offer(&mut incumbent, objective, values);
                }
            }
        } else {
            offer(&mut incumbent, node.bound, node.values.clone());
            continue;
        }

        let (var, _) = fractional.unwrap();
        for x in [0.0, 1.0] {
            let mut fixes = node.fixes.clone();
            fixes.push((var, x));
            if let LpStatus::Optimal { objective, values } = solve(&fixes, &mut stats) {
                if incumbent.as_ref().is_some_and(|(inc, _)| objective >= inc - tolerance(*inc)) {
                    continue;
                }
                seq += 1;
                heap.push(Open { bound: objective, seq, fixes, values });
            }
        }
    }
    let bound = incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o);
    finish(Status::Optimal, incumbent, bound, stats)
}

fn offer(incumbent: &mut Option<(f64, Vec<f64>)>, objective: f64, mut values: Vec<f64>) {
    if incumbent.as_ref().is_none_or(|(o, _)| objective < *o) {
        snap_binaries(&mut values);
        *incumbent = Some((objective, values));
    }
}

fn snap_binaries(values: &mut [f64]) {
    for v in values.iter_mut() {
        if (*v - v.round()).abs() <= INTEGRALITY_TOL && (v.round() == 0.0 || v.round() == 1.0) {
            *v = v.round();
        }
    }
}

/// Repair hook for models built by this crate: each node goes to the unit
/// with the largest relaxed `x` (lowest unit on ties) and the rest of the
/// point is completed from that assignment.
pub fn mapping_repair<'a>(
    model: &'a MilpModel,
    maps: &'a BuildMaps,
    graph: &'a AppGraph,
    platform: &'a Platform,
    costs: &'a Costs,
) -> impl Fn(&[f64]) -> Option<Vec<f64>> + 'a {
    move |relaxed: &[f64]| {
        let mut rounded = vec![0.0; relaxed.len()];
        for i in 0..maps.node_count {
            let mut best: Option<(UnitId, f64)> = None;
            for (p, v) in maps.x_of(i) {
                if best.is_none_or(|(_, b)| relaxed[v] > b) {
                    best = Some((p, relaxed[v]));
                }
            }
            let (p, _) = best?;
            rounded[maps.x[&(i, p)]] = 1.0;
        }
        let mapping = extract_mapping(&rounded, maps).ok()?;
        complete_solution(model, maps, graph, platform, costs, &mapping).ok()
    }
}
