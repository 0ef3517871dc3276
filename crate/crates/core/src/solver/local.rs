use serde::{Deserialize, Serialize};

use crate::appgraph::AppGraph;
use crate::evaluator::{capacity_violations, evaluate_with_costs, verify_mapping, EvalError, EvalOptions, Mapping};
use crate::platform::Platform;
use crate::timing::{Costs, TimingModel};

use super::SolveError;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalOptions {
    #[serde(default)]
    pub eval: EvalOptions,
    /// Largest number of candidate moves evaluated.
    #[serde(default = "default_moves")]
    pub max_moves: usize,
}

fn default_moves() -> usize {
    100_000
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions { eval: EvalOptions::default(), max_moves: default_moves() }
    }
}

pub fn improve_local(
    graph: &AppGraph,
    platform: &Platform,
    timing: &TimingModel,
    mapping: &Mapping,
    options: &LocalOptions,
) -> Result<Mapping, SolveError> {
    let violations = verify_mapping(graph, platform, timing, mapping);
    if !violations.is_empty() {
        return Err(EvalError::InvalidMapping(violations).into());
    }
    let costs = Costs::build(graph, platform, timing)?;
    improve_local_with(graph, platform, &costs, mapping, options)
}

/// First-improvement hill climbing over single-node moves, scored by the
/// simulated makespan. Moves that break capacity are never tried.
pub fn improve_local_with(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    mapping: &Mapping,
    options: &LocalOptions,
) -> Result<Mapping, SolveError> {
    let score = |m: &Mapping| evaluate_with_costs(graph, platform, costs, m, options.eval).map(|e| e.makespan);
    let mut current = mapping.clone();
    let mut value = score(&current)?;
    let mut tried = 0usize;
    let mut improved = true;
    while improved && tried < options.max_moves {
        improved = false;
        for i in 0..graph.len() {
            let here = current.unit(i);
            for &q in costs.compatible_units(i) {
                if q == here || tried >= options.max_moves {
                    continue;
                }
                let mut next = current.clone();
                next.set(i, q);
                if !capacity_violations(graph, platform, &next).is_empty() {
                    continue;
                }
                tried += 1;
                let v = score(&next)?;
                if v < value {
                    current = next;
                    value = v;
                    improved = true;
                    break;
                }
            }
        }
    }
    Ok(current)
}
