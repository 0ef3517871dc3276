//! Solving the mapping models.
//!
//! Exact answers at desk scale come from enumeration ([`solve_exhaustive`])
//! or a pruned depth-first search over assignments ([`solve_search`]), both
//! scoring assignments in closed form. [`solve_bnb`] works on the MILP
//! itself through linear relaxations, and [`export_lp`] / [`import_solution`]
//! hand larger models to an outside solver.

mod bnb;
mod exhaustive;
mod local;
mod lpfile;
pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appgraph::{GraphError, NodeId};
use crate::evaluator::EvalError;
use crate::milp::MilpError;
use crate::timing::TimingError;

pub use bnb::{mapping_repair, solve_bnb, solve_bnb_with, Repair};
pub use exhaustive::{
    complete_solution, formulation_objective, schedule_from_assignment, solve_exhaustive, solve_exhaustive_with, solve_search,
    solve_search_with, Formulation, Schedule,
};
pub use local::{improve_local, improve_local_with, LocalOptions};
pub use lpfile::{export_lp, import_solution, parse_lp, LpParseError};

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    TimeLimit,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// Search nodes, enumerated assignments or branch-and-bound nodes.
    pub nodes: u64,
    pub lp_solves: u64,
    pub wall_s: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    pub best_bound: f64,
    /// Indexed by variable id; empty when no model was involved.
    pub values: Vec<f64>,
    pub stats: SolveStats,
    /// Why a point was rejected, when it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Solution {
    pub(crate) fn infeasible(detail: impl Into<String>) -> Self {
        Solution {
            status: Status::Infeasible,
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            values: Vec::new(),
            stats: SolveStats::default(),
            detail: Some(detail.into()),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exhaustive,
    /// Depth-first search with lower-bound pruning over closed-form objectives.
    #[default]
    Search,
    Bnb,
    External,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Largest number of assignments [`solve_exhaustive`] will enumerate.
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_time_limit() -> f64 {
    60.0
}

fn default_gap() -> f64 {
    1e-6
}

fn default_budget() -> f64 {
    1e7
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { time_limit: default_time_limit(), gap: default_gap(), mode: Mode::default(), budget: default_budget() }
    }
}

impl SolverOptions {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = seconds;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{combinations:e} assignments exceed the enumeration budget of {budget:e}; use the search, bnb or external mode")]
    Budget { combinations: f64, budget: f64 },
    #[error("order is not a topological order of the graph")]
    Order,
    #[error("node {0} has no compatible unit")]
    NoCompatibleUnit(NodeId),
    #[error("time limit must be positive")]
    TimeLimit,
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
