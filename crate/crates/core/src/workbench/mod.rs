//! Experiment harness, reports, rendering and the command line.

pub mod cli;
mod external;
mod render;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appgraph::{expand_tasks, gen_series_parallel, topsort_bfs, AppGraph, GraphError, TaskSampler};
use crate::evaluator::{evaluate_with_costs, EvalOptions, Mapping};
use crate::milp::{build_device_based_with, build_time_based_with, extract_mapping, BuildMaps, MilpModel, Pairs, TimeOptions};
use crate::platform::{preset, Platform, PlatformError};
use crate::solver::{
    improve_local_with, mapping_repair, solve_bnb_with, solve_exhaustive_with, solve_search_with, Formulation, LocalOptions, Mode,
    SolveError, SolverOptions, Status,
};
use crate::timing::{CompatRule, Costs, TimingError, TimingModel};

pub use external::{run_external, ExternalError, EXTERNAL_SOLVER_ENV};
pub use render::{render_dot, render_gantt};

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// How task complexity is drawn.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Complexity {
    /// Log-normal with the given parameters.
    LogNormal { mu: f64, sigma: f64 },
    /// Every task gets the same coefficient.
    Fixed { value: f64 },
}

impl Default for Complexity {
    fn default() -> Self {
        Complexity::LogNormal { mu: 3.0, sigma: 0.5 }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct GraphParams {
    /// Target edge count of the series-parallel skeleton.
    pub edges: usize,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_bytes")]
    pub source_bytes: f64,
    /// Same input size for every task; `None` propagates sizes instead.
    #[serde(default = "default_load")]
    pub task_load: Option<f64>,
    #[serde(default)]
    pub complexity: Complexity,
}

fn default_bytes() -> f64 {
    100e6
}

fn default_load() -> Option<f64> {
    Some(100e6)
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { edges: 30, count: 1, seed: 0, source_bytes: default_bytes(), task_load: default_load(), complexity: Complexity::default() }
    }
}

/// Graph number `k` of a batch uses seed `params.seed + k`.
pub fn generate_graph(params: &GraphParams, seed: u64) -> Result<AppGraph, GraphError> {
    let skeleton = gen_series_parallel(params.edges, seed);
    let mut sampler = TaskSampler::default();
    if let Complexity::LogNormal { mu, sigma } = params.complexity {
        sampler.complexity = crate::appgraph::Dist::LogNormal { mu, sigma };
    }
    let mut graph = expand_tasks(&skeleton, &sampler, params.source_bytes, seed)?;
    if let Some(bytes) = params.task_load {
        graph.apply_fixed_load(bytes)?;
    }
    if let Complexity::Fixed { value } = params.complexity {
        graph.set_uniform_complexity(value);
    }
    Ok(graph)
}

pub fn generate_graphs(params: &GraphParams) -> Result<Vec<(u64, AppGraph)>, GraphError> {
    (0..params.count as u64).map(|k| Ok((params.seed + k, generate_graph(params, params.seed + k)?))).collect()
}

/// Estimate-based timing with sources and sinks pinned to host memory.
pub fn experiment_timing(graph: &AppGraph, platform: &Platform) -> TimingModel {
    TimingModel::estimate().with_compat(CompatRule::pin_terminals(graph, platform))
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Device,
    Time,
    TimeStreaming,
    /// Hill climbing on the simulated makespan from the all-CPU mapping.
    Local,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Device => "device",
            Strategy::Time => "time",
            Strategy::TimeStreaming => "time-streaming",
            Strategy::Local => "local",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        [Strategy::Device, Strategy::Time, Strategy::TimeStreaming, Strategy::Local].into_iter().find(|k| k.name() == s)
    }

    /// Evaluation options matching the strategy's modelling assumptions.
    pub fn eval_options(self, bus_overlap: bool) -> EvalOptions {
        EvalOptions { bus_overlap, streaming: self == Strategy::TimeStreaming, order_seed: None }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Preset name (CG, CGF, CGFF) or a path to a platform JSON file.
    #[serde(default = "default_platform")]
    pub platform: String,
    #[serde(default)]
    pub graphs: GraphParams,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub pairs: Pairs,
    #[serde(default)]
    pub bus_overlap: bool,
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Record solver wall time; off keeps reports byte-identical across runs.
    #[serde(default)]
    pub timings: bool,
    #[serde(default)]
    pub csv_out: Option<String>,
    #[serde(default)]
    pub json_out: Option<String>,
}

fn default_platform() -> String {
    "CG".into()
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Device, Strategy::Time]
}

fn yes() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            platform: default_platform(),
            graphs: GraphParams::default(),
            strategies: default_strategies(),
            solver: SolverOptions::default(),
            pairs: Pairs::default(),
            bus_overlap: false,
            parallel: true,
            timings: false,
            csv_out: None,
            json_out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, WorkbenchError> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), WorkbenchError> {
        if self.graphs.count < 1 {
            return Err(WorkbenchError::Config("count must be at least 1".into()));
        }
        if self.graphs.edges < 1 {
            return Err(WorkbenchError::Config("edges must be at least 1".into()));
        }
        if !(self.solver.time_limit > 0.0) {
            return Err(WorkbenchError::Config("time_limit must be positive".into()));
        }
        if self.strategies.is_empty() {
            return Err(WorkbenchError::Config("no strategies".into()));
        }
        Ok(())
    }
}

/// Preset name or platform file.
pub fn load_platform(spec: &str) -> Result<Platform, WorkbenchError> {
    match preset(spec) {
        Ok(p) => Ok(p),
        Err(_) if std::path::Path::new(spec).exists() => Ok(Platform::from_json(&std::fs::read_to_string(spec)?)?),
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub seed: u64,
    pub nodes: usize,
    pub edges: usize,
    pub baseline_s: f64,
    pub strategy: Strategy,
    pub makespan_s: f64,
    pub pct_change: f64,
    pub status: String,
    pub solve_s: f64,
    /// Fraction of edges whose endpoints share a unit in the chosen mapping.
    pub same_unit_edges: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub strategy: Strategy,
    pub graphs: usize,
    pub avg_pct: f64,
    pub min_pct: f64,
    pub max_pct: f64,
    pub improved: usize,
    pub avg_same_unit_edges: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate(&self, strategy: Strategy) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["seed", "nodes", "edges", "baseline_s", "strategy", "makespan_s", "pct_change", "status", "solve_s"])
            .expect("writing to memory");
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                r.nodes.to_string(),
                r.edges.to_string(),
                r.baseline_s.to_string(),
                r.strategy.name().to_string(),
                r.makespan_s.to_string(),
                r.pct_change.to_string(),
                r.status.clone(),
                r.solve_s.to_string(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing memory")).expect("csv is utf-8")
    }
}

/// Aggregates over rows whose status is not an error.
pub fn aggregate(rows: &[ReportRow], strategies: &[Strategy]) -> Vec<Aggregate> {
    strategies
        .iter()
        .map(|&s| {
            let ok: Vec<&ReportRow> = rows.iter().filter(|r| r.strategy == s && r.pct_change.is_finite()).collect();
            let n = ok.len();
            let sum: f64 = ok.iter().map(|r| r.pct_change).sum();
            let same: f64 = ok.iter().map(|r| r.same_unit_edges).sum();
            Aggregate {
                strategy: s,
                graphs: n,
                avg_pct: if n > 0 { sum / n as f64 } else { f64::NAN },
                min_pct: ok.iter().map(|r| r.pct_change).fold(f64::INFINITY, f64::min),
                max_pct: ok.iter().map(|r| r.pct_change).fold(f64::NEG_INFINITY, f64::max),
                improved: ok.iter().filter(|r| r.pct_change > 0.0).count(),
                avg_same_unit_edges: if n > 0 { same / n as f64 } else { f64::NAN },
            }
        })
        .collect()
}

/// Fraction of edges whose two endpoints share a unit.
pub fn same_unit_fraction(graph: &AppGraph, mapping: &Mapping) -> f64 {
    if graph.edges().is_empty() {
        return 0.0;
    }
    let same = graph.edges().iter().filter(|&&(a, b)| mapping.unit(a) == mapping.unit(b)).count();
    same as f64 / graph.edges().len() as f64
}

/// Mapping chosen by `strategy`, with the solver's status.
pub fn solve_strategy(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    strategy: Strategy,
    options: &SolverOptions,
    pairs: Pairs,
    bus_overlap: bool,
) -> Result<(Mapping, Status), WorkbenchError> {
    let baseline = Mapping::all_host(graph, platform);
    let formulation = match strategy {
        Strategy::Local => {
            let local = LocalOptions { eval: strategy.eval_options(bus_overlap), ..LocalOptions::default() };
            return Ok((improve_local_with(graph, platform, costs, &baseline, &local)?, Status::Feasible));
        }
        Strategy::Device => Formulation::Device,
        Strategy::Time | Strategy::TimeStreaming => {
            Formulation::Time { order: topsort_bfs(graph, None)?, streaming: strategy == Strategy::TimeStreaming }
        }
    };
    match options.mode {
        Mode::Exhaustive => {
            let (sol, m) = solve_exhaustive_with(graph, platform, costs, &formulation, options)?;
            Ok((m, sol.status))
        }
        Mode::Search => {
            let (sol, m) = solve_search_with(graph, platform, costs, &formulation, options, Some(&baseline))?;
            Ok((m, sol.status))
        }
        Mode::Bnb | Mode::External => {
            let (model, maps) = build_model(graph, platform, costs, &formulation, pairs)?;
            let values = if options.mode == Mode::Bnb {
                let repair = mapping_repair(&model, &maps, graph, platform, costs);
                let sol = solve_bnb_with(&model, options, Some(&repair));
                if sol.values.is_empty() {
                    return Ok((baseline, sol.status));
                }
                (sol.values, sol.status)
            } else {
                let sol = run_external(&model)?;
                (sol.values.clone(), sol.status)
            };
            let mapping = extract_mapping(&values.0, &maps).map_err(SolveError::from)?;
            Ok((mapping, values.1))
        }
    }
}

pub fn build_model(
    graph: &AppGraph,
    platform: &Platform,
    costs: &Costs,
    formulation: &Formulation,
    pairs: Pairs,
) -> Result<(MilpModel, BuildMaps), WorkbenchError> {
    let built = match formulation {
        Formulation::Device => build_device_based_with(graph, platform, costs),
        Formulation::Time { order, streaming } => {
            build_time_based_with(graph, platform, costs, order, TimeOptions { pairs, streaming: *streaming })
        }
    };
    Ok(built.map_err(SolveError::from)?)
}

fn status_text(status: Status) -> &'static str {
    match status {
        Status::Optimal => "optimal",
        Status::Feasible => "feasible",
        Status::Infeasible => "infeasible",
        Status::Unbounded => "unbounded",
        Status::TimeLimit => "time_limit",
    }
}

fn graph_rows(config: &ExperimentConfig, platform: &Platform, seed: u64, graph: &AppGraph) -> Vec<ReportRow> {
    let timing = experiment_timing(graph, platform);
    let costs = Costs::build(graph, platform, &timing);
    let baseline = Mapping::all_host(graph, platform);
    config
        .strategies
        .iter()
        .map(|&strategy| {
            let eval = strategy.eval_options(config.bus_overlap);
            let mut row = ReportRow {
                seed,
                nodes: graph.len(),
                edges: graph.edges().len(),
                baseline_s: f64::NAN,
                strategy,
                makespan_s: f64::NAN,
                pct_change: f64::NAN,
                status: String::new(),
                solve_s: 0.0,
                same_unit_edges: f64::NAN,
            };
            let costs = match &costs {
                Ok(c) => c,
                Err(e) => {
                    row.status = format!("error: {e}");
                    return row;
                }
            };
            let clock = Instant::now();
            let outcome = solve_strategy(graph, platform, costs, strategy, &config.solver, config.pairs, config.bus_overlap).and_then(|(m, st)| {
                let base = evaluate_with_costs(graph, platform, costs, &baseline, eval).map_err(SolveError::from)?;
                let got = evaluate_with_costs(graph, platform, costs, &m, eval).map_err(SolveError::from)?;
                Ok((m, st, base.makespan, got.makespan))
            });
            if config.timings {
                row.solve_s = clock.elapsed().as_secs_f64();
            }
            match outcome {
                Ok((m, st, base, got)) => {
                    row.baseline_s = base;
                    row.makespan_s = got;
                    row.pct_change = 100.0 * (base - got) / base;
                    row.status = status_text(st).into();
                    row.same_unit_edges = same_unit_fraction(graph, &m);
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect()
}

/// Runs every strategy on every generated graph and aggregates the change
/// against the all-CPU mapping. Rows are ordered by seed, then strategy.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, WorkbenchError> {
    config.check()?;
    let platform = load_platform(&config.platform)?;
    let graphs = generate_graphs(&config.graphs)?;
    let per_graph: Vec<Vec<ReportRow>> = if config.parallel {
        graphs.par_iter().map(|(seed, g)| graph_rows(config, &platform, *seed, g)).collect()
    } else {
        graphs.iter().map(|(seed, g)| graph_rows(config, &platform, *seed, g)).collect()
    };
    let rows: Vec<ReportRow> = per_graph.into_iter().flatten().collect();
    let aggregates = aggregate(&rows, &config.strategies);
    let report = ExperimentReport { rows, aggregates };
    if let Some(path) = &config.csv_out {
        std::fs::write(path, report.to_csv())?;
    }
    if let Some(path) = &config.json_out {
        std::fs::write(path, report.to_json())?;
    }
    Ok(report)
}

/// Parses `{"<node>": "<unit>"}` or one of the keywords `all-cpu` / `all-host`.
pub fn mapping_arg(arg: &str, graph: &AppGraph, platform: &Platform) -> Result<Mapping, WorkbenchError> {
    if arg == "all-cpu" || arg == "all-host" {
        return Ok(Mapping::all_host(graph, platform));
    }
    let text = std::fs::read_to_string(arg)?;
    Mapping::from_json(&text, graph, platform).map_err(|e| WorkbenchError::Config(e.to_string()))
}

/// Per-strategy tallies, keyed by name, for quick printing.
pub fn summary_lines(report: &ExperimentReport) -> BTreeMap<String, String> {
    report
        .aggregates
        .iter()
        .map(|a| {
            (
                a.strategy.name().to_string(),
                format!("avg {:.2}% min {:.2}% max {:.2}% improved {}/{}", a.avg_pct, a.min_pct, a.max_pct, a.improved, a.graphs),
            )
        })
        .collect()
}
