//! `hetmap` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 infeasible or over budget.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::appgraph::{topsort_bfs, AppGraph};
use crate::evaluator::{evaluate_with_costs, EvalOptions, Mapping, Timeline};
use crate::milp::Pairs;
use crate::platform::Platform;
use crate::solver::{export_lp, formulation_objective, Formulation, Mode, SolveError, SolverOptions, Status};
use crate::timing::{CompatRule, Costs, MeasuredTable, TimingModel};

use super::{
    build_model, experiment_timing, generate_graphs, load_platform, mapping_arg, render_dot, render_gantt, run_experiment, solve_strategy,
    summary_lines, Complexity, ExperimentConfig, GraphParams, Strategy, WorkbenchError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "hetmap", version, about = "Task mapping for heterogeneous CPU/GPU/FPGA platforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random series-parallel task graphs.
    Gen(GenArgs),
    /// Simulate a mapping and print its makespan.
    Eval(EvalArgs),
    /// Find a mapping with one of the formulations.
    Solve(SolveArgs),
    /// Write a formulation as an LP file.
    ExportLp(ExportArgs),
    /// Run a configured experiment and write its report.
    Experiment(ExperimentArgs),
    /// Draw a graph as DOT or a timeline as an SVG Gantt chart.
    Render(RenderArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 30)]
    edges: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100e6)]
    source_bytes: f64,
    /// Bytes read by every task; 0 propagates sizes from the source instead.
    #[arg(long, default_value_t = 100e6)]
    task_load: f64,
    /// Use the same complexity for every task.
    #[arg(long)]
    complexity: Option<f64>,
    /// Output file; one graph is written as an object, several as an array.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Instance {
    /// Graph JSON file.
    graph: PathBuf,
    /// Preset (CG, CGF, CGFF) or platform JSON file.
    #[arg(long, default_value = "CG")]
    platform: String,
    /// Measured timing table; estimates are used when absent.
    #[arg(long)]
    timing: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    instance: Instance,
    /// `all-cpu` or a mapping JSON file.
    #[arg(long, default_value = "all-cpu")]
    mapping: String,
    #[arg(long)]
    bus_overlap: bool,
    #[arg(long)]
    streaming: bool,
    /// Write the timeline JSON here.
    #[arg(long)]
    timeline: Option<PathBuf>,
    /// Write an SVG Gantt chart here.
    #[arg(long)]
    gantt: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormulationArg {
    Device,
    Time,
    TimeStreaming,
    Local,
}

impl From<FormulationArg> for Strategy {
    fn from(f: FormulationArg) -> Strategy {
        match f {
            FormulationArg::Device => Strategy::Device,
            FormulationArg::Time => Strategy::Time,
            FormulationArg::TimeStreaming => Strategy::TimeStreaming,
            FormulationArg::Local => Strategy::Local,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Search,
    Bnb,
    External,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Exhaustive => Mode::Exhaustive,
            ModeArg::Search => Mode::Search,
            ModeArg::Bnb => Mode::Bnb,
            ModeArg::External => Mode::External,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairsArg {
    All,
    PathPruned,
}

impl From<PairsArg> for Pairs {
    fn from(p: PairsArg) -> Pairs {
        match p {
            PairsArg::All => Pairs::All,
            PairsArg::PathPruned => Pairs::PathPruned,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_enum, default_value = "time")]
    formulation: FormulationArg,
    #[arg(long, value_enum, default_value = "search")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "all")]
    pairs: PairsArg,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
    /// Largest number of assignments the exhaustive mode enumerates.
    #[arg(long, default_value_t = 1e7)]
    budget: f64,
    #[arg(long)]
    bus_overlap: bool,
    /// Write the mapping JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_enum, default_value = "time")]
    formulation: FormulationArg,
    #[arg(long, value_enum, default_value = "all")]
    pairs: PairsArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment configuration JSON.
    config: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Record solver wall time in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Graph JSON to draw as DOT.
    #[arg(long, conflicts_with = "timeline", required_unless_present = "timeline")]
    graph: Option<PathBuf>,
    /// Timeline JSON to draw as a Gantt chart.
    #[arg(long)]
    timeline: Option<PathBuf>,
    #[arg(long, default_value = "CG")]
    platform: String,
    /// Mapping JSON used to color the DOT nodes.
    #[arg(long, requires = "graph")]
    mapping: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Data(String),
    Infeasible(String),
}

impl From<WorkbenchError> for Failure {
    fn from(e: WorkbenchError) -> Failure {
        match e {
            WorkbenchError::Solve(s @ SolveError::Budget { .. }) => Failure::Infeasible(s.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

macro_rules! data {
    ($e:expr) => {
        $e.map_err(|e| Failure::Data(e.to_string()))
    };
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Solve(a) => solve(a, out),
        Command::ExportLp(a) => export(a, out),
        Command::Experiment(a) => experiment(a, out),
        Command::Render(a) => render(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Data(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_DATA
        }
        Err(Failure::Infeasible(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_INFEASIBLE
        }
    }
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => data!(std::fs::write(p, text)),
        None => data!(out.write_all(text.as_bytes())),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let params = GraphParams {
        edges: a.edges,
        count: a.count,
        seed: a.seed,
        source_bytes: a.source_bytes,
        task_load: (a.task_load > 0.0).then_some(a.task_load),
        complexity: a.complexity.map_or(Complexity::default(), |value| Complexity::Fixed { value }),
    };
    if params.count == 0 || params.edges == 0 {
        return Err(Failure::Data("count and edges must be at least 1".into()));
    }
    let graphs = data!(generate_graphs(&params))?;
    let mut text = if graphs.len() == 1 {
        graphs[0].1.to_json()
    } else {
        let values: Vec<&AppGraph> = graphs.iter().map(|(_, g)| g).collect();
        data!(serde_json::to_string_pretty(&values))?
    };
    text.push('\n');
    emit(a.output.as_deref(), &text, out)
}

struct Loaded {
    graph: AppGraph,
    platform: Platform,
    costs: Costs,
}

fn load(instance: &Instance) -> Result<Loaded, Failure> {
    let graph = data!(AppGraph::from_json(&read(&instance.graph)?))?;
    let platform = load_platform(&instance.platform)?;
    let timing = match &instance.timing {
        None => experiment_timing(&graph, &platform),
        Some(p) => TimingModel::table(data!(MeasuredTable::from_json(&read(p)?))?).with_compat(CompatRule::pin_terminals(&graph, &platform)),
    };
    let costs = data!(Costs::build(&graph, &platform, &timing))?;
    Ok(Loaded { graph, platform, costs })
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let l = load(&a.instance)?;
    let mapping = mapping_arg(&a.mapping, &l.graph, &l.platform)?;
    let opts = EvalOptions { bus_overlap: a.bus_overlap, streaming: a.streaming, order_seed: None };
    let result = data!(evaluate_with_costs(&l.graph, &l.platform, &l.costs, &mapping, opts))?;
    if let Some(p) = &a.timeline {
        data!(std::fs::write(p, result.timeline.to_json()))?;
    }
    if let Some(p) = &a.gantt {
        data!(std::fs::write(p, render_gantt(&result.timeline)))?;
    }
    data!(writeln!(out, "makespan {:e}", result.makespan))?;
    if let Some((u, v)) = result.infinite_edge {
        return Err(Failure::Infeasible(format!("edge {u} -> {v} has no route between its units")));
    }
    Ok(())
}

fn formulation_of(strategy: Strategy, graph: &AppGraph) -> Result<Option<Formulation>, Failure> {
    Ok(match strategy {
        Strategy::Device => Some(Formulation::Device),
        Strategy::Time | Strategy::TimeStreaming => {
            Some(Formulation::Time { order: data!(topsort_bfs(graph, None))?, streaming: strategy == Strategy::TimeStreaming })
        }
        Strategy::Local => None,
    })
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let l = load(&a.instance)?;
    let strategy = Strategy::from(a.formulation);
    let options = SolverOptions { time_limit: a.time_limit, gap: a.gap, mode: a.mode.into(), budget: a.budget };
    if !(options.time_limit > 0.0) {
        return Err(Failure::Data("time limit must be positive".into()));
    }
    let (mapping, status) = solve_strategy(&l.graph, &l.platform, &l.costs, strategy, &options, a.pairs.into(), a.bus_overlap)?;
    if status == Status::Infeasible || status == Status::Unbounded {
        return Err(Failure::Infeasible(format!("solver reported {status:?}")));
    }
    let eval = strategy.eval_options(a.bus_overlap);
    let makespan = data!(evaluate_with_costs(&l.graph, &l.platform, &l.costs, &mapping, eval))?.makespan;
    let objective = match formulation_of(strategy, &l.graph)? {
        Some(f) => data!(formulation_objective(&l.graph, &l.platform, &l.costs, &mapping, &f))?,
        None => makespan,
    };
    data!(writeln!(out, "status {status:?}\nobjective {objective:e}\nmakespan {makespan:e}"))?;
    let text = mapping.to_json(&l.platform);
    match &a.output {
        Some(p) => data!(std::fs::write(p, text)),
        None => data!(writeln!(out, "{text}")),
    }
}

fn export(a: ExportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let l = load(&a.instance)?;
    let formulation = formulation_of(a.formulation.into(), &l.graph)?
        .ok_or_else(|| Failure::Data("the local strategy has no LP formulation".into()))?;
    let (model, _) = build_model(&l.graph, &l.platform, &l.costs, &formulation, a.pairs.into())?;
    emit(a.output.as_deref(), &export_lp(&model), out)
}

fn experiment(a: ExperimentArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = ExperimentConfig::from_json(&read(&a.config)?)?;
    if let Some(p) = a.csv {
        config.csv_out = Some(p.display().to_string());
    }
    if let Some(p) = a.json {
        config.json_out = Some(p.display().to_string());
    }
    config.timings |= a.timings;
    let report = run_experiment(&config)?;
    for (name, line) in summary_lines(&report) {
        data!(writeln!(out, "{name}: {line}"))?;
    }
    Ok(())
}

fn render(a: RenderArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = if let Some(t) = &a.timeline {
        render_gantt(&data!(Timeline::from_json(&read(t)?))?)
    } else {
        let path = a.graph.as_ref().expect("clap requires graph or timeline");
        let graph = data!(AppGraph::from_json(&read(path)?))?;
        let platform = load_platform(&a.platform)?;
        let mapping: Option<Mapping> = a.mapping.as_deref().map(|m| mapping_arg(m, &graph, &platform)).transpose()?;
        render_dot(&graph, &platform, mapping.as_ref())
    };
    emit(a.output.as_deref(), &text, out)
}
