#![allow(dead_code)]

use hetmap::appgraph::{AppGraph, Node, NodeKind, TaskAttrs};
use hetmap::evaluator::Mapping;
use hetmap::platform::{preset, Platform, UnitId};
use hetmap::timing::{CompatRule, Costs, MeasuredTable, TimingModel};
use hetmap::workbench::{experiment_timing, generate_graph, GraphParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::PathBuf;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixtures_with(prefix: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixture(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    out.sort();
    out
}

/// Generated instance with its seed, estimate costs and pinned terminals.
pub struct Instance {
    pub seed: u64,
    pub graph: AppGraph,
    pub platform: Platform,
    pub timing: TimingModel,
    pub costs: Costs,
}

/// `count` generated graphs with between 1 and `max_tasks` tasks.
pub fn small_instances(count: usize, max_tasks: usize, platform: &str, first_seed: u64) -> Vec<Instance> {
    let platform = preset(platform).unwrap();
    let mut out = Vec::new();
    let mut seed = first_seed;
    while out.len() < count {
        let params = GraphParams { edges: 3 + (seed % 7) as usize, ..GraphParams::default() };
        let graph = generate_graph(&params, seed).unwrap();
        seed += 1;
        if graph.task_count() == 0 || graph.task_count() > max_tasks {
            continue;
        }
        let timing = experiment_timing(&graph, &platform);
        let costs = Costs::build(&graph, &platform, &timing).unwrap();
        out.push(Instance { seed: seed - 1, graph, platform: platform.clone(), timing, costs });
    }
    out
}

/// Uniformly random compatible assignment.
pub fn random_mapping(graph: &AppGraph, costs: &Costs, rng: &mut impl Rng) -> Mapping {
    Mapping::new(
        (0..graph.len())
            .map(|i| {
                let c = costs.compatible_units(i);
                c[rng.random_range(0..c.len())]
            })
            .collect(),
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every compatible assignment in lexicographic order, or `limit` random ones
/// when there are more than `limit`.
pub fn assignments(graph: &AppGraph, costs: &Costs, limit: usize, seed: u64) -> (Vec<Mapping>, bool) {
    let sizes: Vec<usize> = (0..graph.len()).map(|i| costs.compatible_units(i).len()).collect();
    let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    match total {
        Some(t) if t <= limit => {
            let mut out = Vec::with_capacity(t);
            let mut digits = vec![0usize; sizes.len()];
            loop {
                out.push(Mapping::new(digits.iter().enumerate().map(|(i, &d)| costs.compatible_units(i)[d]).collect()));
                let mut k = sizes.len();
                loop {
                    if k == 0 {
                        return (out, true);
                    }
                    k -= 1;
                    digits[k] += 1;
                    if digits[k] < sizes[k] {
                        break;
                    }
                    digits[k] = 0;
                }
            }
        }
        _ => {
            let mut r = rng(seed);
            ((0..limit).map(|_| random_mapping(graph, costs, &mut r)).collect(), false)
        }
    }
}

pub fn task(area: f64) -> TaskAttrs {
    TaskAttrs { parallelizability: 0.0, complexity: area, data_ratio: 1.0, streamability: area.max(2.0), area }
}

/// source -> one triple per entry -> sink; every memory holds `bytes`.
pub fn chain(tasks: &[TaskAttrs], bytes: f64) -> AppGraph {
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

/// A task chain confined to the first FPGA: compute nodes may only use
/// `fpga0`, every memory node only `fpga0_ram`. Execution times come from a
/// table; every memory access costs `access` seconds.
pub fn fpga_pipeline(exec: &[f64], areas: &[f64], access: f64) -> (AppGraph, Platform, TimingModel) {
    let graph = chain(&areas.iter().map(|&a| task(a)).collect::<Vec<_>>(), 1e6);
    let platform = preset("CGF").unwrap();
    let mut table = MeasuredTable::default();
    let mut compat = CompatRule::default();
    for n in graph.nodes() {
        let unit = if n.kind == NodeKind::Compute { "fpga0" } else { "fpga0_ram" };
        compat.pins.insert(n.id, BTreeSet::from([unit.to_string()]));
    }
    for (k, t) in graph.tasks().enumerate() {
        table.insert_exec(t, "fpga0", exec[k]).unwrap();
        table.insert_transport(t - 1, "fpga0_ram", "fpga0", access).unwrap();
        table.insert_transport(t, "fpga0", "fpga0_ram", access).unwrap();
    }
    (graph, platform, TimingModel::table(table).with_compat(compat))
}

pub fn unit(platform: &Platform, name: &str) -> UnitId {
    platform.unit_by_name(name).unwrap()
}
