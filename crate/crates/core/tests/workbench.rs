mod common;

use common::{fixture, rel_close};
use hetmap::evaluator::{evaluate_with_costs, Mapping};
use hetmap::timing::Costs;
use hetmap::workbench::{experiment_timing, generate_graphs, run_experiment, solve_strategy, ExperimentConfig, Strategy};

fn config() -> ExperimentConfig {
    ExperimentConfig::from_json(&std::fs::read_to_string(fixture("experiment_small.json")).unwrap()).unwrap()
}

#[test]
fn aggregates_recompute_from_rows() {
    let cfg = config();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), cfg.graphs.count * cfg.strategies.len());
    for &s in &cfg.strategies {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.strategy == s && r.pct_change.is_finite()).collect();
        let a = report.aggregate(s).unwrap();
        assert_eq!(a.graphs, rows.len());
        let avg = rows.iter().map(|r| r.pct_change).sum::<f64>() / rows.len() as f64;
        assert!(rel_close(a.avg_pct, avg, 1e-12));
        let min = rows.iter().map(|r| r.pct_change).fold(f64::INFINITY, f64::min);
        let max = rows.iter().map(|r| r.pct_change).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((a.min_pct, a.max_pct), (min, max));
        assert_eq!(a.improved, rows.iter().filter(|r| r.pct_change > 0.0).count());
        for r in rows {
            assert!(rel_close(r.pct_change, 100.0 * (r.baseline_s - r.makespan_s) / r.baseline_s, 1e-12));
        }
    }
}

#[test]
fn rows_match_direct_evaluation() {
    let cfg = config();
    let report = run_experiment(&cfg).unwrap();
    let platform = hetmap::workbench::load_platform(&cfg.platform).unwrap();
    for (seed, graph) in generate_graphs(&cfg.graphs).unwrap() {
        let costs = Costs::build(&graph, &platform, &experiment_timing(&graph, &platform)).unwrap();
        for &s in &cfg.strategies {
            let row = report.rows.iter().find(|r| r.seed == seed && r.strategy == s).unwrap();
            assert_eq!((row.nodes, row.edges), (graph.len(), graph.edges().len()));
            let opts = s.eval_options(cfg.bus_overlap);
            let base = evaluate_with_costs(&graph, &platform, &costs, &Mapping::all_host(&graph, &platform), opts).unwrap();
            assert_eq!(row.baseline_s, base.makespan);
            let (m, _) = solve_strategy(&graph, &platform, &costs, s, &cfg.solver, cfg.pairs, cfg.bus_overlap).unwrap();
            let got = evaluate_with_costs(&graph, &platform, &costs, &m, opts).unwrap();
            assert!(rel_close(row.makespan_s, got.makespan, 1e-12), "{seed} {}", s.name());
        }
    }
}

#[test]
fn strategies_round_trip_by_name() {
    for s in [Strategy::Device, Strategy::Time, Strategy::TimeStreaming, Strategy::Local] {
        assert_eq!(Strategy::parse(s.name()), Some(s));
    }
    assert_eq!(Strategy::parse("nope"), None);
    assert!(ExperimentConfig::from_json(r#"{"graphs":{"count":0}}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"strategies":[]}"#).is_err());
}
