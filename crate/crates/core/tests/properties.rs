mod common;

use common::*;
use hetmap::appgraph::{is_topological, topsort_bfs, AppGraph};
use hetmap::evaluator::{critical_path_bound, evaluate_with_costs, EvalOptions, Mapping, Timeline};
use hetmap::milp::{build_device_based_with, build_time_based_with, Pairs, TimeOptions};
use hetmap::solver::{
    complete_solution, export_lp, import_solution, improve_local_with, mapping_repair, parse_lp, schedule_from_assignment,
    solve_bnb_with, solve_exhaustive_with, solve_search_with, Formulation, LocalOptions, Mode, SolverOptions, Status,
};
use hetmap::timing::Costs;
use proptest::prelude::*;

fn instance(seed: u64, max_tasks: usize, platform: &str) -> Instance {
    small_instances(1, max_tasks, platform, seed).pop().unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn makespan_is_final_clock_and_above_critical_path(seed in 0u64..10_000, pick in 0u64..1000, overlap: bool) {
        let inst = instance(seed, 8, "CGF");
        let m = random_mapping(&inst.graph, &inst.costs, &mut rng(pick));
        let opts = EvalOptions { bus_overlap: overlap, ..EvalOptions::default() };
        let e = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, opts).unwrap();
        prop_assert_eq!(e.makespan, e.timeline.makespan());
        let bound = critical_path_bound(&inst.graph, &inst.costs, &m).unwrap();
        prop_assert!(e.makespan >= bound * (1.0 - 1e-12));
        for ev in &e.timeline.events {
            prop_assert!(ev.start <= ev.end);
            prop_assert!(ev.end <= e.makespan * (1.0 + 1e-12));
        }
        let again = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, opts).unwrap();
        prop_assert_eq!(again, e);
    }

    #[test]
    fn events_on_one_unit_do_not_overlap_without_bus_overlap(seed in 0u64..10_000, pick in 0u64..1000) {
        let inst = instance(seed, 8, "CG");
        let m = random_mapping(&inst.graph, &inst.costs, &mut rng(pick));
        let e = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, EvalOptions::default()).unwrap();
        for u in 0..inst.platform.unit_count() {
            let mut spans: Vec<(f64, f64)> = e.timeline.events.iter().filter(|ev| ev.unit.0 == u).map(|ev| (ev.start, ev.end)).collect();
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in spans.windows(2) {
                prop_assert!(w[1].0 >= w[0].1 - 1e-12 * w[0].1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bus_overlap_never_hurts(seed in 0u64..10_000, pick in 0u64..1000) {
        let inst = instance(seed, 8, "CGF");
        let m = random_mapping(&inst.graph, &inst.costs, &mut rng(pick));
        let off = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, EvalOptions::default()).unwrap();
        let on = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, EvalOptions { bus_overlap: true, ..EvalOptions::default() }).unwrap();
        prop_assert!(on.makespan <= off.makespan * (1.0 + 1e-12));
    }

    #[test]
    fn seeded_orders_are_reproducible_and_bounded(seed in 0u64..10_000, order_seed in 0u64..1000) {
        let inst = instance(seed, 8, "CG");
        let order = topsort_bfs(&inst.graph, Some(order_seed)).unwrap();
        prop_assert!(is_topological(&inst.graph, &order));
        let m = Mapping::all_host(&inst.graph, &inst.platform);
        let opts = EvalOptions { order_seed: Some(order_seed), ..EvalOptions::default() };
        let a = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, opts).unwrap();
        let b = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, opts).unwrap();
        prop_assert_eq!(a.makespan, b.makespan);
        prop_assert!(a.makespan >= critical_path_bound(&inst.graph, &inst.costs, &m).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn completed_points_satisfy_every_model(seed in 0u64..10_000, pick in 0u64..1000) {
        let inst = instance(seed, 6, "CGF");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let m = random_mapping(g, c, &mut rng(pick));
        let order = topsort_bfs(g, None).unwrap();
        let fits = hetmap::evaluator::verify_mapping(g, p, &inst.timing, &m).is_empty();
        let mut built = vec![build_device_based_with(g, p, c).unwrap()];
        for (pairs, streaming) in [(Pairs::All, false), (Pairs::PathPruned, false), (Pairs::All, true)] {
            built.push(build_time_based_with(g, p, c, &order, TimeOptions { pairs, streaming }).unwrap());
        }
        for (model, maps) in &built {
            let point = complete_solution(model, maps, g, p, c, &m).unwrap();
            let violated = model.violations(&point, 1e-7);
            // capacity rows are the only ones a random assignment may break
            prop_assert!(violated.is_empty() || !fits, "{:?}", violated.iter().map(|(r, _)| model.describe_row(*r)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lp_text_round_trips_models_and_points(seed in 0u64..10_000, pick in 0u64..1000) {
        let inst = instance(seed, 5, "CG");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let order = topsort_bfs(g, None).unwrap();
        let (model, maps) = build_time_based_with(g, p, c, &order, TimeOptions::default()).unwrap();
        let text = export_lp(&model);
        let parsed = parse_lp(&text).unwrap();
        prop_assert_eq!(export_lp(&parsed), text);
        let m = random_mapping(g, c, &mut rng(pick));
        let point = complete_solution(&model, &maps, g, p, c, &m).unwrap();
        let sol: String = model.variables.iter().zip(&point).map(|(v, x)| format!("{} = {x}\n", v.name)).collect();
        let back = import_solution(&sol, &model).unwrap();
        prop_assert_eq!(back.status, Status::Feasible);
        prop_assert_eq!(back.values, point);
    }

    #[test]
    fn graph_json_round_trips(seed in 0u64..10_000) {
        let inst = instance(seed, 12, "CG");
        let text = inst.graph.to_json();
        prop_assert_eq!(AppGraph::from_json(&text).unwrap(), inst.graph);
    }

    #[test]
    fn timeline_json_round_trips(seed in 0u64..10_000) {
        let inst = instance(seed, 6, "CG");
        let m = Mapping::all_host(&inst.graph, &inst.platform);
        let e = evaluate_with_costs(&inst.graph, &inst.platform, &inst.costs, &m, EvalOptions::default()).unwrap();
        prop_assert_eq!(Timeline::from_json(&e.timeline.to_json()).unwrap(), e.timeline);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn bnb_matches_enumeration_on_both_models(seed in 0u64..10_000) {
        let inst = instance(seed, 4, "CG");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let order = topsort_bfs(g, None).unwrap();
        let exhaustive = SolverOptions::default().with_mode(Mode::Exhaustive);
        for streaming in [None, Some(false)] {
            let (f, (model, maps)) = match streaming {
                None => (Formulation::Device, build_device_based_with(g, p, c).unwrap()),
                Some(s) => (
                    Formulation::Time { order: order.clone(), streaming: s },
                    build_time_based_with(g, p, c, &order, TimeOptions { pairs: Pairs::All, streaming: s }).unwrap(),
                ),
            };
            let (ex, _) = solve_exhaustive_with(g, p, c, &f, &exhaustive).unwrap();
            let repair = mapping_repair(&model, &maps, g, p, c);
            let bb = solve_bnb_with(&model, &SolverOptions::default(), Some(&repair));
            prop_assert_eq!(bb.status, Status::Optimal);
            prop_assert!(rel_close(ex.objective, bb.objective, 1e-6), "{} vs {}", ex.objective, bb.objective);
        }
    }

    #[test]
    fn path_pruning_keeps_the_optimum(seed in 0u64..10_000) {
        let inst = instance(seed, 4, "CG");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let order = topsort_bfs(g, None).unwrap();
        let mut best = Vec::new();
        for pairs in [Pairs::All, Pairs::PathPruned] {
            let (model, maps) = build_time_based_with(g, p, c, &order, TimeOptions { pairs, streaming: false }).unwrap();
            let repair = mapping_repair(&model, &maps, g, p, c);
            best.push(solve_bnb_with(&model, &SolverOptions::default(), Some(&repair)).objective);
        }
        prop_assert!(rel_close(best[0], best[1], 1e-6), "{:?}", best);
    }

    #[test]
    fn search_matches_enumeration(seed in 0u64..10_000) {
        let inst = instance(seed, 6, "CG");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let order = topsort_bfs(g, None).unwrap();
        for f in [Formulation::Device, Formulation::Time { order: order.clone(), streaming: false }, Formulation::Time { order, streaming: true }] {
            let (ex, _) = solve_exhaustive_with(g, p, c, &f, &SolverOptions::default().with_mode(Mode::Exhaustive)).unwrap();
            let (se, _) = solve_search_with(g, p, c, &f, &SolverOptions::default(), None).unwrap();
            prop_assert_eq!(se.status, Status::Optimal);
            prop_assert!(rel_close(ex.objective, se.objective, 1e-9), "{} vs {}", ex.objective, se.objective);
        }
    }

    #[test]
    fn fixed_assignment_lp_equals_forward_pass(seed in 0u64..10_000, pick in 0u64..1000) {
        let inst = instance(seed, 5, "CG");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let order = topsort_bfs(g, None).unwrap();
        let (mut model, maps) = build_time_based_with(g, p, c, &order, TimeOptions::default()).unwrap();
        let m = random_mapping(g, c, &mut rng(pick));
        for (&(i, u), &v) in &maps.x {
            let x = if m.unit(i) == u { 1.0 } else { 0.0 };
            model.variables[v].lower = x;
            model.variables[v].upper = x;
        }
        let sol = solve_bnb_with(&model, &SolverOptions::default(), None);
        let z = schedule_from_assignment(g, p, c, &m, &order, false).unwrap().z;
        prop_assert!(rel_close(sol.objective, z, 1e-6), "{} vs {}", sol.objective, z);
    }

    #[test]
    fn local_search_never_worsens(seed in 0u64..10_000, pick in 0u64..1000, streaming: bool) {
        let inst = instance(seed, 6, "CGF");
        let (g, p, c) = (&inst.graph, &inst.platform, &inst.costs);
        let mut r = rng(pick);
        let start = loop {
            let m = random_mapping(g, c, &mut r);
            if hetmap::evaluator::verify_mapping(g, p, &inst.timing, &m).is_empty() {
                break m;
            }
        };
        let opts = LocalOptions { eval: EvalOptions { streaming, ..EvalOptions::default() }, max_moves: 2000 };
        let out = improve_local_with(g, p, c, &start, &opts).unwrap();
        let before = evaluate_with_costs(g, p, c, &start, opts.eval).unwrap().makespan;
        let after = evaluate_with_costs(g, p, c, &out, opts.eval).unwrap().makespan;
        prop_assert!(after <= before);
        prop_assert!(hetmap::evaluator::verify_mapping(g, p, &inst.timing, &out).is_empty());
    }
}

#[test]
fn costs_match_the_timing_model() {
    let inst = instance(1, 6, "CGF");
    let again = Costs::build(&inst.graph, &inst.platform, &inst.timing).unwrap();
    for i in 0..inst.graph.len() {
        assert_eq!(again.compatible_units(i), inst.costs.compatible_units(i));
        for &u in inst.costs.compatible_units(i) {
            assert_eq!(again.exec(i, u), inst.timing.exec_time(&inst.graph, &inst.platform, i, u).unwrap());
        }
    }
}
