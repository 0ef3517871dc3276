#![no_main]

use libfuzzer_sys::fuzz_target;

use hetmap::appgraph::AppGraph;
use hetmap::evaluator::Mapping;
use hetmap::platform::{preset, Platform};
use std::sync::OnceLock;

static INSTANCE: OnceLock<(AppGraph, Platform)> = OnceLock::new();

fuzz_target!(|data: &[u8]| {
    let (graph, platform) = INSTANCE.get_or_init(|| {
        let graph = AppGraph::from_json(include_str!("../../crates/core/tests/fixtures/graph_small.json")).unwrap();
        (graph, preset("CG").unwrap())
    });
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Mapping::from_json(text, graph, platform);
    }
});
