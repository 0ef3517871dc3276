#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(graph) = hetmap::appgraph::AppGraph::from_json(text) {
            let again = hetmap::appgraph::AppGraph::from_json(&graph.to_json()).unwrap();
            assert_eq!(again.len(), graph.len());
        }
    }
});
