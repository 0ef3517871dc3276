#![no_main]

use libfuzzer_sys::fuzz_target;

use hetmap::milp::MilpModel;
use std::sync::OnceLock;

static MODEL: OnceLock<MilpModel> = OnceLock::new();

fuzz_target!(|data: &[u8]| {
    let model = MODEL.get_or_init(|| hetmap::solver::parse_lp(include_str!("../corpus/lp_parse/device_small.lp")).unwrap());
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = hetmap::solver::import_solution(text, model);
    }
});
