#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = hetmap::solver::parse_lp(text) {
            let again = hetmap::solver::parse_lp(&hetmap::solver::export_lp(&model)).unwrap();
            assert_eq!(again.variables.len(), model.variables.len());
        }
    }
});
