#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = hetmap::timing::MeasuredTable::from_json(text) {
            assert_eq!(hetmap::timing::MeasuredTable::from_json(&table.to_json()).unwrap(), table);
        }
    }
});
