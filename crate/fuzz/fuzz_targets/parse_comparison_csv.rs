#![no_main]

use libfuzzer_sys::fuzz_target;
use wkbborel::experiment::{emit_csv, parse_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = parse_csv(text, "fuzz") {
            // emit ∘ parse is a fixed point after one pass
            let once = emit_csv(&records);
            let twice = emit_csv(&parse_csv(&once, "fuzz").unwrap());
            assert_eq!(once, twice);
        }
    }
});
