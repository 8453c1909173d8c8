#![no_main]

use libfuzzer_sys::fuzz_target;
use wkbborel::spectral::parse_eigen_table;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_eigen_table(text, "fuzz");
    }
});
