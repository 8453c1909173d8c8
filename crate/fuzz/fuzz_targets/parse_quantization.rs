#![no_main]

use libfuzzer_sys::fuzz_target;
use wkbborel::wkb::QuantizationSeries;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(q) = QuantizationSeries::parse_export(text, "fuzz") {
            let mut buf = Vec::new();
            q.write_export(&mut buf).unwrap();
            let again = QuantizationSeries::parse_export(std::str::from_utf8(&buf).unwrap(), "fuzz").unwrap();
            assert_eq!(q, again);
        }
    }
});
