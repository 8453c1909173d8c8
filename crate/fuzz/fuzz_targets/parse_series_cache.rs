#![no_main]

use libfuzzer_sys::fuzz_target;
use wkbborel::resum::HatSeries;
use wkbborel::series::{CoefficientSeries, ComplexSeries};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = CoefficientSeries::parse_cache(text, "fuzz");
        if let Ok(c) = ComplexSeries::parse_cache(text, "fuzz") {
            let _ = HatSeries::from_interleaved(&c.coeffs);
        }
    }
});
