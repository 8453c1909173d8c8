//! The checked-in fuzz seeds stay meaningful: well-formed seeds parse and
//! malformed ones are rejected without panicking.

use std::fs;
use std::path::PathBuf;

use wkbborel::experiment::parse_csv;
use wkbborel::series::{CoefficientSeries, ComplexSeries, SeriesKind};
use wkbborel::spectral::parse_eigen_table;
use wkbborel::wkb::QuantizationSeries;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn quantization_seeds() {
    for (name, text) in seeds("parse_quantization") {
        assert!(QuantizationSeries::parse_export(&text, &name).is_ok(), "{name}");
    }
}

#[test]
fn series_cache_seeds() {
    for (name, text) in seeds("parse_series_cache") {
        let ok = match name.as_str() {
            "t-tilde.txt" | "t-hat.txt" => ComplexSeries::parse_cache(&text, &name).is_ok(),
            "truncated.txt" => CoefficientSeries::parse_cache(&text, &name).is_err(),
            _ => {
                let s = CoefficientSeries::parse_cache(&text, &name).unwrap();
                SeriesKind::from_name(name.trim_end_matches(".txt")) == Some(s.kind)
            }
        };
        assert!(ok, "{name}");
    }
}

#[test]
fn csv_seeds() {
    for (name, text) in seeds("parse_comparison_csv") {
        assert_eq!(parse_csv(&text, &name).is_ok(), !name.starts_with("bad"), "{name}");
    }
}

#[test]
fn eigen_table_seeds() {
    for (name, text) in seeds("parse_eigen_table") {
        assert!(!parse_eigen_table(&text, &name).unwrap().is_empty(), "{name}");
    }
}
