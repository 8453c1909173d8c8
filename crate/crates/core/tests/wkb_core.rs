use std::time::Instant;

use proptest::prelude::*;
use rug::Rational;
use wkbborel::wkb::{self, QuantizationSeries};
use wkbborel::Error;

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

#[test]
fn rational_anchors_at_order_twelve() {
    let start = Instant::now();
    let qs = wkb::quantization_series(12).unwrap();
    assert_eq!(qs.p_odd(0), Some(&q(1, 2)));
    assert_eq!(qs.p_even(1), Some(&q(77, 1768)));
    assert_eq!(qs.p_odd(1), Some(&q(61061, 62928)));
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn recursion_holds_exactly_on_reference_orders() {
    let orders = wkb::wkb_orders(10);
    for n in 1..=10 {
        assert!(wkb::recursion_residual(&orders, n).is_empty(), "order {n}");
    }
}

#[test]
fn coefficients_positive_and_counted() {
    let qs = wkb::quantization_series(80).unwrap();
    assert_eq!(qs.max_order, 80);
    assert!(qs.even_len() > 0 && qs.odd_len() > 0);
    for l in 1..=qs.even_len() {
        assert!(*qs.q_even(l).unwrap() > 0);
        assert!(*qs.p_even(l).unwrap() > 0);
    }
    for l in 0..qs.odd_len() {
        assert!(*qs.q_odd(l).unwrap() > 0);
        assert!(*qs.p_odd(l).unwrap() > 0);
    }
}

#[test]
fn lower_orders_are_a_prefix() {
    let lo = wkb::quantization_series(20).unwrap();
    let hi = wkb::quantization_series(40).unwrap();
    for l in 1..=lo.even_len() {
        assert_eq!(lo.q_even(l), hi.q_even(l));
    }
    for l in 0..lo.odd_len() {
        assert_eq!(lo.q_odd(l), hi.q_odd(l));
    }
}

#[test]
fn odd_max_order_rejected() {
    assert!(matches!(wkb::quantization_series(7), Err(Error::InvalidArgument(_))));
}

#[test]
fn export_is_stable_through_from_q() {
    let qs = wkb::quantization_series(24).unwrap();
    let mut buf = Vec::new();
    qs.write_export(&mut buf).unwrap();
    let back = QuantizationSeries::parse_export(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
    assert_eq!(back, qs);
    let mut again = Vec::new();
    back.write_export(&mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn non_positive_q_is_a_sign_violation() {
    let err = QuantizationSeries::from_q(4, vec![q(-1, 3)], vec![q(1, 2), q(1, 5)]).unwrap_err();
    assert!(matches!(err, Error::SignViolation { what: "q_e", index: 1, .. }));
}

proptest! {
    #[test]
    fn export_never_panics(text in "\\PC{0,300}") {
        let _ = QuantizationSeries::parse_export(&text, "fuzz");
    }

    #[test]
    fn export_line_mutations_are_rejected_or_consistent(line in 0usize..6, junk in "[0-9a-z_/ -]{0,12}") {
        let qs = wkb::quantization_series(12).unwrap();
        let mut buf = Vec::new();
        qs.write_export(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let idx = line % lines.len();
        if lines[idx] == junk {
            return Ok(());
        }
        lines[idx] = junk;
        // body and checksum are tied together: any single-line change fails
        let edited = lines.join("\n") + "\n";
        prop_assert!(QuantizationSeries::parse_export(&edited, "mem").is_err());
    }

    #[test]
    fn from_q_round_trips(
        qe in prop::collection::vec((1i64..1_000_000, 1i64..1_000_000), 1..5),
        qo in prop::collection::vec((1i64..1_000_000, 1i64..1_000_000), 1..5),
    ) {
        let n = qe.len().min(qo.len());
        let qe: Vec<Rational> = qe[..n].iter().map(|&(a, b)| q(a, b)).collect();
        let qo: Vec<Rational> = qo[..n].iter().map(|&(a, b)| q(a, b)).collect();
        let built = QuantizationSeries::from_q(4 * n, qe.clone(), qo.clone());
        prop_assume!(built.is_ok());
        let built = built.unwrap();
        let mut buf = Vec::new();
        built.write_export(&mut buf).unwrap();
        let back = QuantizationSeries::parse_export(std::str::from_utf8(&buf).unwrap(), "mem");
        prop_assert_eq!(back.ok(), Some(built));
    }
}
