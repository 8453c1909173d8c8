use std::sync::OnceLock;

use proptest::prelude::*;
use rug::ops::Pow;
use rug::{Float, Rational};
use wkbborel::numerics::{self, PrecisionContext, Real};
use wkbborel::series::{self, CoefficientSeries, ComplexSeries, SeriesKind, SeriesMeta};
use wkbborel::{spectral, Complex, Error};

type Chain = (CoefficientSeries, CoefficientSeries, CoefficientSeries);

/// r, s, t with 60 coefficients at 60 digits, shared by the tests below.
fn chain() -> &'static Chain {
    static CHAIN: OnceLock<Chain> = OnceLock::new();
    CHAIN.get_or_init(|| series::eigen_series(60, &PrecisionContext::new(60).unwrap()).unwrap())
}

fn rel_diff(a: &Real, b: &Real) -> f64 {
    let prec = a.prec().max(b.prec());
    let d = Float::with_val(prec, a - b).abs();
    let s = Float::with_val(prec, b.abs_ref());
    (d / s).to_f64()
}

#[test]
fn closed_forms_at_one_hundred_digits() {
    let ctx = PrecisionContext::new(100).unwrap();
    let (r, s, t) = series::eigen_series(6, &ctx).unwrap();
    let pi = ctx.pi();
    let pi2 = Float::with_val(ctx.bits(), pi.clone().square());
    let pi4 = Float::with_val(ctx.bits(), pi2.clone().square());
    let b4 = numerics::beta_quarter_half(&ctx).unwrap().pow(4u32);
    let tol = ctx.pow10(-90);
    let want = [
        (&r.coeffs[0], ctx.real(-1)),
        (&r.coeffs[1], ctx.real(1) / Float::with_val(ctx.bits(), &pi * 12u32)),
        (&s.coeffs[2], -(ctx.real(1) / Float::with_val(ctx.bits(), &pi * 6u32))),
        (
            &s.coeffs[3],
            ctx.real(11) * &b4 / Float::with_val(ctx.bits(), &pi4 * 20736u32)
                + ctx.real(5) / Float::with_val(ctx.bits(), &pi2 * 144u32),
        ),
        (&t.coeffs[1], ctx.real(1) / Float::with_val(ctx.bits(), &pi * 9u32)),
        (
            &t.coeffs[2],
            -(ctx.real(5) / Float::with_val(ctx.bits(), &pi2 * 648u32))
                - ctx.real(11) * &b4 / Float::with_val(ctx.bits(), &pi4 * 31104u32),
        ),
    ];
    for (i, (got, want)) in want.iter().enumerate() {
        let d = Float::with_val(ctx.bits(), *got - want).abs();
        assert!(d < tol, "anchor {i}: {}", d.to_f64());
    }
}

#[test]
fn reversion_round_trip_at_order_ten() {
    let ctx = PrecisionContext::new(60).unwrap();
    let prec = ctx.bits();
    let (r, s, _) = series::eigen_series(10, &ctx).unwrap();
    let f = series::bracket_coeffs(&r, prec);
    let len = 11;
    let fe = series::series_compose(&f[..len - 1], &s.coeffs, len - 1, prec);
    let fe2 = series::series_mul(&fe, &fe, len - 1, prec);
    // ε = δ F(ε)²: coefficient m of ε is coefficient m−1 of F(ε)²
    let tol = ctx.pow10(-(60 - 25));
    for m in 1..len {
        let d = Float::with_val(prec, &s.coeffs[m] - &fe2[m - 1]).abs();
        let scale = Float::with_val(prec, s.coeffs[m].abs_ref()).max(&ctx.real(1));
        assert!(d / scale < tol, "coefficient {m}");
    }
}

#[test]
fn sign_pattern_through_sixty_terms() {
    let (_, _, t) = chain();
    assert!(series::check_t_signs(&t.coeffs).is_ok());
    assert!(t.coeffs[1] > 0 && t.coeffs[2] < 0 && t.coeffs[3] < 0 && t.coeffs[4] > 0);
}

#[test]
fn r_beyond_first_two_is_positive() {
    let (r, _, _) = chain();
    assert!(r.coeffs.iter().skip(2).all(|c| *c > 0));
}

#[test]
fn truncated_series_error_matches_first_dropped_term() {
    // at N = 1000 the series through t_6 misses E by ≈ t_7 δ^7
    let ctx = PrecisionContext::new(60).unwrap();
    let (_, _, t) = chain();
    let n = 1000;
    let delta = series::delta_n(n, &ctx);
    let exact = spectral::solve_eigenvalue(n, &ctx).unwrap().e;
    let wkb = series::energy_from_t(&t.partial_sum(&delta, 7), &delta, &ctx).unwrap();
    let dev = Float::with_val(ctx.bits(), &exact - &wkb) / &exact;
    let term = Float::with_val(ctx.bits(), &t.coeffs[7] * Float::with_val(ctx.bits(), delta.clone().pow(7u32)));
    let ratio = (dev / term).to_f64();
    assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
}

#[test]
fn growth_constant_from_a_short_series() {
    let ctx = PrecisionContext::new(60).unwrap();
    let (_, _, t) = series::eigen_series(100, &ctx).unwrap();
    let g = series::fit_growth_with(&t, &Rational::from((-5, 2)), 50..99, 1e-4).unwrap();
    let two_over_pi2 = 2.0 / std::f64::consts::PI.powi(2);
    assert!((g.a.to_f64() - two_over_pi2).abs() < 1e-4, "{}", g.a.to_f64());
}

#[test]
fn fit_rejects_a_short_window() {
    let (_, _, t) = chain();
    assert!(matches!(
        series::fit_growth(t, &Rational::from((-5, 2)), 30..40),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn caches_round_trip_and_keep_precision() {
    let (_, s, t) = chain();
    for series in [s, t] {
        let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("series_engine");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{}.txt", series.kind.name()));
        series.write_cache(&path).unwrap();
        let back = CoefficientSeries::read_cache(&path).unwrap();
        assert_eq!(back.meta, series.meta);
        assert_eq!(back.digits, series.digits);
        for (a, b) in back.coeffs.iter().zip(&series.coeffs) {
            if !b.is_zero() {
                assert!(rel_diff(a, b) < 1e-75);
            }
        }
    }
}

#[test]
fn complex_cache_round_trip() {
    let ctx = PrecisionContext::new(40).unwrap();
    let coeffs: Vec<Complex> = (0..9)
        .map(|k| Complex::new(ctx.real(k as f64 / 7.0), ctx.real(-(k as f64) * 1e30)))
        .collect();
    let cs = ComplexSeries {
        kind: SeriesKind::TTilde,
        coeffs,
        digits: 40,
        meta: SeriesMeta::new(16, 20),
    };
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("series_engine");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("complex.txt");
    cs.write_cache(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back = ComplexSeries::parse_cache(&text, "mem").unwrap();
    assert_eq!(back.coeffs.len(), 9);
    // flipping one digit breaks the checksum
    let tampered = text.replacen("e-1", "e-2", 1);
    assert!(matches!(ComplexSeries::parse_cache(&tampered, "mem"), Err(Error::Checksum { .. })));
}

fn unit_series(tail: &[f64], prec: u32) -> Vec<Real> {
    std::iter::once(1.0).chain(tail.iter().copied()).map(|x| Float::with_val(prec, x)).collect()
}

fn assert_close(a: &[Real], b: &[Real], tol: f64) -> Result<(), TestCaseError> {
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let d = Float::with_val(x.prec(), x - y).abs().to_f64();
        let s = y.to_f64().abs().max(1.0);
        prop_assert!(d <= tol * s, "index {}: {} vs {}", k, x.to_f64(), y.to_f64());
    }
    Ok(())
}

proptest! {
    #[test]
    fn inverse_is_a_right_inverse(tail in prop::collection::vec(-3.0f64..3.0, 1..10)) {
        let prec = 200;
        let a = unit_series(&tail, prec);
        let len = a.len() + 3;
        let prod = series::series_mul(&a, &series::series_inv(&a, len, prec), len, prec);
        let mut one = vec![Float::with_val(prec, 1)];
        one.resize(len, Float::new(prec));
        assert_close(&prod, &one, 1e-40)?;
    }

    #[test]
    fn powers_add(tail in prop::collection::vec(-2.0f64..2.0, 1..8), p in -3i32..4, q in -3i32..4) {
        let prec = 200;
        let a = unit_series(&tail, prec);
        let len = 10;
        let (rp, rq) = (Rational::from((p, 3)), Rational::from((q, 3)));
        let lhs = series::series_mul(
            &series::series_pow(&a, &rp, len, prec),
            &series::series_pow(&a, &rq, len, prec),
            len,
            prec,
        );
        let rhs = series::series_pow(&a, &(rp + rq), len, prec);
        assert_close(&lhs, &rhs, 1e-35)?;
    }

    #[test]
    fn composition_with_geometric_series_is_inversion(tail in prop::collection::vec(-1.0f64..1.0, 1..8)) {
        let prec = 200;
        let len = 10;
        let mut g = vec![Float::new(prec)];
        g.extend(tail.iter().map(|&x| Float::with_val(prec, x)));
        let geo: Vec<Real> = (0..len).map(|_| Float::with_val(prec, 1)).collect();
        let lhs = series::series_compose(&geo, &g, len, prec);
        let one_minus_g: Vec<Real> = g
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { Float::with_val(prec, 1) } else { Float::with_val(prec, -c) })
            .collect();
        let rhs = series::series_inv(&one_minus_g, len, prec);
        assert_close(&lhs, &rhs, 1e-40)?;
    }

    #[test]
    fn derivative_obeys_the_product_rule(
        a in prop::collection::vec(-5.0f64..5.0, 2..8),
        b in prop::collection::vec(-5.0f64..5.0, 2..8),
    ) {
        let prec = 200;
        let a: Vec<Real> = a.iter().map(|&x| Float::with_val(prec, x)).collect();
        let b: Vec<Real> = b.iter().map(|&x| Float::with_val(prec, x)).collect();
        let len = a.len() + b.len() - 1;
        let lhs = series::series_derivative(&series::series_mul(&a, &b, len, prec));
        let l1 = series::series_mul(&series::series_derivative(&a), &b, len - 1, prec);
        let l2 = series::series_mul(&a, &series::series_derivative(&b), len - 1, prec);
        let rhs: Vec<Real> = l1.iter().zip(&l2).map(|(x, y)| Float::with_val(prec, x + y)).collect();
        assert_close(&lhs, &rhs, 1e-40)?;
    }

    #[test]
    fn delta_is_exact(n in 0usize..100_000) {
        let ctx = PrecisionContext::new(40).unwrap();
        let d = series::delta_n(n, &ctx);
        let back = Float::with_val(ctx.bits(), d.recip()).sqrt() * 2u32 - 1u32;
        prop_assert!((back.to_f64() - 2.0 * n as f64).abs() < 1e-20 * (n as f64 + 1.0));
    }

    #[test]
    fn cache_parser_never_panics(text in "\\PC{0,400}") {
        let _ = CoefficientSeries::parse_cache(&text, "fuzz");
        let _ = ComplexSeries::parse_cache(&text, "fuzz");
    }
}
