use std::sync::OnceLock;

use proptest::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use wkbborel::numerics::{PrecisionContext, Real};
use wkbborel::resum::{self, BorelPlan, HatSeries, QuadParams, Resummer};
use wkbborel::series::{self, CoefficientSeries, ComplexSeries, SeriesKind, SeriesMeta};
use wkbborel::{Complex, Error};

struct Fixture {
    t: CoefficientSeries,
    a: Real,
}

/// 100 eigenvalue-series coefficients at 60 digits and their growth constant.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ctx = PrecisionContext::new(60).unwrap();
        let (_, _, t) = series::eigen_series(100, &ctx).unwrap();
        let a = series::fit_growth_with(&t, &Rational::from((-5, 2)), 50..99, 1e-4).unwrap().a;
        Fixture { t, a }
    })
}

fn resummer(digits: u32) -> Resummer {
    let f = fixture();
    let ctx = PrecisionContext::new(digits).unwrap();
    let mut plan = BorelPlan::new(Float::with_val(ctx.bits(), &f.a), 0, ctx);
    plan.quad = QuadParams::for_digits(digits - 15);
    plan.hat_terms = 25;
    Resummer::new(f.t.clone(), plan).unwrap()
}

fn f64_of(x: &Real) -> f64 {
    x.to_f64()
}

#[test]
fn transform_definition() {
    let f = fixture();
    let ctx = PrecisionContext::new(60).unwrap();
    let plan = BorelPlan::new(f.a.clone(), 0, ctx);
    let tt = resum::borel_transform(&f.t, &plan).unwrap();
    let alpha = plan.alpha();
    for m in [0usize, 1, 7, 30] {
        let fact = Float::with_val(ctx.bits(), Integer::from(Integer::factorial(m as u32)));
        let den = fact.square() * Float::with_val(ctx.bits(), f.a.clone().pow(m as u32));
        let want = alpha.powi(2 * (m as u64 + 1)).scale(&Float::with_val(ctx.bits(), &f.t.coeffs[m] / &den));
        let d = tt.coeffs[m].sub(&want).abs();
        assert!(d <= want.abs() * 1e-55, "m = {m}");
    }
}

#[test]
fn conformal_round_trip_on_the_real_series() {
    let f = fixture();
    let ctx = PrecisionContext::new(60).unwrap();
    let plan = BorelPlan::new(f.a.clone(), 0, ctx);
    let tt = resum::borel_transform(&f.t, &plan).unwrap();
    let hat = resum::conformal_reexpand(&tt).unwrap();
    let back = hat.reexpand_forward(tt.len());
    for (m, (b, w)) in back.iter().zip(&tt.coeffs).enumerate() {
        let d = b.sub(w).abs();
        assert!(d <= w.abs() * ctx.pow10(-50), "m = {m}: {}", d.to_f64());
    }
    let flat = HatSeries::from_interleaved(&hat.to_interleaved()).unwrap();
    assert_eq!(flat, hat);
}

#[test]
fn value_tends_to_one_as_delta_vanishes() {
    let r = resummer(45);
    let ctx = PrecisionContext::new(45).unwrap();
    let delta = ctx.real(1e-6);
    let res = r.evaluate(&delta, &[0, 3]).unwrap();
    let series = fixture().t.partial_sum(&Float::with_val(ctx.bits(), &delta), 4);
    for v in &res {
        assert!((f64_of(&v.value) - 1.0).abs() < 1e-7);
        let d = Float::with_val(ctx.bits(), &v.value - &series).abs();
        assert!(d < 1e-20, "M = {}: {}", v.m, d.to_f64());
    }
}

#[test]
fn independent_of_m_at_level_two() {
    let r = resummer(50);
    let ctx = PrecisionContext::new(50).unwrap();
    let delta = series::delta_n(2, &ctx);
    let ms: Vec<usize> = (2..9).collect();
    let res = r.evaluate(&delta, &ms).unwrap();
    let budget = Float::with_val(ctx.bits(), &res[0].err_quad + &res[0].err_tail);
    for v in &res[1..] {
        let d = Float::with_val(ctx.bits(), &v.value - &res[0].value).abs();
        assert!(d <= budget, "M = {}: spread {} budget {}", v.m, d.to_f64(), budget.to_f64());
    }
}

#[test]
fn consistent_with_optimal_truncation_at_level_five() {
    let r = resummer(50);
    let ctx = PrecisionContext::new(50).unwrap();
    let delta = series::delta_n(5, &ctx);
    let borel = r.evaluate(&delta, &[11]).unwrap().remove(0);
    let oaa = resum::oaa_sum(&fixture().t, &Float::with_val(fixture().t.coeffs[0].prec(), &delta)).unwrap();
    let d = Float::with_val(ctx.bits(), &borel.value - &oaa.value).abs();
    assert!(d < oaa.floor, "|borel − oaa| = {} floor = {}", d.to_f64(), oaa.floor.to_f64());
}

#[test]
fn invalid_plans_are_rejected() {
    let f = fixture();
    let ctx = PrecisionContext::new(40).unwrap();
    let mut plan = BorelPlan::new(f.a.clone(), 0, ctx);
    plan.alpha_phase = ctx.pi() / 2u32;
    assert!(matches!(resum::borel_transform(&f.t, &plan), Err(Error::InvalidArgument(_))));
    let mut plan = BorelPlan::new(f.a.clone(), 0, ctx);
    plan.hat_terms = 1000;
    assert!(matches!(Resummer::new(f.t.clone(), plan), Err(Error::InvalidArgument(_))));
    let r = resummer(40);
    assert!(matches!(r.evaluate(&ctx.real(-0.1), &[0]), Err(Error::InvalidArgument(_))));
}

#[test]
fn oaa_at_low_levels() {
    let f = fixture();
    let ctx = PrecisionContext::new(60).unwrap();
    let mut last = 0;
    for n in 1..8 {
        let o = resum::oaa_sum(&f.t, &series::delta_n(n, &ctx)).unwrap();
        assert!(o.stop > last, "stop index grows with N");
        last = o.stop;
        let term = Float::with_val(ctx.bits(), &f.t.coeffs[o.stop] * series::delta_n(n, &ctx).pow(o.stop as u32)).abs();
        let rel = Float::with_val(ctx.bits(), &term - &o.floor).abs() / &term;
        assert!(rel < 1e-50);
    }
}

fn complex_series(vals: &[(f64, f64)], prec: u32) -> ComplexSeries {
    ComplexSeries {
        kind: SeriesKind::TTilde,
        coeffs: vals
            .iter()
            .map(|&(re, im)| Complex::new(Float::with_val(prec, re), Float::with_val(prec, im)))
            .collect(),
        digits: 40,
        meta: SeriesMeta::new(0, 20),
    }
}

proptest! {
    #[test]
    fn hat_eval_continues_a_geometric_series(
        c in -0.95f64..0.95,
        r in 0.0f64..1.5,
        phase in 0.0f64..0.75,
    ) {
        // t̃_m = c^m: class p sums to c^p / (1 − c⁴ z⁴) wherever the
        // conformal series converges, including |c z| > 1
        let prec = 200;
        let vals: Vec<(f64, f64)> = (0..240).map(|m| (c.powi(m), 0.0)).collect();
        let tt = complex_series(&vals, prec);
        let hat = resum::conformal_reexpand(&tt).unwrap();
        let z = Complex::unit(&Float::with_val(prec, phase)).scale(&Float::with_val(prec, r));
        let w = z.powi(4);
        let one = Complex::from_real(Float::with_val(prec, 1));
        let u = w.div(&one.add(&w)).abs().to_f64();
        prop_assume!(u * (1.0 + c.powi(4)) < 0.5);
        let tol = Float::with_val(prec, 1);
        let den = one.sub(&w.scale(&Float::with_val(prec, c.powi(4))));
        for p in 0..4 {
            let got = resum::hat_eval(&hat, p, &z, &tol).unwrap().value;
            let want = Complex::from_real(Float::with_val(prec, c.powi(p as i32))).div(&den);
            let d = got.sub(&want).abs().to_f64();
            prop_assert!(d <= 1e-12 * want.abs().to_f64().max(1e-300), "class {}: {}", p, d);
        }
    }

    #[test]
    fn conformal_map_round_trips(vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 4..40)) {
        let tt = complex_series(&vals, 200);
        let hat = resum::conformal_reexpand(&tt).unwrap();
        let back = hat.reexpand_forward(tt.len());
        for (b, w) in back.iter().zip(&tt.coeffs) {
            prop_assert!(b.sub(w).abs().to_f64() <= 1e-40 * (1.0 + w.abs().to_f64()));
        }
    }

    #[test]
    fn oaa_stops_at_the_smallest_term(a in 0.05f64..0.5, n in 1usize..6) {
        let ctx = PrecisionContext::new(40).unwrap();
        let coeffs: Vec<Real> = (0..60u32)
            .map(|m| {
                let f = Float::with_val(ctx.bits(), Integer::from(Integer::factorial(m)));
                let sign = if m % 3 == 0 { -1 } else { 1 };
                f.square() * ctx.real(a).pow(m) * sign
            })
            .collect();
        let t = CoefficientSeries { kind: SeriesKind::T, coeffs, digits: 40, meta: SeriesMeta::new(0, 20) };
        let delta = series::delta_n(n, &ctx);
        let o = resum::oaa_sum(&t, &delta).unwrap();
        let term = |m: usize| Float::with_val(ctx.bits(), &t.coeffs[m] * delta.clone().pow(m as u32)).abs();
        for m in 1..60 {
            prop_assert!((term(m) / &o.floor).to_f64() >= 1.0 - 1e-25);
        }
        prop_assert_eq!(o.value, t.partial_sum(&delta, o.stop));
    }
}
