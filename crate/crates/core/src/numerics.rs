//! Arbitrary-precision contexts, a small complex type and the Gamma/Beta
//! evaluations at rational arguments used throughout the pipeline.
//!
//! Real values are MPFR floats (`rug::Float`); exact values are GMP
//! rationals (`rug::Rational`).

use std::fmt;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Arbitrary-precision real number.
pub type Real = Float;

/// Default number of guard digits carried on top of the requested digits.
pub const DEFAULT_GUARD: u32 = 20;

/// Smallest accepted working precision in decimal digits.
pub const MIN_DIGITS: u32 = 30;

const BITS_PER_DIGIT: f64 = std::f64::consts::LOG2_10;

/// Decimal working precision plus guard digits.
///
/// Every `Real` created through a context carries `digits + guard` decimal
/// digits of binary precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    digits: u32,
    guard: u32,
}

impl PrecisionContext {
    pub fn new(digits: u32) -> Result<Self> {
        Self::with_guard(digits, DEFAULT_GUARD)
    }

    pub fn with_guard(digits: u32, guard: u32) -> Result<Self> {
        if digits < MIN_DIGITS {
            return Err(Error::InvalidPrecision { digits });
        }
        Ok(Self { digits, guard })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn guard(&self) -> u32 {
        self.guard
    }

    /// Same digits with the guard doubled (at least one guard digit is added).
    pub fn doubled_guard(&self) -> Self {
        Self {
            digits: self.digits,
            guard: (self.guard * 2).max(self.guard + 1),
        }
    }

    /// Same guard, different digits.
    pub fn with_digits(&self, digits: u32) -> Result<Self> {
        Self::with_guard(digits, self.guard)
    }

    /// Binary precision of every value created under this context.
    pub fn bits(&self) -> u32 {
        ((self.digits + self.guard) as f64 * BITS_PER_DIGIT).ceil() as u32 + 8
    }

    pub fn real<T>(&self, val: T) -> Real
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.bits(), val)
    }

    pub fn zero(&self) -> Real {
        Float::new(self.bits())
    }

    pub fn pi(&self) -> Real {
        Float::with_val(self.bits(), Constant::Pi)
    }

    pub fn rational(&self, q: &Rational) -> Real {
        Float::with_val(self.bits(), q)
    }

    /// `10^(-digits)`: the target accuracy of this context.
    pub fn epsilon(&self) -> Real {
        self.pow10(-(self.digits as i32))
    }

    pub fn pow10(&self, e: i32) -> Real {
        Float::with_val(self.bits(), 10).pow(e)
    }
}

impl fmt::Display for PrecisionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{} digits", self.digits, self.guard)
    }
}

/// Complex number with arbitrary-precision parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        Self { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        Self::new(Float::new(prec), Float::new(prec))
    }

    pub fn from_real(re: Real) -> Self {
        let im = Float::new(re.prec());
        Self { re, im }
    }

    /// `e^{i phase}`.
    pub fn unit(phase: &Real) -> Self {
        let (s, c) = phase.clone().sin_cos(Float::new(phase.prec()));
        Self { re: c, im: s }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), Float::with_val(self.im.prec(), -&self.im))
    }

    pub fn norm_sqr(&self) -> Real {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Real {
        let p = self.prec();
        Float::with_val(p, self.re.hypot_ref(&self.im))
    }

    pub fn add(&self, other: &Complex) -> Complex {
        let p = self.prec();
        Complex::new(
            Float::with_val(p, &self.re + &other.re),
            Float::with_val(p, &self.im + &other.im),
        )
    }

    pub fn sub(&self, other: &Complex) -> Complex {
        let p = self.prec();
        Complex::new(
            Float::with_val(p, &self.re - &other.re),
            Float::with_val(p, &self.im - &other.im),
        )
    }

    pub fn mul(&self, other: &Complex) -> Complex {
        let p = self.prec();
        let re = Float::with_val(p, &self.re * &other.re) - Float::with_val(p, &self.im * &other.im);
        let im = Float::with_val(p, &self.re * &other.im) + Float::with_val(p, &self.im * &other.re);
        Complex::new(re, im)
    }

    pub fn scale(&self, s: &Real) -> Complex {
        let p = self.prec();
        Complex::new(Float::with_val(p, &self.re * s), Float::with_val(p, &self.im * s))
    }

    pub fn div(&self, other: &Complex) -> Complex {
        let d = other.norm_sqr();
        self.mul(&other.conj()).scale(&Float::with_val(d.prec(), 1 / &d))
    }

    pub fn add_assign(&mut self, other: &Complex) {
        self.re += &other.re;
        self.im += &other.im;
    }

    /// `self += a * s` for real `s`.
    pub fn add_scaled(&mut self, a: &Complex, s: &Real) {
        let p = self.prec();
        self.re += Float::with_val(p, &a.re * s);
        self.im += Float::with_val(p, &a.im * s);
    }

    pub fn powi(&self, n: u64) -> Complex {
        let p = self.prec();
        let mut result = Complex::from_real(Float::with_val(p, 1));
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }
}

fn nonpositive_integer(q: &Rational) -> bool {
    *q.denom() == 1 && *q.numer() <= 0
}

/// Γ(q) for rational `q`. Poles at non-positive integers are errors.
pub fn gamma(q: &Rational, ctx: &PrecisionContext) -> Result<Real> {
    if nonpositive_integer(q) {
        return Err(Error::BetaPole {
            a: q.to_string(),
            b: String::from("-"),
        });
    }
    // MPFR's gamma applies the reflection formula for negative arguments.
    Ok(ctx.rational(q).gamma())
}

/// B(a, b) = Γ(a)Γ(b)/Γ(a+b) at rational arguments.
///
/// Removable singularities (one pole in the numerator cancelled by the pole
/// of Γ(a+b)) are resolved by the residue ratio; a genuinely infinite value is
/// reported as [`Error::BetaPole`].
pub fn beta(a: &Rational, b: &Rational, ctx: &PrecisionContext) -> Result<Real> {
    let sum = Rational::from(a + b);
    let pa = nonpositive_integer(a);
    let pb = nonpositive_integer(b);
    let ps = nonpositive_integer(&sum);
    let numerator_poles = pa as u8 + pb as u8;
    let pole_err = || Error::BetaPole {
        a: a.to_string(),
        b: b.to_string(),
    };
    match (numerator_poles, ps) {
        (0, false) => {
            let ga = ctx.rational(a).gamma();
            let gb = ctx.rational(b).gamma();
            let gs = ctx.rational(&sum).gamma();
            Ok(ga * gb / gs)
        }
        (0, true) => Ok(ctx.zero()),
        (1, true) => {
            // B(-m, n) with a + b = n - m <= 0: ratio of residues of Γ.
            let (pole, regular) = if pa { (a, b) } else { (b, a) };
            let m = Integer::from(-pole.numer()).to_u32().ok_or_else(pole_err)?;
            let n = regular.numer().to_u32().ok_or_else(pole_err)?;
            if *regular.denom() != 1 || n == 0 {
                return Err(pole_err());
            }
            // (-1)^n (m-n)! (n-1)! / m!
            let num = Integer::from(Integer::factorial(m - n)) * Integer::from(Integer::factorial(n - 1));
            let den = Integer::from(Integer::factorial(m));
            let mut v = ctx.rational(&Rational::from((num, den)));
            if n % 2 == 1 {
                v = -v;
            }
            Ok(v)
        }
        _ => Err(pole_err()),
    }
}

/// `B(1/4, 1/2)`, the constant that carries the whole even family.
pub fn beta_quarter_half(ctx: &PrecisionContext) -> Result<Real> {
    beta(&Rational::from((1, 4)), &Rational::from((1, 2)), ctx)
}

/// `[3π / B(1/4,1/2)]^{4/3}`, the prefactor of the eigenvalue series.
pub fn leading_const(ctx: &PrecisionContext) -> Result<Real> {
    let b = beta_quarter_half(ctx)?;
    let ratio = ctx.pi() * 3u32 / b;
    let third = ctx.rational(&Rational::from((4, 3)));
    Ok(ratio.pow(&third))
}

/// Number of decimal digits to which `a` and `b` agree relative to `scale`,
/// capped at the precision of the arguments.
pub fn agreeing_digits(a: &Real, b: &Real, scale: &Real) -> f64 {
    let p = a.prec().max(b.prec());
    let cap = p as f64 / BITS_PER_DIGIT;
    let diff = Float::with_val(p, a - b).abs();
    if diff.is_zero() {
        return cap;
    }
    let s = Float::with_val(p, scale.abs_ref());
    if s.is_zero() {
        return 0.0;
    }
    let rel = diff / s;
    (-log10(&rel)).clamp(0.0, cap)
}

/// log10 of a positive float that may lie far outside the `f64` range.
pub fn log10(x: &Real) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    m.abs().log10() + e as f64 * std::f64::consts::LOG10_2
}

/// Natural log of |x| as an `f64`, for magnitude bookkeeping.
pub fn ln_abs(x: &Real) -> f64 {
    log10(x) * std::f64::consts::LN_10
}

/// Parses a decimal string into a real at the requested precision.
pub fn parse_real(s: &str, prec: u32) -> Option<Real> {
    let parsed = Float::parse(s.trim()).ok()?;
    let v = Float::with_val(prec, parsed);
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

/// Scientific-notation string carrying `digits` significant digits.
pub fn format_real(x: &Real, digits: usize) -> String {
    if x.is_zero() {
        return String::from("0");
    }
    x.to_string_radix(10, Some(digits.max(2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn rejects_low_precision() {
        assert!(matches!(
            PrecisionContext::new(10),
            Err(Error::InvalidPrecision { digits: 10 })
        ));
    }

    #[test]
    fn beta_half_half_is_pi() {
        let ctx = PrecisionContext::new(60).unwrap();
        let b = beta(&q(1, 2), &q(1, 2), &ctx).unwrap();
        assert!(agreeing_digits(&b, &ctx.pi(), &ctx.pi()) > 60.0);
    }

    #[test]
    fn beta_poles() {
        let ctx = PrecisionContext::new(40).unwrap();
        assert!(matches!(beta(&q(-1, 1), &q(1, 2), &ctx), Err(Error::BetaPole { .. })));
        // 1/Γ(a+b) vanishes at a pole of the sum.
        assert!(beta(&q(1, 2), &q(-3, 2), &ctx).unwrap().is_zero());
        // B(-3, 2): residue ratio (-1)^2 * 1! * 1! / 3! = 1/6.
        let v = beta(&q(-3, 1), &q(2, 1), &ctx).unwrap();
        let want = ctx.rational(&q(1, 6));
        assert!(agreeing_digits(&v, &want, &want) > 55.0);
        assert!(matches!(beta(&q(-3, 1), &q(-1, 1), &ctx), Err(Error::BetaPole { .. })));
    }

    #[test]
    fn negative_half_integer_sign() {
        // B(1/4, -1/2) = B(1/4, 1/2) * (1/4 - 1/2) / (-1/2) is positive;
        // B(1/4, -3/2) = B(1/4, -1/2) * (1/4 - 3/2)/(-3/2) is positive too,
        // B(3/4, -1/2) = B(3/4,1/2) * (1/4)/(-1/2) is negative.
        let ctx = PrecisionContext::new(40).unwrap();
        assert!(beta(&q(1, 4), &q(-1, 2), &ctx).unwrap() > 0);
        assert!(beta(&q(3, 4), &q(-1, 2), &ctx).unwrap() < 0);
    }

    #[test]
    fn leading_const_definition() {
        let ctx = PrecisionContext::new(50).unwrap();
        let c = leading_const(&ctx).unwrap();
        let b = beta_quarter_half(&ctx).unwrap();
        let alt = (ctx.pi() * 3u32 / b).ln() * ctx.rational(&q(4, 3));
        let alt = alt.exp();
        assert!(agreeing_digits(&c, &alt, &c) > 50.0);
    }

    #[test]
    fn complex_unit_powers() {
        let ctx = PrecisionContext::new(40).unwrap();
        let phase = ctx.pi() / 8u32;
        let a = Complex::unit(&phase);
        let a8 = a.powi(8);
        let one = ctx.real(1);
        assert!(agreeing_digits(&a8.re, &Float::with_val(ctx.bits(), -&one), &one) > 40.0);
        assert!(a8.im.clone().abs() < ctx.epsilon());
        let r = a.div(&a);
        assert!(agreeing_digits(&r.re, &one, &one) > 40.0);
    }

    #[test]
    fn magnitude_helpers() {
        let ctx = PrecisionContext::new(40).unwrap();
        let big = ctx.pow10(900);
        assert!((log10(&big) - 900.0).abs() < 1e-9);
        let s = format_real(&ctx.pi(), 30);
        let back = parse_real(&s, ctx.bits()).unwrap();
        assert!(agreeing_digits(&back, &ctx.pi(), &ctx.pi()) > 28.0);
        assert!(parse_real("nan", 64).is_none());
        assert!(parse_real("garbage", 64).is_none());
    }
}
