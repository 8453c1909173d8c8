//! The large-N expansion of the eigenvalues.
//!
//! The quantization condition is rewritten as `ε = δ F(ε)²` with
//! `F(ε) = Σ_ℓ (−1)^{ℓ+1} [r_{2ℓ} ε^{2ℓ} + r_{2ℓ+1} ε^{2ℓ+1}]`, reverted to
//! `ε(δ) = Σ_m s_m δ^m`, and turned into `E_N = C δ^{−2/3} Σ_m t_m δ^m` with
//! `Σ_m t_m δ^m = (ε/δ)^{−2/3}`.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::{self, Complex, PrecisionContext, Real};
use crate::wkb::QuantizationSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SeriesKind {
    R,
    S,
    T,
    TTilde,
    THat,
}

impl SeriesKind {
    pub fn name(self) -> &'static str {
        match self {
            SeriesKind::R => "r",
            SeriesKind::S => "s",
            SeriesKind::T => "t",
            SeriesKind::TTilde => "t-tilde",
            SeriesKind::THat => "t-hat",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "r" => SeriesKind::R,
            "s" => SeriesKind::S,
            "t" => SeriesKind::T,
            "t-tilde" => SeriesKind::TTilde,
            "t-hat" => SeriesKind::THat,
            _ => return None,
        })
    }

    fn is_complex(self) -> bool {
        matches!(self, SeriesKind::TTilde | SeriesKind::THat)
    }
}

/// Generation parameters recorded with a series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMeta {
    /// WKB order the coefficients derive from.
    pub n_max: usize,
    pub guard: u32,
    /// Growth constant used by Borel-type transforms.
    pub a_t: Option<Real>,
    /// Rotation phase used by Borel-type transforms.
    pub alpha_phase: Option<Real>,
}

impl SeriesMeta {
    pub fn new(n_max: usize, guard: u32) -> Self {
        Self {
            n_max,
            guard,
            a_t: None,
            alpha_phase: None,
        }
    }
}

/// Real coefficients `c_0 … c_{len−1}`.
///
/// Index conventions: `r[m] = r_m`; `s[m] = s_m` with `s[0] = 0` and
/// `s[1] = 1`, so `ε(δ) = Σ s[m] δ^m`; `t[m] = t_m` with `t[0] = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSeries {
    pub kind: SeriesKind,
    pub coeffs: Vec<Real>,
    pub digits: u32,
    pub meta: SeriesMeta,
}

/// Complex coefficients (the Borel-transformed series).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSeries {
    pub kind: SeriesKind,
    pub coeffs: Vec<Complex>,
    pub digits: u32,
    pub meta: SeriesMeta,
}

impl CoefficientSeries {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn context(&self) -> Result<PrecisionContext> {
        PrecisionContext::with_guard(self.digits, self.meta.guard)
    }

    /// `Σ_{m<M} c_m x^m`.
    pub fn partial_sum(&self, x: &Real, terms: usize) -> Real {
        let p = x.prec();
        let mut acc = Float::new(p);
        for c in self.coeffs[..terms.min(self.len())].iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let vals: Vec<String> = self
            .coeffs
            .iter()
            .map(|c| numerics::format_real(c, sig_digits(self.digits, self.meta.guard)))
            .collect();
        crate::io::write_atomic(path, render_cache(self.kind, self.digits, &self.meta, &vals).as_bytes())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse_cache(&text, &path.display().to_string())
    }

    pub fn parse_cache(text: &str, origin: &str) -> Result<Self> {
        let parsed = parse_cache(text, origin)?;
        if parsed.kind.is_complex() {
            return Err(Error::format(origin, 2, "expected a real series"));
        }
        let prec = cache_bits(parsed.digits, parsed.meta.guard, origin)?;
        let coeffs = parsed
            .values
            .iter()
            .map(|(line, v)| {
                numerics::parse_real(v, prec).ok_or_else(|| Error::format(origin, *line, "bad value"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: parsed.kind,
            coeffs,
            digits: parsed.digits,
            meta: parsed.meta,
        })
    }
}

impl ComplexSeries {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let sig = sig_digits(self.digits, self.meta.guard);
        let vals: Vec<String> = self
            .coeffs
            .iter()
            .map(|c| format!("{} {}", numerics::format_real(&c.re, sig), numerics::format_real(&c.im, sig)))
            .collect();
        crate::io::write_atomic(path, render_cache(self.kind, self.digits, &self.meta, &vals).as_bytes())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse_cache(&text, &path.display().to_string())
    }

    pub fn parse_cache(text: &str, origin: &str) -> Result<Self> {
        let parsed = parse_cache(text, origin)?;
        if !parsed.kind.is_complex() {
            return Err(Error::format(origin, 2, "expected a complex series"));
        }
        let prec = cache_bits(parsed.digits, parsed.meta.guard, origin)?;
        let coeffs = parsed
            .values
            .iter()
            .map(|(line, v)| {
                let bad = || Error::format(origin, *line, "bad complex value");
                let (re, im) = v.split_once(' ').ok_or_else(bad)?;
                Ok(Complex::new(
                    numerics::parse_real(re, prec).ok_or_else(bad)?,
                    numerics::parse_real(im, prec).ok_or_else(bad)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: parsed.kind,
            coeffs,
            digits: parsed.digits,
            meta: parsed.meta,
        })
    }
}

fn sig_digits(digits: u32, guard: u32) -> usize {
    (digits + guard) as usize
}

const CACHE_MAGIC: &str = "wkbborel-series v1";

fn render_cache(kind: SeriesKind, digits: u32, meta: &SeriesMeta, values: &[String]) -> String {
    let mut body = String::new();
    let sig = sig_digits(digits, meta.guard);
    let _ = writeln!(body, "{CACHE_MAGIC}");
    let _ = writeln!(body, "kind {}", kind.name());
    let _ = writeln!(body, "len {}", values.len());
    let _ = writeln!(body, "digits {digits}");
    let _ = writeln!(body, "guard {}", meta.guard);
    let _ = writeln!(body, "n_max {}", meta.n_max);
    if let Some(a) = &meta.a_t {
        let _ = writeln!(body, "a_t {}", numerics::format_real(a, sig));
    }
    if let Some(phi) = &meta.alpha_phase {
        let _ = writeln!(body, "alpha_phase {}", numerics::format_real(phi, sig));
    }
    body.push_str("values\n");
    for v in values {
        body.push_str(v);
        body.push('\n');
    }
    let sum = crate::io::checksum(body.as_bytes());
    let _ = writeln!(body, "checksum {sum}");
    body
}

struct ParsedCache<'a> {
    kind: SeriesKind,
    digits: u32,
    meta: SeriesMeta,
    values: Vec<(usize, &'a str)>,
}

fn cache_bits(digits: u32, guard: u32, origin: &str) -> Result<u32> {
    if !(numerics::MIN_DIGITS..=1_000_000).contains(&digits) || guard > 1_000_000 {
        return Err(Error::format(origin, 0, "precision out of range"));
    }
    Ok(PrecisionContext::with_guard(digits, guard)
        .map_err(|e| Error::format(origin, 0, e.to_string()))?
        .bits())
}

/// Parses the cache layout; the trailing checksum line is mandatory.
fn parse_cache<'a>(text: &'a str, origin: &str) -> Result<ParsedCache<'a>> {
    let body = crate::io::verified_body(text, origin)?;
    let mut lines = body.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == CACHE_MAGIC => {}
        _ => return Err(Error::format(origin, 1, "not a series cache file")),
    }
    let mut kind = None;
    let mut len = None;
    let mut digits = None;
    let mut guard = None;
    let mut n_max = None;
    let mut a_t = None;
    let mut alpha_phase = None;
    let mut values = Vec::new();
    let mut in_values = false;
    for (lineno, line) in lines {
        if in_values {
            values.push((lineno, line));
            continue;
        }
        if line == "values" {
            in_values = true;
            continue;
        }
        let (key, val) = line
            .split_once(' ')
            .ok_or_else(|| Error::format(origin, lineno, "expected `key value`"))?;
        let bad = |what: &str| Error::format(origin, lineno, format!("bad {what}"));
        let slot_taken = |taken: bool| {
            if taken {
                Err(Error::format(origin, lineno, format!("duplicate key {key}")))
            } else {
                Ok(())
            }
        };
        match key {
            "kind" => {
                slot_taken(kind.is_some())?;
                kind = Some(SeriesKind::from_name(val).ok_or_else(|| bad("kind"))?);
            }
            "len" => {
                slot_taken(len.is_some())?;
                len = Some(val.parse::<usize>().map_err(|_| bad("len"))?);
            }
            "digits" => {
                slot_taken(digits.is_some())?;
                digits = Some(val.parse::<u32>().map_err(|_| bad("digits"))?);
            }
            "guard" => {
                slot_taken(guard.is_some())?;
                guard = Some(val.parse::<u32>().map_err(|_| bad("guard"))?);
            }
            "n_max" => {
                slot_taken(n_max.is_some())?;
                n_max = Some(val.parse::<usize>().map_err(|_| bad("n_max"))?);
            }
            "a_t" => {
                slot_taken(a_t.is_some())?;
                a_t = Some(val);
            }
            "alpha_phase" => {
                slot_taken(alpha_phase.is_some())?;
                alpha_phase = Some(val);
            }
            _ => return Err(Error::format(origin, lineno, format!("unknown key {key}"))),
        }
    }
    let missing = |k: &str| Error::format(origin, 0, format!("missing header key {k}"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let len = len.ok_or_else(|| missing("len"))?;
    let digits = digits.ok_or_else(|| missing("digits"))?;
    let guard = guard.ok_or_else(|| missing("guard"))?;
    let n_max = n_max.ok_or_else(|| missing("n_max"))?;
    if !in_values {
        return Err(missing("values"));
    }
    if values.len() != len {
        return Err(Error::format(
            origin,
            0,
            format!("header announces {len} values, found {}", values.len()),
        ));
    }
    let prec = cache_bits(digits, guard, origin)?;
    let parse_opt = |v: Option<&str>, what: &str| -> Result<Option<Real>> {
        v.map(|s| numerics::parse_real(s, prec).ok_or_else(|| Error::format(origin, 0, format!("bad {what}"))))
            .transpose()
    };
    let meta = SeriesMeta {
        n_max,
        guard,
        a_t: parse_opt(a_t, "a_t")?,
        alpha_phase: parse_opt(alpha_phase, "alpha_phase")?,
    };
    Ok(ParsedCache {
        kind,
        digits,
        meta,
        values,
    })
}

// ---------------------------------------------------------------------------
// Truncated power-series arithmetic on `Vec<Real>`.

/// `(a·b) mod x^len`.
pub fn series_mul(a: &[Real], b: &[Real], len: usize, prec: u32) -> Vec<Real> {
    let mut out: Vec<Real> = (0..len).map(|_| Float::new(prec)).collect();
    let mut tmp = Float::new(prec);
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            tmp.assign_mul_ref(x, y);
            out[i + j] += &tmp;
        }
    }
    out
}

/// `1/a mod x^len`; requires `a[0] ≠ 0`.
pub fn series_inv(a: &[Real], len: usize, prec: u32) -> Vec<Real> {
    let inv0 = Float::with_val(prec, 1) / &a[0];
    let mut out: Vec<Real> = Vec::with_capacity(len);
    out.push(inv0.clone());
    let mut tmp = Float::new(prec);
    for n in 1..len {
        let mut s = Float::new(prec);
        for k in 1..=n.min(a.len() - 1) {
            tmp.assign_mul_ref(&a[k], &out[n - k]);
            s += &tmp;
        }
        out.push(-(s * &inv0));
    }
    out
}

/// `a^α mod x^len` for `a[0] = 1`, via `n f_n = Σ_k ((α+1)k − n) a_k f_{n−k}`.
pub fn series_pow(a: &[Real], alpha: &Rational, len: usize, prec: u32) -> Vec<Real> {
    assert!(a[0] == 1, "series_pow needs a unit constant term");
    let alpha1 = Float::with_val(prec, alpha + Rational::from(1));
    let mut out: Vec<Real> = Vec::with_capacity(len);
    out.push(Float::with_val(prec, 1));
    let mut tmp = Float::new(prec);
    let mut factor = Float::new(prec);
    for n in 1..len {
        let mut s = Float::new(prec);
        for k in 1..=n.min(a.len() - 1) {
            if a[k].is_zero() {
                continue;
            }
            factor.assign_mul_u(&alpha1, k as u32);
            factor -= n as u32;
            tmp.assign_mul_ref(&a[k], &out[n - k]);
            tmp *= &factor;
            s += &tmp;
        }
        out.push(s / n as u32);
    }
    out
}

/// `f(g(x)) mod x^len` for `g(0) = 0`, by truncated Horner evaluation.
pub fn series_compose(f: &[Real], g: &[Real], len: usize, prec: u32) -> Vec<Real> {
    assert!(g.first().is_none_or(|g0| g0.is_zero()), "inner series must vanish at 0");
    let terms = f.len().min(len);
    let mut acc: Vec<Real> = vec![Float::new(prec)];
    for k in (0..terms).rev() {
        // acc_k = f_k + g · acc_{k+1}, needed only to order len − k
        let need = len - k;
        let mut next = series_mul(g, &acc, need, prec);
        next[0] += &f[k];
        acc = next;
    }
    acc.resize(len, Float::new(prec));
    acc
}

pub fn series_derivative(f: &[Real]) -> Vec<Real> {
    f.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| Float::with_val(c.prec(), c * k as u32))
        .collect()
}

trait FloatExt {
    fn assign_mul_ref(&mut self, a: &Float, b: &Float);
    fn assign_mul_u(&mut self, a: &Float, b: u32);
}

impl FloatExt for Float {
    fn assign_mul_ref(&mut self, a: &Float, b: &Float) {
        use rug::Assign;
        self.assign(a * b);
    }

    fn assign_mul_u(&mut self, a: &Float, b: u32) {
        use rug::Assign;
        self.assign(a * b);
    }
}

// ---------------------------------------------------------------------------

/// Numeric `r_m` from the exact quantization coefficients.
///
/// `r_{2ℓ} = B₁ q^e_ℓ/π · (B₁/3π)^{4ℓ−1}` and
/// `r_{2ℓ+1} = B₃ q^o_ℓ/π · (B₁/3π)^{4ℓ+1}`; `r_0` is the normalized leading
/// term. The two closed-form values `r_0 = −1`, `r_1 = 1/(12π)` are checked.
pub fn r_series(q: &QuantizationSeries, ctx: &PrecisionContext) -> Result<CoefficientSeries> {
    if q.max_order < 2 {
        return Err(Error::InvalidArgument(format!(
            "r_series needs max_order >= 2, got {}",
            q.max_order
        )));
    }
    let prec = ctx.bits();
    let pi = ctx.pi();
    let b1 = numerics::beta_quarter_half(ctx)?;
    let b3 = numerics::beta(&Rational::from((3, 4)), &Rational::from((1, 2)), ctx)?;
    let x = Float::with_val(prec, &b1 / Float::with_val(prec, &pi * 3u32));
    let len = q.max_order / 2 + 1;
    let mut coeffs = Vec::with_capacity(len);
    // leading term (1/3) B₁ / ε · E^{3/4} normalized by π v^{−1/2}
    let r0 = -(Float::with_val(prec, &b1 / 3u32) / &x / &pi);
    coeffs.push(r0);
    for m in 1..len {
        let l = m / 2;
        let v = if m % 2 == 0 {
            let qe = q.q_even(l).expect("count matches max_order");
            ctx.rational(qe) * &b1 / &pi * x.clone().pow(4 * l as i32 - 1)
        } else {
            let qo = q.q_odd(l).expect("count matches max_order");
            ctx.rational(qo) * &b3 / &pi * x.clone().pow(4 * l as i32 + 1)
        };
        coeffs.push(v);
    }
    let tol = ctx.pow10(-(ctx.digits() as i32) + 5);
    let check = |what: &str, got: &Real, want: Real| -> Result<()> {
        let diff = Float::with_val(prec, got - &want).abs();
        if diff > tol {
            return Err(Error::Inconsistency {
                what: "r-series",
                detail: format!("{what} = {} differs from {} by {}", got.to_f64(), want.to_f64(), diff.to_f64()),
            });
        }
        Ok(())
    };
    check("r_0", &coeffs[0], ctx.real(-1))?;
    check("r_1", &coeffs[1], ctx.real(1) / Float::with_val(prec, &pi * 12u32))?;
    // exact by construction; the numeric value only served as a check
    coeffs[0] = ctx.real(-1);
    if let Some((m, bad)) = coeffs.iter().enumerate().skip(2).find(|(_, c)| !c.is_sign_positive() || c.is_zero()) {
        return Err(Error::SignViolation {
            what: "r",
            index: m,
            value: bad.to_string(),
        });
    }
    Ok(CoefficientSeries {
        kind: SeriesKind::R,
        coeffs,
        digits: ctx.digits(),
        meta: SeriesMeta::new(q.max_order, ctx.guard()),
    })
}

/// `f_m = (−1)^{⌊m/2⌋+1} r_m`: the bracket of `ε = δ F(ε)²` as a power series.
pub fn bracket_coeffs(r: &CoefficientSeries, prec: u32) -> Vec<Real> {
    r.coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let v = Float::with_val(prec, c);
            if (m / 2) % 2 == 0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// `w(δ) = ε/δ` to `len` terms by Newton iteration on `w = F(δw)²`, doubling
/// the attained order per step.
fn revert(f: &[Real], len: usize, prec: u32) -> Vec<Real> {
    let fp = series_derivative(f);
    let mut w: Vec<Real> = vec![Float::with_val(prec, 1)];
    let mut have = 1;
    while have < len {
        let n = (2 * have).min(len);
        w.resize(n, Float::new(prec));
        // ε = δ w
        let mut eps = vec![Float::new(prec)];
        eps.extend(w.iter().take(n - 1).cloned());
        let p = series_compose(&f[..n.min(f.len())], &eps, n, prec);
        let dp = series_compose(&fp[..n.min(fp.len())], &eps, n, prec);
        let p2 = series_mul(&p, &p, n, prec);
        // G = w − P², G' = 1 − 2δ P P'
        let g: Vec<Real> = w.iter().zip(&p2).map(|(a, b)| Float::with_val(prec, a - b)).collect();
        let ppd = series_mul(&p, &dp, n, prec);
        let mut dg: Vec<Real> = vec![Float::with_val(prec, 1)];
        dg.extend(ppd.iter().take(n - 1).map(|c| Float::with_val(prec, c * -2i32)));
        let inv = series_inv(&dg, n, prec);
        let corr = series_mul(&g, &inv, n, prec);
        for (wi, ci) in w.iter_mut().zip(&corr) {
            *wi -= ci;
        }
        have = n;
    }
    w
}

/// Runs `compute` at the context and with doubled guard digits, returning the
/// more accurate result once the observed loss is within half the guard.
/// The guard is doubled up to twice before giving up.
fn audited<F>(what: &'static str, ctx: &PrecisionContext, compute: F) -> Result<(Vec<Real>, PrecisionContext)>
where
    F: Fn(u32) -> Vec<Real>,
{
    let mut ctx = *ctx;
    for _ in 0..3 {
        let coarse = compute(ctx.bits());
        let fine_ctx = ctx.doubled_guard();
        let fine = compute(fine_ctx.bits());
        let lost = loss_digits(&coarse, &fine, &ctx);
        if lost <= ctx.guard() as f64 / 2.0 {
            return Ok((fine, ctx));
        }
        ctx = fine_ctx;
    }
    let coarse = compute(ctx.bits());
    let fine = compute(ctx.doubled_guard().bits());
    Err(Error::LossOfPrecision {
        what,
        lost: loss_digits(&coarse, &fine, &ctx),
        guard: ctx.guard(),
    })
}

/// Digits of the working precision not reproduced by the coarse run.
fn loss_digits(coarse: &[Real], fine: &[Real], ctx: &PrecisionContext) -> f64 {
    let carried = (ctx.digits() + ctx.guard()) as f64;
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| {
            let scale = if f.is_zero() { Float::with_val(f.prec(), 1) } else { f.clone() };
            carried - numerics::agreeing_digits(c, f, &scale).min(carried)
        })
        .fold(0.0, f64::max)
}

fn round_to(v: Vec<Real>, prec: u32) -> Vec<Real> {
    v.into_iter().map(|x| Float::with_val(prec, x)).collect()
}

/// `s_0 … s_len−1` of `ε(δ) = Σ s_m δ^m` (so `s_0 = 0`, `s_1 = 1`), from the
/// first `len − 1` coefficients of `r`.
///
/// The result is checked by substituting back: `δ F(ε(δ))²` must reproduce
/// `ε(δ)` coefficient by coefficient.
pub fn s_series(r: &CoefficientSeries, ctx: &PrecisionContext, len: usize) -> Result<CoefficientSeries> {
    if len < 2 || r.len() < len - 1 {
        return Err(Error::InvalidArgument(format!(
            "s_series: need {} r coefficients, have {}",
            len.saturating_sub(1),
            r.len()
        )));
    }
    let terms = len - 1;
    let (w, used) = audited("series reversion", ctx, |prec| {
        let f = bracket_coeffs(r, prec);
        revert(&f[..terms], terms, prec)
    })?;
    let prec = ctx.bits();
    let mut coeffs = vec![Float::new(prec)];
    coeffs.extend(round_to(w, prec));

    // round trip
    let check_prec = used.doubled_guard().bits();
    let f = bracket_coeffs(r, check_prec);
    let eps: Vec<Real> = coeffs.iter().map(|c| Float::with_val(check_prec, c)).collect();
    let fe = series_compose(&f[..terms], &eps, terms, check_prec);
    let fe2 = series_mul(&fe, &fe, terms, check_prec);
    let tol = ctx.pow10(-(ctx.digits() as i32) + 5);
    for m in 1..len {
        let back = &fe2[m - 1];
        let scale = Float::with_val(check_prec, back.abs_ref()).max(&Float::with_val(check_prec, 1));
        let rel = Float::with_val(check_prec, &coeffs[m] - back).abs() / scale;
        if rel > tol {
            return Err(Error::Inconsistency {
                what: "series reversion round trip",
                detail: format!("coefficient {m} off by relative {}", rel.to_f64()),
            });
        }
    }
    Ok(CoefficientSeries {
        kind: SeriesKind::S,
        coeffs,
        digits: ctx.digits(),
        meta: SeriesMeta::new(r.meta.n_max, used.guard()),
    })
}

/// `t_m` of `(ε/δ)^{−2/3} = Σ t_m δ^m`, with the pairwise sign pattern
/// enforced (see [`check_t_signs`]).
pub fn t_series(s: &CoefficientSeries, ctx: &PrecisionContext) -> Result<CoefficientSeries> {
    if s.len() < 2 || s.coeffs[0] != 0 || s.coeffs[1] != 1 {
        return Err(Error::InvalidArgument(String::from(
            "t_series expects s with s_0 = 0 and s_1 = 1",
        )));
    }
    let len = s.len() - 1;
    let alpha = Rational::from((-2, 3));
    let (t, used) = audited("t power series", ctx, |prec| {
        let w: Vec<Real> = s.coeffs[1..].iter().map(|c| Float::with_val(prec, c)).collect();
        series_pow(&w, &alpha, len, prec)
    })?;
    let coeffs = round_to(t, ctx.bits());
    check_t_signs(&coeffs)?;
    Ok(CoefficientSeries {
        kind: SeriesKind::T,
        coeffs,
        digits: ctx.digits(),
        meta: SeriesMeta::new(s.meta.n_max, used.guard().max(s.meta.guard)),
    })
}

/// Sign pattern of the eigenvalue series: `t_{2ℓ}` and `t_{2ℓ+1}` share the
/// sign `(−1)^ℓ` (so `t_1 > 0`, `t_2, t_3 < 0`, `t_4, t_5 > 0`, …).
pub fn check_t_signs(t: &[Real]) -> Result<()> {
    for (m, c) in t.iter().enumerate().skip(1) {
        let l = m / 2;
        let want_positive = l % 2 == 0;
        if c.is_zero() || c.is_sign_positive() != want_positive {
            return Err(Error::SignViolation {
                what: "t",
                index: m,
                value: numerics::format_real(c, 12),
            });
        }
    }
    Ok(())
}

/// WKB order needed for `len` coefficients of `r`, `s` or `t`.
pub fn required_order(len: usize) -> usize {
    2 * len.saturating_sub(1)
}

/// r, s and t from scratch: WKB to the required order, then the series chain.
pub fn eigen_series(len: usize, ctx: &PrecisionContext) -> Result<(CoefficientSeries, CoefficientSeries, CoefficientSeries)> {
    let q = crate::wkb::quantization_series(required_order(len).max(2))?;
    series_from_quantization(&q, len, ctx)
}

pub fn series_from_quantization(
    q: &QuantizationSeries,
    len: usize,
    ctx: &PrecisionContext,
) -> Result<(CoefficientSeries, CoefficientSeries, CoefficientSeries)> {
    let r = r_series(q, ctx)?;
    let s = s_series(&r, ctx, len + 1)?;
    let t = t_series(&s, ctx)?;
    Ok((r, s, t))
}

/// `E_N ≈ C δ^{−2/3} t` for a value `t` of the bracket.
pub fn energy_from_t(t: &Real, delta: &Real, ctx: &PrecisionContext) -> Result<Real> {
    let c = numerics::leading_const(ctx)?;
    let p = Float::with_val(ctx.bits(), delta).pow(&ctx.rational(&Rational::from((-2, 3))));
    Ok(c * p * t)
}

/// `δ_N = (N + 1/2)^{−2}`.
pub fn delta_n(n: usize, ctx: &PrecisionContext) -> Real {
    let half = ctx.rational(&Rational::from((2 * n as i64 + 1, 2)));
    Float::with_val(ctx.bits(), 1) / half.square()
}

// ---------------------------------------------------------------------------

/// `|c_m| ≈ K · m!² a^m (m+1)^ν` over a fit window.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthModel {
    pub a: Real,
    pub nu: Rational,
    pub fit_window: Range<usize>,
    /// Largest relative deviation of the rescaled sequence from its value at
    /// the end of the window.
    pub residual: Real,
}

/// Default Cauchy tolerance (relative) on the extrapolated growth constant.
pub const FIT_TOLERANCE: f64 = 1e-7;

/// Fits the growth constant with `ν` held fixed.
///
/// `ρ_m = |c_{m+1}/c_m| / (m+1)² · ((m+1)/(m+2))^ν → a` with corrections in
/// `1/m`; the ratios are extrapolated by three-level Richardson. The pairwise
/// sign structure makes `ρ_m` alternate slightly between even and odd `m`, so
/// the extrapolation is applied to the two parities separately and averaged.
pub fn fit_growth(series: &CoefficientSeries, nu: &Rational, window: Range<usize>) -> Result<GrowthModel> {
    fit_growth_with(series, nu, window, FIT_TOLERANCE)
}

pub fn fit_growth_with(
    series: &CoefficientSeries,
    nu: &Rational,
    window: Range<usize>,
    tol: f64,
) -> Result<GrowthModel> {
    if window.len() < 20 {
        return Err(Error::InvalidArgument(format!("fit window {window:?} shorter than 20")));
    }
    if window.end > series.len() || window.start == 0 {
        return Err(Error::InvalidArgument(format!(
            "fit window {window:?} not inside 1..{}",
            series.len()
        )));
    }
    let prec = series.coeffs[0].prec();
    let nu_f = Float::with_val(prec, nu);
    let rho = |m: usize| -> Real {
        let num = Float::with_val(prec, series.coeffs[m + 1].abs_ref());
        let den = Float::with_val(prec, series.coeffs[m].abs_ref());
        let base = Float::with_val(prec, m + 1) / Float::with_val(prec, m + 2);
        num / den / Float::with_val(prec, (m + 1) as u64 * (m + 1) as u64) * base.pow(&nu_f)
    };
    // Richardson on each parity: sample points m, m+2, m+4, m+6 (step 2).
    const LEVELS: usize = 3;
    let last = window.end - 2; // highest m with ρ_m available
    let richardson = |m: usize| -> Real {
        // A = Σ_j ρ_{m+2j} (m+2j)^K (−1)^{j+K} / (j! (K−j)!) in the variable 1/(m+2j)
        let mut acc = Float::new(prec);
        for j in 0..=LEVELS {
            let mm = (m + 2 * j) as u64;
            let w = Float::with_val(prec, Integer::from(mm).pow(LEVELS as u32))
                / Float::with_val(prec, Integer::from(Integer::factorial(j as u32))) / Float::with_val(prec, Integer::from(Integer::factorial((LEVELS - j) as u32)))
                / Float::with_val(prec, 2u32).pow(LEVELS as u32);
            let term = rho(m + 2 * j) * w;
            if (j + LEVELS) % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        acc
    };
    let span = 2 * LEVELS;
    if last < window.start + span + 2 {
        return Err(Error::InvalidArgument(format!("fit window {window:?} too short for extrapolation")));
    }
    let mut estimates: Vec<Real> = Vec::new();
    for m in window.start..=last - span - 1 {
        // average the two parities at neighbouring m
        let a = Float::with_val(prec, richardson(m) + richardson(m + 1)) / 2u32;
        estimates.push(a);
    }
    let a = estimates.last().expect("window checked").clone();
    // Cauchy test over the last quarter of the window
    let tail = &estimates[estimates.len() - estimates.len().div_ceil(4)..];
    let spread = tail
        .iter()
        .map(|e| Float::with_val(prec, e - &a).abs())
        .fold(Float::new(prec), |x, y| x.max(&y));
    let rel = Float::with_val(prec, &spread / &a).to_f64();
    if !(rel <= tol) {
        return Err(Error::NonConvergence {
            what: "growth fit",
            detail: format!("extrapolated a varies by {rel:e} over the window tail (tolerance {tol:e})"),
        });
    }
    let residual = rescaled_deviation(series, &a, nu, window.clone());
    Ok(GrowthModel {
        a,
        nu: nu.clone(),
        fit_window: window,
        residual,
    })
}

/// `|c_m| / (m!² a^m (m+1)^ν)`.
pub fn rescaled(series: &CoefficientSeries, a: &Real, nu: &Rational, m: usize) -> Real {
    let prec = series.coeffs[0].prec();
    let nu_f = Float::with_val(prec, nu);
    let fact = Float::with_val(prec, Integer::from(Integer::factorial(m as u32)));
    let den = fact.square()
        * Float::with_val(prec, a).pow(m as u32)
        * Float::with_val(prec, m + 1).pow(&nu_f);
    Float::with_val(prec, series.coeffs[m].abs_ref()) / den
}

fn rescaled_deviation(series: &CoefficientSeries, a: &Real, nu: &Rational, window: Range<usize>) -> Real {
    let prec = series.coeffs[0].prec();
    let end = rescaled(series, a, nu, window.end - 1);
    window
        .map(|m| Float::with_val(prec, rescaled(series, a, nu, m) - &end).abs() / &end)
        .fold(Float::new(prec), |x, y| x.max(&y))
}
