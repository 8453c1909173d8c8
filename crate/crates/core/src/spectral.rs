//! High-precision eigenvalues of `−ψ″ + x⁴ψ = Eψ` by Taylor-series shooting.
//!
//! The solution with parity initial data at the origin is advanced with
//! local power series, then matched at `x_max` against the decaying WKB tail.
//! The matching function is the Wronskian `ψ′ − Lψ` of the shot solution
//! with the tail, where `L` is the tail's logarithmic derivative; it vanishes
//! exactly where the log-derivative mismatch does but, unlike `ψ′/ψ − L`,
//! has no pole next to each eigenvalue.

use std::fmt::Write as _;

use rug::Float;

use crate::error::{Error, Result};
use crate::numerics::{self, PrecisionContext, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Solution value and slope at `x`; the true values are `psi · 2^log2_scale`
/// and `dpsi · 2^log2_scale`. Rescaling by powers of two is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct ShootState {
    pub x: Real,
    pub psi: Real,
    pub dpsi: Real,
    pub log2_scale: i64,
    pub ctx: PrecisionContext,
}

impl ShootState {
    pub fn initial(parity: Parity, ctx: PrecisionContext) -> Self {
        let (psi, dpsi) = match parity {
            Parity::Even => (ctx.real(1), ctx.zero()),
            Parity::Odd => (ctx.zero(), ctx.real(1)),
        };
        Self {
            x: ctx.zero(),
            psi,
            dpsi,
            log2_scale: 0,
            ctx,
        }
    }

    /// `ψ` with the scale applied.
    pub fn psi_value(&self) -> Real {
        scaled(&self.psi, self.log2_scale)
    }

    pub fn dpsi_value(&self) -> Real {
        scaled(&self.dpsi, self.log2_scale)
    }

    fn normalize(&mut self) {
        let e = [&self.psi, &self.dpsi]
            .iter()
            .filter_map(|v| v.get_exp())
            .max();
        if let Some(e) = e {
            self.psi >>= e;
            self.dpsi >>= e;
            self.log2_scale += i64::from(e);
        }
    }
}

fn scaled(v: &Real, log2: i64) -> Real {
    let mut out = v.clone();
    // the exponent range of MPFR is far larger than any scale reached here
    let shift = i32::try_from(log2).expect("scale within the exponent range");
    out <<= shift;
    out
}

/// Advances the state by `h` with the local Taylor series of `ψ″ = (x⁴−E)ψ`,
/// using at most `order` terms.
///
/// Coefficients about `x₀` satisfy `(k+2)(k+1) c_{k+2} = Σ_{i≤4} v_i c_{k−i}`
/// with `v = (x₀⁴−E, 4x₀³, 6x₀², 4x₀, 1)`. The series is summed until six
/// consecutive terms fall below `10^{−(digits+guard)}` relative to the value.
pub fn taylor_step(state: &ShootState, e: &Real, h: &Real, order: usize) -> Result<ShootState> {
    if order < 20 {
        return Err(Error::InvalidArgument(format!("Taylor order {order} < 20")));
    }
    let ctx = state.ctx;
    let prec = ctx.bits();
    let x0 = &state.x;
    let x2 = Float::with_val(prec, x0.square_ref());
    let v = [
        Float::with_val(prec, x2.square_ref()) - e,
        Float::with_val(prec, &x2 * x0) * 4u32,
        Float::with_val(prec, &x2 * 6u32),
        Float::with_val(prec, x0 * 4u32),
        ctx.real(1),
    ];
    // scaled coefficients d_k = c_k h^k obey d_{k+2} = Σ_i w_i d_{k−i} / ((k+2)(k+1))
    // with w_i = v_i h^{i+2}
    let h2 = Float::with_val(prec, h.square_ref());
    let mut w: Vec<Real> = Vec::with_capacity(5);
    let mut hp = h2.clone();
    for vi in &v {
        w.push(Float::with_val(prec, vi * &hp));
        hp *= h;
    }
    let mut d: Vec<Real> = Vec::with_capacity(order + 1);
    d.push(state.psi.clone());
    d.push(Float::with_val(prec, &state.dpsi * h));
    let mut psi = Float::with_val(prec, &d[0] + &d[1]);
    let mut hdpsi = d[1].clone();
    let tol_digits = -((ctx.digits() + ctx.guard()) as i32);
    let tol = ctx.pow10(tol_digits);
    let mut small_run = 0;
    let mut converged = false;
    for k in 0..order.saturating_sub(1) {
        let mut acc = ctx.zero();
        for (i, wi) in w.iter().enumerate().take(k.min(4) + 1) {
            acc += Float::with_val(prec, wi * &d[k - i]);
        }
        acc /= ((k + 2) * (k + 1)) as u64;
        psi += &acc;
        hdpsi += Float::with_val(prec, &acc * (k + 2) as u64);
        let size = Float::with_val(prec, acc.abs_ref());
        let scale = Float::with_val(prec, psi.abs_ref()) + Float::with_val(prec, hdpsi.abs_ref());
        d.push(acc);
        if size <= Float::with_val(prec, &scale * &tol) {
            small_run += 1;
            if small_run >= 6 && k + 2 >= 20 {
                converged = true;
                break;
            }
        } else {
            small_run = 0;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "Taylor step",
            detail: format!("{order} terms at x = {:.6}, h = {:.3e}", x0.to_f64(), h.to_f64()),
        });
    }
    let mut next = ShootState {
        x: Float::with_val(prec, x0 + h),
        psi,
        dpsi: hdpsi / h,
        log2_scale: state.log2_scale,
        ctx,
    };
    next.normalize();
    Ok(next)
}

/// Matching-point and step-control settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ShootConfig {
    /// Multiplier on the distance between the turning point and the point
    /// where the decaying tail has fallen below `10^{−(digits+guard)}`.
    pub pad: f64,
    /// Explicit matching point overriding `pad`.
    pub x_max: Option<f64>,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { pad: 1.1, x_max: None }
    }
}

/// `∫_{E^{1/4}}^{x} √(s⁴−E) ds`, the decay exponent of the tail.
fn tail_action(e: f64, x: f64) -> f64 {
    let xt = e.max(0.0).powf(0.25);
    if x <= xt {
        return 0.0;
    }
    // s = xt + (x−xt) v², which removes the square-root endpoint behaviour
    let n = 400;
    let f = |v: f64| {
        let s = xt + (x - xt) * v * v;
        (s.powi(4) - e).max(0.0).sqrt() * 2.0 * v * (x - xt)
    };
    let step = 1.0 / n as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..n {
        sum += f(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * step / 3.0
}

/// Smallest `x` whose tail action reaches `target`.
fn action_point(e: f64, target: f64) -> f64 {
    let xt = e.max(0.0).powf(0.25);
    let mut hi = xt + 1.0;
    while tail_action(e, hi) < target {
        hi = xt + 2.0 * (hi - xt);
    }
    let mut lo = xt;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if tail_action(e, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Tail action required for the neglected growing/decaying admixture to
/// stay below `10^{−(digits+guard)}`.
fn required_action(ctx: &PrecisionContext) -> f64 {
    0.5 * (ctx.digits() + ctx.guard()) as f64 * std::f64::consts::LN_10 + 2.0
}

/// Matching point for energy `e`.
pub fn matching_point(e: f64, ctx: &PrecisionContext, cfg: &ShootConfig) -> Result<f64> {
    let need = required_action(ctx);
    match cfg.x_max {
        Some(x) => {
            if tail_action(e, x) < need {
                return Err(Error::XmaxTooSmall {
                    x_max: x,
                    detail: format!(
                        "tail action {:.2} below the {:.2} needed at E = {e}",
                        tail_action(e, x),
                        need
                    ),
                });
            }
            Ok(x)
        }
        None => {
            let xt = e.max(0.0).powf(0.25);
            let xr = action_point(e, need);
            Ok(xt + cfg.pad * (xr - xt))
        }
    }
}

/// Outcome of one shot: the end state and the number of sign changes of `ψ`
/// inside the classically allowed region.
struct Shot {
    end: ShootState,
    zeros: usize,
}

fn step_size(x: f64, e: f64) -> f64 {
    let q = (x.powi(4) - e).abs().max(1.0);
    // phase advance below 2 rad per step, so no zero is skipped
    (2.0 / q.sqrt()).min(0.5)
}

fn shoot(e: &Real, parity: Parity, x_end: f64, ctx: PrecisionContext) -> Result<Shot> {
    let prec = ctx.bits();
    let ef = e.to_f64();
    let xt = ef.max(0.0).powf(0.25);
    let order = 40 + 2 * (ctx.digits() + ctx.guard()) as usize;
    let mut state = ShootState::initial(parity, ctx);
    let mut zeros = 0;
    let mut last_sign = if parity == Parity::Even { 1 } else { 0 };
    // x is carried at full precision; stop once it is within rounding of x_end
    let done = x_end - 1e-12 * x_end.max(1.0);
    loop {
        let x = state.x.to_f64();
        if x >= done {
            break;
        }
        let rest = x_end - x;
        let mut h = step_size(x, ef);
        // a short remainder is merged into this step rather than left over
        if rest <= 1.25 * h {
            h = rest;
        }
        let next = loop {
            if h < 1e-12 {
                return Err(Error::StepUnderflow { x });
            }
            match taylor_step(&state, e, &Float::with_val(prec, h), order) {
                Ok(s) => break s,
                Err(Error::NonConvergence { .. }) => h *= 0.5,
                Err(err) => return Err(err),
            }
        };
        state = next;
        if state.x.to_f64() <= xt {
            let sign = if state.psi.is_zero() {
                0
            } else if state.psi.is_sign_positive() {
                1
            } else {
                -1
            };
            if sign != 0 {
                if last_sign != 0 && sign != last_sign {
                    zeros += 1;
                }
                last_sign = sign;
            }
        }
    }
    Ok(Shot { end: state, zeros })
}

/// Log-derivative of the decaying tail, `−√Q − Q′/4Q + y₂`, `Q = x⁴ − E`.
fn tail_log_derivative(x: &Real, e: &Real) -> Real {
    let prec = x.prec();
    let x2 = Float::with_val(prec, x.square_ref());
    let q = Float::with_val(prec, x2.square_ref()) - e;
    let dq = Float::with_val(prec, &x2 * x) * 4u32;
    let ddq = x2 * 12u32;
    let y0 = -Float::with_val(prec, q.sqrt_ref());
    let q2 = Float::with_val(prec, q.square_ref());
    let y1 = -Float::with_val(prec, &dq / &q) / 4u32;
    let dy1 = -(Float::with_val(prec, &ddq * &q) - Float::with_val(prec, dq.square_ref())) / q2 / 4u32;
    let y2 = -(Float::with_val(prec, y1.square_ref()) + dy1) / Float::with_val(prec, &y0 * 2u32);
    y0 + y1 + y2
}

fn wronskian(end: &ShootState, e: &Real) -> Real {
    let l = tail_log_derivative(&end.x, e);
    let w = Float::with_val(end.ctx.bits(), &end.dpsi - Float::with_val(end.ctx.bits(), &l * &end.psi));
    scaled(&w, end.log2_scale)
}

/// Matching function at energy `e`; changes sign at every eigenvalue of the
/// given parity.
pub fn mismatch(e: &Real, parity: Parity, ctx: &PrecisionContext) -> Result<Real> {
    mismatch_with(e, parity, ctx, &ShootConfig::default())
}

pub fn mismatch_with(e: &Real, parity: Parity, ctx: &PrecisionContext, cfg: &ShootConfig) -> Result<Real> {
    if !(*e > 0) {
        return Err(Error::InvalidArgument(String::from("energy must be positive")));
    }
    let x_max = matching_point(e.to_f64(), ctx, cfg)?;
    let shot = shoot(e, parity, x_max, *ctx)?;
    Ok(wronskian(&shot.end, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub n: usize,
    pub e: Real,
    /// Decimal digits attained according to the last root-finder step.
    pub digits: u32,
    pub x_max: Real,
    pub iterations: u32,
}

const MAX_ITERATIONS: u32 = 200;

/// `E_N` to the precision of `ctx`.
pub fn solve_eigenvalue(n: usize, ctx: &PrecisionContext) -> Result<EigenResult> {
    solve_eigenvalue_with(n, ctx, &ShootConfig::default())
}

pub fn solve_eigenvalue_with(n: usize, ctx: &PrecisionContext, cfg: &ShootConfig) -> Result<EigenResult> {
    let parity = Parity::of(n);
    let prec = ctx.bits();
    let nu = n as f64 + 0.5;
    let c = numerics::leading_const(ctx)?.to_f64();
    // leading term plus the first correction t_1 δ, t_1 = 1/(9π)
    let guess = c * nu.powf(4.0 / 3.0) * (1.0 + 1.0 / (9.0 * std::f64::consts::PI * nu * nu));
    // spacing between neighbouring levels of the same parity
    let spacing = 8.0 / 3.0 * c * nu.powf(1.0 / 3.0);

    let eval = |e: &Real| -> Result<Real> {
        let x_max = matching_point(e.to_f64(), ctx, cfg)?;
        let shot = shoot(e, parity, x_max, *ctx)?;
        Ok(wronskian(&shot.end, e))
    };

    // bracket around the estimate
    let mut width = 0.1 * spacing;
    let mut bracket = None;
    for _ in 0..8 {
        let lo = ctx.real((guess - width).max(1e-3));
        let hi = ctx.real(guess + width);
        let flo = eval(&lo)?;
        let fhi = eval(&hi)?;
        if flo.is_sign_negative() != fhi.is_sign_negative() {
            bracket = Some((lo, flo, hi, fhi));
            break;
        }
        width *= 1.6;
    }
    let (mut a, mut fa, mut b, mut fb) = bracket.ok_or_else(|| Error::PrecisionExhausted {
        n,
        detail: format!("no sign change of the matching function near E ≈ {guess:.6}"),
    })?;

    // Illinois variant of regula falsi
    let tol = ctx.epsilon() * &b;
    let mut iterations = 0;
    let mut side = 0i8;
    let mut last_step = Float::with_val(prec, &b - &a);
    let mut root = b.clone();
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let denom = Float::with_val(prec, &fb - &fa);
        let c_new = Float::with_val(prec, &b - Float::with_val(prec, &fb * Float::with_val(prec, &b - &a)) / denom);
        let fc = eval(&c_new)?;
        last_step = Float::with_val(prec, &c_new - &root).abs();
        root = c_new.clone();
        if fc.is_zero() {
            last_step = ctx.zero();
            break;
        }
        if fc.is_sign_negative() == fb.is_sign_negative() {
            b = c_new;
            fb = fc;
            if side == 1 {
                fa /= 2u32;
            }
            side = 1;
        } else {
            a = c_new;
            fa = fc;
            if side == -1 {
                fb /= 2u32;
            }
            side = -1;
        }
        let interval = Float::with_val(prec, &b - &a).abs();
        if last_step <= tol || interval <= tol {
            break;
        }
    }
    if iterations >= MAX_ITERATIONS {
        return Err(Error::PrecisionExhausted {
            n,
            detail: format!("root finder stalled at step {:.3e}", last_step.to_f64()),
        });
    }

    let x_max = matching_point(root.to_f64(), ctx, cfg)?;
    let shot = shoot(&root, parity, x_max, *ctx)?;
    if shot.zeros != n / 2 {
        return Err(Error::WrongIndex {
            expected: n,
            found: 2 * shot.zeros + (n % 2),
        });
    }
    let digits = if last_step.is_zero() {
        ctx.digits()
    } else {
        let rel = numerics::log10(&Float::with_val(prec, &last_step / &root));
        ((-rel).floor().max(0.0) as u32).min(ctx.digits())
    };
    Ok(EigenResult {
        n,
        e: root,
        digits,
        x_max: ctx.real(x_max),
        iterations,
    })
}

/// Number of interior zeros of `ψ` on the allowed part of the half line at
/// energy `e`.
pub fn zero_count(e: &Real, parity: Parity, ctx: &PrecisionContext) -> Result<usize> {
    let xt = e.to_f64().max(0.0).powf(0.25);
    Ok(shoot(e, parity, xt, *ctx)?.zeros)
}

// ---------------------------------------------------------------------------
// Eigenvalue table: `N  E  digits  x_max  iterations` per line.

pub const EIGEN_HEADER: &str = "# N E digits x_max iterations";

pub fn emit_eigen_table(results: &[EigenResult]) -> String {
    let mut out = String::from(EIGEN_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            r.n,
            numerics::format_real(&r.e, r.digits as usize + 5),
            r.digits,
            numerics::format_real(&r.x_max, 17),
            r.iterations
        );
    }
    out
}

pub fn parse_eigen_table(text: &str, origin: &str) -> Result<Vec<EigenResult>> {
    let mut out: Vec<EigenResult> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::format(origin, lineno, format!("expected 5 fields, got {}", fields.len())));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(origin, lineno, "bad index"))?;
        let digits: u32 = fields[2]
            .parse()
            .ok()
            .filter(|d| (1..=1_000_000).contains(d))
            .ok_or_else(|| Error::format(origin, lineno, "bad digit count"))?;
        let ctx = PrecisionContext::new(digits.max(numerics::MIN_DIGITS))?;
        let e = numerics::parse_real(fields[1], ctx.bits())
            .filter(|e| *e > 0)
            .ok_or_else(|| Error::format(origin, lineno, "bad energy"))?;
        let x_max = numerics::parse_real(fields[3], 64)
            .filter(|x| *x > 0)
            .ok_or_else(|| Error::format(origin, lineno, "bad matching point"))?;
        let iterations: u32 = fields[4]
            .parse()
            .map_err(|_| Error::format(origin, lineno, "bad iteration count"))?;
        if out.iter().any(|r| r.n == n) {
            return Err(Error::format(origin, lineno, format!("duplicate N = {n}")));
        }
        out.push(EigenResult {
            n,
            e,
            digits,
            x_max,
            iterations,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(40).unwrap()
    }

    #[test]
    fn step_at_zero_energy_matches_series() {
        let ctx = ctx();
        let s = ShootState::initial(Parity::Even, ctx);
        let h = ctx.real(0.5);
        let next = taylor_step(&s, &ctx.zero(), &h, 200).unwrap();
        // ψ = 1 + x⁶/30 + x¹²/11880 + …  (c_{k+6} = c_k / ((k+6)(k+5)))
        let mut expect = ctx.zero();
        let mut c = ctx.real(1);
        let mut k = 0u64;
        let x6 = ctx.real(0.5f64.powi(6));
        while k < 120 {
            expect += &c;
            c = c * &x6 / ((k + 6) * (k + 5));
            k += 6;
        }
        let got = next.psi_value();
        assert!(numerics::agreeing_digits(&got, &expect, &expect) > 38.0);
    }

    #[test]
    fn step_is_linear_and_reversible() {
        let ctx = ctx();
        let e = ctx.real(3.5);
        let mut s = ShootState::initial(Parity::Odd, ctx);
        s.psi = ctx.real(0.3);
        s.x = ctx.real(0.7);
        let h = ctx.real(0.25);
        let fwd = taylor_step(&s, &e, &h, 80).unwrap();
        let back = taylor_step(&fwd, &e, &(-h.clone()), 80).unwrap();
        assert!(numerics::agreeing_digits(&back.psi_value(), &s.psi, &ctx.real(1)) > 38.0);
        assert!(numerics::agreeing_digits(&back.dpsi_value(), &s.dpsi, &ctx.real(1)) > 38.0);

        let mut s3 = s.clone();
        s3.psi *= 3u32;
        s3.dpsi *= 3u32;
        let fwd3 = taylor_step(&s3, &e, &h, 80).unwrap();
        let tripled = fwd.psi_value() * 3u32;
        assert!(numerics::agreeing_digits(&fwd3.psi_value(), &tripled, &tripled) > 38.0);
    }

    #[test]
    fn low_order_rejected() {
        let ctx = ctx();
        let s = ShootState::initial(Parity::Even, ctx);
        assert!(taylor_step(&s, &ctx.real(1), &ctx.real(0.1), 10).is_err());
    }

    #[test]
    fn matching_function_brackets_ground_state() {
        let ctx = ctx();
        let lo = mismatch(&ctx.real(1.0), Parity::Even, &ctx).unwrap();
        let hi = mismatch(&ctx.real(1.1), Parity::Even, &ctx).unwrap();
        assert_ne!(lo.is_sign_negative(), hi.is_sign_negative());
        // odd parity has nothing near E_0
        let lo = mismatch(&ctx.real(1.0), Parity::Odd, &ctx).unwrap();
        let hi = mismatch(&ctx.real(1.1), Parity::Odd, &ctx).unwrap();
        assert_eq!(lo.is_sign_negative(), hi.is_sign_negative());
    }

    #[test]
    fn explicit_short_matching_point_rejected() {
        let ctx = ctx();
        let cfg = ShootConfig {
            pad: 1.1,
            x_max: Some(1.5),
        };
        assert!(matches!(
            mismatch_with(&ctx.real(1.0), Parity::Even, &ctx, &cfg),
            Err(Error::XmaxTooSmall { .. })
        ));
    }

    #[test]
    fn first_levels() {
        let ctx = ctx();
        let e0 = solve_eigenvalue(0, &ctx).unwrap();
        let want = ctx.real(Float::parse("1.060362090484182899647046016692663").unwrap());
        assert!(numerics::agreeing_digits(&e0.e, &want, &want) > 32.0);
        let e1 = solve_eigenvalue(1, &ctx).unwrap();
        assert!((e1.e.to_f64() - 3.799673).abs() < 1e-5);
    }

    #[test]
    fn table_round_trip() {
        let ctx = ctx();
        let r = EigenResult {
            n: 3,
            e: ctx.real(Float::parse("11.6447455113774").unwrap()),
            digits: 40,
            x_max: ctx.real(6.25),
            iterations: 12,
        };
        let text = emit_eigen_table(std::slice::from_ref(&r));
        let back = parse_eigen_table(&text, "mem").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].n, 3);
        assert_eq!(back[0].iterations, 12);
        assert!(numerics::agreeing_digits(&back[0].e, &r.e, &r.e) > 39.0);
    }

    #[test]
    fn table_rejects_garbage() {
        for bad in ["1 2 3", "x 1.0 40 5 3", "0 -1 40 5 3", "0 1 0 5 3", "0 1 40 5 3\n0 1 40 5 3"] {
            assert!(parse_eigen_table(bad, "mem").is_err(), "{bad}");
        }
    }
}
