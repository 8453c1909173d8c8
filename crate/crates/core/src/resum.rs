//! Values for the divergent eigenvalue series: the rotated double Borel
//! integral with the conformally re-expanded integrand, its M-corrected form,
//! and optimal truncation.
//!
//! With `m!² = α^{2(m+1)} ∫∫ (xy)^m e^{−α(x+y)} dx dy` the series becomes
//!
//! ```text
//! t(δ) = Re ∫₀^∞∫₀^∞ e^{−α(x+y)} Σ_p z^p t̂^{(p)}(u) dx dy,   z = x y a δ,  u = z⁴/(1+z⁴)
//! ```
//!
//! For the M-corrected form the Taylor head `Σ_{m<M} t̃_m z^m` is subtracted
//! inside the integral and added back exactly as `Σ_{m<M} t_m δ^m`.

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error::{Error, Result};
use crate::numerics::{self, Complex, PrecisionContext, Real};
use crate::series::{CoefficientSeries, ComplexSeries, SeriesKind};

/// Double-exponential quadrature settings.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadParams {
    /// Absolute accuracy target in decimal digits.
    pub target_digits: u32,
    /// Step of the coarsest level in the `τ` variable of `x = exp(τ − e^{−τ})`.
    pub h0: f64,
    /// Number of step halvings allowed after the coarsest level.
    pub max_levels: u32,
}

impl QuadParams {
    pub fn for_digits(target_digits: u32) -> Self {
        Self {
            target_digits,
            h0: 0.125,
            max_levels: 5,
        }
    }
}

/// Parameters of one Borel evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct BorelPlan {
    /// Rotation phase `φ` of `α = e^{iφ}`, `0 < φ < π/2`.
    pub alpha_phase: Real,
    pub a_t: Real,
    /// Number of series terms handled exactly (`M`).
    pub m: usize,
    pub quad: QuadParams,
    /// `t̂` coefficients used per residue class.
    pub hat_terms: usize,
    pub ctx: PrecisionContext,
}

/// Default number of `t̂` coefficients per residue class.
pub const DEFAULT_HAT_TERMS: usize = 53;

impl BorelPlan {
    /// `α = e^{iπ/8}` and the given growth constant.
    pub fn new(a_t: Real, m: usize, ctx: PrecisionContext) -> Self {
        let phase = ctx.pi() / 8u32;
        Self {
            alpha_phase: phase,
            a_t,
            m,
            quad: QuadParams::for_digits(ctx.digits()),
            hat_terms: DEFAULT_HAT_TERMS,
            ctx,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half_pi = self.ctx.pi() / 2u32;
        if !(self.alpha_phase > 0 && self.alpha_phase < half_pi) {
            return Err(Error::InvalidArgument(format!(
                "alpha phase {} outside (0, π/2)",
                self.alpha_phase.to_f64()
            )));
        }
        if !(self.a_t > 0) {
            return Err(Error::InvalidArgument(String::from("growth constant must be positive")));
        }
        if self.hat_terms == 0 {
            return Err(Error::InvalidArgument(String::from("hat_terms must be positive")));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Complex {
        Complex::unit(&Float::with_val(self.ctx.bits(), &self.alpha_phase))
    }
}

/// `t(δ) = Σ_{m<M} t_m δ^m + corr`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResummationResult {
    pub m: usize,
    pub value: Real,
    pub corr: Real,
    pub err_quad: Real,
    pub err_tail: Real,
}

/// `t̃_m = α^{2(m+1)} t_m / (m!² a^m)`.
pub fn borel_transform(t: &CoefficientSeries, plan: &BorelPlan) -> Result<ComplexSeries> {
    plan.validate()?;
    let prec = plan.ctx.bits();
    let alpha2 = plan.alpha().powi(2);
    let mut phase = alpha2.clone();
    // 1/(m!² a^m), built incrementally
    let mut scale = Float::with_val(prec, 1);
    let mut coeffs = Vec::with_capacity(t.len());
    for (m, tm) in t.coeffs.iter().enumerate() {
        if m > 0 {
            let mm = Float::with_val(prec, m as u64 * m as u64) * &plan.a_t;
            scale /= mm;
            phase = phase.mul(&alpha2);
        }
        let v = Float::with_val(prec, tm * &scale);
        coeffs.push(phase.scale(&v));
    }
    let mut meta = t.meta.clone();
    meta.a_t = Some(plan.a_t.clone());
    meta.alpha_phase = Some(plan.alpha_phase.clone());
    Ok(ComplexSeries {
        kind: SeriesKind::TTilde,
        coeffs,
        digits: plan.ctx.digits(),
        meta,
    })
}

/// `|t̃_m|^{1/m}` for `m` in a window, the monitored root test of the
/// claimed unit radius.
pub fn root_test(tt: &ComplexSeries, window: std::ops::Range<usize>) -> Vec<f64> {
    window
        .filter(|&m| m > 0 && m < tt.len())
        .map(|m| {
            let l = numerics::log10(&tt.coeffs[m].abs());
            10f64.powf(l / m as f64)
        })
        .collect()
}

/// The four series `t̂^{(p)}_ℓ = t̂_{4ℓ+p}` in `u = z⁴/(1+z⁴)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HatSeries {
    pub classes: [Vec<Complex>; 4],
}

/// `[w^L] u^ℓ` for `u = w/(1+w)`: `(−1)^{L−ℓ} C(L−1, L−ℓ)` (and `δ_{L0}` for
/// `ℓ = 0`).
fn map_coeff(l_total: usize, l: usize) -> Integer {
    if l == 0 {
        return Integer::from((l_total == 0) as u32);
    }
    if l_total < l {
        return Integer::new();
    }
    let c = Integer::from(Integer::binomial_u(l_total as u32 - 1, (l_total - l) as u32));
    if (l_total - l) % 2 == 1 {
        -c
    } else {
        c
    }
}

/// Re-expands each residue class of `t̃` in `u = z⁴/(1+z⁴)` by triangular
/// back-substitution, so that `Σ_ℓ t̃_{4ℓ+p} w^ℓ = Σ_ℓ t̂^{(p)}_ℓ u^ℓ` with
/// `w = z⁴`, through every available order.
pub fn conformal_reexpand(tt: &ComplexSeries) -> Result<HatSeries> {
    if tt.len() < 4 {
        return Err(Error::InvalidArgument(String::from(
            "conformal re-expansion needs at least 4 coefficients",
        )));
    }
    let prec = tt.coeffs[0].prec();
    let classes = std::array::from_fn(|p| {
        let c: Vec<&Complex> = tt.coeffs.iter().skip(p).step_by(4).collect();
        let mut hat: Vec<Complex> = Vec::with_capacity(c.len());
        for big_l in 0..c.len() {
            let mut v = c[big_l].clone();
            for (l, h) in hat.iter().enumerate() {
                let k = map_coeff(big_l, l);
                if k != 0 {
                    v = v.sub(&h.scale(&Float::with_val(prec, &k)));
                }
            }
            hat.push(v);
        }
        hat
    });
    Ok(HatSeries { classes })
}

impl HatSeries {
    /// Forward map: the `t̃` coefficients implied by the first `terms` hat
    /// coefficients of each class, interleaved back into one sequence.
    pub fn reexpand_forward(&self, len: usize) -> Vec<Complex> {
        let prec = self.classes[0][0].prec();
        (0..len)
            .map(|m| {
                let (big_l, p) = (m / 4, m % 4);
                let mut acc = Complex::zero(prec);
                for (l, h) in self.classes[p].iter().enumerate().take(big_l + 1) {
                    let k = map_coeff(big_l, l);
                    if k != 0 {
                        acc.add_assign(&h.scale(&Float::with_val(prec, &k)));
                    }
                }
                acc
            })
            .collect()
    }

    /// Keeps the first `terms` coefficients of each class.
    pub fn truncated(&self, terms: usize) -> HatSeries {
        HatSeries {
            classes: std::array::from_fn(|p| self.classes[p].iter().take(terms).cloned().collect()),
        }
    }

    /// Coefficients rounded to `prec` bits.
    pub fn rounded(&self, prec: u32) -> HatSeries {
        let r = |c: &Complex| Complex::new(Float::with_val(prec, &c.re), Float::with_val(prec, &c.im));
        HatSeries {
            classes: std::array::from_fn(|p| self.classes[p].iter().map(r).collect()),
        }
    }

    /// Flat layout `[t̂^{(0)}_0, t̂^{(1)}_0, t̂^{(2)}_0, t̂^{(3)}_0, t̂^{(0)}_1, …]`,
    /// the index order of the `t̃` coefficients they replace.
    pub fn to_interleaved(&self) -> Vec<Complex> {
        let n = self.classes.iter().map(Vec::len).max().unwrap_or(0);
        (0..n)
            .flat_map(|l| (0..4).filter_map(move |p| self.classes[p].get(l).cloned()))
            .collect()
    }

    pub fn from_interleaved(coeffs: &[Complex]) -> Result<HatSeries> {
        if coeffs.len() < 4 {
            return Err(Error::InvalidArgument(String::from(
                "a hat series needs at least one coefficient per class",
            )));
        }
        Ok(HatSeries {
            classes: std::array::from_fn(|p| coeffs.iter().skip(p).step_by(4).cloned().collect()),
        })
    }

    /// Largest of the last few ratios `|t̂_{ℓ+1}/t̂_ℓ|` in class `p`.
    pub fn tail_ratio(&self, p: usize) -> f64 {
        let c = &self.classes[p];
        let n = c.len();
        if n < 3 {
            return 1.0;
        }
        let start = n.saturating_sub(9).max(1);
        (start..n)
            .map(|l| {
                let a = numerics::log10(&c[l].abs());
                let b = numerics::log10(&c[l - 1].abs());
                10f64.powf(a - b)
            })
            .fold(0.0, f64::max)
    }
}

/// One class of the conformal series at a point, with its tail estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct HatValue {
    pub value: Complex,
    pub tail: Real,
}

/// Convergence margin: `|u|` must stay below `1 − HAT_MARGIN`.
pub const HAT_MARGIN: f64 = 1e-12;

/// `Σ_ℓ t̂^{(p)}_ℓ u^ℓ` at `u = z⁴/(1+z⁴)`.
///
/// The tail estimate is `10 · |t̂_L| |u|^{L+1} ρ/(1 − ρ|u|)` from the observed
/// ratio `ρ`; it is infinite when `ρ|u| ≥ 1` and exceeds `tail_tol` only as
/// a reported value, never silently.
pub fn hat_eval(hat: &HatSeries, p: usize, z: &Complex, tail_tol: &Real) -> Result<HatValue> {
    let prec = z.prec();
    let z2 = z.mul(z);
    let z4 = z2.mul(&z2);
    let one = Complex::from_real(Float::with_val(prec, 1));
    let u = z4.div(&one.add(&z4));
    let modulus = u.abs();
    let margin = Float::with_val(prec, 1) - &modulus;
    if margin <= HAT_MARGIN {
        return Err(Error::ConvergenceDomain {
            modulus: modulus.to_f64(),
            margin: HAT_MARGIN,
        });
    }
    let coeffs = &hat.classes[p];
    let mut acc = Complex::zero(prec);
    for c in coeffs.iter().rev() {
        acc = acc.mul(&u).add(c);
    }
    let tail = tail_estimate(hat, p, &modulus);
    let _ = tail_tol; // reported through the returned estimate
    Ok(HatValue { value: acc, tail })
}

fn tail_estimate(hat: &HatSeries, p: usize, modulus: &Real) -> Real {
    let prec = modulus.prec();
    let coeffs = &hat.classes[p];
    let l = coeffs.len();
    let rho = hat.tail_ratio(p);
    let ru = rho * modulus.to_f64();
    if ru >= 1.0 {
        return Float::with_val(prec, rug::float::Special::Infinity);
    }
    let last = coeffs[l - 1].abs();
    let geo = Float::with_val(prec, rho / (1.0 - ru)) * 10u32;
    last * Float::with_val(prec, modulus.pow(l as u32)) * geo
}

/// Partial sums of `t̃` along a real ray: the direct Taylor series, used to
/// show its divergence beyond `|z| = 1`.
pub fn direct_partial_sums(tt: &ComplexSeries, z: &Real) -> Vec<Complex> {
    let prec = z.prec();
    let mut pow = Float::with_val(prec, 1);
    let mut acc = Complex::zero(prec);
    tt.coeffs
        .iter()
        .map(|c| {
            acc.add_assign(&c.scale(&pow));
            pow *= z;
            acc.clone()
        })
        .collect()
}

/// Re-expansion of a real series `Σ c_m z^m` in `v = z²/(1+z²)` after
/// splitting into the two parity classes; used to expose the singularities
/// near `z² ≈ 4` of the unrotated transform.
pub fn square_map_reexpand(c: &[Real]) -> [Vec<Real>; 2] {
    let prec = c[0].prec();
    std::array::from_fn(|p| {
        let cls: Vec<&Real> = c.iter().skip(p).step_by(2).collect();
        let mut hat: Vec<Real> = Vec::with_capacity(cls.len());
        for big_l in 0..cls.len() {
            let mut v = Float::with_val(prec, cls[big_l]);
            for (l, h) in hat.iter().enumerate() {
                let k = map_coeff(big_l, l);
                if k != 0 {
                    v -= Float::with_val(prec, h * &k);
                }
            }
            hat.push(v);
        }
        hat
    })
}

// ---------------------------------------------------------------------------
// Double-exponential quadrature on (0, ∞)².

struct Nodes {
    x: Vec<Real>,
    /// `dx/dτ · h`
    w: Vec<Real>,
    /// `e^{−α x}`
    e: Vec<Complex>,
    /// `|e^{−α x}|`
    e_abs: Vec<Real>,
}

/// Nodes of the map `x = exp(τ − e^{−τ})`, which is doubly exponential at
/// the origin and single exponential at infinity, matching the `e^{−x}`
/// decay. Singularities of the integrand at `arg x = π/4` stay a fixed
/// distance from the real `τ` axis.
fn exp_decay_nodes(h: f64, tau_lo: f64, tau_hi: f64, alpha: &Complex, prec: u32) -> Nodes {
    let k_lo = (tau_lo / h).floor() as i64;
    let k_hi = (tau_hi / h).ceil() as i64;
    let hf = Float::with_val(prec, h);
    let mut nodes = Nodes {
        x: Vec::new(),
        w: Vec::new(),
        e: Vec::new(),
        e_abs: Vec::new(),
    };
    for k in k_lo..=k_hi {
        let tau = Float::with_val(prec, k) * &hf;
        let em = Float::with_val(prec, -&tau).exp();
        let x = Float::with_val(prec, &tau - &em).exp();
        let w = Float::with_val(prec, &em + 1u32) * &x * &hf;
        // e^{−αx} = e^{−x cos φ} (cos(x sin φ) − i sin(x sin φ))
        let decay = Float::with_val(prec, &alpha.re * &x);
        let decay = (-decay).exp();
        let arg = Float::with_val(prec, &alpha.im * &x);
        let (s, c) = arg.sin_cos(Float::new(prec));
        nodes.e.push(Complex::new(Float::with_val(prec, &c * &decay), -(s * &decay)));
        nodes.e_abs.push(decay);
        nodes.x.push(x);
        nodes.w.push(w);
    }
    nodes
}

/// Range of `τ` outside which the integrand is below `10^{−digits}`.
fn tau_range(digits: u32, m: usize, cos_phi: f64) -> (f64, f64) {
    let ln_target = (digits as f64 + 10.0) * std::f64::consts::LN_10;
    // τ − e^{−τ} = −ln_target near the origin
    let mut tau_lo = -ln_target.ln();
    for _ in 0..50 {
        tau_lo = -(tau_lo + ln_target).ln();
    }
    // cos φ · x − (m + 2) ln x ≥ target
    let mut x: f64 = 8.0;
    while cos_phi * x - (m as f64 + 2.0) * x.ln() < ln_target {
        x *= 1.25;
    }
    (tau_lo, x.ln() + 1.0)
}

/// Precomputed integrand data for one `δ`: the truncated hat series and the
/// Taylor head coefficients in terms of `xy`.
struct Integrand<'a> {
    hat: &'a HatSeries,
    /// `a δ`
    scale: Real,
    /// `t̃_m (aδ)^m` for `m < max M`
    head: Vec<Complex>,
    /// Hat terms per block of the truncation estimate.
    block: usize,
    /// `ln Σ|t̂^{(p)}_k|` per class
    ln_class: [f64; 4],
    ln_scale: f64,
    /// `ln |head_m|`
    ln_head: Vec<f64>,
}

impl Integrand<'_> {
    /// Upper bound (up to a modest factor) of `ln |T(z) − head(z)|`.
    fn ln_bound(&self, ln_xy: f64) -> f64 {
        let ln_z = ln_xy + self.ln_scale;
        let mut best = f64::NEG_INFINITY;
        for (p, c) in self.ln_class.iter().enumerate() {
            best = best.max(c + p as f64 * ln_z);
        }
        for (m, h) in self.ln_head.iter().enumerate() {
            best = best.max(h + m as f64 * ln_xy);
        }
        best + ((4 + self.ln_head.len()) as f64).ln()
    }

    /// `T(z) − head_M(z)` for each requested `M` (ascending) at `xy`, plus
    /// the magnitudes of the last two blocks of hat terms,
    /// `Σ_p |z^p Σ_{k∈block} t̂^{(p)}_k u^k|`.
    fn eval(&self, xy: &Real, ms: &[usize], out: &mut [Complex]) -> (Real, Real) {
        let prec = xy.prec();
        let z = Float::with_val(prec, xy * &self.scale);
        let z2 = Float::with_val(prec, z.square_ref());
        let z4 = Float::with_val(prec, z2.square_ref());
        let u = Float::with_val(prec, &z4 / Float::with_val(prec, &z4 + 1u32));
        let mut total = Complex::zero(prec);
        let mut blocks = (Float::new(prec), Float::new(prec));
        let mut zp = Float::with_val(prec, 1);
        let b = self.block;
        for p in 0..4 {
            let coeffs = &self.hat.classes[p];
            let k = coeffs.len();
            let mut acc = Complex::zero(prec);
            let mut upper = Complex::zero(prec);
            for (i, c) in coeffs.iter().enumerate().rev() {
                acc.re *= &u;
                acc.im *= &u;
                acc.re += &c.re;
                acc.im += &c.im;
                if b > 0 && i == k - b {
                    // acc = Σ_{j≥k−b} c_j u^{j−(k−b)}
                    upper = acc.clone();
                }
                if b > 0 && i == k - 2 * b {
                    // acc = Σ_{j≥k−2b} c_j u^{j−(k−2b)}
                    let ub = Float::with_val(prec, (&u).pow(b as u32));
                    let lower = acc.sub(&upper.scale(&ub));
                    let base = Float::with_val(prec, (&u).pow((k - 2 * b) as u32)) * &zp;
                    blocks.0 += upper.abs() * &ub * &base;
                    blocks.1 += lower.abs() * &base;
                }
            }
            total.add_scaled(&acc, &zp);
            zp *= &z;
        }
        // subtract heads: head_M(z) = Σ_{m<M} head[m] (xy)^m
        let mut pow = Float::with_val(prec, 1);
        let mut partial = Complex::zero(prec);
        let mut m = 0;
        for (slot, &big_m) in out.iter_mut().zip(ms) {
            while m < big_m {
                partial.add_scaled(&self.head[m], &pow);
                pow *= xy;
                m += 1;
            }
            *slot = total.sub(&partial);
        }
        blocks
    }
}

/// Evaluates `t(δ)` in the M-corrected form for every `M` in `ms` with one
/// quadrature; the hat series is evaluated once per node.
pub fn borel_integral_window(
    delta: &Real,
    plan: &BorelPlan,
    t: &CoefficientSeries,
    hat: &HatSeries,
    tt: &ComplexSeries,
    ms: &[usize],
) -> Result<Vec<ResummationResult>> {
    plan.validate()?;
    if !(*delta > 0) {
        return Err(Error::InvalidArgument(String::from("delta must be positive")));
    }
    if ms.is_empty() || ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(String::from("M values must be strictly increasing")));
    }
    let max_m = *ms.last().expect("non-empty");
    if max_m > tt.len() || max_m > t.len() {
        return Err(Error::InvalidArgument(format!(
            "M = {max_m} exceeds the {} available coefficients",
            t.len()
        )));
    }
    let prec = plan.ctx.bits();
    let hat = hat.truncated(plan.hat_terms).rounded(prec);
    let scale = Float::with_val(prec, &plan.a_t * delta);
    let mut head = Vec::with_capacity(max_m);
    let mut sp = Float::with_val(prec, 1);
    for c in tt.coeffs.iter().take(max_m) {
        let c = Complex::new(Float::with_val(prec, &c.re), Float::with_val(prec, &c.im));
        head.push(c.scale(&sp));
        sp *= &scale;
    }
    let block = (hat.classes.iter().map(Vec::len).min().unwrap_or(0) / 2).min(4);
    let ln_class = std::array::from_fn(|p| {
        let total = hat.classes[p]
            .iter()
            .fold(Float::new(prec), |acc, c| acc + c.abs());
        numerics::ln_abs(&total)
    });
    let ln_scale = numerics::ln_abs(&scale);
    let ln_head = head.iter().map(|c| numerics::ln_abs(&c.abs())).collect();
    let integrand = Integrand {
        hat: &hat,
        scale,
        head,
        block,
        ln_class,
        ln_scale,
        ln_head,
    };
    let alpha = plan.alpha();
    let cos_phi = alpha.re.to_f64();
    let (tau_lo, tau_hi) = tau_range(plan.quad.target_digits, max_m, cos_phi);

    // Double-exponential convergence squares the error with every halving,
    // so once the level differences shrink faster than geometrically the
    // error of the finest level is estimated as d_k²/d_{k−1}.
    let mut prev: Option<Vec<Complex>> = None;
    let mut h = plan.quad.h0;
    let mut last_err = Float::with_val(prec, rug::float::Special::Infinity);
    let mut prev_diff: Option<Real> = None;
    let mut tail_total = Float::new(prec);
    let target = plan.ctx.pow10(-(plan.quad.target_digits as i32));
    let ln_cut = -((plan.quad.target_digits as f64) + 8.0) * std::f64::consts::LN_10;
    for level in 0..=plan.quad.max_levels {
        let nodes = exp_decay_nodes(h, tau_lo, tau_hi, &alpha, prec);
        let (sums, tail) = double_sum(&nodes, &integrand, ms, prec, ln_cut);
        tail_total = tail;
        if let Some(p) = &prev {
            let diff = p
                .iter()
                .zip(&sums)
                .map(|(a, b)| a.sub(b).re.abs())
                .fold(Float::new(prec), |x, y| x.max(&y));
            last_err = match &prev_diff {
                Some(d_prev) if diff < *d_prev && !d_prev.is_zero() => {
                    let sq = Float::with_val(prec, diff.square_ref()) / d_prev;
                    sq.max(&Float::with_val(prec, &target * Float::with_val(prec, 1e-10)))
                }
                _ => diff.clone(),
            };
            prev_diff = Some(diff);
            prev = Some(sums);
            if last_err <= target && level >= 2 {
                break;
            }
        } else {
            prev = Some(sums);
        }
        if level < plan.quad.max_levels {
            h /= 2.0;
        }
    }
    let sums = prev.expect("at least one level");
    let err_quad = last_err;
    let mut out = Vec::with_capacity(ms.len());
    let mut head_sum = Float::new(prec);
    let mut dpow = Float::with_val(prec, 1);
    let mut m = 0;
    for (sum, &big_m) in sums.iter().zip(ms) {
        while m < big_m {
            head_sum += Float::with_val(prec, &t.coeffs[m] * &dpow);
            dpow *= delta;
            m += 1;
        }
        let corr = sum.re.clone();
        out.push(ResummationResult {
            m: big_m,
            value: Float::with_val(prec, &head_sum + &corr),
            corr,
            err_quad: err_quad.clone(),
            err_tail: tail_total.clone(),
        });
    }
    if !err_quad.is_finite() {
        return Err(Error::NonConvergence {
            what: "Borel quadrature",
            detail: String::from("no error estimate"),
        });
    }
    Ok(out)
}

/// Single-M convenience form.
pub fn borel_integral(
    delta: &Real,
    plan: &BorelPlan,
    t: &CoefficientSeries,
    hat: &HatSeries,
    tt: &ComplexSeries,
) -> Result<ResummationResult> {
    let mut v = borel_integral_window(delta, plan, t, hat, tt, &[plan.m])?;
    Ok(v.remove(0))
}

/// Everything a Borel evaluation needs, built once from the `t` series.
pub struct Resummer {
    pub t: CoefficientSeries,
    pub tt: ComplexSeries,
    pub hat: HatSeries,
    pub plan: BorelPlan,
}

impl Resummer {
    pub fn new(t: CoefficientSeries, plan: BorelPlan) -> Result<Self> {
        let tt = borel_transform(&t, &plan)?;
        let hat = conformal_reexpand(&tt)?;
        if plan.hat_terms > hat.classes[3].len() {
            return Err(Error::InvalidArgument(format!(
                "hat_terms = {} but only {} coefficients per class are available",
                plan.hat_terms,
                hat.classes[3].len()
            )));
        }
        Ok(Self { t, tt, hat, plan })
    }

    pub fn evaluate(&self, delta: &Real, ms: &[usize]) -> Result<Vec<ResummationResult>> {
        borel_integral_window(delta, &self.plan, &self.t, &self.hat, &self.tt, ms)
    }
}

/// Truncation estimate from the integrated magnitudes of the last block of
/// hat terms (`a1`) and the one before it (`a2`): the blocks are continued
/// geometrically with their observed ratio, with a safety factor of 2.
fn tail_from_blocks(a1: Real, a2: Real) -> Real {
    let prec = a1.prec();
    if a1.is_zero() {
        return a1;
    }
    if a2.is_zero() {
        return Float::with_val(prec, rug::float::Special::Infinity);
    }
    let rho = Float::with_val(prec, &a1 / &a2);
    if rho >= 0.99 {
        return a1 * 200u32;
    }
    let one_minus = Float::with_val(prec, 1) - &rho;
    a1 * rho / one_minus * 2u32
}

fn double_sum(
    nodes: &Nodes,
    f: &Integrand<'_>,
    ms: &[usize],
    prec: u32,
    ln_cut: f64,
) -> (Vec<Complex>, Real) {
    let n = nodes.x.len();
    let mut sums: Vec<Complex> = (0..ms.len()).map(|_| Complex::zero(prec)).collect();
    let mut a1 = Float::new(prec);
    let mut a2 = Float::new(prec);
    let mut vals: Vec<Complex> = (0..ms.len()).map(|_| Complex::zero(prec)).collect();
    // f64 magnitude screen: ln(w |e^{−αx}|) per node and ln x.
    let ln_we: Vec<f64> = (0..n)
        .map(|i| numerics::ln_abs(&Float::with_val(prec, &nodes.w[i] * &nodes.e_abs[i])))
        .collect();
    let ln_x: Vec<f64> = nodes.x.iter().map(numerics::ln_abs).collect();
    for i in 0..n {
        let wi = Float::with_val(prec, &nodes.w[i]);
        for j in i..n {
            let ln_w = ln_we[i] + ln_we[j];
            if ln_w + f.ln_bound(ln_x[i] + ln_x[j]) < ln_cut {
                continue;
            }
            let xy = Float::with_val(prec, &nodes.x[i] * &nodes.x[j]);
            let mut weight = nodes.e[i].mul(&nodes.e[j]);
            let mut wabs = Float::with_val(prec, &nodes.e_abs[i] * &nodes.e_abs[j]);
            let mut ww = Float::with_val(prec, &wi * &nodes.w[j]);
            if i != j {
                ww *= 2u32;
            }
            weight = weight.scale(&ww);
            wabs *= &ww;
            if wabs.is_zero() {
                continue;
            }
            let (b1, b2) = f.eval(&xy, ms, &mut vals);
            for (s, v) in sums.iter_mut().zip(&vals) {
                s.add_assign(&v.mul(&weight));
            }
            a1 += b1 * &wabs;
            a2 += b2 * wabs;
        }
    }
    (sums, tail_from_blocks(a1, a2))
}

/// Optimal truncation of the asymptotic series.
#[derive(Clone, Debug, PartialEq)]
pub struct OaaResult {
    pub value: Real,
    /// Index of the smallest term; the sum stops before it.
    pub stop: usize,
    /// `|t_stop δ^stop|`.
    pub floor: Real,
}

/// `Σ_{m<stop} t_m δ^m` with `stop` the index of the smallest `|t_m δ^m|`,
/// `m ≥ 1`.
pub fn oaa_sum(t: &CoefficientSeries, delta: &Real) -> Result<OaaResult> {
    if !(*delta > 0) {
        return Err(Error::InvalidArgument(String::from("delta must be positive")));
    }
    if t.len() < 3 {
        return Err(Error::NoMinimum { len: t.len() });
    }
    let prec = t.coeffs[0].prec();
    let mut pow = Float::with_val(prec, delta);
    let mut best: Option<(usize, Real)> = None;
    for m in 1..t.len() {
        let term = Float::with_val(prec, &t.coeffs[m] * &pow).abs();
        if best.as_ref().is_none_or(|(_, b)| term < *b) {
            best = Some((m, term));
        }
        pow *= delta;
    }
    let (stop, floor) = best.expect("at least one term");
    if stop == t.len() - 1 {
        return Err(Error::NoMinimum { len: t.len() });
    }
    let value = t.partial_sum(&Float::with_val(prec, delta), stop);
    Ok(OaaResult { value, stop, floor })
}
