//! The comparison experiment: coefficient caches, WKB eigenvalues by optimal
//! truncation and by Borel summation, exact eigenvalues, and the CSV and SVG
//! artifacts built from them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rug::ops::Pow;
use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::numerics::{self, PrecisionContext, Real};
use crate::resum::{self, BorelPlan, HatSeries, QuadParams, ResummationResult, DEFAULT_HAT_TERMS};
use crate::series::{self, CoefficientSeries, ComplexSeries, GrowthModel, SeriesKind};
use crate::spectral;
use crate::wkb::{self, QuantizationSeries};

/// Settings of one comparison run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_from: usize,
    pub n_to: usize,
    /// Eigensolver digits; `None` selects [`eigen_digits`] per level.
    pub digits: Option<u32>,
    /// Precision of the cached coefficient series.
    pub series_digits: u32,
    /// Number of `t` coefficients (`t_0 … t_{order−1}`).
    pub order: usize,
    /// Rotation phase of `α`; `None` is `π/8`.
    pub alpha_phase: Option<f64>,
    pub window_center: f64,
    pub window_half_width: usize,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_from: 0,
            n_to: 8,
            digits: None,
            series_digits: 300,
            order: 212,
            alpha_phase: None,
            window_center: 2.2,
            window_half_width: 3,
            cache_dir: PathBuf::from("cache"),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_from > self.n_to {
            return Err(Error::InvalidArgument(format!(
                "empty level range {}..={}",
                self.n_from, self.n_to
            )));
        }
        if self.order < 24 {
            return Err(Error::InvalidArgument(format!("order {} is below 24", self.order)));
        }
        if !(self.window_center > 0.0 && self.window_center.is_finite()) {
            return Err(Error::InvalidArgument(String::from("window center must be positive")));
        }
        if let Some(phi) = self.alpha_phase {
            if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) {
                return Err(Error::InvalidArgument(format!("alpha phase {phi} outside (0, π/2)")));
            }
        }
        PrecisionContext::new(self.series_digits)?;
        if let Some(d) = self.digits {
            PrecisionContext::new(d)?;
        }
        Ok(())
    }

    /// The `M` values used at level `n`: `2·half_width + 1` consecutive
    /// integers centred on `⌈center·n⌉`, shifted to stay inside `[0, order)`.
    pub fn m_window(&self, n: usize) -> Vec<usize> {
        let width = 2 * self.window_half_width + 1;
        let c = (self.window_center * n as f64).ceil() as usize;
        let lo = c.saturating_sub(self.window_half_width).min(self.order.saturating_sub(width));
        (lo..lo + width).collect()
    }

    fn series_ctx(&self) -> Result<PrecisionContext> {
        PrecisionContext::new(self.series_digits)
    }

    fn phase(&self, ctx: &PrecisionContext) -> Real {
        match self.alpha_phase {
            Some(phi) => ctx.real(phi),
            None => ctx.pi() / 8u32,
        }
    }
}

/// Eigensolver precision for level `n`: `max(120, ⌈πN/ln 10⌉ + 60)`.
pub fn eigen_digits(n: usize) -> u32 {
    let need = (std::f64::consts::PI * n as f64 / std::f64::consts::LN_10).ceil() as u32 + 60;
    need.max(120)
}

/// Quadrature target for level `n`: twenty digits below `e^{−πN}`.
pub fn quad_digits(n: usize) -> u32 {
    let need = (std::f64::consts::PI * n as f64 / std::f64::consts::LN_10).ceil() as u32 + 20;
    need.max(30)
}

/// Fit window for the growth constant: `[120, 200]` when the series is long
/// enough, otherwise its upper half (at least 20 points).
pub fn fit_window(len: usize) -> std::ops::Range<usize> {
    if len >= 202 {
        120..201
    } else {
        (len / 2).min(len.saturating_sub(21))..len - 1
    }
}

// ---------------------------------------------------------------------------
// Coefficient caches.

/// Everything the comparison needs from the expansion side.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub q: QuantizationSeries,
    pub r: CoefficientSeries,
    pub s: CoefficientSeries,
    pub t: CoefficientSeries,
    pub growth: GrowthModel,
    pub tt: ComplexSeries,
    pub hat: HatSeries,
    /// Files written by this call; empty when every cache was reused.
    pub written: Vec<PathBuf>,
}

pub const Q_FILE: &str = "quantization.txt";

pub fn cache_path(dir: &Path, kind: SeriesKind) -> PathBuf {
    dir.join(format!("{}.txt", kind.name()))
}

enum Verdict {
    Reuse,
    Regenerate,
}

fn mismatch(path: &Path, expected: String, found: String) -> Error {
    Error::MetadataMismatch {
        path: path.to_path_buf(),
        expected,
        found,
    }
}

/// Reuse when the structural parameters match and the stored precision is
/// at least the requested one; regenerate when only the precision is short.
fn judge(path: &Path, len: (usize, usize), n_max: (usize, usize), digits: (u32, u32), guard: (u32, u32)) -> Result<Verdict> {
    if len.0 != len.1 {
        return Err(mismatch(path, format!("len {}", len.0), format!("len {}", len.1)));
    }
    if n_max.0 != n_max.1 {
        return Err(mismatch(path, format!("n_max {}", n_max.0), format!("n_max {}", n_max.1)));
    }
    if guard.0 != guard.1 {
        return Err(mismatch(path, format!("guard {}", guard.0), format!("guard {}", guard.1)));
    }
    Ok(if digits.1 >= digits.0 {
        Verdict::Reuse
    } else {
        Verdict::Regenerate
    })
}

fn load_real(path: &Path, want_len: usize, n_max: usize, ctx: &PrecisionContext) -> Result<Option<CoefficientSeries>> {
    if !path.exists() {
        return Ok(None);
    }
    let s = CoefficientSeries::read_cache(path)?;
    match judge(
        path,
        (want_len, s.len()),
        (n_max, s.meta.n_max),
        (ctx.digits(), s.digits),
        (ctx.guard(), s.meta.guard),
    )? {
        Verdict::Reuse => Ok(Some(s)),
        Verdict::Regenerate => Ok(None),
    }
}

fn reals_agree(a: &Real, b: &Real, digits: u32) -> bool {
    numerics::agreeing_digits(a, b, a) >= f64::from(digits.saturating_sub(5))
}

fn load_complex(
    path: &Path,
    want_len: usize,
    n_max: usize,
    ctx: &PrecisionContext,
    a_t: &Real,
    phase: &Real,
) -> Result<Option<ComplexSeries>> {
    if !path.exists() {
        return Ok(None);
    }
    let s = ComplexSeries::read_cache(path)?;
    let verdict = judge(
        path,
        (want_len, s.len()),
        (n_max, s.meta.n_max),
        (ctx.digits(), s.digits),
        (ctx.guard(), s.meta.guard),
    )?;
    let cached_phase = s.meta.alpha_phase.as_ref();
    match cached_phase {
        Some(p) if (p.to_f64() - phase.to_f64()).abs() <= 1e-15 * phase.to_f64().abs() => {}
        _ => {
            return Err(mismatch(
                path,
                format!("alpha_phase {}", phase.to_f64()),
                format!("alpha_phase {:?}", cached_phase.map(|p| p.to_f64())),
            ))
        }
    }
    if matches!(verdict, Verdict::Regenerate) {
        return Ok(None);
    }
    // a_t follows from t; a different value means t changed underneath
    match &s.meta.a_t {
        Some(a) if reals_agree(a_t, a, s.digits.min(ctx.digits()).min(30)) => Ok(Some(s)),
        other => Err(mismatch(
            path,
            format!("a_t {}", a_t.to_f64()),
            format!("a_t {:?}", other.as_ref().map(|a| a.to_f64())),
        )),
    }
}

fn load_quantization(path: &Path, n_max: usize) -> Result<Option<QuantizationSeries>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = crate::io::read_to_string(path)?;
    let q = QuantizationSeries::parse_export(&text, &path.display().to_string())?;
    if q.max_order != n_max {
        return Err(mismatch(path, format!("n_max {n_max}"), format!("n_max {}", q.max_order)));
    }
    Ok(Some(q))
}

/// Builds or reuses the `q`, `r`, `s`, `t`, `t̃` and `t̂` caches under
/// `cfg.cache_dir`.
///
/// A cache is reused when its metadata matches `cfg`; one built with fewer
/// digits than requested is regenerated; any other difference is a
/// [`Error::MetadataMismatch`]. Corrupted files are reported, never replaced.
pub fn cache_coefficients(cfg: &RunConfig) -> Result<Coefficients> {
    cfg.validate()?;
    let dir = &cfg.cache_dir;
    let ctx = cfg.series_ctx()?;
    let n_max = series::required_order(cfg.order).max(2);
    let mut written = Vec::new();

    let q_path = dir.join(Q_FILE);
    let (r_path, s_path, t_path) = (
        cache_path(dir, SeriesKind::R),
        cache_path(dir, SeriesKind::S),
        cache_path(dir, SeriesKind::T),
    );
    // r has n_max/2 + 1 entries, s one more than t
    let q_cached = load_quantization(&q_path, n_max)?;
    let r_len = q_cached.as_ref().map(|q| q.max_order / 2 + 1);
    let cached = (
        r_len.map(|len| load_real(&r_path, len, n_max, &ctx)).transpose()?.flatten(),
        load_real(&s_path, cfg.order + 1, n_max, &ctx)?,
        load_real(&t_path, cfg.order, n_max, &ctx)?,
    );
    let (q, r, s, t) = match (q_cached, cached) {
        (Some(q), (Some(r), Some(s), Some(t))) => (q, r, s, t),
        (q_cached, _) => {
            let q = match q_cached {
                Some(q) => q,
                None => {
                    let q = wkb::quantization_series(n_max)?;
                    let mut buf = Vec::new();
                    q.write_export(&mut buf).map_err(|e| Error::io(&q_path, e))?;
                    crate::io::write_atomic(&q_path, &buf)?;
                    written.push(q_path.clone());
                    q
                }
            };
            let (r, s, t) = series::series_from_quantization(&q, cfg.order, &ctx)?;
            for (series, path) in [(&r, &r_path), (&s, &s_path), (&t, &t_path)] {
                series.write_cache(path)?;
                written.push(path.clone());
            }
            (q, r, s, t)
        }
    };

    // short series cannot pin a_t to the default tolerance; a looser a_t only
    // slows the Borel convergence
    let tol = if t.len() >= 202 { series::FIT_TOLERANCE } else { 1e-4 };
    let growth = series::fit_growth_with(&t, &Rational::from((-5, 2)), fit_window(t.len()), tol)?;
    let phase = cfg.phase(&ctx);
    let (tt_path, hat_path) = (cache_path(dir, SeriesKind::TTilde), cache_path(dir, SeriesKind::THat));
    let fresh_t = written.contains(&t_path);
    let tt_cached = if fresh_t {
        None
    } else {
        load_complex(&tt_path, t.len(), n_max, &ctx, &growth.a, &phase)?
    };
    let hat_cached = if fresh_t {
        None
    } else {
        load_complex(&hat_path, t.len(), n_max, &ctx, &growth.a, &phase)?
    };
    let (tt, hat) = match (tt_cached, hat_cached) {
        (Some(tt), Some(h)) => (tt, HatSeries::from_interleaved(&h.coeffs)?),
        _ => {
            let mut plan = BorelPlan::new(Float::with_val(ctx.bits(), &growth.a), 0, ctx);
            plan.alpha_phase = phase;
            let tt = resum::borel_transform(&t, &plan)?;
            let hat = resum::conformal_reexpand(&tt)?;
            let hat_series = ComplexSeries {
                kind: SeriesKind::THat,
                coeffs: hat.to_interleaved(),
                digits: tt.digits,
                meta: tt.meta.clone(),
            };
            tt.write_cache(&tt_path)?;
            hat_series.write_cache(&hat_path)?;
            written.push(tt_path);
            written.push(hat_path);
            (tt, hat)
        }
    };
    Ok(Coefficients {
        q,
        r,
        s,
        t,
        growth,
        tt,
        hat,
        written,
    })
}

// ---------------------------------------------------------------------------
// Per-level comparison.

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRecord {
    pub n: usize,
    /// `δ_N = (N + 1/2)^{−2}`
    pub delta: Real,
    pub e_exact: Real,
    pub e_oaa: Real,
    /// Mean of the Borel values over the `M` window.
    pub e_borel: Real,
    /// Standard deviation of the Borel values over the window.
    pub sigma: Real,
    /// `E_exact − E_borel`
    pub delta_e: Real,
    pub sign: i8,
    /// Smallest OAA term in energy units.
    pub floor: Real,
}

/// Diagnostics kept alongside a record.
#[derive(Clone, Debug)]
pub struct LevelDetails {
    pub oaa_stop: usize,
    /// Borel values in units of the bracket `t`, one per window `M`.
    pub window: Vec<ResummationResult>,
    /// Borel values in energy units, one per window `M`.
    pub window_energies: Vec<Real>,
    /// Quadrature and truncation estimates in energy units.
    pub err_quad: Real,
    pub err_tail: Real,
    pub eigen: spectral::EigenResult,
    /// `σ + err_quad + err_tail + eigensolver error`
    pub uncertainty: Real,
    /// `|Δ_N|` does not exceed ten times the combined uncertainty.
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub record: ComparisonRecord,
    pub details: LevelDetails,
}

/// Runs the comparison for every level of `cfg`, generating or reusing the
/// coefficient caches first.
pub fn run_compare(cfg: &RunConfig) -> Result<Vec<Comparison>> {
    let coeffs = cache_coefficients(cfg)?;
    (cfg.n_from..=cfg.n_to).map(|n| compare_level(&coeffs, cfg, n)).collect()
}

/// Comparison at one level with already available coefficients.
pub fn compare_level(coeffs: &Coefficients, cfg: &RunConfig, n: usize) -> Result<Comparison> {
    let ectx = PrecisionContext::new(cfg.digits.unwrap_or_else(|| eigen_digits(n)))?;
    let eigen = spectral::solve_eigenvalue(n, &ectx)?;
    let delta = series::delta_n(n, &ectx);
    let c = numerics::leading_const(&ectx)?;
    let to_energy = {
        let p = Float::with_val(ectx.bits(), &delta).pow(&ectx.rational(&Rational::from((-2, 3))));
        c * p
    };
    let energy = |t: &Real| Float::with_val(ectx.bits(), t * &to_energy);

    let oaa = resum::oaa_sum(&coeffs.t, &delta)?;
    let e_oaa = energy(&oaa.value);
    let floor = energy(&oaa.floor);

    let qd = quad_digits(n);
    let wctx = PrecisionContext::new(qd + 20)?;
    let mut plan = BorelPlan::new(Float::with_val(wctx.bits(), &coeffs.growth.a), 0, wctx);
    plan.alpha_phase = cfg.phase(&wctx);
    plan.quad = QuadParams::for_digits(qd);
    plan.hat_terms = DEFAULT_HAT_TERMS.min(coeffs.hat.classes[3].len());
    let ms = cfg.m_window(n);
    plan.m = ms[0];
    let wdelta = Float::with_val(wctx.bits(), &delta);
    let window = resum::borel_integral_window(&wdelta, &plan, &coeffs.t, &coeffs.hat, &coeffs.tt, &ms)?;

    let window_energies: Vec<Real> = window.iter().map(|r| energy(&r.value)).collect();
    let k = window_energies.len() as u32;
    let mean = window_energies
        .iter()
        .fold(ectx.zero(), |acc, e| acc + e)
        / k;
    let var = window_energies.iter().fold(ectx.zero(), |acc, e| {
        let d = Float::with_val(ectx.bits(), e - &mean);
        acc + d.square()
    }) / (k.max(2) - 1);
    let sigma = var.sqrt();
    let err_quad = energy(&window[0].err_quad);
    let err_tail = energy(&window[0].err_tail);
    let eig_err = Float::with_val(ectx.bits(), &eigen.e) * ectx.pow10(-(eigen.digits as i32));
    let uncertainty = Float::with_val(ectx.bits(), &sigma + &err_quad) + &err_tail + &eig_err;

    let delta_e = Float::with_val(ectx.bits(), &eigen.e - &mean);
    let sign = if delta_e.is_sign_negative() { -1 } else { 1 };
    let flagged = Float::with_val(ectx.bits(), delta_e.abs_ref()) <= Float::with_val(ectx.bits(), &uncertainty * 10u32);
    Ok(Comparison {
        record: ComparisonRecord {
            n,
            delta,
            e_exact: eigen.e.clone(),
            e_oaa,
            e_borel: mean,
            sigma,
            delta_e,
            sign,
            floor,
        },
        details: LevelDetails {
            oaa_stop: oaa.stop,
            window,
            window_energies,
            err_quad,
            err_tail,
            eigen,
            uncertainty,
            flagged,
        },
    })
}

/// Outcome of one invariant at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub n: usize,
    pub passed: bool,
    pub detail: String,
}

/// Checks the discrepancy-law invariants on the unflagged levels:
///
/// - `sign(Δ_N) = (−1)^N` for `N ≤ 8`;
/// - `|ln|Δ_N| + πN| / (πN) < 0.1` for `2 ≤ N ≤ 8`;
/// - odd levels `11 ≤ 2k+1 ≤ 23`: `sign(Δ) = (−1)^k`; even levels `N ≥ 10`: `Δ > 0`;
/// - `|E_oaa − E_borel| < 0.01 |Δ_N|` for `1 ≤ N ≤ 8`.
pub fn check_invariants(results: &[Comparison]) -> Vec<InvariantCheck> {
    let mut out = Vec::new();
    for c in results.iter().filter(|c| !c.details.flagged) {
        let r = &c.record;
        let n = r.n;
        let mut push = |name: &'static str, passed: bool, detail: String| {
            out.push(InvariantCheck { name, n, passed, detail })
        };
        if n <= 8 {
            let want = if n % 2 == 0 { 1 } else { -1 };
            push("low-N sign", r.sign == want, format!("sign {} expected {want}", r.sign));
        }
        if (2..=8).contains(&n) {
            let pn = std::f64::consts::PI * n as f64;
            let rel = (numerics::ln_abs(&r.delta_e) + pn).abs() / pn;
            push("exponential law", rel < 0.1, format!("relative exponent deviation {rel:.4}"));
        }
        if n % 2 == 1 && (11..=23).contains(&n) {
            let k = (n - 1) / 2;
            let want = if k % 2 == 0 { 1 } else { -1 };
            push("odd regime", r.sign == want, format!("sign {} expected {want}", r.sign));
        }
        if n % 2 == 0 && n >= 10 {
            push("even positivity", r.sign == 1, format!("sign {}", r.sign));
        }
        if (1..=8).contains(&n) {
            let prec = r.e_exact.prec();
            let diff = Float::with_val(prec, &r.e_oaa - &r.e_borel).abs();
            let bound = Float::with_val(prec, r.delta_e.abs_ref()) / 100u32;
            push(
                "OAA/Borel agreement",
                diff < bound,
                format!("|E_oaa − E_borel| = {:.3e}, bound {:.3e}", diff.to_f64(), bound.to_f64()),
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// CSV.

pub const CSV_HEADER: &str = "N,delta,E_exact,E_oaa,E_borel,sigma,Delta,sign,floor";

/// Significant digits printed for a value of `prec` bits, and the inverse;
/// the pair makes emit ∘ parse ∘ emit = emit.
fn digits_for_prec(prec: u32) -> usize {
    ((prec.saturating_sub(16)) as f64 / std::f64::consts::LOG2_10).floor().max(2.0) as usize
}

fn prec_for_digits(d: usize) -> u32 {
    (d as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 16
}

fn fmt_full(x: &Real) -> String {
    numerics::format_real(x, digits_for_prec(x.prec()))
}

/// Header plus one row per record, ordered by `N`.
pub fn emit_csv(records: &[ComparisonRecord]) -> String {
    let mut sorted: Vec<&ComparisonRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_full(&r.delta),
            fmt_full(&r.e_exact),
            fmt_full(&r.e_oaa),
            fmt_full(&r.e_borel),
            fmt_full(&r.sigma),
            fmt_full(&r.delta_e),
            r.sign,
            fmt_full(&r.floor),
        );
    }
    out
}

pub fn write_csv(records: &[ComparisonRecord], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, emit_csv(records).as_bytes())
}

fn significant_digits(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or("");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let trimmed = digits.trim_start_matches('0');
    trimmed.len().max(1)
}

fn parse_field(s: &str, origin: &str, line: usize, what: &str) -> Result<Real> {
    let s = s.trim();
    if s.is_empty() || s.len() > 100_000 {
        return Err(Error::format(origin, line, format!("bad {what}")));
    }
    numerics::parse_real(s, prec_for_digits(significant_digits(s)))
        .ok_or_else(|| Error::format(origin, line, format!("bad {what}")))
}

pub fn parse_csv(text: &str, origin: &str) -> Result<Vec<ComparisonRecord>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::format(origin, 1, "missing or wrong CSV header")),
    }
    let mut out: Vec<ComparisonRecord> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::format(origin, lineno, format!("expected 9 columns, got {}", f.len())));
        }
        let n: usize = f[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(origin, lineno, "bad N"))?;
        if out.last().is_some_and(|r| r.n >= n) {
            return Err(Error::format(origin, lineno, "rows must be strictly ordered by N"));
        }
        let sign: i8 = match f[7].trim() {
            "1" => 1,
            "-1" => -1,
            _ => return Err(Error::format(origin, lineno, "sign must be 1 or -1")),
        };
        let rec = ComparisonRecord {
            n,
            delta: parse_field(f[1], origin, lineno, "delta")?,
            e_exact: parse_field(f[2], origin, lineno, "E_exact")?,
            e_oaa: parse_field(f[3], origin, lineno, "E_oaa")?,
            e_borel: parse_field(f[4], origin, lineno, "E_borel")?,
            sigma: parse_field(f[5], origin, lineno, "sigma")?,
            delta_e: parse_field(f[6], origin, lineno, "Delta")?,
            sign,
            floor: parse_field(f[8], origin, lineno, "floor")?,
        };
        if !(rec.delta > 0) {
            return Err(Error::format(origin, lineno, "delta must be positive"));
        }
        if rec.sigma.is_sign_negative() && !rec.sigma.is_zero() {
            return Err(Error::format(origin, lineno, "sigma must be non-negative"));
        }
        if !rec.delta_e.is_zero() && rec.delta_e.is_sign_negative() != (sign < 0) {
            return Err(Error::format(origin, lineno, "sign disagrees with Delta"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<ComparisonRecord>> {
    let text = crate::io::read_to_string(path)?;
    parse_csv(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Figures.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    /// Rescaled coefficients `t_m / (m!² a^m (m+1)^{−5/2})`.
    Fig1,
    /// Partial sums against `M` for `N ≤ 3` with the exact and Borel levels.
    Fig2,
    /// `log10|Δ_N|` against `N` with the `e^{−πN}` reference.
    Fig3,
}

impl FigureKind {
    pub fn file_name(self) -> &'static str {
        match self {
            FigureKind::Fig1 => "fig1.svg",
            FigureKind::Fig2 => "fig2.svg",
            FigureKind::Fig3 => "fig3.svg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveStyle {
    Line,
    Dashed,
    Markers,
    /// Shaded from the bottom of the plot up to the curve.
    Band,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: CurveStyle,
    pub color: &'static str,
}

/// One panel in data coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<Curve>,
    pub y_range: Option<(f64, f64)>,
}

/// Data of the rescaled-coefficient figure.
pub fn fig1_data(t: &CoefficientSeries, a: &Real) -> Result<Figure> {
    if t.len() < 2 {
        return Err(Error::InvalidArgument(String::from("no coefficients to plot")));
    }
    let nu = Rational::from((-5, 2));
    let points = (1..t.len())
        .map(|m| (m as f64, series::rescaled(t, a, &nu, m).to_f64()))
        .collect();
    Ok(Figure {
        title: String::from("Rescaled expansion coefficients"),
        x_label: String::from("m"),
        y_label: String::from("t_m / (m!² a^m (m+1)^(-5/2))"),
        curves: vec![Curve {
            label: String::from("rescaled t_m"),
            points,
            style: CurveStyle::Markers,
            color: "#1f77b4",
        }],
        y_range: None,
    })
}

/// Panels of the partial-sum figure, one per record with `N ≤ 3`.
pub fn fig2_data(t: &CoefficientSeries, records: &[ComparisonRecord]) -> Result<Vec<Figure>> {
    let mut panels = Vec::new();
    for r in records.iter().filter(|r| r.n <= 3) {
        let prec = r.e_exact.prec();
        let ctx = PrecisionContext::new(digits_for_prec(prec).max(numerics::MIN_DIGITS as usize) as u32)?;
        let delta = Float::with_val(ctx.bits(), &r.delta);
        let stop = resum::oaa_sum(t, &delta)?.stop;
        let to_energy = series::energy_from_t(&ctx.real(1), &delta, &ctx)?;
        let last = (3 * stop).max(stop + 12).min(t.len());
        let mut sum = ctx.zero();
        let mut pow = ctx.real(1);
        let mut points = Vec::with_capacity(last);
        for m in 0..last {
            sum += Float::with_val(ctx.bits(), &t.coeffs[m] * &pow);
            pow *= &delta;
            points.push(((m + 1) as f64, Float::with_val(ctx.bits(), &sum * &to_energy).to_f64()));
        }
        let exact = r.e_exact.to_f64();
        let borel = r.e_borel.to_f64();
        let width = [
            (exact - borel).abs(),
            (r.e_oaa.to_f64() - exact).abs(),
            r.floor.to_f64(),
        ]
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
        let x_end = last as f64;
        panels.push(Figure {
            title: format!("N = {}", r.n),
            x_label: String::from("M (terms summed)"),
            y_label: String::from("E"),
            curves: vec![
                Curve {
                    label: String::from("partial sums"),
                    points,
                    style: CurveStyle::Markers,
                    color: "#1f77b4",
                },
                Curve {
                    label: String::from("exact"),
                    points: vec![(1.0, exact), (x_end, exact)],
                    style: CurveStyle::Line,
                    color: "#2ca02c",
                },
                Curve {
                    label: String::from("Borel"),
                    points: vec![(1.0, borel), (x_end, borel)],
                    style: CurveStyle::Dashed,
                    color: "#d62728",
                },
            ],
            y_range: Some((exact - 4.0 * width, exact + 4.0 * width)),
        });
    }
    if panels.is_empty() {
        return Err(Error::InvalidArgument(String::from("fig2 needs a record with N ≤ 3")));
    }
    Ok(panels)
}

/// Data of the discrepancy figure.
pub fn fig3_data(records: &[ComparisonRecord]) -> Result<Figure> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(String::from("no records to plot")));
    }
    let log_abs = |x: &Real| numerics::log10(x);
    let delta: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| !r.delta_e.is_zero())
        .map(|r| (r.n as f64, log_abs(&r.delta_e)))
        .collect();
    let band: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| !r.sigma.is_zero())
        .map(|r| (r.n as f64, log_abs(&r.sigma)))
        .collect();
    let (n0, n1) = (
        records.iter().map(|r| r.n).min().unwrap_or(0) as f64,
        records.iter().map(|r| r.n).max().unwrap_or(0) as f64,
    );
    let reference = |n: f64| -std::f64::consts::PI * n / std::f64::consts::LN_10;
    let mut curves = vec![
        Curve {
            label: String::from("e^(-πN)"),
            points: vec![(n0, reference(n0)), (n1, reference(n1))],
            style: CurveStyle::Dashed,
            color: "#7f7f7f",
        },
        Curve {
            label: String::from("log10 |E_exact - E_Borel|"),
            points: delta,
            style: CurveStyle::Markers,
            color: "#1f77b4",
        },
    ];
    if !band.is_empty() {
        curves.insert(
            0,
            Curve {
                label: String::from("σ over the M window"),
                points: band,
                style: CurveStyle::Band,
                color: "#ffbb78",
            },
        );
    }
    Ok(Figure {
        title: String::from("Difference between exact and Borel-summed WKB eigenvalues"),
        x_label: String::from("N"),
        y_label: String::from("log10 |Δ_N|"),
        curves,
        y_range: None,
    })
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let k = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    if v == 0.0 {
        return String::from("0");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    if v.abs() >= 1e5 || (v.abs() < 1e-3 && decimals > 6) {
        format!("{v:.3e}")
    } else {
        format!("{v:.decimals$}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static SVG with the panels stacked vertically.
pub fn render_svg(panels: &[Figure]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 420.0;
    const L: f64 = 90.0;
    const R: f64 = 240.0;
    const T: f64 = 40.0;
    const B: f64 = 55.0;
    let total_h = H * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total_h}" viewBox="0 0 {W} {total_h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{total_h}" fill="white"/>"#);
    for (idx, fig) in panels.iter().enumerate() {
        let oy = idx as f64 * H;
        let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
        let all: Vec<(f64, f64)> = fig.curves.iter().flat_map(|c| c.points.iter().filter(finite).copied()).collect();
        if all.is_empty() {
            continue;
        }
        let (mut x0, mut x1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (mut y0, mut y1) = fig
            .y_range
            .unwrap_or_else(|| all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1))));
        if x1 <= x0 {
            x0 -= 1.0;
            x1 += 1.0;
        }
        if y1 <= y0 {
            let pad = y0.abs().max(1.0) * 0.05;
            y0 -= pad;
            y1 += pad;
        }
        if fig.y_range.is_none() {
            let pad = 0.05 * (y1 - y0);
            y0 -= pad;
            y1 += pad;
        }
        let (pw, ph) = (W - L - R, H - T - B);
        let sx = |x: f64| L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| oy + T + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let clip = format!("clip{idx}");
        let _ = writeln!(
            svg,
            r#"<defs><clipPath id="{clip}"><rect x="{L}" y="{}" width="{pw}" height="{ph}"/></clipPath></defs>"#,
            oy + T
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            L + pw / 2.0,
            oy + T - 14.0,
            escape(&fig.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{L}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#,
            oy + T
        );
        // ticks
        let xs = nice_step(x1 - x0);
        let mut v = (x0 / xs).ceil() * xs;
        while v <= x1 + 1e-9 * xs {
            let x = sx(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                oy + T + ph,
                oy + T + ph + 5.0,
                oy + T + ph + 18.0,
                fmt_tick(v, xs)
            );
            v += xs;
        }
        let ys = nice_step(y1 - y0);
        let mut v = (y0 / ys).ceil() * ys;
        while v <= y1 + 1e-9 * ys {
            let y = sy(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{L}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                L - 5.0,
                L - 8.0,
                y + 4.0,
                fmt_tick(v, ys)
            );
            v += ys;
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            L + pw / 2.0,
            oy + H - 12.0,
            escape(&fig.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            oy + T + ph / 2.0,
            oy + T + ph / 2.0,
            escape(&fig.y_label)
        );
        // curves
        let _ = writeln!(svg, r#"<g clip-path="url(#{clip})">"#);
        for c in &fig.curves {
            let pts: Vec<(f64, f64)> = c.points.iter().filter(finite).map(|&(x, y)| (sx(x), sy(y))).collect();
            if pts.is_empty() {
                continue;
            }
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            match c.style {
                CurveStyle::Line | CurveStyle::Dashed => {
                    let dash = if c.style == CurveStyle::Dashed {
                        r#" stroke-dasharray="6 4""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                        path.join(" "),
                        c.color
                    );
                }
                CurveStyle::Markers => {
                    for (x, y) in &pts {
                        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#, c.color);
                    }
                }
                CurveStyle::Band => {
                    let base = oy + T + ph;
                    let first = pts[0].0;
                    let last = pts[pts.len() - 1].0;
                    let _ = writeln!(
                        svg,
                        r#"<polygon points="{first:.2},{base:.2} {} {last:.2},{base:.2}" fill="{}" fill-opacity="0.5" stroke="none"/>"#,
                        path.join(" "),
                        c.color
                    );
                }
            }
        }
        let _ = writeln!(svg, "</g>");
        // legend
        for (k, c) in fig.curves.iter().enumerate() {
            let y = oy + T + 14.0 + 18.0 * k as f64;
            let x = L + pw + 12.0;
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{}" width="14" height="4" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                y - 4.0,
                c.color,
                x + 20.0,
                y,
                escape(&c.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Inputs a figure may draw from.
#[derive(Clone, Copy, Debug)]
pub struct PlotInput<'a> {
    pub records: &'a [ComparisonRecord],
    pub t: Option<&'a CoefficientSeries>,
    pub a_t: Option<&'a Real>,
}

pub fn emit_plot(kind: FigureKind, input: PlotInput<'_>, path: &Path) -> Result<()> {
    let need_t = || {
        input
            .t
            .ok_or_else(|| Error::InvalidArgument(format!("{kind:?} needs the t coefficients")))
    };
    let panels = match kind {
        FigureKind::Fig1 => {
            let a = input
                .a_t
                .ok_or_else(|| Error::InvalidArgument(String::from("fig1 needs the growth constant")))?;
            vec![fig1_data(need_t()?, a)?]
        }
        FigureKind::Fig2 => fig2_data(need_t()?, input.records)?,
        FigureKind::Fig3 => vec![fig3_data(input.records)?],
    };
    crate::io::write_atomic(path, render_svg(&panels).as_bytes())
}
