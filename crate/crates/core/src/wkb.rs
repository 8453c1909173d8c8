//! WKB recursion for `V = x⁴`, Dunham contour integrals and the exact
//! quantization coefficients.
//!
//! Conventions: `ψ = e^S`, `S' = Σ ε^{n-1} y_n` with `y_0² = Q = z⁴ − E` and
//! `y'_{n-1} + Σ_{j=0}^{n} y_j y_{n-j} = 0`. No imaginary unit appears. The
//! orders are generated on the branch `y_0 = +Q^{1/2}`; switching to
//! `y_0 = σ Q^{1/2}` multiplies `y_n` by `σ^{n+1}`, so the branch is a single
//! sign resolved once, when the quantization condition is assembled.
//!
//! Two generators are provided. [`wkb_orders`] runs the recursion directly on
//! [`TermList`]s. [`WkbPolynomial::generate`] uses the homogeneity of `y_n`:
//!
//! ```text
//! y_n = z^{2-3n} (1-s)^{-(3n-1)/2} p_n(s),   s = E/z⁴,
//! ```
//!
//! where `2^n p_n` has integer coefficients, which turns each order into a
//! handful of univariate integer polynomial products.

use std::fmt;
use std::io::Write;

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::termlist::{TermKey, TermList};

/// Reference generator: `y_0 … y_{n_max}` as canonical term lists on the
/// `y_0 = +Q^{1/2}` branch.
pub fn wkb_orders(n_max: usize) -> Vec<TermList> {
    let mut orders = Vec::with_capacity(n_max + 1);
    orders.push(TermList::monomial(Rational::from(1), TermKey::new(0, 1, 0)));
    let minus_half = Rational::from((-1, 2));
    for n in 1..=n_max {
        let mut acc = orders[n - 1].derivative();
        for j in 1..n {
            acc = acc.add(&orders[j].mul(&orders[n - j]));
        }
        // divide by 2 y_0 = 2 Q^{1/2}
        let next = acc.shift_q(-1).scale(&minus_half).reduced();
        orders.push(next);
    }
    orders
}

/// `y'_{n-1} + Σ_{j=0}^{n} y_j y_{n-j}` in reduced form; empty when the
/// recursion holds exactly.
pub fn recursion_residual(orders: &[TermList], n: usize) -> TermList {
    assert!(n >= 1 && n < orders.len());
    let mut acc = orders[n - 1].derivative();
    for j in 0..=n {
        acc = acc.add(&orders[j].mul(&orders[n - j]));
    }
    acc.reduced()
}

/// `y_n` in compact form: `2^n p_n(s) = Σ_k numer[k] s^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WkbPolynomial {
    pub order: usize,
    pub numer: Vec<Integer>,
}

impl WkbPolynomial {
    /// Compact orders `0..=n_max` on the `y_0 = +Q^{1/2}` branch.
    pub fn generate(n_max: usize) -> Vec<WkbPolynomial> {
        let mut polys: Vec<Vec<Integer>> = Vec::with_capacity(n_max + 1);
        polys.push(vec![Integer::from(1)]);
        for n in 1..=n_max {
            let prev = &polys[n - 1];
            let deg = 3 * n / 4;
            let mut acc = vec![Integer::new(); deg + 2];
            let c1 = 5 - 3 * n as i64; // (5-3n)
            let c2 = 2 * (3 * n as i64 - 4); // 4γ
            // 2 [ (5-3n)(1-s) P - 4γ s P - 4 s (1-s) P' ]
            for (k, pk) in prev.iter().enumerate() {
                acc[k] += Integer::from(pk * c1) * 2u32;
                acc[k + 1] -= Integer::from(pk * c1) * 2u32;
                acc[k + 1] -= Integer::from(pk * c2) * 2u32;
                if k >= 1 {
                    let d = Integer::from(pk * k as u64) * 8u32;
                    acc[k] -= &d;
                    acc[k + 1] += d;
                }
            }
            convolution_sum(&polys[1..n], &mut acc);
            for c in acc.iter_mut() {
                // P_n = -(...)/2; the bracket is always even.
                debug_assert!(c.is_even());
                *c >>= 1;
                *c = Integer::from(-&*c);
            }
            while acc.len() > 1 && acc.last().is_some_and(|c| *c == 0) {
                acc.pop();
            }
            debug_assert!(acc.len() <= deg + 1);
            polys.push(acc);
        }
        polys
            .into_iter()
            .enumerate()
            .map(|(order, numer)| WkbPolynomial { order, numer })
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.numer.len() - 1
    }

    /// `y_n` as the term list `Σ_k (numer[k]/2^n) E^k z^{3n-4k} Q^{-(3n-1)/2}`.
    pub fn to_termlist(&self) -> TermList {
        let n = self.order as i64;
        let mut t = TermList::new();
        let den = Integer::from(1) << self.order as u32;
        for (k, c) in self.numer.iter().enumerate() {
            let k = k as i64;
            let key = TermKey::new(3 * n - 4 * k, 1 - 3 * n, k);
            t.add_term(key, Rational::from((c.clone(), den.clone())));
        }
        t
    }
}

/// `acc += Σ_{j} a_j · a_{len-1-j}` over the slice of polynomials
/// `a = [P_1, …, P_{n-1}]`.
///
/// Kronecker substitution: each polynomial is packed into one integer with
/// 64-bit aligned slots wide enough that no slot of the summed products can
/// overflow, so the whole sum costs `n/2` large multiplications and a single
/// unpacking.
fn convolution_sum(polys: &[Vec<Integer>], acc: &mut Vec<Integer>) {
    let m = polys.len();
    if m == 0 {
        return;
    }
    let bits = |p: &Vec<Integer>| p.iter().map(|c| c.significant_bits()).max().unwrap_or(0);
    let mut width = 0u32;
    let mut len = 0usize;
    for j in 0..m.div_ceil(2) {
        let (a, b) = (&polys[j], &polys[m - 1 - j]);
        let terms = a.len().min(b.len()) as u32;
        width = width.max(bits(a) + bits(b) + 32 - terms.leading_zeros());
        len = len.max(a.len() + b.len() - 1);
    }
    // room for the sum over j, the factor 2 and the sign
    width += 66 - (m as u32).leading_zeros();
    let limbs = width.div_ceil(64) as usize;
    let width = 64 * limbs as u32;

    let packed: Vec<Integer> = polys.iter().map(|p| pack(p, limbs)).collect();
    let mut sum = Integer::new();
    for j in 0..m.div_ceil(2) {
        let prod = Integer::from(&packed[j] * &packed[m - 1 - j]);
        if j != m - 1 - j {
            sum += prod << 1;
        } else {
            sum += prod;
        }
    }
    if acc.len() < len {
        acc.resize(len, Integer::new());
    }
    // bias every slot by 2^{w-1} so all digits are non-negative
    let mut bias = vec![0u64; limbs * len];
    for k in 0..len {
        bias[k * limbs + limbs - 1] = 1 << 63;
    }
    sum += Integer::from_digits(&bias, rug::integer::Order::Lsf);
    let digits = sum.to_digits::<u64>(rug::integer::Order::Lsf);
    let half = Integer::from(1) << (width - 1);
    for (k, slot) in acc.iter_mut().enumerate().take(len) {
        let lo = (k * limbs).min(digits.len());
        let hi = ((k + 1) * limbs).min(digits.len());
        let v = Integer::from_digits(&digits[lo..hi], rug::integer::Order::Lsf);
        *slot += v - &half;
    }
}

fn pack(p: &[Integer], limbs: usize) -> Integer {
    let mut pos = vec![0u64; limbs * p.len()];
    let mut neg = vec![0u64; limbs * p.len()];
    for (k, c) in p.iter().enumerate() {
        let digits = c.as_abs().to_digits::<u64>(rug::integer::Order::Lsf);
        let dst = if *c < 0 { &mut neg } else { &mut pos };
        dst[k * limbs..k * limbs + digits.len()].copy_from_slice(&digits);
    }
    Integer::from_digits(&pos, rug::integer::Order::Lsf)
        - Integer::from_digits(&neg, rug::integer::Order::Lsf)
}

/// Which Beta family a contour integral falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// `z^a` with `a ≡ 0 (mod 4)`: multiples of `B(1/4, 1/2)`.
    Even,
    /// `z^a` with `a ≡ 2 (mod 4)`: multiples of `B(3/4, 1/2)`.
    Odd,
}

impl Family {
    /// First Beta argument of the family's base constant `B(base, 1/2)`.
    pub fn base(self) -> Rational {
        match self {
            Family::Even => Rational::from((1, 4)),
            Family::Odd => Rational::from((3, 4)),
        }
    }
}

/// `(1/2i)∮ c z^a E^e (z⁴−E)^{-k-1/2} dz = coeff · B(beta_a, beta_b) · E^{epow}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContourTerm {
    pub coeff: Rational,
    pub beta_a: Rational,
    pub beta_b: Rational,
    pub epow: Rational,
    pub k: i64,
    pub family: Family,
}

impl ContourTerm {
    /// The value as a rational multiple of the family constant `B(base, 1/2)`.
    pub fn in_base_units(&self) -> Rational {
        &self.coeff * beta_ratio(&self.beta_a, &self.beta_b)
    }
}

/// `B(a, b) / B(base, 1/2)` where `a = base + j` (`j ≥ 0`, `base ∈ {1/4, 3/4}`)
/// and `b` is a half-integer.
pub fn beta_ratio(a: &Rational, b: &Rational) -> Rational {
    let quarter = Rational::from((1, 4));
    let mut base = a - a.clone().floor();
    if base == 0 {
        base = quarter.clone();
    }
    assert!(
        base == quarter || base == (3, 4),
        "beta_ratio: first argument {a} is not in 1/4 + Z or 3/4 + Z"
    );
    assert!(*b.denom() == 2, "beta_ratio: second argument {b} is not a half-integer");
    let mut r = Rational::from(1);
    let mut y = Rational::from((1, 2));
    // B(x, y+1) = B(x, y) y/(x+y)
    while y < *b {
        r *= &y / Rational::from(&base + &y);
        y += 1;
    }
    while y > *b {
        y -= 1;
        r *= Rational::from(&base + &y) / &y;
    }
    // B(x+1, y) = B(x, y) x/(x+y)
    let mut x = base;
    while x < *a {
        r *= &x / Rational::from(&x + b);
        x += 1;
    }
    r
}

/// Dunham contour integral `(1/2i)∮` of each term around the cut joining the
/// turning points, for lists with half-integer `(z⁴−E)` powers.
///
/// Even z-powers reduce to `(−1)^k (1/2) B((a+1)/4, 1/2−k) E^{(a+1)/4−k−1/2}`;
/// odd z-powers vanish on the symmetric contour and are omitted.
pub fn reduce_contour(t: &TermList) -> Result<Vec<ContourTerm>> {
    let mut out = Vec::new();
    for (key, c) in t.iter() {
        if key.qpow2 % 2 == 0 || key.zpow < 0 {
            return Err(Error::UnsupportedTerm {
                zpow: key.zpow,
                qpow2: key.qpow2,
            });
        }
        if key.zpow % 2 != 0 {
            continue;
        }
        let k = (-key.qpow2 - 1) / 2;
        let family = if key.zpow % 4 == 0 { Family::Even } else { Family::Odd };
        let mut coeff = Rational::from(c / 2u32);
        if k.rem_euclid(2) == 1 {
            coeff = -coeff;
        }
        let beta_a = Rational::from((key.zpow + 1, 4));
        let beta_b = Rational::from((1 - 2 * k, 2));
        let epow = Rational::from(key.epow) + &beta_a - Rational::from((2 * k + 1, 2));
        out.push(ContourTerm {
            coeff,
            beta_a,
            beta_b,
            epow,
            k,
            family,
        });
    }
    Ok(out)
}

/// Contour integral of a single-valued list (integer `(z⁴−E)` powers only):
/// returns `(c, epow)` with the integral equal to `c · π · E^{epow}`.
///
/// Only the poles at the turning points `z = ±E^{1/4}` lie inside the contour.
pub fn single_valued_contour(t: &TermList) -> Result<(Rational, Option<Rational>)> {
    let mut total = Rational::new();
    let mut epow: Option<Rational> = None;
    for (key, c) in t.iter() {
        if key.qpow2 % 2 != 0 || key.zpow < 0 {
            return Err(Error::UnsupportedTerm {
                zpow: key.zpow,
                qpow2: key.qpow2,
            });
        }
        let kpow = -key.qpow2 / 2;
        if kpow <= 0 || key.zpow % 2 == 0 {
            continue;
        }
        let res = residue_at_unit_root(key.zpow as u64, kpow as usize);
        total += (c * res) * 2u32;
        let e = Rational::from(key.epow) + Rational::from((key.zpow + 1, 4)) - kpow;
        if let Some(prev) = &epow {
            if *prev != e {
                return Err(Error::Inconsistency {
                    what: "contour E-power",
                    detail: format!("{prev} vs {e}"),
                });
            }
        }
        epow = Some(e);
    }
    Ok((total, epow))
}

/// Coefficients `f_0..f_{len-1}` of `(1 + 3g + 4g² + 2g³)^{-K}`, all integers.
fn inverse_power_series(kpow: usize, len: usize) -> Vec<Integer> {
    let w = [1i64, 3, 4, 2];
    let alpha = -(kpow as i64);
    let mut f = Vec::with_capacity(len);
    f.push(Integer::from(1));
    for n in 1..len {
        // n f_n = Σ_{k=1}^{3} ((α+1)k − n) w_k f_{n−k}
        let mut s = Integer::new();
        for k in 1..=3.min(n) {
            let factor = (alpha + 1) * k as i64 - n as i64;
            s += Integer::from(&f[n - k] * (factor * w[k]));
        }
        debug_assert!(s.is_divisible_u(n as u32));
        s.div_exact_u_mut(n as u32);
        f.push(s);
    }
    f
}

/// `Res_{z=1} z^m (z⁴−1)^{-K}`.
fn residue_at_unit_root(m: u64, kpow: usize) -> Rational {
    let f = inverse_power_series(kpow, kpow);
    // z = 1 + 2g:  z⁴ − 1 = 8g (1 + 3g + 4g² + 2g³),  dz = 2 dg
    let mut s = Integer::new();
    let mut binom = Integer::from(1);
    for i in 0..kpow {
        if i > 0 {
            binom *= m + 1 - i as u64;
            binom /= i as u64;
            if binom == 0 {
                break;
            }
        }
        s += Integer::from(&binom << i as u32) * &f[kpow - 1 - i];
    }
    // [h^{K-1}] with h = 2g contributes 2^{-(K-1)}, and W = 4 V gives 4^{-K}.
    let den = Integer::from(1) << (3 * kpow as u32 - 1);
    Rational::from((s, den))
}

/// Contour value of an even order from its compact form, in units of the
/// family constant: `(1/2i)∮ y_n dz = value · B(base,1/2) · E^{(3−3n)/4}`.
pub fn even_order_contour(poly: &WkbPolynomial) -> (Family, Rational) {
    let n = poly.order;
    assert!(n.is_multiple_of(2), "even_order_contour called with odd order {n}");
    let d = poly.degree() as i64;
    let ni = n as i64;
    let top = 3 * ni - 4 * d; // 0 or 2
    let family = if top % 4 == 0 { Family::Even } else { Family::Odd };
    let kk = (3 * ni - 2) / 2; // k with b = -k - 1/2
    let b = Rational::from((3 - 3 * ni, 2)); // b + 1
    let mut x = Rational::from((top + 1, 4));
    let mut ratio = beta_ratio(&x, &b);
    let mut total = Rational::new();
    for kidx in (0..=d as usize).rev() {
        if kidx as i64 != d {
            // x → x + 1
            ratio *= &x / Rational::from(&x + &b);
            x += 1;
        }
        let c = &poly.numer[kidx];
        if *c != 0 {
            total += Rational::from(&ratio * c);
        }
    }
    total /= Integer::from(1) << (n as u32 + 1);
    if kk.rem_euclid(2) == 1 {
        total = -total;
    }
    (family, total)
}

/// `(1/2i)∮ y_n dz / π` at `E = 1` for an odd order, from its compact form.
pub fn odd_order_contour(poly: &WkbPolynomial) -> Rational {
    let n = poly.order;
    assert!(n % 2 == 1, "odd_order_contour called with even order {n}");
    let kpow = (3 * n - 1) / 2;
    let f = inverse_power_series(kpow, kpow);
    // (1+2g)^m coefficients, built incrementally per term.
    let mut s = Integer::new();
    let mut term = Integer::new();
    for (k, c) in poly.numer.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        let m = (3 * n - 4 * k) as u64;
        let mut binom = Integer::from(1);
        let mut inner = Integer::new();
        for i in 0..kpow {
            if i > 0 {
                if i as u64 > m {
                    break;
                }
                binom *= m + 1 - i as u64;
                binom /= i as u64;
            }
            term.clone_from(&binom);
            term <<= i as u32;
            term *= &f[kpow - 1 - i];
            inner += &term;
        }
        s += inner * c;
    }
    // Σ residues at ±1 doubles for odd z-powers; π·(2·Res) with the scalings
    // 2^{-n} (compact form) and 2^{-(3K-1)} (residue).
    let den = Integer::from(1) << (n as u32 + 3 * kpow as u32 - 1);
    Rational::from((s * 2u32, den))
}

/// Exact quantization coefficients.
///
/// The quantization condition reads
///
/// ```text
/// (1/3ε) B₁ E^{3/4} − ε/16 B₃ E^{−3/4}
///   + Σ_{ℓ≥1} (−1)^{ℓ+1} B₁ q^e_ℓ ε^{4ℓ−1} E^{−(12ℓ−3)/4}
///   + Σ_{ℓ≥1} (−1)^{ℓ+1} B₃ q^o_ℓ ε^{4ℓ+1} E^{−(12ℓ+3)/4} = (N + 1/2) π
/// ```
///
/// with `B₁ = B(1/4,1/2)`, `B₃ = B(3/4,1/2)` and all `q` positive; `q^o_0 = 1/16`
/// is the second term. The `p` coefficients multiply the single integrals
/// `I^e_{6ℓ−1}` and `I^o_{6ℓ+2}` with sign `(−1)^ℓ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizationSeries {
    /// `q^e_ℓ` for `ℓ = 1, 2, …`
    q_even: Vec<Rational>,
    /// `q^o_ℓ` for `ℓ = 0, 1, …`
    q_odd: Vec<Rational>,
    /// `p^e_ℓ` for `ℓ = 1, 2, …`
    p_even: Vec<Rational>,
    /// `p^o_ℓ` for `ℓ = 0, 1, …`
    p_odd: Vec<Rational>,
    pub max_order: usize,
}

impl QuantizationSeries {
    pub fn q_even(&self, l: usize) -> Option<&Rational> {
        l.checked_sub(1).and_then(|i| self.q_even.get(i))
    }

    pub fn q_odd(&self, l: usize) -> Option<&Rational> {
        self.q_odd.get(l)
    }

    pub fn p_even(&self, l: usize) -> Option<&Rational> {
        l.checked_sub(1).and_then(|i| self.p_even.get(i))
    }

    pub fn p_odd(&self, l: usize) -> Option<&Rational> {
        self.p_odd.get(l)
    }

    /// Largest `ℓ` with a stored `q^e_ℓ` (0 when none).
    pub fn even_len(&self) -> usize {
        self.q_even.len()
    }

    pub fn odd_len(&self) -> usize {
        self.q_odd.len()
    }

    /// Rebuilds from q coefficients alone (e.g. after parsing an export);
    /// p coefficients are derived.
    pub fn from_q(max_order: usize, q_even: Vec<Rational>, q_odd: Vec<Rational>) -> Result<Self> {
        let p_even = q_even
            .iter()
            .enumerate()
            .map(|(i, q)| p_from_q(Family::Even, i + 1, q))
            .collect();
        let p_odd = q_odd
            .iter()
            .enumerate()
            .map(|(l, q)| p_from_q(Family::Odd, l, q))
            .collect();
        let s = Self {
            q_even,
            q_odd,
            p_even,
            p_odd,
            max_order,
        };
        s.check_signs()?;
        Ok(s)
    }

    fn check_signs(&self) -> Result<()> {
        let checks: [(&'static str, &Vec<Rational>, usize); 4] = [
            ("q_e", &self.q_even, 1),
            ("q_o", &self.q_odd, 0),
            ("p_e", &self.p_even, 1),
            ("p_o", &self.p_odd, 0),
        ];
        for (what, v, offset) in checks {
            if let Some((i, bad)) = v.iter().enumerate().find(|(_, q)| **q <= 0) {
                return Err(Error::SignViolation {
                    what,
                    index: i + offset,
                    value: bad.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Writes the coefficient export: a header with `n_max` and format
    /// version, then `q_e <ℓ> <num>/<den>` and `q_o <ℓ> <num>/<den>` lines.
    pub fn write_export<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut body = String::new();
        for (i, q) in self.q_odd.iter().enumerate() {
            body.push_str(&format!("q_o {} {}/{}\n", i, q.numer(), q.denom()));
        }
        for (i, q) in self.q_even.iter().enumerate() {
            body.push_str(&format!("q_e {} {}/{}\n", i + 1, q.numer(), q.denom()));
        }
        writeln!(w, "{} {} n_max {}", EXPORT_MAGIC, EXPORT_VERSION, self.max_order)?;
        w.write_all(body.as_bytes())?;
        writeln!(w, "checksum {}", crate::io::checksum(body.as_bytes()))
    }

    /// Parses [`QuantizationSeries::write_export`] output. The checksum line
    /// is optional; when present it must match.
    pub fn parse_export(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::format(origin, 1, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != EXPORT_MAGIC || fields[2] != "n_max" {
            return Err(Error::format(origin, 1, "bad header"));
        }
        if fields[1] != EXPORT_VERSION {
            return Err(Error::format(origin, 1, format!("unsupported version {}", fields[1])));
        }
        let max_order: usize = fields[3]
            .parse()
            .map_err(|_| Error::format(origin, 1, "bad n_max"))?;
        let mut q_even: Vec<Option<Rational>> = Vec::new();
        let mut q_odd: Vec<Option<Rational>> = Vec::new();
        let mut body = String::new();
        let mut checksum_seen = false;
        for (i, line) in lines {
            let lineno = i + 1;
            if checksum_seen {
                return Err(Error::format(origin, lineno, "content after checksum"));
            }
            if let Some(sum) = line.strip_prefix("checksum ") {
                if sum.trim() != crate::io::checksum(body.as_bytes()) {
                    return Err(Error::format(origin, lineno, "checksum mismatch"));
                }
                checksum_seen = true;
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::format(origin, lineno, "expected `<kind> <l> <num>/<den>`"));
            }
            let l: usize = parts[1]
                .parse()
                .map_err(|_| Error::format(origin, lineno, "bad index"))?;
            let value = parse_rational(parts[2])
                .ok_or_else(|| Error::format(origin, lineno, "bad rational"))?;
            let (slot, idx) = match parts[0] {
                "q_e" if l >= 1 => (&mut q_even, l - 1),
                "q_o" => (&mut q_odd, l),
                _ => return Err(Error::format(origin, lineno, "unknown coefficient kind")),
            };
            if idx > 4 * max_order + 4 {
                return Err(Error::format(origin, lineno, "index beyond n_max"));
            }
            if slot.len() <= idx {
                slot.resize(idx + 1, None);
            }
            if slot[idx].replace(value).is_some() {
                return Err(Error::format(origin, lineno, "duplicate coefficient"));
            }
            body.push_str(line);
            body.push('\n');
        }
        let collect = |v: Vec<Option<Rational>>, what: &str| -> Result<Vec<Rational>> {
            v.into_iter()
                .enumerate()
                .map(|(i, q)| q.ok_or_else(|| Error::format(origin, 0, format!("missing {what} {i}"))))
                .collect()
        };
        let q_even = collect(q_even, "q_e")?;
        let q_odd = collect(q_odd, "q_o")?;
        if q_even.len() != max_order / 4 || q_odd.len() != (max_order + 2) / 4 {
            return Err(Error::format(origin, 0, "coefficient count does not match n_max"));
        }
        Self::from_q(max_order, q_even, q_odd).map_err(|e| Error::format(origin, 0, e.to_string()))
    }
}

impl fmt::Display for QuantizationSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "quantization series to order {} ({} even, {} odd coefficients)",
            self.max_order,
            self.q_even.len(),
            self.q_odd.len()
        )
    }
}

const EXPORT_MAGIC: &str = "wkbborel-quantization";
const EXPORT_VERSION: &str = "v1";

fn parse_rational(s: &str) -> Option<Rational> {
    let (n, d) = s.split_once('/')?;
    let n: Integer = n.parse().ok()?;
    let d: Integer = d.parse().ok()?;
    if d <= 0 || d.significant_bits() > 1 << 20 || n.significant_bits() > 1 << 20 {
        return None;
    }
    Some(Rational::from((n, d)))
}

/// Single-integral index `k` and its Beta base for level `ℓ` of a family.
fn single_integral(family: Family, l: usize) -> (i64, Rational) {
    let l = l as i64;
    match family {
        Family::Even => (6 * l - 1, Rational::from((1, 4))),
        Family::Odd => (6 * l + 2, Rational::from((3, 4))),
    }
}

/// `(−1)^ℓ (−1)^k (1/2) B(base, 1/2 − k) / B(base, 1/2)`: the value of
/// `(−1)^ℓ I_k` in family units.
fn p_unit(family: Family, l: usize) -> Rational {
    let (k, base) = single_integral(family, l);
    let b = Rational::from((1 - 2 * k, 2));
    let mut u = beta_ratio(&base, &b) / 2u32;
    if (k + l as i64).rem_euclid(2) == 1 {
        u = -u;
    }
    u
}

fn p_from_q(family: Family, l: usize, q: &Rational) -> Rational {
    // contribution = (−1)^{ℓ+1} q = p · p_unit
    let mut contrib = q.clone();
    if l.is_multiple_of(2) {
        contrib = -contrib;
    }
    contrib / p_unit(family, l)
}

/// Sign of the branch `y_0 = σ Q^{1/2}` that makes the leading term positive.
pub const BRANCH_SIGN: i32 = -1;

/// Assembles the quantization condition through `ε^{n_max−1}`.
///
/// The two leading terms are checked analytically; every odd order `n ≥ 3`
/// is checked to integrate to zero, and every extracted coefficient is
/// checked to be positive.
pub fn quantization_series(n_max: usize) -> Result<QuantizationSeries> {
    if !n_max.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("n_max must be even, got {n_max}")));
    }
    let polys = WkbPolynomial::generate(n_max);
    quantization_from_polynomials(&polys)
}

/// As [`quantization_series`], from already generated compact orders.
pub fn quantization_from_polynomials(polys: &[WkbPolynomial]) -> Result<QuantizationSeries> {
    let n_max = polys.len().saturating_sub(1);
    let sigma = Rational::from(BRANCH_SIGN);
    let mut q_even = Vec::new();
    let mut q_odd = Vec::new();
    for poly in polys {
        let n = poly.order;
        if n % 2 == 1 {
            let c = odd_order_contour(poly);
            let want = if n == 1 { Rational::from((-1, 2)) } else { Rational::new() };
            if c != want {
                return Err(Error::Inconsistency {
                    what: "odd WKB order",
                    detail: format!("order {n} integrates to {c}·π, expected {want}·π"),
                });
            }
            continue;
        }
        let (family, raw) = even_order_contour(poly);
        // even orders pick up σ^{n+1} = σ
        let value = raw * &sigma;
        let l = n / 4;
        match (n, family) {
            (0, Family::Even) => {
                if value != (1, 3) {
                    return Err(Error::Inconsistency {
                        what: "leading WKB term",
                        detail: format!("got {value}·B(1/4,1/2), expected 1/3"),
                    });
                }
            }
            (2, Family::Odd) => {
                if value != (-1, 16) {
                    return Err(Error::Inconsistency {
                        what: "second WKB term",
                        detail: format!("got {value}·B(3/4,1/2), expected -1/16"),
                    });
                }
                q_odd.push(Rational::from((1, 16)));
            }
            (_, Family::Even) if n % 4 == 0 => q_even.push(signed_q(value, l)),
            (_, Family::Odd) if n % 4 == 2 => q_odd.push(signed_q(value, l)),
            _ => {
                return Err(Error::Inconsistency {
                    what: "contour family",
                    detail: format!("order {n} reduced to {family:?}"),
                })
            }
        }
    }
    QuantizationSeries::from_q(n_max, q_even, q_odd)
}

fn signed_q(value: Rational, l: usize) -> Rational {
    // value = (−1)^{ℓ+1} q
    if l.is_multiple_of(2) {
        -value
    } else {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn first_orders() {
        let orders = wkb_orders(2);
        assert_eq!(orders[0], TermList::monomial(q(1, 1), TermKey::new(0, 1, 0)));
        // y_1 = −Q'/(4Q) = −z³ Q^{-1}
        assert_eq!(orders[1], TermList::monomial(q(-1, 1), TermKey::new(3, -2, 0)));
    }

    #[test]
    fn reference_residual_vanishes() {
        let orders = wkb_orders(12);
        for n in 1..=12 {
            let r = recursion_residual(&orders, n);
            assert!(r.is_empty(), "order {n}: {r}");
            assert_eq!(orders[n].homogeneous_degree(), Some(2 - 3 * n as i64));
        }
    }

    #[test]
    fn compact_form_matches_reference() {
        let orders = wkb_orders(16);
        let polys = WkbPolynomial::generate(16);
        for n in 0..=16 {
            assert_eq!(polys[n].to_termlist().reduced(), orders[n], "order {n}");
            assert_eq!(polys[n].degree(), 3 * n / 4);
        }
    }

    #[test]
    fn contour_family_examples() {
        // z⁰ (z⁴−E)^{-5-1/2}
        let t = TermList::monomial(q(1, 1), TermKey::new(0, -11, 0));
        let r = reduce_contour(&t).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].coeff, q(-1, 2));
        assert_eq!(r[0].beta_a, q(1, 4));
        assert_eq!(r[0].beta_b, q(-9, 2));
        assert_eq!(r[0].epow, q(-21, 4));
        assert_eq!(r[0].family, Family::Even);
        // z² (z⁴−E)^{-2-1/2}
        let t = TermList::monomial(q(1, 1), TermKey::new(2, -5, 0));
        let r = reduce_contour(&t).unwrap();
        assert_eq!(r[0].coeff, q(1, 2));
        assert_eq!(r[0].beta_a, q(3, 4));
        assert_eq!(r[0].beta_b, q(-3, 2));
        assert_eq!(r[0].epow, q(-7, 4));
        assert_eq!(r[0].family, Family::Odd);
        // odd z-power vanishes
        let t = TermList::monomial(q(1, 1), TermKey::new(1, -3, 0));
        assert!(reduce_contour(&t).unwrap().is_empty());
        // integer power is not a branch-cut integral
        let t = TermList::monomial(q(1, 1), TermKey::new(3, -2, 0));
        assert!(matches!(reduce_contour(&t), Err(Error::UnsupportedTerm { .. })));
    }

    #[test]
    fn beta_ratio_recurrences() {
        // B(1/4, 3/2) = B(1/4,1/2) (1/2)/(3/4) = 2/3 B(1/4,1/2)
        assert_eq!(beta_ratio(&q(1, 4), &q(3, 2)), q(2, 3));
        // B(3/4, -3/2) = -1/4 B(3/4, 1/2)
        assert_eq!(beta_ratio(&q(3, 4), &q(-3, 2)), q(-1, 4));
        // B(5/4, 1/2) = B(1/4,1/2) (1/4)/(3/4)
        assert_eq!(beta_ratio(&q(5, 4), &q(1, 2)), q(1, 3));
    }

    #[test]
    fn fast_contours_agree_with_termwise_reduction() {
        let polys = WkbPolynomial::generate(14);
        for p in polys.iter().filter(|p| p.order % 2 == 0) {
            let (family, fast) = even_order_contour(p);
            let terms = reduce_contour(&p.to_termlist()).unwrap();
            let slow: Rational = terms
                .iter()
                .map(|t| {
                    assert_eq!(t.family, family);
                    assert_eq!(t.epow, Rational::from((3 - 3 * p.order as i64, 4)));
                    t.in_base_units()
                })
                .sum();
            assert_eq!(fast, slow, "order {}", p.order);
        }
        for p in polys.iter().filter(|p| p.order % 2 == 1) {
            let (slow, _) = single_valued_contour(&p.to_termlist()).unwrap();
            assert_eq!(odd_order_contour(p), slow, "order {}", p.order);
        }
    }

    #[test]
    fn single_valued_first_order() {
        let y1 = TermList::monomial(q(-1, 1), TermKey::new(3, -2, 0));
        let (c, e) = single_valued_contour(&y1).unwrap();
        assert_eq!(c, q(-1, 2));
        assert_eq!(e, Some(q(0, 1)));
    }

    #[test]
    fn branch_flip_rule() {
        // y_n(σ) = σ^{n+1} y_n(+1): p_0 = -1 branch reproduces the flipped lists.
        let polys = WkbPolynomial::generate(6);
        assert_eq!(polys[2].numer, vec![Integer::from(-4), Integer::from(-6)]);
        assert_eq!(polys[1].numer, vec![Integer::from(-2)]);
    }

    #[test]
    fn paper_anchors() {
        let qs = quantization_series(12).unwrap();
        assert_eq!(qs.p_odd(0), Some(&q(1, 2)));
        assert_eq!(qs.p_even(1), Some(&q(77, 1768)));
        assert_eq!(qs.p_odd(1), Some(&q(61061, 62928)));
        assert_eq!(qs.q_even(1), Some(&q(11, 1536)));
        assert_eq!(qs.q_odd(0), Some(&q(1, 16)));
    }

    #[test]
    fn export_round_trip() {
        let qs = quantization_series(24).unwrap();
        let mut buf = Vec::new();
        qs.write_export(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("wkbborel-quantization v1 n_max 24\n"));
        assert!(text.contains("q_e 1 11/1536\n"));
        let back = QuantizationSeries::parse_export(&text, "mem").unwrap();
        assert_eq!(back, qs);
        let tampered = text.replace("q_e 1 11/1536", "q_e 1 11/1535");
        assert!(QuantizationSeries::parse_export(&tampered, "mem").is_err());
    }

    #[test]
    fn export_rejects_garbage() {
        for bad in ["", "hello", "wkbborel-quantization v9 n_max 4\n", "wkbborel-quantization v1 n_max 4\nq_x 1 1/2\n"] {
            assert!(QuantizationSeries::parse_export(bad, "mem").is_err(), "{bad:?}");
        }
    }
}
