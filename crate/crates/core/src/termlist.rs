//! Exact symbolic sums `Σ c · E^e · z^a · (z⁴ − E)^b` with rational `c`,
//! integer `e, a ≥ 0` and half-integer `b`.
//!
//! `b` is stored doubled (`qpow2 = 2b`) so that every exponent is an integer.

use std::collections::BTreeMap;
use std::fmt;

use rug::Rational;

/// Exponents of one monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub zpow: i64,
    pub qpow2: i64,
    pub epow: i64,
}

impl TermKey {
    pub fn new(zpow: i64, qpow2: i64, epow: i64) -> Self {
        Self { zpow, qpow2, epow }
    }

    /// Scaling degree under `z → λz, E → λ⁴E`.
    pub fn degree(&self) -> i64 {
        self.zpow + 2 * self.qpow2 + 4 * self.epow
    }
}

/// Canonical term list: sorted by key, like terms merged, no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TermList {
    terms: BTreeMap<TermKey, Rational>,
}

impl TermList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn monomial(coeff: Rational, key: TermKey) -> Self {
        let mut t = Self::new();
        t.add_term(key, coeff);
        t
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TermKey, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &TermKey) -> Option<&Rational> {
        self.terms.get(key)
    }

    pub fn add_term(&mut self, key: TermKey, coeff: Rational) {
        if coeff == 0 {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(c) => {
                *c += coeff;
                if *c == 0 {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn add(&self, other: &TermList) -> TermList {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> TermList {
        let mut out = TermList::new();
        for (k, c) in &self.terms {
            out.add_term(*k, Rational::from(c * s));
        }
        out
    }

    pub fn mul(&self, other: &TermList) -> TermList {
        let mut out = TermList::new();
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let key = TermKey::new(k1.zpow + k2.zpow, k1.qpow2 + k2.qpow2, k1.epow + k2.epow);
                out.add_term(key, Rational::from(c1 * c2));
            }
        }
        out
    }

    /// Multiplies by `(z⁴ − E)^{qpow2/2}`.
    pub fn shift_q(&self, qpow2: i64) -> TermList {
        let mut out = TermList::new();
        for (k, c) in &self.terms {
            out.add_term(TermKey::new(k.zpow, k.qpow2 + qpow2, k.epow), c.clone());
        }
        out
    }

    /// d/dz, using d/dz (z⁴−E)^b = 4b z³ (z⁴−E)^{b−1}.
    pub fn derivative(&self) -> TermList {
        let mut out = TermList::new();
        for (k, c) in &self.terms {
            if k.zpow > 0 {
                out.add_term(
                    TermKey::new(k.zpow - 1, k.qpow2, k.epow),
                    Rational::from(c * k.zpow),
                );
            }
            if k.qpow2 != 0 {
                // 4b = 2 * qpow2
                out.add_term(
                    TermKey::new(k.zpow + 3, k.qpow2 - 2, k.epow),
                    Rational::from(c * (2 * k.qpow2)),
                );
            }
        }
        out
    }

    /// Unique normal form with every z-power below 4, using z⁴ = (z⁴−E) + E.
    ///
    /// Two term lists represent the same function iff their reductions are
    /// equal.
    pub fn reduced(&self) -> TermList {
        let mut out = TermList::new();
        for (k, c) in &self.terms {
            let j = k.zpow / 4;
            let r = k.zpow % 4;
            // z^{4j} = Σ_i C(j,i) Q^i E^{j-i}
            let mut binom = rug::Integer::from(1);
            for i in 0..=j {
                if i > 0 {
                    binom *= j - i + 1;
                    binom /= i;
                }
                let key = TermKey::new(r, k.qpow2 + 2 * i, k.epow + j - i);
                out.add_term(key, Rational::from(c * &binom));
            }
        }
        out
    }

    /// True when every term has the same scaling degree.
    pub fn homogeneous_degree(&self) -> Option<i64> {
        let mut it = self.terms.keys().map(TermKey::degree);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }
}

impl fmt::Display for TermList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c}) E^{} z^{} Q^({}/2)", k.epow, k.zpow, k.qpow2)?;
        }
        Ok(())
    }
}
