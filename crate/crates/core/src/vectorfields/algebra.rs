//! Differential operators with polynomial coefficients in `(t, x1, x2)`.
//!
//! Multi-indices `[a, b, c]` denote `t^a x1^b x2^c` for monomials and
//! `∂t^a ∂1^b ∂2^c` for derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Index3 = [u8; 3];

fn add_idx(a: Index3, b: Index3) -> Index3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn order(a: Index3) -> usize {
    a.iter().map(|&x| x as usize).sum()
}

fn binom(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(BTreeMap<Index3, f64>);

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(exp: Index3, c: f64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert(exp, c);
        }
        Self(m)
    }

    /// The coordinate `t` (k = 0), `x1` (k = 1) or `x2` (k = 2).
    pub fn var(k: usize) -> Self {
        let mut e = [0; 3];
        e[k] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Index3, &f64)> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.keys().map(|&e| order(e)).max().unwrap_or(0)
    }

    fn add_term(&mut self, exp: Index3, c: f64) {
        let entry = self.0.entry(exp).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.0.remove(&exp);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (&e, &c) in &other.0 {
            out.add_term(e, c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        if s == 0.0 {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(&e, &c)| (e, c * s)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (&e1, &c1) in &self.0 {
            for (&e2, &c2) in &other.0 {
                out.add_term(add_idx(e1, e2), c1 * c2);
            }
        }
        out
    }

    /// `∂^idx` of the polynomial.
    pub fn derivative(&self, idx: Index3) -> Poly {
        let mut out = Poly::zero();
        for (&e, &c) in &self.0 {
            if (0..3).all(|k| e[k] >= idx[k]) {
                let mut coef = c;
                for k in 0..3 {
                    for j in 0..idx[k] {
                        coef *= (e[k] - j) as f64;
                    }
                }
                out.add_term([e[0] - idx[0], e[1] - idx[1], e[2] - idx[2]], coef);
            }
        }
        out
    }

    pub fn eval(&self, t: f64, x1: f64, x2: f64) -> f64 {
        self.0
            .iter()
            .map(|(e, c)| c * t.powi(e[0] as i32) * x1.powi(e[1] as i32) * x2.powi(e[2] as i32))
            .sum()
    }
}

/// `Σ p_α(t, x) ∂^α`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffOp(BTreeMap<Index3, Poly>);

impl DiffOp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::term([0, 0, 0], Poly::constant(1.0))
    }

    pub fn term(idx: Index3, coef: Poly) -> Self {
        let mut m = BTreeMap::new();
        if !coef.is_zero() {
            m.insert(idx, coef);
        }
        Self(m)
    }

    /// `∂_k` with `k = 0` for time.
    pub fn partial(k: usize) -> Self {
        let mut e = [0; 3];
        e[k] = 1;
        Self::term(e, Poly::constant(1.0))
    }

    /// `□ = -∂t² + ∂1² + ∂2²`.
    pub fn wave_operator() -> Self {
        Self::term([2, 0, 0], Poly::constant(-1.0))
            .add(&Self::term([0, 2, 0], Poly::constant(1.0)))
            .add(&Self::term([0, 0, 2], Poly::constant(1.0)))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Index3, &Poly)> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> usize {
        self.0.keys().map(|&e| order(e)).max().unwrap_or(0)
    }

    fn add_term(&mut self, idx: Index3, coef: &Poly) {
        let merged = self.0.get(&idx).map_or_else(|| coef.clone(), |p| p.add(coef));
        if merged.is_zero() {
            self.0.remove(&idx);
        } else {
            self.0.insert(idx, merged);
        }
    }

    pub fn add(&self, other: &DiffOp) -> DiffOp {
        let mut out = self.clone();
        for (&i, p) in &other.0 {
            out.add_term(i, p);
        }
        out
    }

    pub fn sub(&self, other: &DiffOp) -> DiffOp {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> DiffOp {
        let mut out = DiffOp::zero();
        for (&i, p) in &self.0 {
            out.add_term(i, &p.scale(s));
        }
        out
    }

    /// Left multiplication by a polynomial.
    pub fn mul_poly(&self, q: &Poly) -> DiffOp {
        let mut out = DiffOp::zero();
        for (&i, p) in &self.0 {
            out.add_term(i, &p.mul(q));
        }
        out
    }

    /// `self ∘ inner`, expanded with the Leibniz rule.
    pub fn compose(&self, inner: &DiffOp) -> DiffOp {
        let mut out = DiffOp::zero();
        for (&alpha, a) in &self.0 {
            for (&beta, b) in &inner.0 {
                for g0 in 0..=alpha[0] {
                    for g1 in 0..=alpha[1] {
                        for g2 in 0..=alpha[2] {
                            let gamma = [g0, g1, g2];
                            let c = binom(alpha[0], g0) * binom(alpha[1], g1) * binom(alpha[2], g2);
                            let db = b.derivative(gamma);
                            if db.is_zero() {
                                continue;
                            }
                            let rest = [alpha[0] - g0, alpha[1] - g1, alpha[2] - g2];
                            out.add_term(add_idx(rest, beta), &a.mul(&db).scale(c));
                        }
                    }
                }
            }
        }
        out
    }

    /// Applies the operator to a polynomial function.
    pub fn apply_poly(&self, f: &Poly) -> Poly {
        self.0
            .iter()
            .fold(Poly::zero(), |acc, (&i, p)| acc.add(&p.mul(&f.derivative(i))))
    }
}

/// A single vector field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Generator {
    Dt,
    D1,
    D2,
    /// `Ω = x1 ∂2 - x2 ∂1`
    Om,
    /// `H1 = t ∂1 + x1 ∂t`
    H1,
    /// `H2 = t ∂2 + x2 ∂t`
    H2,
    /// `S = t ∂t + x1 ∂1 + x2 ∂2`
    S,
}

impl Generator {
    /// The six commuting fields `∂t, ∂1, ∂2, Ω, H1, H2`, in index order.
    pub const COMMUTING: [Generator; 6] =
        [Generator::Dt, Generator::D1, Generator::D2, Generator::Om, Generator::H1, Generator::H2];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Dt => "Dt",
            Generator::D1 => "D1",
            Generator::D2 => "D2",
            Generator::Om => "Om",
            Generator::H1 => "H1",
            Generator::H2 => "H2",
            Generator::S => "S",
        }
    }

    pub fn operator(self) -> DiffOp {
        let x = |k| Poly::var(k);
        match self {
            Generator::Dt => DiffOp::partial(0),
            Generator::D1 => DiffOp::partial(1),
            Generator::D2 => DiffOp::partial(2),
            Generator::Om => DiffOp::partial(2).mul_poly(&x(1)).sub(&DiffOp::partial(1).mul_poly(&x(2))),
            Generator::H1 => DiffOp::partial(1).mul_poly(&x(0)).add(&DiffOp::partial(0).mul_poly(&x(1))),
            Generator::H2 => DiffOp::partial(2).mul_poly(&x(0)).add(&DiffOp::partial(0).mul_poly(&x(2))),
            Generator::S => DiffOp::partial(0)
                .mul_poly(&x(0))
                .add(&DiffOp::partial(1).mul_poly(&x(1)))
                .add(&DiffOp::partial(2).mul_poly(&x(2))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Generator::S].iter().chain(Generator::COMMUTING.iter())
            .find(|g| g.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownWord(s.to_string()))
    }
}

/// A product of vector fields. The first generator in the sequence is
/// applied first: `[g1, g2]` acts as `g2(g1(u))`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GammaWord(pub Vec<Generator>);

impl GammaWord {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn operator(&self) -> DiffOp {
        self.0.iter().fold(DiffOp::identity(), |acc, g| g.operator().compose(&acc))
    }

    /// `g` applied after this word.
    pub fn then(&self, g: Generator) -> GammaWord {
        let mut v = self.0.clone();
        v.push(g);
        GammaWord(v)
    }

    /// Generator names joined by dots, `"id"` for the empty word.
    pub fn encode(&self) -> String {
        if self.0.is_empty() {
            "id".to_string()
        } else {
            self.0.iter().map(|g| g.name()).collect::<Vec<_>>().join(".")
        }
    }
}

impl fmt::Display for GammaWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for GammaWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "id" || s.is_empty() {
            return Ok(Self::empty());
        }
        s.split('.').map(str::parse).collect::<Result<Vec<_>>>().map(GammaWord)
    }
}

/// Multi-index words `Γ^I` with `|I| ≤ cap` over the six commuting fields,
/// ordered by length and then by generator index (non-decreasing within a word).
pub fn canonical_words(cap: usize) -> Vec<GammaWord> {
    let mut out = vec![GammaWord::empty()];
    let mut frontier = vec![GammaWord::empty()];
    for _ in 0..cap {
        let mut next = Vec::new();
        for w in &frontier {
            let start = w.0.last().map_or(0, |g| Generator::COMMUTING.iter().position(|x| x == g).unwrap());
            for g in &Generator::COMMUTING[start..] {
                next.push(w.then(*g));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
