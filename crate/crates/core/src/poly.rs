//! Sparse multivariate polynomials over an abstract coefficient ring.
//!
//! The same engine backs exact integer polynomials (`IntPoly`, used where an
//! identity must be established over Z before reducing) and polynomials over
//! a prime field (`FpPoly`). Rings follow the "ring object" pattern: the ring
//! value carries any context (such as the modulus) and operates on plain
//! element data.

use crate::gfp::PrimeField;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("coefficient of {monomial} is not divisible by {divisor}")]
    NotDivisible { monomial: String, divisor: String },
}

/// A commutative coefficient ring, following the ring-object pattern: the
/// ring value carries context (such as a modulus), so conversions take
/// `&self` by design.
#[allow(clippy::wrong_self_convention)]
pub trait Ring: Clone + PartialEq {
    type Elem: Clone + Eq + Ord + fmt::Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn from_bigint(&self, n: &BigInt) -> Self::Elem;

    fn from_i64(&self, n: i64) -> Self::Elem {
        self.from_bigint(&BigInt::from(n))
    }

    fn pow(&self, a: &Self::Elem, e: u32) -> Self::Elem {
        let mut acc = self.one();
        for _ in 0..e {
            acc = self.mul(&acc, a);
        }
        acc
    }
}

/// The ring of integers with arbitrary-precision elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegerRing;

impl Ring for IntegerRing {
    type Elem = BigInt;

    fn zero(&self) -> BigInt {
        BigInt::zero()
    }
    fn one(&self) -> BigInt {
        BigInt::one()
    }
    fn is_zero(&self, a: &BigInt) -> bool {
        a.is_zero()
    }
    fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a + b
    }
    fn sub(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a - b
    }
    fn neg(&self, a: &BigInt) -> BigInt {
        -a
    }
    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a * b
    }
    fn from_bigint(&self, n: &BigInt) -> BigInt {
        n.clone()
    }
}

impl Ring for PrimeField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        PrimeField::add(*self, *a, *b)
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        PrimeField::sub(*self, *a, *b)
    }
    fn neg(&self, a: &u64) -> u64 {
        PrimeField::neg(*self, *a)
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        PrimeField::mul(*self, *a, *b)
    }
    fn from_bigint(&self, n: &BigInt) -> u64 {
        let p = BigInt::from(self.modulus());
        let mut r = n % &p;
        if r.is_negative() {
            r += &p;
        }
        let (_, digits) = r.to_u64_digits();
        digits.first().copied().unwrap_or(0)
    }
}

// ============================================================================
// Monomials
// ============================================================================

/// An exponent-vector monomial. Ordering is lexicographic on the exponent
/// vector, which fixes a deterministic term order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    /// The constant monomial in `nvars` variables.
    pub fn unit(nvars: usize) -> Self {
        Monomial {
            exps: vec![0; nvars],
        }
    }

    /// The single variable `x_i` (0-indexed) raised to `e`.
    pub fn var(nvars: usize, i: usize, e: u32) -> Self {
        assert!(i < nvars);
        let mut exps = vec![0; nvars];
        exps[i] = e;
        Monomial { exps }
    }

    /// Multilinear monomial with support at the given 0-indexed variables.
    pub fn from_support(nvars: usize, support: impl IntoIterator<Item = usize>) -> Self {
        let mut exps = vec![0; nvars];
        for i in support {
            assert!(i < nvars);
            exps[i] = 1;
        }
        Monomial { exps }
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    /// Total degree.
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    /// Number of variables occurring.
    pub fn support(&self) -> usize {
        self.exps.iter().filter(|&&e| e > 0).count()
    }

    pub fn is_multilinear(&self) -> bool {
        self.exps.iter().all(|&e| e <= 1)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.nvars(), other.nvars());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

// ============================================================================
// Polynomials
// ============================================================================

/// A sparse polynomial: a map from monomials to nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly<R: Ring> {
    ring: R,
    nvars: usize,
    terms: BTreeMap<Monomial, R::Elem>,
}

impl<R: Ring> Poly<R> {
    pub fn zero(ring: R, nvars: usize) -> Self {
        Poly {
            ring,
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ring: R, nvars: usize, c: R::Elem) -> Self {
        let mut p = Poly::zero(ring, nvars);
        p.add_term(Monomial::unit(nvars), c);
        p
    }

    /// The variable `x_i` (0-indexed).
    pub fn variable(ring: R, nvars: usize, i: usize) -> Self {
        let one = ring.one();
        let mut p = Poly::zero(ring, nvars);
        p.add_term(Monomial::var(nvars, i, 1), one);
        p
    }

    pub fn from_terms(
        ring: R,
        nvars: usize,
        terms: impl IntoIterator<Item = (Monomial, R::Elem)>,
    ) -> Self {
        let mut p = Poly::zero(ring, nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &R::Elem)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> R::Elem {
        self.terms.get(m).cloned().unwrap_or_else(|| self.ring.zero())
    }

    /// If the polynomial is a constant (including zero), returns it.
    pub fn as_constant(&self) -> Option<R::Elem> {
        match self.terms.len() {
            0 => Some(self.ring.zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Adds `c * m` into the polynomial, dropping the term if it cancels.
    fn add_term(&mut self, m: Monomial, c: R::Elem) {
        assert_eq!(m.nvars(), self.nvars, "monomial arity mismatch");
        if self.ring.is_zero(&c) {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = self.ring.add(e.get(), &c);
                if self.ring.is_zero(&s) {
                    e.remove();
                } else {
                    e.insert(s);
                }
            }
        }
    }

    pub fn add(&self, rhs: &Poly<R>) -> Poly<R> {
        let mut out = self.clone();
        out.add_in_place(rhs);
        out
    }

    /// Accumulates without cloning the left side; the workhorse for long
    /// sums of large polynomials.
    pub fn add_in_place(&mut self, rhs: &Poly<R>) {
        self.check_compatible(rhs);
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub(&self, rhs: &Poly<R>) -> Poly<R> {
        self.check_compatible(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), self.ring.neg(c));
        }
        out
    }

    pub fn neg(&self) -> Poly<R> {
        let mut out = Poly::zero(self.ring.clone(), self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), self.ring.neg(c));
        }
        out
    }

    pub fn scale(&self, c: &R::Elem) -> Poly<R> {
        let mut out = Poly::zero(self.ring.clone(), self.nvars);
        for (m, k) in &self.terms {
            out.add_term(m.clone(), self.ring.mul(k, c));
        }
        out
    }

    pub fn scale_i64(&self, c: i64) -> Poly<R> {
        self.scale(&self.ring.from_i64(c))
    }

    pub fn mul(&self, rhs: &Poly<R>) -> Poly<R> {
        self.check_compatible(rhs);
        let mut out = Poly::zero(self.ring.clone(), self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), self.ring.mul(ca, cb));
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly<R> {
        let mut acc = Poly::constant(self.ring.clone(), self.nvars, self.ring.one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitutes `x -> x + alpha`, expanding and collecting terms.
    pub fn shift(&self, alpha: &[R::Elem]) -> Poly<R> {
        assert_eq!(alpha.len(), self.nvars, "shift vector arity mismatch");
        let ring = self.ring.clone();
        let mut out = Poly::zero(ring.clone(), self.nvars);
        for (m, c) in &self.terms {
            // Expand prod_i (x_i + alpha_i)^{e_i} one variable at a time.
            let mut acc: Vec<(Vec<u32>, R::Elem)> = vec![(Vec::new(), c.clone())];
            for (i, &e) in m.exps().iter().enumerate() {
                if e == 0 || ring.is_zero(&alpha[i]) {
                    for (exps, _) in acc.iter_mut() {
                        exps.push(e);
                    }
                    continue;
                }
                let mut expanded = Vec::with_capacity(acc.len() * (e as usize + 1));
                for (exps, coef) in &acc {
                    for j in 0..=e {
                        // C(e, j) * alpha_i^{e-j} * x_i^j
                        let bin = ring.from_bigint(&binomial(e as u64, j as u64));
                        let apow = ring.pow(&alpha[i], e - j);
                        let k = ring.mul(coef, &ring.mul(&bin, &apow));
                        if ring.is_zero(&k) {
                            continue;
                        }
                        let mut ex = exps.clone();
                        ex.push(j);
                        expanded.push((ex, k));
                    }
                }
                acc = expanded;
            }
            for (exps, coef) in acc {
                out.add_term(Monomial::new(exps), coef);
            }
        }
        out
    }

    /// The finite difference `f(x + alpha) - f(x)`.
    pub fn delta(&self, alpha: &[R::Elem]) -> Poly<R> {
        self.shift(alpha).sub(self)
    }

    /// Exact evaluation at a point.
    pub fn eval(&self, point: &[R::Elem]) -> R::Elem {
        assert_eq!(point.len(), self.nvars, "evaluation point arity mismatch");
        let ring = &self.ring;
        let mut acc = ring.zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.exps().iter().enumerate() {
                if e > 0 {
                    t = ring.mul(&t, &ring.pow(&point[i], e));
                }
            }
            acc = ring.add(&acc, &t);
        }
        acc
    }

    /// Maps coefficients into another ring through `f`.
    pub fn map_ring<S: Ring>(&self, ring: S, f: impl Fn(&R::Elem) -> S::Elem) -> Poly<S> {
        let mut out = Poly::zero(ring, self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    fn check_compatible(&self, rhs: &Poly<R>) {
        assert!(self.ring == rhs.ring, "mixed rings in polynomial op");
        assert_eq!(self.nvars, rhs.nvars, "mixed arities in polynomial op");
    }
}

impl Poly<IntegerRing> {
    /// Divides every coefficient by `d`, failing loudly if any coefficient
    /// is not divisible. Used where an identity is stated over Z only after
    /// an exact division.
    pub fn div_exact(&self, d: &BigInt) -> Result<Poly<IntegerRing>, PolyError> {
        assert!(!d.is_zero());
        let mut out = Poly::zero(IntegerRing, self.nvars);
        for (m, c) in &self.terms {
            if !(c % d).is_zero() {
                return Err(PolyError::NotDivisible {
                    monomial: m.to_string(),
                    divisor: d.to_string(),
                });
            }
            out.add_term(m.clone(), c / d);
        }
        Ok(out)
    }

    /// Reduction mod p.
    pub fn reduce_mod(&self, field: PrimeField) -> Poly<PrimeField> {
        self.map_ring(field, |c| field.from_bigint(c))
    }
}

impl<R: Ring> fmt::Display for Poly<R>
where
    R::Elem: fmt::Display,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if m.degree() == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

// ============================================================================
// Integer combinatorics helpers
// ============================================================================

pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
