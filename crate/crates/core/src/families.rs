//! The three connection-set families, their undirected closures, and the
//! polynomial maps that realize the isomorphism between each S/T pair.
//!
//! Every connection set is a disjoint union of affine pieces
//! `u + { v : <v, w> = c }` inside `G = U (+) V`; the pair S, T always
//! differs in exactly one piece, and only in the right-hand side `c`.

use crate::gfp::{fp_dot, FpScalar, FpVec, GfpError, PrimeField};
use crate::poly::{Monomial, Poly};
use crate::polyring::{build_l, build_r, combinations};
use crate::FpPoly;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Builds with more V-dimensions than this are refused; the binomial-rank
/// family grows as C(2p-1, p).
pub const DEFAULT_DV_CAP: usize = 300;

/// Total stored polynomial terms a family build may need; the monomial
/// families grow as C(2p, p), so this keeps builds at desk scale
/// (p <= 7 for the polynomial maps).
pub const FAMILY_TERM_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("unknown family {0:?} (expected rank2p3, rank4p2 or rankbinom)")]
    UnknownFamily(String),
    #[error(transparent)]
    BadModulus(#[from] GfpError),
    #[error("the family polynomials would hold ~{estimated} terms at p = {p}, over the cap {cap}")]
    PolynomialsTooLarge { p: u64, estimated: u64, cap: u64 },
    #[error("V would need dimension {dv}, over the cap {cap}")]
    DimensionCap { dv: usize, cap: usize },
    #[error("invalid connection set: {0}")]
    Invalid(String),
    #[error("closure overlap: class {0} meets its own negation")]
    ClosureOverlap(String),
}

/// The three constructions, by the rank of the ambient group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Rank 2p+3: U = Z_p^{p+1}, V = Z_p^{p+2} with the extra coordinate f_0.
    Rank2p3,
    /// Rank 4p-2: U = V = Z_p^{2p-1}, multilinear monomials.
    Rank4p2,
    /// Rank 2p-1 + C(2p-1, p): V indexed by p-element subsets.
    RankBinom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rank2p3 => "rank2p3",
            Family::Rank4p2 => "rank4p2",
            Family::RankBinom => "rankbinom",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = FamilyError;
    fn from_str(s: &str) -> Result<Self, FamilyError> {
        match s {
            "rank2p3" => Ok(Family::Rank2p3),
            "rank4p2" => Ok(Family::Rank4p2),
            "rankbinom" => Ok(Family::RankBinom),
            other => Err(FamilyError::UnknownFamily(other.to_string())),
        }
    }
}

// ============================================================================
// Group elements and affine classes
// ============================================================================

/// An element of `G = U (+) V`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    u: FpVec,
    v: FpVec,
}

impl GroupElement {
    pub fn new(u: FpVec, v: FpVec) -> Self {
        assert_eq!(u.field(), v.field(), "mixed moduli in group element");
        GroupElement { u, v }
    }

    pub fn u(&self) -> &FpVec {
        &self.u
    }

    pub fn v(&self) -> &FpVec {
        &self.v
    }

    pub fn add(&self, rhs: &GroupElement) -> GroupElement {
        GroupElement {
            u: self.u.add(&rhs.u),
            v: self.v.add(&rhs.v),
        }
    }

    pub fn sub(&self, rhs: &GroupElement) -> GroupElement {
        GroupElement {
            u: self.u.sub(&rhs.u),
            v: self.v.sub(&rhs.v),
        }
    }

    pub fn neg(&self) -> GroupElement {
        GroupElement {
            u: self.u.neg(),
            v: self.v.neg(),
        }
    }
}

/// One affine piece `u_offset + { v : <v, functional> = rhs }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineClass {
    label: String,
    u_offset: FpVec,
    functional: FpVec,
    rhs: FpScalar,
}

impl AffineClass {
    pub fn new(
        label: impl Into<String>,
        u_offset: FpVec,
        functional: FpVec,
        rhs: FpScalar,
    ) -> Self {
        assert!(
            !u_offset.is_zero(),
            "class offset must be nonzero (0 is never in S)"
        );
        assert!(!functional.is_zero(), "class functional must be nonzero");
        AffineClass {
            label: label.into(),
            u_offset,
            functional,
            rhs,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn u_offset(&self) -> &FpVec {
        &self.u_offset
    }

    pub fn functional(&self) -> &FpVec {
        &self.functional
    }

    pub fn rhs(&self) -> FpScalar {
        self.rhs
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        *g.u() == self.u_offset && fp_dot(g.v(), &self.functional) == self.rhs
    }

    /// The negated piece `-u_offset + { v : <v, functional> = -rhs }`,
    /// i.e. the image of this class under x -> -x.
    pub fn negated(&self) -> AffineClass {
        let label = match self.label.strip_prefix('-') {
            Some(rest) => rest.to_string(),
            None => format!("-{}", self.label),
        };
        AffineClass {
            label,
            u_offset: self.u_offset.neg(),
            functional: self.functional.clone(),
            rhs: -self.rhs,
        }
    }

    /// A set-equality key: the functional is scaled so its first nonzero
    /// coordinate is 1, with the right side scaled to match.
    pub fn canonical_key(&self) -> (Vec<u64>, Vec<u64>, u64) {
        let f = self.u_offset.field();
        let pivot = self
            .functional
            .raw()
            .iter()
            .position(|&w| w != 0)
            .expect("functional is nonzero");
        let inv = f.inv(self.functional.raw()[pivot]);
        let w: Vec<u64> = self
            .functional
            .raw()
            .iter()
            .map(|&x| f.mul(x, inv))
            .collect();
        let c = f.mul(self.rhs.value(), inv);
        (self.u_offset.raw().to_vec(), w, c)
    }

    /// Replaces the right-hand side, keeping everything else. Used by
    /// negative controls; kept label-stable on purpose.
    pub fn with_rhs(&self, rhs: FpScalar) -> AffineClass {
        AffineClass {
            label: self.label.clone(),
            u_offset: self.u_offset.clone(),
            functional: self.functional.clone(),
            rhs,
        }
    }

    /// All members of the piece, in odometer order over the free coordinates.
    pub fn elements(&self) -> Vec<GroupElement> {
        let f = self.u_offset.field();
        let p = f.modulus();
        let dv = self.functional.dim();
        let pivot = self
            .functional
            .raw()
            .iter()
            .position(|&w| w != 0)
            .expect("functional is nonzero");
        let inv = f.inv(self.functional.raw()[pivot]);
        let free: Vec<usize> = (0..dv).filter(|&j| j != pivot).collect();
        let count = (p as usize).pow(free.len() as u32);
        let mut out = Vec::with_capacity(count);
        let mut v = vec![0u64; dv];
        for mut code in 0..count {
            for &j in &free {
                v[j] = (code % p as usize) as u64;
                code /= p as usize;
            }
            let mut dot = 0u64;
            for &j in &free {
                dot = f.add(dot, f.mul(self.functional.raw()[j], v[j]));
            }
            v[pivot] = f.mul(f.sub(self.rhs.value(), dot), inv);
            out.push(GroupElement::new(
                self.u_offset.clone(),
                FpVec::from_raw(f, v.clone()),
            ));
        }
        out
    }
}

// ============================================================================
// Connection sets
// ============================================================================

/// A connection set: a labeled disjoint union of affine pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionSet {
    family: Family,
    field: PrimeField,
    du: usize,
    dv: usize,
    classes: Vec<AffineClass>,
}

impl ConnectionSet {
    pub fn new(
        family: Family,
        field: PrimeField,
        du: usize,
        dv: usize,
        classes: Vec<AffineClass>,
    ) -> Result<Self, FamilyError> {
        for c in &classes {
            if c.u_offset.dim() != du || c.functional.dim() != dv {
                return Err(FamilyError::Invalid(format!(
                    "class {} has wrong dimensions",
                    c.label
                )));
            }
            if c.u_offset.field() != field {
                return Err(FamilyError::Invalid("mixed moduli".into()));
            }
        }
        // Pairwise disjointness: distinct offsets, or same offset with the
        // same (normalized) functional and a different right side.
        for (i, a) in classes.iter().enumerate() {
            for b in classes.iter().skip(i + 1) {
                if a.u_offset != b.u_offset {
                    continue;
                }
                let (_, wa, ca) = a.canonical_key();
                let (_, wb, cb) = b.canonical_key();
                if wa != wb || ca == cb {
                    return Err(FamilyError::Invalid(format!(
                        "classes {} and {} are not disjoint",
                        a.label, b.label
                    )));
                }
            }
        }
        Ok(ConnectionSet {
            family,
            field,
            du,
            dv,
            classes,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn p(&self) -> u64 {
        self.field.modulus()
    }

    pub fn du(&self) -> usize {
        self.du
    }

    pub fn dv(&self) -> usize {
        self.dv
    }

    pub fn classes(&self) -> &[AffineClass] {
        &self.classes
    }

    pub fn class_by_label(&self, label: &str) -> Option<&AffineClass> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// The hat set: the U-components of the classes, deduplicated, in class
    /// order.
    pub fn offsets(&self) -> Vec<FpVec> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.classes {
            if seen.insert(c.u_offset.raw().to_vec()) {
                out.push(c.u_offset.clone());
            }
        }
        out
    }

    /// Exact cardinality: each piece is a hyperplane coset of size p^(dv-1).
    pub fn size(&self) -> BigInt {
        BigInt::from(self.classes.len()) * BigInt::from(self.p()).pow(self.dv as u32 - 1)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        assert_eq!(g.u().dim(), self.du, "dimension mismatch");
        assert_eq!(g.v().dim(), self.dv, "dimension mismatch");
        self.classes.iter().any(|c| c.contains(g))
    }

    /// Every member of the set. Intended for desk-scale instances only.
    pub fn elements(&self) -> Vec<GroupElement> {
        self.classes.iter().flat_map(|c| c.elements()).collect()
    }

    /// Whether the set equals its own negation, class-wise.
    pub fn is_symmetric(&self) -> bool {
        let keys: std::collections::BTreeSet<_> =
            self.classes.iter().map(AffineClass::canonical_key).collect();
        self.classes
            .iter()
            .all(|c| keys.contains(&c.negated().canonical_key()))
    }

    /// Returns the set with one class's right-hand side replaced; the
    /// standard corruption for negative controls.
    pub fn with_class_rhs(&self, label: &str, rhs: i64) -> ConnectionSet {
        let mut out = self.clone();
        let c = out
            .classes
            .iter_mut()
            .find(|c| c.label == label)
            .unwrap_or_else(|| panic!("no class labeled {label}"));
        *c = c.with_rhs(self.field.scalar(rhs));
        out
    }
}

/// The image of the whole set under x -> -x.
pub fn negate_set(s: &ConnectionSet) -> ConnectionSet {
    ConnectionSet {
        family: s.family,
        field: s.field,
        du: s.du,
        dv: s.dv,
        classes: s.classes.iter().map(AffineClass::negated).collect(),
    }
}

/// The undirected closure `S u -S`. A directed set must be class-disjoint
/// from its negation; an already-symmetric set is a fixed point. Anything
/// in between (some classes paired, some not) is an invariant failure.
pub fn undirected_closure(s: &ConnectionSet) -> Result<ConnectionSet, FamilyError> {
    let keys: std::collections::BTreeSet<_> =
        s.classes.iter().map(AffineClass::canonical_key).collect();
    let paired: Vec<&AffineClass> = s
        .classes
        .iter()
        .filter(|c| keys.contains(&c.negated().canonical_key()))
        .collect();
    if paired.len() == s.classes.len() {
        return Ok(s.clone());
    }
    if let Some(witness) = paired.first() {
        return Err(FamilyError::ClosureOverlap(witness.label().to_string()));
    }
    let mut classes = s.classes.clone();
    classes.extend(s.classes.iter().map(AffineClass::negated));
    ConnectionSet::new(s.family, s.field, s.du, s.dv, classes)
}

// ============================================================================
// Polynomial maps
// ============================================================================

/// The map `(x, y) -> (x, y + q(x))` given by one polynomial per V
/// coordinate, each in the U variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyMap {
    family: Family,
    field: PrimeField,
    du: usize,
    dv: usize,
    components: Vec<FpPoly>,
}

impl PolyMap {
    pub fn new(family: Family, field: PrimeField, du: usize, components: Vec<FpPoly>) -> Self {
        for c in &components {
            assert_eq!(c.nvars(), du, "component arity mismatch");
            assert_eq!(*c.ring(), field);
        }
        PolyMap {
            family,
            field,
            du,
            dv: components.len(),
            components,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn du(&self) -> usize {
        self.du
    }

    pub fn dv(&self) -> usize {
        self.dv
    }

    pub fn components(&self) -> &[FpPoly] {
        &self.components
    }
}

// ============================================================================
// Builders
// ============================================================================

/// Constructs the pair of connection sets and the isomorphism map for one
/// family at one odd prime. S and T differ only in the right-hand side of
/// the final class (0 vs 1, or 0 vs -1 for the rank 4p-2 family).
pub fn build_family(
    family: Family,
    p: u64,
) -> Result<(ConnectionSet, ConnectionSet, PolyMap), FamilyError> {
    let field = PrimeField::new(p)?;
    let estimated = estimate_map_terms(family, p);
    if estimated > FAMILY_TERM_CAP {
        return Err(FamilyError::PolynomialsTooLarge {
            p,
            estimated,
            cap: FAMILY_TERM_CAP,
        });
    }
    match family {
        Family::Rank2p3 => build_rank2p3(field),
        Family::Rank4p2 => build_rank4p2(field),
        Family::RankBinom => build_rankbinom(field),
    }
}

/// Rough term count of the polynomial map: components times the size of the
/// backing monomial family. Saturating; anything saturated is over any cap.
fn estimate_map_terms(family: Family, p: u64) -> u64 {
    let binom = |n: u64, k: u64| -> u64 {
        crate::poly::binomial(n, k).try_into().unwrap_or(u64::MAX)
    };
    match family {
        Family::Rank2p3 => (p + 2).saturating_mul(binom(2 * p, p).saturating_sub(p + 1)),
        Family::Rank4p2 => (2 * p - 1).saturating_mul(binom(2 * p - 2, p)),
        Family::RankBinom => binom(2 * p - 1, p),
    }
}

fn build_rank2p3(
    field: PrimeField,
) -> Result<(ConnectionSet, ConnectionSet, PolyMap), FamilyError> {
    let p = field.modulus() as usize;
    let du = p + 1;
    let dv = p + 2; // V coordinate 0 is f_0, coordinate i is f_i
    let zero = field.scalar(0);

    let mut classes = Vec::with_capacity(2 * du + 1);
    for i in 1..=du {
        let mut w = vec![0i64; dv];
        w[0] = 1;
        w[i] = 1;
        classes.push(AffineClass::new(
            format!("A_{i}"),
            FpVec::basis(field, du, i - 1),
            FpVec::from_ints(field, &w),
            zero,
        ));
    }
    for i in 1..=du {
        let mut u = vec![1i64; du];
        u[i - 1] = 0;
        let mut w = vec![1i64; dv];
        w[i] = 2;
        classes.push(AffineClass::new(
            format!("B_{i}"),
            FpVec::from_ints(field, &u),
            FpVec::from_ints(field, &w),
            zero,
        ));
    }
    let c_offset = FpVec::ones(field, du);
    let c_functional = FpVec::ones(field, dv);
    let mut s_classes = classes.clone();
    s_classes.push(AffineClass::new(
        "C_0",
        c_offset.clone(),
        c_functional.clone(),
        zero,
    ));
    let mut t_classes = classes;
    t_classes.push(AffineClass::new(
        "C_1",
        c_offset,
        c_functional,
        field.scalar(1),
    ));

    let s = ConnectionSet::new(Family::Rank2p3, field, du, dv, s_classes)?;
    let t = ConnectionSet::new(Family::Rank2p3, field, du, dv, t_classes)?;
    let phi = PolyMap::new(Family::Rank2p3, field, du, build_r(field));
    Ok((s, t, phi))
}

fn build_rank4p2(
    field: PrimeField,
) -> Result<(ConnectionSet, ConnectionSet, PolyMap), FamilyError> {
    let p = field.modulus() as usize;
    let du = 2 * p - 1;
    let dv = du;
    let zero = field.scalar(0);

    let mut classes = Vec::with_capacity(2 * du + 1);
    for i in 1..=du {
        classes.push(AffineClass::new(
            format!("A_{i}"),
            FpVec::basis(field, du, i - 1),
            FpVec::basis(field, dv, i - 1),
            zero,
        ));
    }
    for i in 1..=du {
        let mut u = vec![1i64; du];
        u[i - 1] = 0;
        let mut w = vec![1i64; dv];
        w[i - 1] = 2;
        classes.push(AffineClass::new(
            format!("B_{i}"),
            FpVec::from_ints(field, &u),
            FpVec::from_ints(field, &w),
            zero,
        ));
    }
    let c_offset = FpVec::ones(field, du);
    let c_functional = FpVec::ones(field, dv);
    let mut s_classes = classes.clone();
    s_classes.push(AffineClass::new(
        "C_0",
        c_offset.clone(),
        c_functional.clone(),
        zero,
    ));
    // this family's separating class carries -1, not the +1 of the others
    let mut t_classes = classes;
    t_classes.push(AffineClass::new(
        "C_1",
        c_offset,
        c_functional,
        field.scalar(-1),
    ));

    let s = ConnectionSet::new(Family::Rank4p2, field, du, dv, s_classes)?;
    let t = ConnectionSet::new(Family::Rank4p2, field, du, dv, t_classes)?;
    let phi = PolyMap::new(Family::Rank4p2, field, du, build_l(field));
    Ok((s, t, phi))
}

fn build_rankbinom(
    field: PrimeField,
) -> Result<(ConnectionSet, ConnectionSet, PolyMap), FamilyError> {
    let p = field.modulus() as usize;
    let du = 2 * p - 1;
    let subsets = combinations(du, p); // lexicographic; one V coordinate per subset
    let dv = subsets.len();
    if dv > DEFAULT_DV_CAP {
        return Err(FamilyError::DimensionCap {
            dv,
            cap: DEFAULT_DV_CAP,
        });
    }
    let zero = field.scalar(0);

    let mut classes = Vec::with_capacity(du + dv + 1);
    for i in 1..=du {
        let w: Vec<i64> = subsets
            .iter()
            .map(|k| if k.contains(&(i - 1)) { 0 } else { 1 })
            .collect();
        classes.push(AffineClass::new(
            format!("A_{i}"),
            FpVec::basis(field, du, i - 1),
            FpVec::from_ints(field, &w),
            zero,
        ));
    }
    for k in &subsets {
        let partners = b_partners(k, field.modulus());
        let mut w = vec![0i64; dv];
        for partner in &partners {
            let idx = subsets
                .binary_search(partner)
                .expect("partner is a p-subset of the ground set");
            w[idx] = 1;
        }
        let mut u = vec![0u64; du];
        for &i in k {
            u[i] = 1;
        }
        classes.push(AffineClass::new(
            subset_label(k),
            FpVec::from_raw(field, u),
            FpVec::from_ints(field, &w),
            zero,
        ));
    }
    let c_offset = FpVec::ones(field, du);
    let c_functional = FpVec::ones(field, dv);
    let mut s_classes = classes.clone();
    s_classes.push(AffineClass::new(
        "C_0",
        c_offset.clone(),
        c_functional.clone(),
        zero,
    ));
    let mut t_classes = classes;
    t_classes.push(AffineClass::new(
        "C_1",
        c_offset,
        c_functional,
        field.scalar(1),
    ));

    let s = ConnectionSet::new(Family::RankBinom, field, du, dv, s_classes)?;
    let t = ConnectionSet::new(Family::RankBinom, field, du, dv, t_classes)?;

    let components = subsets
        .iter()
        .map(|k| {
            Poly::from_terms(
                field,
                du,
                [(Monomial::from_support(du, k.iter().copied()), 1u64)],
            )
        })
        .collect();
    let phi = PolyMap::new(Family::RankBinom, field, du, components);
    Ok((s, t, phi))
}

fn subset_label(k: &[usize]) -> String {
    let inner: Vec<String> = k.iter().map(|i| (i + 1).to_string()).collect();
    format!("B_{{{}}}", inner.join(","))
}

/// For a p-element subset `k` of a (2p-1)-element ground set (0-based),
/// the p subsets meeting it in exactly one element. Each partner is the
/// complement of `k` plus one element of `k`, so the count is asserted.
pub fn b_partners(k: &[usize], p: u64) -> Vec<Vec<usize>> {
    let n = (2 * p - 1) as usize;
    assert_eq!(k.len(), p as usize, "k must have exactly p elements");
    assert!(k.iter().all(|&i| i < n), "k must live in the ground set");
    let partners: Vec<Vec<usize>> = combinations(n, p as usize)
        .into_iter()
        .filter(|cand| cand.iter().filter(|i| k.contains(i)).count() == 1)
        .collect();
    assert_eq!(
        partners.len(),
        p as usize,
        "expected exactly p partners for {k:?}"
    );
    partners
}

// ============================================================================
// JSON interchange
// ============================================================================

/// JSON document for a connection set; the canonical interchange format.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConnectionSetDoc {
    pub family: String,
    pub p: u64,
    pub du: usize,
    pub dv: usize,
    /// Exact cardinality, decimal (may exceed 64 bits).
    pub size: String,
    pub classes: Vec<ClassDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassDoc {
    pub label: String,
    pub u_offset: Vec<u64>,
    pub functional: Vec<u64>,
    pub rhs: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PolyMapDoc {
    pub family: String,
    pub p: u64,
    pub du: usize,
    pub dv: usize,
    /// One component per V coordinate: a list of (exponent vector, coefficient).
    pub components: Vec<Vec<TermDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TermDoc {
    pub exps: Vec<u32>,
    pub coeff: u64,
}

impl ConnectionSet {
    pub fn to_doc(&self) -> ConnectionSetDoc {
        ConnectionSetDoc {
            family: self.family.name().to_string(),
            p: self.p(),
            du: self.du,
            dv: self.dv,
            size: self.size().to_string(),
            classes: self
                .classes
                .iter()
                .map(|c| ClassDoc {
                    label: c.label.clone(),
                    u_offset: c.u_offset.raw().to_vec(),
                    functional: c.functional.raw().to_vec(),
                    rhs: c.rhs.value(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ConnectionSetDoc) -> Result<Self, FamilyError> {
        let family: Family = doc.family.parse()?;
        let field = PrimeField::new(doc.p)?;
        let classes = doc
            .classes
            .iter()
            .map(|c| {
                AffineClass::new(
                    c.label.clone(),
                    FpVec::from_raw(field, c.u_offset.clone()),
                    FpVec::from_raw(field, c.functional.clone()),
                    field.scalar(c.rhs as i64),
                )
            })
            .collect();
        let set = ConnectionSet::new(family, field, doc.du, doc.dv, classes)?;
        if set.size().to_string() != doc.size {
            return Err(FamilyError::Invalid(format!(
                "declared size {} does not match {}",
                doc.size,
                set.size()
            )));
        }
        Ok(set)
    }
}

impl PolyMap {
    pub fn to_doc(&self) -> PolyMapDoc {
        PolyMapDoc {
            family: self.family.name().to_string(),
            p: self.field.modulus(),
            du: self.du,
            dv: self.dv,
            components: self
                .components
                .iter()
                .map(|c| {
                    c.terms()
                        .map(|(m, &coeff)| TermDoc {
                            exps: m.exps().to_vec(),
                            coeff,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank2p3_shape_p3() {
        let (s, t, phi) = build_family(Family::Rank2p3, 3).unwrap();
        assert_eq!(s.du(), 4);
        assert_eq!(s.dv(), 5);
        assert_eq!(s.classes().len(), 9);
        assert_eq!(s.size(), BigInt::from(729)); // 9 * 3^4
        assert_eq!(s.size(), t.size());
        assert_eq!(phi.dv(), 5);
        // S and T differ in exactly one class, and only in its rhs.
        let diffs: Vec<_> = s
            .classes()
            .iter()
            .zip(t.classes())
            .filter(|(a, b)| a != b)
            .collect();
        assert_eq!(diffs.len(), 1);
        let (c0, c1) = diffs[0];
        assert_eq!(c0.u_offset(), c1.u_offset());
        assert_eq!(c0.functional(), c1.functional());
        assert_eq!(c0.rhs().value(), 0);
        assert_eq!(c1.rhs().value(), 1);
    }

    #[test]
    fn rank2p3_size_p5() {
        let (s, _, _) = build_family(Family::Rank2p3, 5).unwrap();
        assert_eq!(s.size(), BigInt::from(203_125)); // 13 * 5^6
    }

    #[test]
    fn rank4p2_shape_p3() {
        let (s, t, _) = build_family(Family::Rank4p2, 3).unwrap();
        assert_eq!(s.du(), 5);
        assert_eq!(s.dv(), 5);
        assert_eq!(s.classes().len(), 11); // 2(2p-1) + 1
        let c1 = t.class_by_label("C_1").unwrap();
        assert_eq!(c1.rhs().value(), 2); // -1 mod 3
    }

    #[test]
    fn rankbinom_shape_p3() {
        let (s, _, phi) = build_family(Family::RankBinom, 3).unwrap();
        assert_eq!(s.du(), 5);
        assert_eq!(s.dv(), 10); // C(5,3)
        assert_eq!(s.classes().len(), 16); // 5 + 10 + 1
        assert_eq!(phi.dv(), 10);
        // Every component of the monomial map is a single multilinear term.
        for c in phi.components() {
            assert_eq!(c.term_count(), 1);
            let (m, &coeff) = c.terms().next().unwrap();
            assert!(m.is_multilinear());
            assert_eq!(m.degree(), 3);
            assert_eq!(coeff, 1);
        }
    }

    #[test]
    fn b_partners_examples() {
        // k = {1,2,3} (1-based) -> partners {1,4,5}, {2,4,5}, {3,4,5}
        let partners = b_partners(&[0, 1, 2], 3);
        assert_eq!(partners, vec![vec![0, 3, 4], vec![1, 3, 4], vec![2, 3, 4]]);
        // every partner contains the full complement of k
        for k in combinations(5, 3) {
            for partner in b_partners(&k, 3) {
                for i in 0..5 {
                    if !k.contains(&i) {
                        assert!(partner.contains(&i));
                    }
                }
            }
        }
        for k in combinations(9, 5) {
            assert_eq!(b_partners(&k, 5).len(), 5);
        }
    }

    #[test]
    fn membership_examples() {
        let (s, t, _) = build_family(Family::Rank2p3, 3).unwrap();
        let f = s.field();
        // (e_1, 0) lies in A_1 since 0 is orthogonal to everything
        let g = GroupElement::new(FpVec::basis(f, 4, 0), FpVec::zero(f, 5));
        assert!(s.contains(&g));
        // zero offset is never in S
        let g = GroupElement::new(FpVec::zero(f, 4), FpVec::from_ints(f, &[1, 2, 0, 1, 2]));
        assert!(!s.contains(&g));
        // (sum e_j, v) with <v, sum f_j> = 1 is in T but not S
        let v = FpVec::from_ints(f, &[1, 0, 0, 0, 0]);
        let g = GroupElement::new(FpVec::ones(f, 4), v);
        assert!(t.contains(&g));
        assert!(!s.contains(&g));
    }

    #[test]
    fn closure_properties() {
        let (s, _, _) = build_family(Family::Rank2p3, 3).unwrap();
        let sbar = undirected_closure(&s).unwrap();
        assert_eq!(sbar.classes().len(), 18);
        assert_eq!(sbar.size(), BigInt::from(1458));
        assert!(sbar.is_symmetric());
        assert!(!s.is_symmetric());
        // -A_1 has offset -e_1, the same functional, rhs 0
        let neg_a1 = sbar.class_by_label("-A_1").unwrap();
        assert_eq!(neg_a1.u_offset().raw(), &[2, 0, 0, 0]);
        assert_eq!(neg_a1.functional().raw(), &[1, 1, 0, 0, 0]);
        assert_eq!(neg_a1.rhs().value(), 0);
        // closure is idempotent on an already-closed set
        assert_eq!(undirected_closure(&sbar).unwrap(), sbar);
        // partial symmetry is neither directed nor closed
        let mut mixed = sbar.classes().to_vec();
        mixed.truncate(10); // keeps A_1 and -A_1 paired, breaks the rest
        let mixed =
            ConnectionSet::new(s.family(), s.field(), s.du(), s.dv(), mixed).unwrap();
        assert!(matches!(
            undirected_closure(&mixed),
            Err(FamilyError::ClosureOverlap(_))
        ));
    }

    #[test]
    fn exhaustive_disjointness_p3() {
        // Every one of the 729 members of S lies in exactly one class.
        let (s, _, _) = build_family(Family::Rank2p3, 3).unwrap();
        let members = s.elements();
        assert_eq!(BigInt::from(members.len()), s.size());
        for g in &members {
            let hits = s.classes().iter().filter(|c| c.contains(g)).count();
            assert_eq!(hits, 1);
        }
        // distinct elements
        let distinct: std::collections::HashSet<_> = members
            .iter()
            .map(|g| (g.u().raw().to_vec(), g.v().raw().to_vec()))
            .collect();
        assert_eq!(distinct.len(), members.len());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            build_family(Family::Rank2p3, 2),
            Err(FamilyError::BadModulus(_))
        ));
        assert!(matches!(
            build_family(Family::Rank2p3, 9),
            Err(FamilyError::BadModulus(_))
        ));
        assert!(matches!(
            build_family(Family::RankBinom, 7),
            Err(FamilyError::DimensionCap { .. })
        )); // C(13,7) = 1716 > 300
        assert!(matches!(
            build_family(Family::Rank2p3, 11),
            Err(FamilyError::PolynomialsTooLarge { .. })
        )); // 13 * (C(22,11) - 12) is past desk scale
        assert!("rank9000".parse::<Family>().is_err());
    }

    #[test]
    fn doc_round_trip() {
        let (s, _, phi) = build_family(Family::Rank4p2, 3).unwrap();
        let doc = s.to_doc();
        assert_eq!(doc.size, "891"); // 11 * 3^4
        let back = ConnectionSet::from_doc(&doc).unwrap();
        assert_eq!(back, s);
        let json = serde_json::to_string(&doc).unwrap();
        let parsed: ConnectionSetDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, doc);
        assert_eq!(phi.to_doc().components.len(), 5);
    }
}
