//! Application of a polynomial map to group elements, and verification that
//! it is a graph isomorphism from Cay(G, S) to Cay(G, T).
//!
//! The symbolic route checks, per matched class (offset d, functional w,
//! right-side difference t), that the finite difference
//! `Delta_d (sum_j w_j phi_j)` is the constant polynomial t; asserting
//! constancy is itself part of the check. The pointwise route independently
//! walks base points and verifies the membership transfer directly.

use crate::families::{ConnectionSet, GroupElement, PolyMap};
use crate::gfp::FpVec;
use crate::polyring::eval_fp;
use crate::FpPoly;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsoError {
    #[error("sets are not class-matched: {0}")]
    Mismatched(String),
    #[error("exhaustive budget needs p^du = {points} <= {cap} base points")]
    TooManyPoints { points: u128, cap: u128 },
}

/// How many base points the pointwise verifier visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Every x in Z_p^du.
    Exhaustive,
    /// A fixed number of seeded random base points.
    Sampled(usize),
}

pub const EXHAUSTIVE_POINT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassCheck {
    pub label: String,
    /// Digest of the difference polynomial (symbolic mode only).
    pub digest: Option<String>,
    /// Required constant: rhs_T - rhs_S, canonical in [0, p-1].
    pub target: u64,
    pub observed: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct IsoReport {
    pub family: String,
    pub p: u64,
    pub mode: String,
    pub pass: bool,
    pub classes: Vec<ClassCheck>,
}

impl IsoReport {
    fn from_classes(family: String, p: u64, mode: &str, classes: Vec<ClassCheck>) -> Self {
        IsoReport {
            family,
            p,
            mode: mode.to_string(),
            pass: classes.iter().all(|c| c.pass),
            classes,
        }
    }
}

/// `(x, y) -> (x, y + (q_0(x), ..., q_{dv-1}(x)))`.
pub fn apply_polymap(phi: &PolyMap, g: &GroupElement) -> GroupElement {
    assert_eq!(g.u().dim(), phi.du(), "dimension mismatch");
    assert_eq!(g.v().dim(), phi.dv(), "dimension mismatch");
    let field = phi.field();
    let translation = FpVec::from_raw(
        field,
        phi.components()
            .iter()
            .map(|q| eval_fp(q, g.u()).value())
            .collect(),
    );
    GroupElement::new(g.u().clone(), g.v().add(&translation))
}

/// Pairs the classes of S and T by position, insisting that everything but
/// the right-hand side agrees.
fn matched_pairs<'a>(
    s: &'a ConnectionSet,
    t: &'a ConnectionSet,
) -> Result<Vec<(&'a crate::families::AffineClass, &'a crate::families::AffineClass)>, IsoError> {
    if s.p() != t.p() || s.du() != t.du() || s.dv() != t.dv() {
        return Err(IsoError::Mismatched("different ambient groups".into()));
    }
    if s.classes().len() != t.classes().len() {
        return Err(IsoError::Mismatched("different class counts".into()));
    }
    let mut pairs = Vec::with_capacity(s.classes().len());
    for (cs, ct) in s.classes().iter().zip(t.classes()) {
        if cs.u_offset() != ct.u_offset() || cs.functional() != ct.functional() {
            return Err(IsoError::Mismatched(format!(
                "classes {} and {} differ beyond their right side",
                cs.label(),
                ct.label()
            )));
        }
        pairs.push((cs, ct));
    }
    Ok(pairs)
}

/// Symbolic verification: for each matched class the difference polynomial
/// must be exactly the constant rhs_T - rhs_S.
pub fn verify_polymap_symbolic(
    s: &ConnectionSet,
    t: &ConnectionSet,
    phi: &PolyMap,
) -> Result<IsoReport, IsoError> {
    let pairs = matched_pairs(s, t)?;
    let field = phi.field();
    let classes: Vec<ClassCheck> = pairs
        .par_iter()
        .map(|(cs, ct)| {
            let w = cs.functional();
            let mut combined = FpPoly::zero(field, phi.du());
            for (j, q) in phi.components().iter().enumerate() {
                let wj = w.raw()[j];
                if wj != 0 {
                    combined = combined.add(&q.scale(&wj));
                }
            }
            let diff = combined.delta(cs.u_offset().raw());
            let target = (ct.rhs() - cs.rhs()).value();
            let (observed, pass) = match diff.as_constant() {
                Some(c) => (format!("constant {c}"), c == target),
                None => (format!("non-constant ({} terms)", diff.term_count()), false),
            };
            ClassCheck {
                label: cs.label().to_string(),
                digest: Some(poly_digest(&diff)),
                target,
                observed,
                pass,
                witness: None,
            }
        })
        .collect();
    Ok(IsoReport::from_classes(
        s.family().name().to_string(),
        s.p(),
        "symbolic",
        classes,
    ))
}

/// Pointwise verification: for base points x and every class, pick b - a
/// with the class offset and admissible v-parts and check that
/// `phi(b) - phi(a)` lands in T. The v-part is sampled twice per point; the
/// outcome must not depend on it.
pub fn verify_polymap_pointwise(
    s: &ConnectionSet,
    t: &ConnectionSet,
    phi: &PolyMap,
    budget: Budget,
    seed: u64,
) -> Result<IsoReport, IsoError> {
    let pairs = matched_pairs(s, t)?;
    let field = phi.field();
    let p = field.modulus();
    let du = phi.du();

    let base_points: Vec<FpVec> = match budget {
        Budget::Exhaustive => {
            let points = (p as u128).pow(du as u32);
            if points > EXHAUSTIVE_POINT_CAP {
                return Err(IsoError::TooManyPoints {
                    points,
                    cap: EXHAUSTIVE_POINT_CAP,
                });
            }
            (0..points as u64)
                .map(|mut code| {
                    let mut coords = vec![0u64; du];
                    for c in coords.iter_mut() {
                        *c = code % p;
                        code /= p;
                    }
                    FpVec::from_raw(field, coords)
                })
                .collect()
        }
        Budget::Sampled(n) => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| {
                    FpVec::from_raw(field, (0..du).map(|_| rng.gen_range(0..p)).collect())
                })
                .collect()
        }
    };

    let classes: Vec<ClassCheck> = pairs
        .iter()
        .enumerate()
        .map(|(class_idx, (cs, ct))| {
            let target = (ct.rhs() - cs.rhs()).value();
            let failure = base_points
                .par_iter()
                .enumerate()
                .find_map_first(|(point_idx, x)| {
                    // Two independent admissible v-parts per base point.
                    let mut rng = ChaCha12Rng::seed_from_u64(
                        seed ^ ((class_idx as u64) << 32) ^ point_idx as u64,
                    );
                    for _ in 0..2 {
                        let v_g = sample_on_hyperplane(cs.functional(), cs.rhs().value(), &mut rng);
                        let y = FpVec::from_raw(
                            field,
                            (0..s.dv()).map(|_| rng.gen_range(0..p)).collect(),
                        );
                        let a = GroupElement::new(x.clone(), y);
                        let g = GroupElement::new(cs.u_offset().clone(), v_g);
                        let b = a.add(&g);
                        debug_assert!(s.contains(&g));
                        let image = apply_polymap(phi, &b).sub(&apply_polymap(phi, &a));
                        if !ct.contains(&image) || !t.contains(&image) {
                            return Some(format!("x = {x}, class {}", cs.label()));
                        }
                    }
                    None
                });
            ClassCheck {
                label: cs.label().to_string(),
                digest: None,
                target,
                observed: format!("{} base points, 2 v-samples each", base_points.len()),
                pass: failure.is_none(),
                witness: failure,
            }
        })
        .collect();

    Ok(IsoReport::from_classes(
        s.family().name().to_string(),
        s.p(),
        "pointwise",
        classes,
    ))
}

/// A uniform point of the affine hyperplane `<v, w> = c`.
fn sample_on_hyperplane(w: &FpVec, c: u64, rng: &mut ChaCha12Rng) -> FpVec {
    let f = w.field();
    let p = f.modulus();
    let pivot = w
        .raw()
        .iter()
        .position(|&x| x != 0)
        .expect("functional is nonzero");
    let mut v: Vec<u64> = (0..w.dim()).map(|_| rng.gen_range(0..p)).collect();
    let mut dot = 0u64;
    for (j, &wj) in w.raw().iter().enumerate() {
        if j != pivot {
            dot = f.add(dot, f.mul(wj, v[j]));
        }
    }
    v[pivot] = f.mul(f.sub(c, dot), f.inv(w.raw()[pivot]));
    FpVec::from_raw(f, v)
}

/// FNV-1a over the canonical term list; stable across runs.
fn poly_digest(f: &FpPoly) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for (m, &c) in f.terms() {
        for &e in m.exps() {
            for b in e.to_le_bytes() {
                eat(b);
            }
        }
        for b in c.to_le_bytes() {
            eat(b);
        }
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_family, Family};
    use crate::polyring::build_r;

    #[test]
    fn apply_fixes_origin_coset() {
        let (_, _, phi) = build_family(Family::Rank2p3, 3).unwrap();
        let f = phi.field();
        let v = FpVec::from_ints(f, &[1, 2, 0, 1, 2]);
        let g = GroupElement::new(FpVec::zero(f, 4), v.clone());
        let image = apply_polymap(&phi, &g);
        assert_eq!(image.u(), g.u());
        assert_eq!(image.v(), &v); // all components vanish at 0
    }

    #[test]
    fn apply_translates_by_component_evaluations() {
        let (_, _, phi) = build_family(Family::Rank2p3, 3).unwrap();
        let f = phi.field();
        let x = FpVec::ones(f, 4);
        let g = GroupElement::new(x.clone(), FpVec::zero(f, 5));
        let image = apply_polymap(&phi, &g);
        for (j, rj) in build_r(f).iter().enumerate() {
            assert_eq!(image.v().get(j), eval_fp(rj, &x));
        }
    }

    #[test]
    fn translation_depends_only_on_u() {
        let (_, _, phi) = build_family(Family::Rank4p2, 3).unwrap();
        let f = phi.field();
        let x = FpVec::from_ints(f, &[1, 0, 2, 1, 0]);
        let y1 = FpVec::from_ints(f, &[0, 1, 2, 0, 1]);
        let y2 = FpVec::from_ints(f, &[2, 2, 0, 1, 1]);
        let t1 = apply_polymap(&phi, &GroupElement::new(x.clone(), y1.clone()))
            .v()
            .sub(&y1);
        let t2 = apply_polymap(&phi, &GroupElement::new(x.clone(), y2.clone()))
            .v()
            .sub(&y2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn symbolic_passes_for_all_three_families_p3() {
        for family in [Family::Rank2p3, Family::Rank4p2, Family::RankBinom] {
            let (s, t, phi) = build_family(family, 3).unwrap();
            let report = verify_polymap_symbolic(&s, &t, &phi).unwrap();
            assert!(report.pass, "{family}: {report:?}");
        }
    }

    #[test]
    fn symbolic_class_constants_match_the_construction() {
        let (s, t, phi) = build_family(Family::Rank2p3, 3).unwrap();
        let report = verify_polymap_symbolic(&s, &t, &phi).unwrap();
        for c in &report.classes {
            let expected = if c.label == "C_0" { 1 } else { 0 };
            assert_eq!(c.target, expected);
            assert_eq!(c.observed, format!("constant {expected}"), "{}", c.label);
        }
        // rank4p2's C-pair difference is -1
        let (s, t, phi) = build_family(Family::Rank4p2, 3).unwrap();
        let report = verify_polymap_symbolic(&s, &t, &phi).unwrap();
        let c = report.classes.iter().find(|c| c.label == "C_0").unwrap();
        assert_eq!(c.target, 2); // -1 mod 3
        assert!(c.pass);
    }

    #[test]
    fn pointwise_exhaustive_agrees_p3() {
        for family in [Family::Rank2p3, Family::Rank4p2, Family::RankBinom] {
            let (s, t, phi) = build_family(family, 3).unwrap();
            let symbolic = verify_polymap_symbolic(&s, &t, &phi).unwrap();
            let pointwise =
                verify_polymap_pointwise(&s, &t, &phi, Budget::Exhaustive, 7).unwrap();
            assert!(pointwise.pass);
            assert_eq!(symbolic.pass, pointwise.pass);
        }
    }

    #[test]
    fn perturbed_functional_in_both_sets_fails() {
        // Adding a stray basis vector to one functional (in S and T alike,
        // so the pair still matches) must break both verification routes.
        let (s, t, phi) = build_family(Family::Rank2p3, 3).unwrap();
        let f = s.field();
        let perturb = |set: &ConnectionSet| {
            let classes: Vec<_> = set
                .classes()
                .iter()
                .map(|c| {
                    if c.label() == "A_1" {
                        let w = c.functional().add(&FpVec::basis(f, 5, 2));
                        crate::families::AffineClass::new(
                            c.label().to_string(),
                            c.u_offset().clone(),
                            w,
                            c.rhs(),
                        )
                    } else {
                        c.clone()
                    }
                })
                .collect();
            ConnectionSet::new(set.family(), f, set.du(), set.dv(), classes).unwrap()
        };
        let bad_s = perturb(&s);
        let bad_t = perturb(&t);
        let symbolic = verify_polymap_symbolic(&bad_s, &bad_t, &phi).unwrap();
        assert!(!symbolic.pass);
        assert!(!symbolic.classes.iter().find(|c| c.label == "A_1").unwrap().pass);
        let pointwise =
            verify_polymap_pointwise(&bad_s, &bad_t, &phi, Budget::Exhaustive, 3).unwrap();
        assert!(!pointwise.pass);
        assert!(pointwise
            .classes
            .iter()
            .any(|c| !c.pass && c.witness.is_some()));
    }

    #[test]
    fn corrupted_target_fails_with_witness() {
        let (s, t, phi) = build_family(Family::Rank2p3, 3).unwrap();
        let bad_t = t.with_class_rhs("A_1", 1);
        let symbolic = verify_polymap_symbolic(&s, &bad_t, &phi).unwrap();
        assert!(!symbolic.pass);
        let bad_class = symbolic.classes.iter().find(|c| !c.pass).unwrap();
        assert_eq!(bad_class.label, "A_1");

        let pointwise =
            verify_polymap_pointwise(&s, &bad_t, &phi, Budget::Sampled(50), 42).unwrap();
        assert!(!pointwise.pass);
        let bad_class = pointwise.classes.iter().find(|c| !c.pass).unwrap();
        assert_eq!(bad_class.label, "A_1");
        assert!(bad_class.witness.is_some());
    }

    #[test]
    fn exhaustive_cap_is_enforced() {
        let (s, t, phi) = build_family(Family::Rank4p2, 7).unwrap();
        // 7^13 base points is far over the exhaustive cap
        assert!(matches!(
            verify_polymap_pointwise(&s, &t, &phi, Budget::Exhaustive, 0),
            Err(IsoError::TooManyPoints { .. })
        ));
    }

    #[test]
    fn perturbed_functional_fails_symbolically() {
        let (s, t, phi) = build_family(Family::Rank2p3, 3).unwrap();
        // matched_pairs refuses sets whose functionals differ
        let f = s.field();
        let mut classes: Vec<_> = t.classes().to_vec();
        let c0 = &classes[0];
        classes[0] = crate::families::AffineClass::new(
            c0.label().to_string(),
            c0.u_offset().clone(),
            FpVec::from_ints(f, &[1, 1, 1, 0, 2]),
            c0.rhs(),
        );
        let bad_t =
            ConnectionSet::new(t.family(), f, t.du(), t.dv(), classes).unwrap();
        assert!(verify_polymap_symbolic(&s, &bad_t, &phi).is_err());
    }
}
