//! Independent brute-force CI checking on tiny elementary abelian groups.
//!
//! This grounds the definitions: over groups small enough to enumerate, two
//! Cayley digraphs are graph-isomorphic exactly when a group automorphism
//! maps one connection set to the other. The scan works orbit-first: subsets
//! are grouped into GL-orbits, and one graph-canonical form per orbit decides
//! the graph-isomorphism side.

use crate::gfp::{FpMat, FpVec, PrimeField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Canonical forms are computed by exhaustive permutation search; twelve
/// vertices is where that stops being a desk-scale operation.
pub const MAX_CANON_VERTICES: usize = 12;

/// Largest group the CI scan will enumerate subsets of.
pub const MAX_SCAN_VERTICES: u64 = 10;

/// Cap on |GL(n, p)| for enumeration.
pub const MAX_GL_ORDER: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("canonical forms support at most {max} vertices (got {n})")]
    TooManyVertices { n: usize, max: usize },
    #[error("group has {vertices} elements, over the scan cap {cap}")]
    GroupTooLarge { vertices: u64, cap: u64 },
    #[error("|GL({n}, {p})| = {order} exceeds the enumeration cap {cap}")]
    GlTooLarge { n: usize, p: u64, order: u128, cap: u128 },
    #[error("definitional failure: automorphism #{sigma} is not a graph isomorphism for subset mask {mask}")]
    Definitional { mask: u64, sigma: usize },
    #[error(transparent)]
    BadModulus(#[from] crate::gfp::GfpError),
}

// ============================================================================
// Small digraphs and canonical forms
// ============================================================================

/// A digraph on at most 16 vertices, rows as adjacency bitsets. Loop-free:
/// connection sets never contain the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallDigraph {
    n: usize,
    adj: Vec<u16>,
}

impl SmallDigraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        assert!(n <= 16);
        let mut adj = vec![0u16; n];
        for (i, j) in edges {
            assert!(i < n && j < n, "vertex out of range");
            assert_ne!(i, j, "self-loops are not allowed");
            adj[i] |= 1 << j;
        }
        SmallDigraph { n, adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i] >> j & 1 == 1
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.adj[i].count_ones() as usize
    }

    pub fn in_degree(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.has_edge(i, j)).count()
    }

    /// Relabels vertices: vertex `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SmallDigraph {
        assert_eq!(perm.len(), self.n);
        SmallDigraph::from_edges(
            self.n,
            (0..self.n).flat_map(|i| {
                (0..self.n)
                    .filter(move |&j| self.has_edge(i, j))
                    .map(move |j| (perm[i], perm[j]))
            }),
        )
    }
}

/// Minimal adjacency encoding over all vertex permutations compatible with
/// the (out-degree, in-degree) partition; equal byte strings exactly when
/// the digraphs are isomorphic.
pub fn digraph_canon(d: &SmallDigraph) -> Result<Vec<u8>, OracleError> {
    let n = d.n;
    if n > MAX_CANON_VERTICES {
        return Err(OracleError::TooManyVertices {
            n,
            max: MAX_CANON_VERTICES,
        });
    }
    if n == 0 {
        return Ok(vec![0]);
    }

    // Color vertices by degree pair; positions inherit the sorted colors.
    let colors: Vec<(usize, usize)> = (0..n).map(|v| (d.out_degree(v), d.in_degree(v))).collect();
    let mut sorted = colors.clone();
    sorted.sort();
    let position_color: Vec<(usize, usize)> = sorted;

    struct Search<'a> {
        d: &'a SmallDigraph,
        colors: Vec<(usize, usize)>,
        position_color: Vec<(usize, usize)>,
        best: Option<Vec<u32>>,
    }

    impl Search<'_> {
        fn dfs(&mut self, level: usize, used: u16, perm: &mut Vec<usize>, chunks: &mut Vec<u32>, tight: bool) {
            let n = self.d.n;
            if level == n {
                if self.best.as_ref().is_none_or(|b| chunks[..] < b[..]) {
                    self.best = Some(chunks.clone());
                }
                return;
            }
            for v in 0..n {
                if used >> v & 1 == 1 || self.colors[v] != self.position_color[level] {
                    continue;
                }
                // Bits between the new vertex and everything already placed.
                let mut chunk = 0u32;
                for &w in perm.iter() {
                    chunk = chunk << 1 | self.d.has_edge(w, v) as u32;
                    chunk = chunk << 1 | self.d.has_edge(v, w) as u32;
                }
                let (prune, still_tight) = match (&self.best, tight) {
                    (Some(best), true) => match chunk.cmp(&best[level]) {
                        std::cmp::Ordering::Greater => (true, false),
                        std::cmp::Ordering::Equal => (false, true),
                        std::cmp::Ordering::Less => (false, false),
                    },
                    _ => (false, false),
                };
                if prune {
                    continue;
                }
                perm.push(v);
                chunks.push(chunk);
                self.dfs(level + 1, used | 1 << v, perm, chunks, tight && still_tight);
                chunks.pop();
                perm.pop();
            }
        }
    }

    let mut search = Search {
        d,
        colors,
        position_color,
        best: None,
    };
    search.dfs(0, 0, &mut Vec::with_capacity(n), &mut Vec::with_capacity(n), true);
    let chunks = search.best.expect("at least one permutation exists");

    let mut bytes = Vec::with_capacity(1 + 4 * n);
    bytes.push(n as u8);
    for c in chunks {
        bytes.extend_from_slice(&c.to_be_bytes());
    }
    Ok(bytes)
}

// ============================================================================
// GL(n, p) enumeration
// ============================================================================

/// |GL(n, p)|, saturating at u128::MAX for sizes far past any cap.
pub fn gl_order(n: usize, p: u64) -> u128 {
    use num_bigint::BigInt;
    let pn = BigInt::from(p).pow(n as u32);
    let order: BigInt = (0..n as u32)
        .map(|i| &pn - BigInt::from(p).pow(i))
        .product();
    order.try_into().unwrap_or(u128::MAX)
}

/// All invertible n x n matrices over Z_p, ordered lexicographically by rows
/// (each row read as a base-p number, most significant coordinate first).
pub fn gl_enumerate(n: usize, p: u64) -> Result<Vec<FpMat>, OracleError> {
    // The oracle also scans Z_2, which the main constructions exclude.
    let field = PrimeField::new_any_prime(p)?;
    let order = gl_order(n, p);
    if order > MAX_GL_ORDER {
        return Err(OracleError::GlTooLarge {
            n,
            p,
            order,
            cap: MAX_GL_ORDER,
        });
    }

    let dim = (p as usize).pow(n as u32);
    let mut out = Vec::with_capacity(order as usize);
    let mut rows: Vec<FpVec> = Vec::with_capacity(n);
    // span starts as {0}
    let mut span = vec![false; dim];
    span[0] = true;
    extend(field, n, p, &mut rows, &mut span, &mut out);
    assert_eq!(out.len() as u128, order, "enumeration disagrees with the order formula");
    Ok(out)
}

fn extend(
    field: PrimeField,
    n: usize,
    p: u64,
    rows: &mut Vec<FpVec>,
    span: &mut [bool],
    out: &mut Vec<FpMat>,
) {
    if rows.len() == n {
        out.push(FpMat::from_rows(field, rows));
        return;
    }
    let dim = span.len();
    for code in 0..dim {
        if span[code] {
            continue; // dependent on the rows chosen so far
        }
        let row = FpVec::from_raw(field, decode(code as u64, n, p));
        // extend the span with all multiples of the new row
        let mut new_span = span.to_vec();
        for (s, was) in span.iter().enumerate() {
            if !was {
                continue;
            }
            let base = FpVec::from_raw(field, decode(s as u64, n, p));
            for c in 1..p {
                let v = base.add(&row.scale(c as i64));
                new_span[encode(v.raw(), p) as usize] = true;
            }
        }
        rows.push(row);
        extend(field, n, p, rows, &mut new_span, out);
        rows.pop();
    }
}

fn decode(mut code: u64, n: usize, p: u64) -> Vec<u64> {
    let mut coords = vec![0u64; n];
    for i in (0..n).rev() {
        coords[i] = code % p;
        code /= p;
    }
    coords
}

fn encode(coords: &[u64], p: u64) -> u64 {
    coords.iter().fold(0, |acc, &c| acc * p + c)
}

// ============================================================================
// The CI scan
// ============================================================================

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct OracleReport {
    pub n: usize,
    pub p: u64,
    pub vertices: u64,
    pub gl_order: u64,
    pub subsets_scanned: u64,
    pub orbit_count: usize,
    pub definitional_checks: u64,
    /// Pairs of orbit representatives whose Cayley digraphs are isomorphic
    /// without being GL-related; empty exactly when the group is CI at this
    /// size.
    pub counterexamples: Vec<(u64, u64)>,
    pub pass: bool,
}

/// The Cayley digraph of Z_p^n on the subset encoded by `mask` (bit e-1 for
/// the group element with index e; the identity is excluded).
pub fn cayley_digraph(n: usize, p: u64, mask: u64) -> SmallDigraph {
    let g = (p as usize).pow(n as u32);
    let field_sub = |x: usize, y: usize| {
        let xv = decode(x as u64, n, p);
        let yv = decode(y as u64, n, p);
        let diff: Vec<u64> = xv
            .iter()
            .zip(&yv)
            .map(|(&a, &b)| (a + p - b) % p)
            .collect();
        encode(&diff, p) as usize
    };
    SmallDigraph::from_edges(
        g,
        (0..g).flat_map(|x| {
            (0..g).filter_map(move |y| {
                let d = field_sub(x, y);
                (d != 0 && mask >> (d - 1) & 1 == 1).then_some((x, y))
            })
        }),
    )
}

/// For every pair of connection sets S, T of Z_p^n, graph isomorphism of the
/// Cayley digraphs must coincide with GL-equivalence of the sets. The
/// automorphism direction is verified on every (subset, matrix) pair; the
/// converse is decided orbit-by-orbit through canonical forms.
pub fn ci_scan(n: usize, p: u64) -> Result<OracleReport, OracleError> {
    let vertices = p.pow(n as u32);
    if vertices > MAX_SCAN_VERTICES {
        return Err(OracleError::GroupTooLarge {
            vertices,
            cap: MAX_SCAN_VERTICES,
        });
    }
    let g = vertices as usize;
    let gl = gl_enumerate(n, p)?;

    // Each matrix as a permutation of element indices.
    let perms: Vec<Vec<usize>> = gl
        .iter()
        .map(|m| {
            (0..g)
                .map(|x| {
                    let v = FpVec::from_raw(m.field(), decode(x as u64, n, p));
                    encode(m.mul_vec(&v).raw(), p) as usize
                })
                .collect()
        })
        .collect();

    let subsets: u64 = 1 << (g - 1);
    let apply = |perm: &[usize], mask: u64| -> u64 {
        let mut out = 0u64;
        for (e, &image) in perm.iter().enumerate().skip(1) {
            if mask >> (e - 1) & 1 == 1 {
                out |= 1 << (image - 1);
            }
        }
        out
    };

    // Direction "automorphism => graph isomorphism", checked pairwise on
    // adjacency itself, not on the algebra that makes it obvious.
    let mut definitional_checks = 0u64;
    for mask in 0..subsets {
        let d = cayley_digraph(n, p, mask);
        for (si, perm) in perms.iter().enumerate() {
            let image = apply(perm, mask);
            let di = cayley_digraph(n, p, image);
            definitional_checks += 1;
            for x in 0..g {
                for y in 0..g {
                    if x == y {
                        continue;
                    }
                    if d.has_edge(x, y) != di.has_edge(perm[x], perm[y]) {
                        return Err(OracleError::Definitional { mask, sigma: si });
                    }
                }
            }
        }
    }

    // GL-orbits via minimal image.
    let mut orbit_rep: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for mask in 0..subsets {
        let rep = perms.iter().map(|perm| apply(perm, mask)).min().unwrap();
        orbit_rep.entry(rep).or_default().push(mask);
    }

    // One canonical form per orbit decides the converse direction.
    let reps: Vec<u64> = orbit_rep.keys().copied().collect();
    let canons: Vec<(u64, Vec<u8>)> = reps
        .par_iter()
        .map(|&rep| {
            let canon = digraph_canon(&cayley_digraph(n, p, rep))
                .expect("scan cap keeps graphs within the canon cap");
            (rep, canon)
        })
        .collect();
    let mut by_canon: BTreeMap<Vec<u8>, Vec<u64>> = BTreeMap::new();
    for (rep, canon) in canons {
        by_canon.entry(canon).or_default().push(rep);
    }
    let mut counterexamples = Vec::new();
    for reps_with_same_graph in by_canon.values() {
        for (i, &a) in reps_with_same_graph.iter().enumerate() {
            for &b in &reps_with_same_graph[i + 1..] {
                counterexamples.push((a, b));
            }
        }
    }
    counterexamples.sort();

    Ok(OracleReport {
        n,
        p,
        vertices,
        gl_order: gl.len() as u64,
        subsets_scanned: subsets,
        orbit_count: orbit_rep.len(),
        definitional_checks,
        pass: counterexamples.is_empty(),
        counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canon_trivial_examples() {
        // empty graph: any labeling gives the same form
        let e1 = SmallDigraph::from_edges(3, []);
        let e2 = e1.permuted(&[2, 0, 1]);
        assert_eq!(digraph_canon(&e1).unwrap(), digraph_canon(&e2).unwrap());

        // a directed 3-cycle and its reverse are isomorphic (reflection)
        let c = SmallDigraph::from_edges(3, [(0, 1), (1, 2), (2, 0)]);
        let r = SmallDigraph::from_edges(3, [(1, 0), (2, 1), (0, 2)]);
        assert_eq!(digraph_canon(&c).unwrap(), digraph_canon(&r).unwrap());

        // a single arc differs from a 2-cycle
        let p = SmallDigraph::from_edges(2, [(0, 1)]);
        let b = SmallDigraph::from_edges(2, [(0, 1), (1, 0)]);
        assert_ne!(digraph_canon(&p).unwrap(), digraph_canon(&b).unwrap());
    }

    #[test]
    fn canon_is_permutation_invariant() {
        // deterministic xorshift for reproducible "random" graphs and perms
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for n in [4usize, 6, 7] {
            for _ in 0..25 {
                let d = SmallDigraph::from_edges(
                    n,
                    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| {
                        i != j && next() % 3 == 0
                    }),
                );
                let base = digraph_canon(&d).unwrap();
                for _ in 0..100 {
                    // random permutation by sorting random keys
                    let mut keyed: Vec<(u64, usize)> = (0..n).map(|v| (next(), v)).collect();
                    keyed.sort();
                    let perm: Vec<usize> = keyed.into_iter().map(|(_, v)| v).collect();
                    assert_eq!(digraph_canon(&d.permuted(&perm)).unwrap(), base);
                }
            }
        }
    }

    #[test]
    fn canon_rejects_large_graphs() {
        let d = SmallDigraph::from_edges(13, []);
        assert!(matches!(
            digraph_canon(&d),
            Err(OracleError::TooManyVertices { .. })
        ));
    }

    #[test]
    fn gl_counts() {
        assert_eq!(gl_enumerate(2, 3).unwrap().len(), 48); // (9-1)(9-3)
        assert_eq!(gl_enumerate(1, 3).unwrap().len(), 2);
        assert_eq!(gl_enumerate(2, 2).unwrap().len(), 6); // (4-1)(4-2)
        assert_eq!(gl_enumerate(3, 2).unwrap().len(), 168);
    }

    #[test]
    fn gl_order_is_deterministic() {
        // lexicographic by rows: the first invertible matrix over Z_3 picks
        // row (0,1), then the first row outside its span, (1,0)
        let mats = gl_enumerate(2, 3).unwrap();
        let first = &mats[0];
        assert_eq!(
            [first.get(0, 0), first.get(0, 1), first.get(1, 0), first.get(1, 1)],
            [0, 1, 1, 0]
        );
        let again = gl_enumerate(2, 3).unwrap();
        assert_eq!(mats, again);
    }

    #[test]
    fn gl_matrices_are_invertible_and_distinct() {
        let mats = gl_enumerate(2, 3).unwrap();
        let distinct: std::collections::HashSet<Vec<u64>> = mats
            .iter()
            .map(|m| (0..2).flat_map(|i| (0..2).map(move |j| m.get(i, j))).collect())
            .collect();
        assert_eq!(distinct.len(), 48);
        for m in &mats {
            assert_eq!(crate::gfp::mat_rank(m), 2);
        }
    }

    #[test]
    fn scan_trivial_group() {
        let report = ci_scan(1, 3).unwrap();
        assert_eq!(report.subsets_scanned, 4);
        assert!(report.pass);
    }

    #[test]
    fn scan_caps() {
        assert!(matches!(
            ci_scan(4, 3),
            Err(OracleError::GroupTooLarge { vertices: 81, .. })
        ));
    }

    #[test]
    fn orbit_scan_agrees_with_pairwise_scan_z2_squared() {
        // Z_2^2: 8 subsets, small enough to compare the orbit route against
        // an honest all-pairs scan.
        let (n, p) = (2usize, 2u64);
        let report = ci_scan(n, p).unwrap();
        assert!(report.pass);

        let gl = gl_enumerate(n, p).unwrap();
        let g = 4usize;
        let perms: Vec<Vec<usize>> = gl
            .iter()
            .map(|m| {
                (0..g)
                    .map(|x| {
                        let v = FpVec::from_raw(m.field(), decode(x as u64, n, p));
                        encode(m.mul_vec(&v).raw(), p) as usize
                    })
                    .collect()
            })
            .collect();
        let apply = |perm: &[usize], mask: u64| -> u64 {
            let mut out = 0u64;
            for (e, &image) in perm.iter().enumerate().skip(1) {
                if mask >> (e - 1) & 1 == 1 {
                    out |= 1 << (image - 1);
                }
            }
            out
        };
        for a in 0..8u64 {
            for b in 0..8u64 {
                let iso = digraph_canon(&cayley_digraph(n, p, a)).unwrap()
                    == digraph_canon(&cayley_digraph(n, p, b)).unwrap();
                let related = perms.iter().any(|perm| apply(perm, a) == b);
                assert_eq!(iso, related, "masks {a} and {b}");
            }
        }
    }
}
