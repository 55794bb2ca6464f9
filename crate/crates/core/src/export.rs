//! Streaming graph exports: edge lists, digraph6/graph6, and DIMACS.
//!
//! Vertices are the group elements, indexed in mixed radix base p with the
//! U-part most significant and coordinate 0 most significant within each
//! part. An arc g -> h exists for every h - g in the exported set, so each
//! vertex emits exactly |S| arcs. Edge lists are ASCII, one arc per line,
//! LF-terminated, 0-indexed decimal ids, vertices ascending and arcs per
//! vertex in ascending id order of the connection-set element.

use crate::families::{ConnectionSet, GroupElement};
use num_bigint::BigInt;
use std::io::{BufWriter, Write};
use thiserror::Error;

/// Refuse edge-list style exports beyond this many arcs.
pub const DEFAULT_EDGE_CAP: u64 = 20_000_000;

/// Refuse dense matrix formats beyond this many vertices (the bit matrix is
/// quadratic).
pub const DENSE_VERTEX_CAP: u64 = 40_000;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("export would emit {arcs} arcs, over the cap {cap}")]
    TooManyArcs { arcs: String, cap: u64 },
    #[error("graph has {vertices} vertices, over the cap {cap} for this format")]
    TooManyVertices { vertices: String, cap: u64 },
    #[error("graph6 requires an undirected graph; the set is not symmetric")]
    NotSymmetric,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Edges,
    Digraph6,
    Graph6,
    Dimacs,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "edges" => Ok(GraphFormat::Edges),
            "digraph6" => Ok(GraphFormat::Digraph6),
            "graph6" => Ok(GraphFormat::Graph6),
            "dimacs" => Ok(GraphFormat::Dimacs),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportStats {
    pub vertices: u64,
    pub arcs: u64,
    pub lines: u64,
}

/// p^(du + dv); exact, since group orders here overflow any fixed width.
pub fn vertex_count(s: &ConnectionSet) -> BigInt {
    BigInt::from(s.p()).pow((s.du() + s.dv()) as u32)
}

/// Mixed-radix id of a group element: U coordinates first, coordinate 0 most
/// significant.
pub fn vertex_index(g: &GroupElement) -> u64 {
    let p = g.u().field().modulus();
    let mut id = 0u64;
    for &c in g.u().raw().iter().chain(g.v().raw()) {
        id = id * p + c;
    }
    id
}

fn set_member_digits(s: &ConnectionSet) -> Vec<Vec<u64>> {
    let mut members: Vec<Vec<u64>> = s
        .elements()
        .iter()
        .map(|g| g.u().raw().iter().chain(g.v().raw()).copied().collect())
        .collect();
    members.sort_by_key(|digits| digits_to_id(digits, s.p()));
    members
}

fn digits_to_id(digits: &[u64], p: u64) -> u64 {
    digits.iter().fold(0, |acc, &c| acc * p + c)
}

fn write_u64(out: &mut Vec<u8>, mut v: u64) {
    let mut tmp = [0u8; 20];
    let mut i = tmp.len();
    loop {
        i -= 1;
        tmp[i] = b'0' + (v % 10) as u8;
        v /= 10;
        if v == 0 {
            break;
        }
    }
    out.extend_from_slice(&tmp[i..]);
}

/// Advances mixed-radix digits by one; returns false on wrap-around.
fn increment(digits: &mut [u64], p: u64) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < p {
            return true;
        }
        *d = 0;
    }
    false
}

/// One arc per line, `g h`, for h = g + s over all vertices g and members s.
pub fn export_edges<W: Write>(s: &ConnectionSet, out: W) -> Result<ExportStats, ExportError> {
    let ArcPlan { n, members, places } = prepare_arcs(s, DEFAULT_EDGE_CAP, false)?;
    let p = s.p();
    let mut w = BufWriter::with_capacity(1 << 20, out);
    let total = s.du() + s.dv();
    let mut g_digits = vec![0u64; total];
    let mut line: Vec<u8> = Vec::with_capacity(48);
    let mut arcs = 0u64;
    for g_id in 0..n {
        for m in &members {
            let mut h_id = 0u64;
            for k in 0..total {
                let mut d = g_digits[k] + m[k];
                if d >= p {
                    d -= p;
                }
                h_id += d * places[k];
            }
            line.clear();
            write_u64(&mut line, g_id);
            line.push(b' ');
            write_u64(&mut line, h_id);
            line.push(b'\n');
            w.write_all(&line)?;
            arcs += 1;
        }
        increment(&mut g_digits, p);
    }
    w.flush()?;
    Ok(ExportStats {
        vertices: n,
        arcs,
        lines: arcs,
    })
}

/// DIMACS: `p edge n m` header and 1-indexed `e` lines. Symmetric sets are
/// written as undirected edges (each pair once); directed sets one line per
/// arc.
pub fn export_dimacs<W: Write>(s: &ConnectionSet, out: W) -> Result<ExportStats, ExportError> {
    // symmetric sets emit each pair once, so the cap applies to half
    let undirected = s.is_symmetric();
    let ArcPlan { n, members, places } = prepare_arcs(s, DEFAULT_EDGE_CAP, undirected)?;
    let p = s.p();
    let total = s.du() + s.dv();
    let m_count = if undirected {
        n * members.len() as u64 / 2
    } else {
        n * members.len() as u64
    };

    let mut w = BufWriter::with_capacity(1 << 20, out);
    writeln!(w, "p edge {n} {m_count}")?;
    let mut g_digits = vec![0u64; total];
    let mut line: Vec<u8> = Vec::with_capacity(48);
    let mut lines = 1u64;
    for g_id in 0..n {
        for m in &members {
            let mut h_id = 0u64;
            for k in 0..total {
                let mut d = g_digits[k] + m[k];
                if d >= p {
                    d -= p;
                }
                h_id += d * places[k];
            }
            if undirected && g_id > h_id {
                continue;
            }
            line.clear();
            line.extend_from_slice(b"e ");
            write_u64(&mut line, g_id + 1);
            line.push(b' ');
            write_u64(&mut line, h_id + 1);
            line.push(b'\n');
            w.write_all(&line)?;
            lines += 1;
        }
        increment(&mut g_digits, p);
    }
    w.flush()?;
    Ok(ExportStats {
        vertices: n,
        arcs: m_count,
        lines,
    })
}

struct ArcPlan {
    n: u64,
    members: Vec<Vec<u64>>,
    places: Vec<u64>,
}

fn prepare_arcs(s: &ConnectionSet, cap: u64, halve: bool) -> Result<ArcPlan, ExportError> {
    let n_exact = vertex_count(s);
    let mut arcs = &n_exact * s.size();
    if halve {
        arcs /= 2;
    }
    if arcs > BigInt::from(cap) {
        return Err(ExportError::TooManyArcs {
            arcs: arcs.to_string(),
            cap,
        });
    }
    let n: u64 = n_exact.try_into().expect("within the arc cap");
    let members = set_member_digits(s);
    let p = s.p();
    let total = s.du() + s.dv();
    let mut places = vec![1u64; total];
    for k in (0..total - 1).rev() {
        places[k] = places[k + 1] * p;
    }
    Ok(ArcPlan { n, members, places })
}

// ============================================================================
// graph6 / digraph6
// ============================================================================

fn dense_vertex_count(s: &ConnectionSet) -> Result<u64, ExportError> {
    let n = vertex_count(s);
    if n > BigInt::from(DENSE_VERTEX_CAP) {
        return Err(ExportError::TooManyVertices {
            vertices: n.to_string(),
            cap: DENSE_VERTEX_CAP,
        });
    }
    Ok(n.try_into().expect("within the vertex cap"))
}

/// The N(n) size prefix of the graph6 family of formats.
fn size_bytes(n: u64) -> Vec<u8> {
    if n <= 62 {
        vec![n as u8 + 63]
    } else if n <= 258_047 {
        let mut out = vec![126];
        for shift in [12u32, 6, 0] {
            out.push(((n >> shift) & 63) as u8 + 63);
        }
        out
    } else {
        let mut out = vec![126, 126];
        for shift in [30u32, 24, 18, 12, 6, 0] {
            out.push(((n >> shift) & 63) as u8 + 63);
        }
        out
    }
}

/// Packs a bit stream into 6-bit printable characters, zero-padded.
struct BitPacker<W: Write> {
    w: W,
    acc: u8,
    filled: u8,
}

impl<W: Write> BitPacker<W> {
    fn new(w: W) -> Self {
        BitPacker {
            w,
            acc: 0,
            filled: 0,
        }
    }

    fn push(&mut self, bit: bool) -> std::io::Result<()> {
        self.acc = self.acc << 1 | bit as u8;
        self.filled += 1;
        if self.filled == 6 {
            self.w.write_all(&[self.acc + 63])?;
            self.acc = 0;
            self.filled = 0;
        }
        Ok(())
    }

    fn finish(mut self) -> std::io::Result<W> {
        if self.filled > 0 {
            self.acc <<= 6 - self.filled;
            self.w.write_all(&[self.acc + 63])?;
        }
        Ok(self.w)
    }
}

/// Marks, for a fixed base vertex, the ids `base + s` over all members.
struct NeighborMask {
    bits: Vec<u64>,
    marked: Vec<u64>,
}

impl NeighborMask {
    fn new(n: u64) -> Self {
        NeighborMask {
            bits: vec![0; (n as usize).div_ceil(64)],
            marked: Vec::new(),
        }
    }

    fn mark(&mut self, id: u64) {
        self.bits[(id / 64) as usize] |= 1 << (id % 64);
        self.marked.push(id);
    }

    fn get(&self, id: u64) -> bool {
        self.bits[(id / 64) as usize] >> (id % 64) & 1 == 1
    }

    fn clear(&mut self) {
        for id in self.marked.drain(..) {
            self.bits[(id / 64) as usize] = 0;
        }
    }
}

fn neighbor_ids<'a>(
    base_digits: &[u64],
    members: &'a [Vec<u64>],
    places: &'a [u64],
    p: u64,
) -> impl Iterator<Item = u64> + 'a {
    let base = base_digits.to_vec();
    members.iter().map(move |m| {
        let mut id = 0u64;
        for k in 0..base.len() {
            let mut d = base[k] + m[k];
            if d >= p {
                d -= p;
            }
            id += d * places[k];
        }
        id
    })
}

/// digraph6: `&`, N(n), then the adjacency matrix row-major as a bit stream.
pub fn export_digraph6<W: Write>(s: &ConnectionSet, out: W) -> Result<ExportStats, ExportError> {
    let n = dense_vertex_count(s)?;
    let p = s.p();
    let total = s.du() + s.dv();
    let members = set_member_digits(s);
    let mut places = vec![1u64; total];
    for k in (0..total - 1).rev() {
        places[k] = places[k + 1] * p;
    }

    let mut w = BufWriter::with_capacity(1 << 20, out);
    w.write_all(b"&")?;
    w.write_all(&size_bytes(n))?;
    let mut packer = BitPacker::new(w);
    let mut mask = NeighborMask::new(n);
    let mut g_digits = vec![0u64; total];
    loop {
        for id in neighbor_ids(&g_digits, &members, &places, p) {
            mask.mark(id);
        }
        for h in 0..n {
            packer.push(mask.get(h))?;
        }
        mask.clear();
        if !increment(&mut g_digits, p) {
            break;
        }
    }
    let mut w = packer.finish()?;
    w.flush()?;
    Ok(ExportStats {
        vertices: n,
        arcs: n * members.len() as u64,
        lines: 1,
    })
}

/// graph6: N(n) then the upper triangle column-by-column. Only symmetric
/// sets (undirected closures) are accepted.
pub fn export_graph6<W: Write>(s: &ConnectionSet, out: W) -> Result<ExportStats, ExportError> {
    if !s.is_symmetric() {
        return Err(ExportError::NotSymmetric);
    }
    let n = dense_vertex_count(s)?;
    let p = s.p();
    let total = s.du() + s.dv();
    let members = set_member_digits(s);
    let mut places = vec![1u64; total];
    for k in (0..total - 1).rev() {
        places[k] = places[k + 1] * p;
    }

    let mut w = BufWriter::with_capacity(1 << 20, out);
    w.write_all(&size_bytes(n))?;
    let mut packer = BitPacker::new(w);
    let mut mask = NeighborMask::new(n);
    let mut col_digits = vec![0u64; total];
    for j in 0..n {
        // neighbors of column j; symmetry makes row/column order immaterial
        for id in neighbor_ids(&col_digits, &members, &places, p) {
            mask.mark(id);
        }
        for i in 0..j {
            packer.push(mask.get(i))?;
        }
        mask.clear();
        increment(&mut col_digits, p);
    }
    let mut w = packer.finish()?;
    w.flush()?;
    Ok(ExportStats {
        vertices: n,
        arcs: n * members.len() as u64 / 2,
        lines: 1,
    })
}

/// Dispatch by format.
pub fn export<W: Write>(
    s: &ConnectionSet,
    format: GraphFormat,
    out: W,
) -> Result<ExportStats, ExportError> {
    match format {
        GraphFormat::Edges => export_edges(s, out),
        GraphFormat::Digraph6 => export_digraph6(s, out),
        GraphFormat::Graph6 => export_graph6(s, out),
        GraphFormat::Dimacs => export_dimacs(s, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build_family, undirected_closure, AffineClass, Family};
    use crate::gfp::{FpVec, PrimeField};

    /// Z_3^2 with a single one-element class: S = {(1, 0)}.
    fn tiny_set() -> ConnectionSet {
        let f = PrimeField::new(3).unwrap();
        let class = AffineClass::new(
            "X",
            FpVec::from_ints(f, &[1]),
            FpVec::from_ints(f, &[1]),
            f.scalar(0),
        );
        ConnectionSet::new(Family::Rank2p3, f, 1, 1, vec![class]).unwrap()
    }

    #[test]
    fn vertex_indexing_is_mixed_radix_big_endian() {
        let f = PrimeField::new(3).unwrap();
        let g = GroupElement::new(FpVec::from_ints(f, &[1, 2]), FpVec::from_ints(f, &[0, 1]));
        // digits (1,2,0,1) base 3 -> 27 + 2*9 + 0 + 1
        assert_eq!(vertex_index(&g), 46);
    }

    #[test]
    fn tiny_edge_list_is_exact() {
        let s = tiny_set();
        let mut buf = Vec::new();
        let stats = export_edges(&s, &mut buf).unwrap();
        assert_eq!(stats.vertices, 9);
        assert_eq!(stats.arcs, 9);
        let text = String::from_utf8(buf).unwrap();
        let expected = "0 3\n1 4\n2 5\n3 6\n4 7\n5 8\n6 0\n7 1\n8 2\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn dimacs_header_and_indexing() {
        let s = tiny_set();
        let mut buf = Vec::new();
        export_dimacs(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "p edge 9 9");
        assert_eq!(lines.next().unwrap(), "e 1 4");
    }

    #[test]
    fn size_prefix_encodings() {
        assert_eq!(size_bytes(3), vec![b'B']);
        assert_eq!(size_bytes(62), vec![125]);
        // 19683 needs the 18-bit form: '~' then "Crb"
        assert_eq!(size_bytes(19683), vec![126, b'C', b'r', b'b']);
    }

    #[test]
    fn bit_packer_matches_known_small_graphs() {
        // K_3 in graph6 is "Bw": size 3, upper triangle 111, padded 111000.
        let mut out = Vec::new();
        out.extend_from_slice(&size_bytes(3));
        let mut packer = BitPacker::new(out);
        for _ in 0..3 {
            packer.push(true).unwrap();
        }
        let out = packer.finish().unwrap();
        assert_eq!(out, b"Bw");

        // Directed 3-cycle in digraph6 is "&BP_": rows 010 001 100.
        let mut out = Vec::new();
        out.push(b'&');
        out.extend_from_slice(&size_bytes(3));
        let mut packer = BitPacker::new(out);
        for bit in [0, 1, 0, 0, 0, 1, 1, 0, 0] {
            packer.push(bit == 1).unwrap();
        }
        let out = packer.finish().unwrap();
        assert_eq!(out, b"&BP_");
    }

    #[test]
    fn digraph6_bits_match_membership() {
        let s = tiny_set();
        let mut buf = Vec::new();
        export_digraph6(&s, &mut buf).unwrap();
        assert_eq!(buf[0], b'&');
        assert_eq!(buf[1], 9 + 63);
        // Unpack and compare against contains() on h - g.
        let f = s.field();
        let bits: Vec<bool> = buf[2..]
            .iter()
            .flat_map(|&b| (0..6).rev().map(move |k| (b - 63) >> k & 1 == 1))
            .collect();
        for g in 0..9u64 {
            for h in 0..9u64 {
                let gd = [(g / 3), (g % 3)];
                let hd = [(h / 3), (h % 3)];
                let diff = GroupElement::new(
                    FpVec::from_ints(f, &[(hd[0] + 3 - gd[0]) as i64]),
                    FpVec::from_ints(f, &[(hd[1] + 3 - gd[1]) as i64]),
                );
                assert_eq!(
                    bits[(g * 9 + h) as usize],
                    s.contains(&diff),
                    "bit ({g},{h})"
                );
            }
        }
    }

    #[test]
    fn graph6_requires_symmetry() {
        let (s, _, _) = build_family(Family::Rank2p3, 3).unwrap();
        let mut buf = Vec::new();
        assert!(matches!(
            export_graph6(&s, &mut buf).unwrap_err(),
            ExportError::NotSymmetric
        ));
    }

    #[test]
    fn graph6_of_closed_tiny_set_decodes_symmetrically() {
        let sbar = undirected_closure(&tiny_set()).unwrap();
        let mut buf = Vec::new();
        let stats = export_graph6(&sbar, &mut buf).unwrap();
        assert_eq!(stats.vertices, 9);
        assert_eq!(stats.arcs, 9); // 9 * 2 / 2
        let bits: Vec<bool> = buf[1..]
            .iter()
            .flat_map(|&b| (0..6).rev().map(move |k| (b - 63) >> k & 1 == 1))
            .collect();
        // column-by-column upper triangle; reconstruct adjacency and compare
        let mut idx = 0usize;
        let f = sbar.field();
        for j in 0..9u64 {
            for i in 0..j {
                let gd = [(i / 3), (i % 3)];
                let hd = [(j / 3), (j % 3)];
                let diff = GroupElement::new(
                    FpVec::from_ints(f, &[(hd[0] + 3 - gd[0]) as i64]),
                    FpVec::from_ints(f, &[(hd[1] + 3 - gd[1]) as i64]),
                );
                assert_eq!(bits[idx], sbar.contains(&diff), "pair ({i},{j})");
                idx += 1;
            }
        }
    }

    #[test]
    fn arc_cap_rejects_large_exports() {
        let (s, _, _) = build_family(Family::Rank2p3, 5).unwrap();
        let mut sink = std::io::sink();
        assert!(matches!(
            export_edges(&s, &mut sink),
            Err(ExportError::TooManyArcs { .. })
        ));
    }

    #[test]
    fn empty_set_exports_header_only() {
        let f = PrimeField::new(3).unwrap();
        let empty = ConnectionSet::new(Family::Rank2p3, f, 1, 1, vec![]).unwrap();
        let mut buf = Vec::new();
        let stats = export_edges(&empty, &mut buf).unwrap();
        assert_eq!(stats.lines, 0);
        assert!(buf.is_empty());
        let mut buf = Vec::new();
        export_dimacs(&empty, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "p edge 9 0\n");
    }
}
