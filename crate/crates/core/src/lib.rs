//! Exact construction and verification of pairs of isomorphic Cayley graphs
//! on elementary abelian p-groups whose connection sets are not related by
//! any group automorphism.
//!
//! For a concrete odd prime p the crate builds the three connection-set
//! families (ranks 2p+3, 4p-2 and 2p-1 + C(2p-1, p)), verifies the
//! polynomial map between each pair both symbolically and pointwise, and
//! machine-checks the linear-algebra argument that no invertible linear map
//! sends one set to the other, emitting re-checkable certificates along the
//! way. A brute-force oracle on tiny groups grounds the definitions, and the
//! instances export to standard graph formats.
//!
//! All arithmetic is exact: Z_p with canonical representatives, and
//! arbitrary-precision integers wherever an identity is established over Z
//! before reduction.

pub mod certificate;
pub mod cioracle;
pub mod export;
pub mod families;
pub mod gfp;
pub mod isomap;
pub mod poly;
pub mod polyring;
pub mod refuter;

pub use gfp::{fp_dot, mat_rank, solve_linear, FpMat, FpScalar, FpVec, LinearOutcome, PrimeField};
pub use poly::{IntegerRing, Monomial, Poly, Ring};

/// Sparse polynomial with arbitrary-precision integer coefficients.
pub type IntPoly = Poly<IntegerRing>;

/// Sparse polynomial with coefficients in Z_p.
pub type FpPoly = Poly<PrimeField>;
