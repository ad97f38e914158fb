//! Construction and verification of quadratic fields with large class-group
//! m-rank, driven by specializations of hyperelliptic curves.
//!
//! The pipeline: `specialize` manufactures field discriminants from curve
//! specializations, `classgroup` computes the class groups that certify them,
//! `census` counts what was produced, and `arith`/`forms`/`lattice`/`localize`
//! supply the exact arithmetic underneath.

pub mod arith;
pub mod census;
pub mod classgroup;
pub mod forms;
pub mod lattice;
pub mod localize;
pub mod specialize;
