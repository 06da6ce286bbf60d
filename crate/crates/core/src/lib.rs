//! Loop-invariant discovery and program verification for a small annotated
//! imperative language.

pub mod candidate;
pub mod driver;
pub mod exec;
pub mod gindyn;
pub mod interp;
pub mod lang;
pub mod prover;
pub mod templates;
pub mod testgen;
