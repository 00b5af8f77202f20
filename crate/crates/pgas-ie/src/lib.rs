//! Inspector-executor optimization toolkit for a small PGAS loop language.
//!
//! The pipeline: parse a `.pg` program, statically analyze its forall loops
//! for irregular accesses `A[B[i]]` ([`analysis`]), rewrite qualifying loops
//! into inspector/executor form ([`transform`]), and run either version on a
//! deterministic multi-locale simulator ([`interp`], [`runtime`]) that
//! accounts for every local and remote access.

pub mod analysis;
pub mod apps;
pub mod driver;
pub mod gen;
pub mod ast;
pub mod interp;
pub mod parser;
pub mod printer;
pub mod runtime;
pub mod transform;
pub mod validate;
