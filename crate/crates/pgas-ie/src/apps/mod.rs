//! Benchmark applications, dataset tooling, and experiment orchestration.

pub mod csr;
pub mod experiment;
pub mod graph;
pub mod mtx;
pub mod programs;
pub mod synth;
