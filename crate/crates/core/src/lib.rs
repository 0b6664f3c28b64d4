//! Oracle definition language: parse oracle definitions, score timed traces
//! with them, and compare how different oracles rank the same solutions.

pub mod builtins;
pub mod cli;
pub mod engine;
pub mod eval;
pub mod frontend;
pub mod rank;
pub mod scenario;
pub mod trace;
