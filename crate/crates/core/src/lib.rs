//! Adaptive Polyak (AdaSPS) and line-search (AdaSLS) stepsizes for finite-sum
//! minimization, their loopless variance-reduced variants, the usual baselines,
//! and an experiment harness producing deterministic traces.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod linesearch;
pub mod problem;
pub mod problems;
mod serde_ext;
pub mod steppers;
pub mod varred;
pub mod vector;

pub use error::{Error, Result};
pub use problem::{Batch, FiniteSum, Oracle, OracleCounters, ParamVector, ProjectionDomain, Sampler};
