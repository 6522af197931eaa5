//! Test-time re-routing of mixture-of-experts routing weights.
//!
//! A frozen bank of experts is steered per input by adjusting only the
//! router's output weights on the probability simplex. The crate provides
//! the toy expert model, neighborhood search over a sealed reference set,
//! four re-routing strategies (oracle gradient descent, neighborhood
//! gradient descent, kernel regression with line search, mode finding), a
//! synthetic miscalibrated-router benchmark, evaluation analytics, and the
//! artifact plumbing (text record formats, TOML config, manifests) used by
//! the `rert` command-line tool.

pub mod analytics;
pub mod config;
pub mod error;
pub mod kernels;
pub mod manifest;
pub mod moe;
pub mod records;
pub mod refset;
pub mod rerouting;
pub mod rng;
pub mod runner;
pub mod schedule;
pub mod simplex;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
