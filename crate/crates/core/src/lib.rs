//! Variance-reduced aggregation gradient tracking (VRA-GT) over directed
//! networks with noisy information sharing.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: directed topologies, row/column-stochastic weights, spanning
//!   tree roots and Perron vectors.
//! - [`problems`]: the per-agent objective interface and the ridge regression
//!   benchmark.
//! - [`noise`]: counter-based Gaussian channels for the pull and push links.
//! - [`schedules`]: power-law step sizes and mixing factors, plus the
//!   exponent checks that back the convergence guarantees.
//! - [`algorithm`]: the VRA-GT state machine, its R-Push-Pull special case and
//!   per-iteration metrics.
//! - [`harness`]: experiment configuration, multi-seed orchestration, CSV
//!   output and log-log rate fitting used by the `vragt` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithm;
pub mod error;
pub mod graph;
pub mod harness;
pub mod noise;
pub mod problems;
pub mod report;
pub mod rng;
pub mod schedules;

pub use error::{Error, Result};
