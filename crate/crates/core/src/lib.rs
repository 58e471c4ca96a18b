//! Round-trip reinforcement learning over a tabular sequence policy.
//!
//! A single policy serves both directions of a task through two prompt
//! tags. Training samples groups of forward outputs, rewards each by how
//! well a frozen snapshot of the policy reconstructs the input from it, and
//! optimizes a clipped group-relative objective.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod domain;
pub mod error;
pub mod grpo;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod sampling;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
