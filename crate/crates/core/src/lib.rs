//! Differentially private dual gradient tracking (DP-DGT) for resource
//! allocation over directed communication graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: directed communication topology, row/column stochastic
//!   mixing matrices, Perron vectors and contraction factors.
//! * [`problem`]: the allocation problem, its dual, the centralized optimum
//!   and adjacent-problem construction.
//! * [`schedules`]: geometric step-size and Laplace noise-scale sequences,
//!   seeded Laplace sampling and summability verdicts.
//! * [`solver`]: the DP-DGT iteration, the noisy DDGT baseline, run traces
//!   and coupled adjacent executions.
//! * [`privacy`]: sensitivity recursion and the cumulative privacy budget.
//! * [`harness`]: run configuration, IEEE 14-bus presets, Monte-Carlo sweeps
//!   and CSV/JSON emission.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod harness;
pub mod privacy;
pub mod problem;
pub mod schedules;
pub mod solver;

pub use error::{Error, Result};
