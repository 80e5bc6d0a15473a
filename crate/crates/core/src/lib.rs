// SPDX-License-Identifier: MIT OR Apache-2.0

//! Structural break tests for growing-dimensional linear regressions:
//! sieve regressions, long autoregressions and regressions whose number of
//! covariates grows with the sample.

pub mod break_process;
pub mod design;
pub mod error;
pub mod har;
pub mod montecarlo;
pub mod null_sim;
pub mod regression;
pub mod rng;
pub mod test_stats;

pub use error::{BreakError, Result};
