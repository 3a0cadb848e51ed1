//! Bayesian model updating from strain records and decision-theoretic
//! assessment of candidate observation and deterioration models.
//!
//! The crate is organised bottom-up:
//!
//! * [`prob`]: univariate priors and error models, the standard normal CDF
//!   and seeded random streams.
//! * [`structural`]: observation models mapping (E, thickness loss) to gauge
//!   strain and peak von Mises stress, plus polynomial surrogates.
//! * [`deterioration`]: thickness-loss growth laws.
//! * [`inference`]: task log-posteriors, multi-chain adaptive Metropolis,
//!   split-R̂ and posterior predictive bands.
//! * [`assessment`]: failure probability and expected utilities.
//! * [`study`]: synthetic data, CSV I/O, configuration and the pipeline
//!   behind the `shm-assess` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assessment;
pub mod deterioration;
pub mod error;
pub mod inference;
pub mod prob;
pub mod structural;
pub mod study;

pub use error::{Error, Result};
