//! Online convex optimization with interleaved deletion requests.
//!
//! A learner runs projected online gradient descent over a stream of losses, and at scheduled
//! times must forget an earlier loss so that its subsequent outputs are statistically close
//! (in Rényi divergence) to those of a learner that never saw it.
//!
//! - [`passive`]: noise calibrated to the contraction of the remaining updates.
//! - [`active`]: descent-to-delete inner phases followed by smaller noise.
//! - [`baselines`]: retraining and discard-and-restart, plus the RDP conversion.
//! - [`certifier`]: analytic ledger, exact Gaussian oracle and Monte-Carlo check.
//! - [`regret`]: dynamic regret, ERM comparators and regret-bound calculators.
//! - [`harness`]: stream generators, experiment configs and on-disk reports.

pub mod active;
pub mod baselines;
pub mod certifier;
pub mod domain;
mod driver;
pub mod error;
pub mod exec;
pub mod harness;
pub mod ogd;
pub mod passive;
pub mod regret;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
