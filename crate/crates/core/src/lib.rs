//! Risk-aware stochastic multi-armed bandits.
//!
//! The crate centres on BESA+, a policy that compares arms by duelling
//! equal-size subsamples of their reward histories and scores each
//! subsample with a pluggable safety value function (mean, mean-variance
//! or CVaR). Around it sit baseline policies, benchmark environments,
//! numeric concentration-bound calculators with Monte Carlo checks, and a
//! replicated experiment harness with CSV export.

pub mod bounds;
pub mod cli;
pub mod environments;
pub mod error;
pub mod harness;
pub mod policy;
pub mod rng;
pub mod safety;

pub use environments::{ArmDistribution, Environment};
pub use error::{BanditError, Result};
pub use policy::{Policy, PolicySpec};
pub use rng::{derive_run_rng, RngStream};
pub use safety::SafetyValueFunction;
