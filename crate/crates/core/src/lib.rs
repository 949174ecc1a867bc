//! Temporal robustness of clustered machine-type-communication networks.
//!
//! Two engines compute the same quantity, the ratio of expected successfully
//! communicating nodes after and before random node removal:
//!
//! * [`analytic`] evaluates the expectation chain over positions, CH counts,
//!   removal counts and removed-CH counts, either exactly (position Monte
//!   Carlo per CH count) or with the factorized two-level approximation.
//! * [`simulator`] samples deployments, elections and Rayleigh fading, applies
//!   the relay-then-direct association rule, removes nodes and counts.

pub mod analytic;
pub mod error;
pub mod estimate;
pub mod integrate;
pub mod linkprob;
pub mod model;
pub mod simulator;
pub mod streams;

pub use error::{Error, Result};
pub use estimate::{Engine, Provenance, RobustnessEstimate};
pub use model::{NetworkConfig, Position, RawConfig, Role};
