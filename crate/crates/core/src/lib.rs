//! Policy-gradient variance reduction over learned action subspaces.
//!
//! The crate provides the pieces of the POSA training loop: a diagonal
//! Gaussian policy, synthetic block-quadratic environments, GAE rollouts, a
//! wide & deep advantage network whose factorization-machine term yields an
//! action Hessian in closed form, Hessian-driven action partitioning, and the
//! REINFORCE / A2C / GADB / ADFB / ASDG surrogate estimators.

pub mod advnet;
pub mod envs;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod funcapprox;
pub mod partition;
pub mod policy;
pub mod rollout;
pub mod trainer;
mod util;

pub use error::{Error, Result};
pub use util::{rng_stream, stream};
