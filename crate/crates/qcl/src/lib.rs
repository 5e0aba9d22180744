//! Quantum control landscape exploration.
//!
//! Gradient-flow optimization of ensemble-observable and unitary-gate
//! objectives for closed N-level systems, with quantitative measurement
//! of trajectory linearity (R), distances to critical saddle
//! submanifolds, and verification of the Hessian-gradient eigen-relation
//! for straight trajectories.

pub mod analysis;
pub mod critical;
pub mod dynamics;
pub mod error;
pub mod es;
pub mod flow;
pub mod harness;
pub mod landscape;
pub(crate) mod linalg;
pub mod rng;
pub mod system;

pub use error::{Error, Result};
