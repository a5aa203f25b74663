//! Evolving two-channel neural cellular automata that grow from a single cell
//! into a target shape and hold it.
//!
//! The crate is organised bottom-up:
//!
//! - [`nca`]: the automaton itself and deterministic rollouts;
//! - [`shapes`]: target masks;
//! - [`objectives`]: developmental loss, time-lagged empowerment and action
//!   entropies computed from rollout traces;
//! - [`evolution`]: Age-Fitness Pareto Optimization over genomes;
//! - [`metrics`]: stability and morphology analysis plus rank-sum statistics;
//! - [`harness`]: config-driven experiment runner behind the `nca-lab` binary.

pub mod error;
pub mod evolution;
pub mod harness;
pub mod metrics;
pub mod nca;
pub mod objectives;
pub mod shapes;

pub use error::{Error, Result};
