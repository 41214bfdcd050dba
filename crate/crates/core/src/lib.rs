//! Boundary-driven symmetric exclusion process on `{0, 1, ..., S+1}`.
//!
//! The left reservoir (site 0) is empty and the right reservoir (site
//! `S+1`) is full. The crate provides
//!
//! * [`forward`]: continuous-time Monte Carlo of the particle system,
//! * [`exact`]: the exact stationary law on `2^S` configurations,
//! * [`dual`]: the absorbing dual walk and its exact two-particle solve,
//! * [`moments`]: the closed hierarchy of correlation-function ODEs,
//! * [`cli`]: the `ssep` command line,
//! * [`ladder`]: the meeting-kernel ladder comparing the interacting
//!   two-particle dual with independent walkers.

mod banded;
pub mod cli;
pub mod dual;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod forward;
pub mod ladder;
pub mod lattice;
pub mod moments;
pub mod rng;

pub use error::{Error, Result};
pub use estimator::{Accumulator, Estimate};
pub use lattice::{
    apply_swap, cluster_decompose, enabled_bonds, Bond, Configuration, ModelParams, PointSet,
};
pub use rng::RngStream;
