//! Quantum state tomography from weak-measurement data.
//!
//! The crate is split the way an experiment is:
//!
//! - [`qcore`]: states, bases, observables, random ensembles and metrics.
//! - [`weakval`]: exact weak values and weak-value tables, the ground truth
//!   every simulated data set is checked against.
//! - [`pointer`]: the measuring device. First-order pointer shifts, an exact
//!   finite-coupling simulator on a discretized pointer, and shot sampling.
//! - [`recon`]: the reconstruction formulas (pure states, density matrices,
//!   single matrix elements).
//! - [`schemes`]: every reconstruction scheme behind the [`schemes::Scheme`]
//!   trait, registered by name so configs and the CLI can select one.
//! - [`harness`]: experiment configs, Monte Carlo sweeps and the phase
//!   detection demo.

pub mod error;
pub mod harness;
pub mod pointer;
pub mod qcore;
pub mod recon;
pub mod schemes;
pub mod weakval;

pub use error::{Error, Result};
