//! Simulation and design of quasi-phase-matched photon-pair sources.

pub mod analysis;
pub mod crystal;
pub mod dispersion;
pub mod error;
pub mod fock;
pub mod interference;
pub mod rng;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};
