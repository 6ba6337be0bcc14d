//! Simulation and analysis of switched Sagnac interferometers probed with
//! single photons, two-photon N00N states and classical light.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod expsim;
pub mod lsq;
pub mod polarization;
pub mod probe;
pub mod sagnac;
pub mod sensedesign;
pub mod stats;

pub use error::{Error, Result};
