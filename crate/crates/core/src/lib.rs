//! Noise-temperature modelling for cryogenic microwave receive chains and
//! optically pumped spin-ensemble cavity coolers.
//!
//! The crate is organised by physical subsystem:
//!
//! - [`noise_chain`]: two-port noise-temperature propagation (lossy lines,
//!   gradient cables, directional couplers, amplifiers).
//! - [`cavity`]: reflection coefficient, coupling coefficient and the noise
//!   emitted from a partially reflective cavity port.
//! - [`spins`]: NV⁻ ground-state Zeeman levels, populations, spin temperature,
//!   photon occupancy and collective absorption rate.
//! - [`cooling`]: steady-state mode temperature of a cavity coupled to an
//!   internal bath, an external port and a polarized spin ensemble.
//! - [`yfactor`]: Y-factor forward model and inversion of a measured ΔY to the
//!   internal cavity noise temperature, with Monte-Carlo intervals.
//! - [`config`]: the structured-text configuration schema shared by the CLI.

pub mod cavity;
pub mod config;
pub mod cooling;
pub mod error;
pub mod noise_chain;
pub mod solve;
pub mod spins;
pub mod units;
pub mod yfactor;

pub use error::{Error, Result};
