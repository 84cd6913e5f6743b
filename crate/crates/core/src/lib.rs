//! Thermal advection on district-energy pipe networks and spectral
//! reduced-order models tuned to a target output time step.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`]: graph ingestion, preprocessing, incidence and Laplacians.
//! * [`advection`]: upwind state-space assembly and Courant diagnostics.
//! * [`reduction`]: flow/mass spectral clustering and the reduced model.
//! * [`simulate`]: scenarios, explicit integration and error metrics.
//! * [`gridgen`]: seeded synthetic radial grids.

pub mod advection;
pub mod error;
pub mod gridgen;
pub mod network;
pub mod reduction;
pub mod simulate;
pub mod sparse;

pub use error::{Error, Result};
