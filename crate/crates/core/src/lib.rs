//! Simulation of actively driven nuclear-spin hyperpolarization.
//!
//! Two engines share one set of model definitions: an exact density-matrix
//! engine for small systems ([`exact`]) and a Holstein-Primakoff Gaussian
//! engine that tracks only second moments ([`gaussian`]). [`hbn`] builds the
//! boron-nitride lattice around a boron vacancy and its coupling tables,
//! [`protocol`] runs complete experiments and sweeps, and [`io`] handles
//! configuration documents, result files and run manifests.

pub mod checks;
pub mod error;
pub mod exact;
pub mod gaussian;
pub mod hbn;
pub mod io;
pub mod linalg;
pub mod protocol;
pub mod schedule;
pub mod spin;

pub use error::{Error, Result};
pub use faer::c64;
