//! Boron-nitride lattice around a boron vacancy: geometry, field frame,
//! hyperfine and dipolar couplings, zero-field-splitting shifts and the
//! field-orientation search.

pub mod constants;
pub mod couplings;
pub mod lattice;
pub mod optimize;
pub mod zfs;

pub use constants::{PhysicalConstants, ANGSTROM, HZ_TO_RAD_PER_US};
pub use couplings::{
    bare_larmor, dipolar_coefficients, effective_larmor, hyperfine_vector, to_field_frame, CouplingTable, DipolarCoefficients, FieldFrame,
    Hyperfine,
};
pub use lattice::{generate_lattice, ring_census, LatticeSite, LatticeSize, RingSummary, Species};
pub use optimize::{optimize_field_orientation, orientation_objective, Orientation, OrientationObjective, OrientationSearch};
pub use zfs::{zfs_projection, zfs_shifts};
