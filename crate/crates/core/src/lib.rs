//! Reduced order models of the 1D periodic viscous Burgers equation built by
//! proper orthogonal decomposition, with Leray regularization through a
//! differential (Helmholtz) filter applied either to the full-order basis
//! vectors or to the reduced coefficients, and filter-radius calibration by
//! mean kinetic energy.
//!
//! Pipeline: [`fom::run_fom`] → [`pod::compute_pod`] →
//! [`assembly::assemble_galerkin`] / [`assembly::assemble_leray_fe`] →
//! [`integrate::integrate`] → [`calibrate::calibrate_delta`] and
//! [`diagnostics`].

pub mod assembly;
pub mod calibrate;
pub mod complexity;
pub mod convection;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod filter;
pub mod fom;
pub mod integrate;
pub mod pod;
pub mod snapshot;
pub mod sparse;

pub use assembly::{assemble_galerkin, assemble_leray_fe, RomOperators, Tensor3};
pub use calibrate::{calibrate_delta, mean_kinetic_energy, CalibrationConfig, CalibrationResult};
pub use error::{Error, Result};
pub use exec::Execution;
pub use filter::{
    apply_rom_filter, build_rom_filter, filter_basis, filter_fe, FilterSpec, FilterVariant,
    RomFilterOperator,
};
pub use fom::{assemble_operators, run_fom, BurgersConfig, InitialCondition};
pub use integrate::{integrate, rhs_galerkin, rhs_leray, Model, RomInitial, RomRunConfig, Trajectory};
pub use pod::{compute_pod, project, reconstruct, PodBasis};
pub use snapshot::{read_snapshot_set, weighted_inner_product, write_snapshot_set, SnapshotSet};
pub use sparse::SymSparse;
