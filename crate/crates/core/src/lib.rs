//! Unitary quench dynamics of momentum-space band models and the
//! time-resolved geometric and topological diagnostics built on it.
//!
//! States are evolved independently at every momentum point by a product of
//! short-time exponentials. From the evolved fields the crate computes
//! geometric phases on loops, Chern numbers on the Brillouin-zone torus,
//! Z2 indexes on the half zone, and the symmetry checks that decide when those
//! indexes are protected.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod geometry;
pub mod grid;
pub mod invariants;
pub mod linalg;
pub mod models;
pub mod symmetry;

pub use error::{Error, Result};
pub use evolve::{
    evolve_field, evolve_point, evolve_trajectory, expm_step, ground_state_field, Propagator, StateField, TimeGrid,
    Trajectory,
};
pub use geometry::{
    berry_connection, geometric_phase_loop, hamiltonian_energy, hellmann_feynman_residual, lz_gamma_limit, lz_run,
    ConnectionGrid, LzRun,
};
pub use grid::{Grid, MomentumPoint};
pub use invariants::{
    chern_number, chern_series, spin_chern_z2, z2_half_bz, z2_series, InvariantSample, InvariantSeries, WorstLink,
};
pub use linalg::CMatrix;
pub use models::{
    build_bhz, build_lz_parameterized, build_quench, build_trs_odd_quench, build_two_band_chern, Amplitude, BlochModel,
    ModelRef, QuenchKind, QuenchProtocol, SymmetryTags, TrsOperator,
};
pub use symmetry::{
    auxiliary_hamiltonian, auxiliary_trs, check_auxiliary, check_propagator_trs, check_trs_quench, check_trs_static,
    AuxiliaryReports, SymmetryReport,
};
