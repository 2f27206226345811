//! Finite-difference solver and verification harness for the 2D viscous
//! hydrostatic primitive equations on `(0,1) x (-h,0)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`]: domain, node lattice, boundary partition, Robin coefficients.
//! * [`ops`]: difference operators, vertical integrals, norms, trilinear forms.
//! * [`solver`]: IMEX time stepping with the surface-pressure constraint.
//! * [`diagnostics`]: energy ledgers, budgets, regularity and uniqueness checks.
//! * [`twin`]: co-evolved solution pairs and Gronwall envelopes.
//! * [`experiment`]: configuration, snapshots, CSV ledgers and scenarios.

pub mod banded;
pub mod calibration;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod ops;
pub mod profiles;
pub mod solver;
pub mod twin;

pub use error::{Error, Result};
pub use field::{BcClass, ProfileField, ScalarField};
pub use grid::{build_grid, BoundaryPiece, Domain, Grid, NodeIndex, RobinParams};
pub use solver::{AdvectionMode, Forcing, Observer, SolverConfig, State, Stepper};
