//! Simulation and numerical-analysis toolkit for a 2-D incompressible fluid
//! film coupled to a 1-D elastic beam on the upper boundary, with structural
//! damping `gamma` that can be swept towards zero.
//!
//! The crate is organised around the moving-interface geometry:
//!
//! * [`geometry`] — periodic deformations `h = 1 + eta`, the graded vertical
//!   stretch between two deformations and its cofactor multiplier, and
//!   piecewise-constant-in-time lower envelopes of a deformation trajectory.
//! * [`fields`] — velocity fields on the fixed container
//!   `Omega = (0,L) x (-1, 2M)`: bar-extension, divergence-free lifting,
//!   stream functions, fractional Sobolev norms and the competitor
//!   construction that bounds projection errors between coupled spaces.
//! * [`solver`] — time integration of the coupled system on a mapped
//!   staggered grid, with initial-data regularisation and contact detection.
//! * [`diagnostics`] — energy ledger, Korn residual, L4 bounds, gamma sweeps
//!   and projector error studies.
//! * [`store`] — binary checkpoints, run manifests and deterministic resume.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod fourier;
pub mod geometry;
pub mod grid;
pub mod solver;
pub mod store;

pub use error::{Error, Result};
