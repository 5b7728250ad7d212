//! Variational multiscale finite elements for the incompressible
//! Navier-Stokes equations with dynamic orthogonal subgrid scales and
//! equal-order velocity/pressure spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] builds structured simplicial meshes and refines them.
//! * [`fe`] provides Lagrange spaces, quadrature and sparse assembly.
//! * [`subgrid`] represents the orthogonal subscale at quadrature points.
//! * [`solver`] couples everything into the backward-Euler/Picard scheme.
//! * [`diagnostics`] computes the energy ledger and suitability probes.
//! * [`spectral`] hosts the dense operator lab (fractional norms, inf-sup).
//! * [`io`] is the scenario configuration, file formats and CLI.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fe;
pub mod fields;
pub mod io;
pub mod mesh;
pub mod solver;
pub mod spectral;
pub mod subgrid;

pub use error::{Result, VmsError};
pub use fe::{Constraint, FeSpace, QuadratureRule, SparseOperator};
pub use mesh::{Mesh, QualityReport};
pub use solver::{Discretization, SolveConfig, StarState};
pub use subgrid::{StabParams, SubscaleField};
