//! Lagrange finite elements of degree 1..=4 on triangles: spaces, assembly
//! of the sesquilinear forms
//!
//! ```text
//! a(u, v) = (A grad u, grad v) + (b . grad u, v) + (phi u, v)
//! b(u, v) = (varphi u, v)
//! ```
//!
//! (second argument conjugated), prolongation between nested spaces, sparse
//! source solves and error norms.

mod assembly;
mod coefficients;
mod lagrange;
mod norms;
mod prolongation;
pub mod quadrature;
mod solve;
mod space;

use thiserror::Error;

pub use assembly::{assemble_full, assemble_h1_gram, assemble_load, assemble_pencil, FormPencil};
pub use coefficients::Coefficients;
pub use lagrange::{barycentric_gradients, lagrange_dimension, LagrangeElement};
pub use norms::{error_norms, quadrature_points, ExactFn, QuadPoint};
pub use prolongation::{build_prolongation, build_prolongation_full};
pub use solve::{solve_source, SourceSolver};
pub use space::{build_space, FeSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("unsupported polynomial degree {0} (expected 1..=4)")]
    UnsupportedDegree(usize),
    #[error("coefficient violation: {0}")]
    CoefficientViolation(String),
    #[error("spaces are not nested: {0}")]
    NestingViolation(String),
    #[error("linear solver failure: {0}")]
    SolverFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Default assembly quadrature degree for polynomial degree `p`.
pub fn default_assembly_quadrature(p: usize) -> usize {
    2 * p + 2
}

/// Default quadrature degree for error norms against analytic eigenfunctions.
pub fn default_error_quadrature(p: usize) -> usize {
    2 * p + 6
}
