//! Multilevel correction finite element solver for nonsymmetric elliptic
//! eigenvalue problems on 2D triangulations.

pub mod adaptivity;
pub mod baseline;
pub mod correction;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod smalleig;
pub mod sparse;
