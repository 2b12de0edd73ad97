//! Warped-product target geometry, a structure-preserving solver for the
//! symmetry-reduced wave-map system into it, and the diagnostics used to
//! study how its energy concentrates.

pub mod bubble;
pub mod diagnostics;
pub mod geometry;
pub mod quadrature;
pub mod sandbox;
pub mod solver;

#[cfg(test)]
mod properties;

pub use geometry::{Manifold, ManifoldConfig};
pub use solver::{FieldState, RadialGrid, RunConfig, Solver};
