//! Numerical laboratory for the anisotropic Neumann problem on thin domains
//! whose upper boundary oscillates much faster than the domain height.
//!
//! The crate covers graph-bounded domains (`geometry`) and comb-like domains
//! (`combgeom`), boundary-fitted triangulations (`mesh`), a P1 solver for the
//! rescaled problem (`fem2d`), the closed-form homogenized coefficients
//! (`homogenize`), the one-dimensional limit solver (`fem1d`), the explicit
//! boundary-layer cell solution (`cell`) and epsilon sweeps (`experiments`).

pub mod cell;
pub mod combgeom;
pub mod error;
pub mod experiments;
pub mod fem1d;
pub mod fem2d;
pub mod geometry;
pub mod homogenize;
pub mod mesh;
pub mod quadrature;

pub use error::{Error, Result};
pub use geometry::{ProfileSpec, ScalarFunction1D, StepFunction, Waveform};
pub use mesh::{BoundaryTag, Mesh, MeshParams};
