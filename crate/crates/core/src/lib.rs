//! Local discontinuous Galerkin (LDG) discretisation of
//!
//! ```text
//! -eps Lap u + alpha . grad u + b u = f   in (0,1)^2,   u = 0 on the boundary,
//! ```
//!
//! on Bakhvalov-type layer-adapted meshes, together with the local
//! Gauss-Radau projections and the composite interpolant used to measure
//! supercloseness, and a convergence-study driver.
//!
//! The pipeline is `mesh -> assembly -> solver -> norms`; [`study`] strings it
//! together over sweeps of `N` and `eps`.

pub mod assembly;
pub mod basis;
pub mod dg_space;
pub mod mesh;
pub mod norms;
pub mod problems;
pub mod projections;
pub mod solver;
pub mod sparse;
pub mod study;
