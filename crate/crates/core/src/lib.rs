//! Boundary-integral solution of the Laplace-Beltrami problem on smooth
//! closed surfaces in three dimensions.
//!
//! The surface equation `Δ_Γ ψ = f` is recast as a second-kind integral
//! equation for a single-layer density, using Calderón identities to combine
//! harmonic layer potentials into a well-conditioned operator. The discretization
//! is a high-order Nyström method on curvilinear triangles: each triangle is a
//! smooth map of the standard simplex, densities are sampled at interpolation
//! nodes carrying positive quadrature weights, and weakly singular
//! self-interactions are handled by a target-centered polar rule.
//!
//! Module layout follows the pipeline:
//!
//! * [`basis`] — Koornwinder orthogonal polynomials on the simplex and 1-D Gauss rules
//! * [`element`] — reference-element node/weight/transform data
//! * [`geometry`] — charts, metric jets, curvature, spectral surface calculus
//! * [`mesh`] — analytic and Gmsh surface meshes, global node arrays
//! * [`kernels`] — Laplace layer-potential kernels
//! * [`quadrature`] — far / near-adaptive / singular-self integration
//! * [`operators`] — dense Nyström matrices and the composed system
//! * [`solver`] — LU and GMRES solution of the discretized problem
//! * [`analytic`] — spherical harmonics, manufactured solutions, Biot-Savart fields
//! * [`hodge`] — Hodge decomposition of tangential vector fields

pub mod analytic;
pub mod basis;
pub mod element;
pub mod error;
pub mod geometry;
pub mod hodge;
pub mod kernels;
pub mod la;
pub mod mesh;
pub mod operators;
pub mod quadrature;
pub mod solver;
pub mod util;

pub use error::{Error, Result};
