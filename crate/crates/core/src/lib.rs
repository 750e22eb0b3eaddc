//! Numerical laboratory for the barotropic vorticity equation family.
//!
//! The crate covers four connected pieces of machinery:
//!
//! - [`fields`] / [`exact_solutions`]: closed-form stream functions with
//!   exact symbolic derivatives, and pointwise residual verification of the
//!   Cartesian, spherical and potential vorticity equations.
//! - [`lie_algebra`]: the cataloged point-symmetry generators of those
//!   equations, Lie brackets, closed-form flows, and subalgebra verification.
//! - [`equivalence_maps`]: the point transformations that cancel the
//!   rotation terms of the spherical and potential equations.
//! - [`spectral`] / [`integrate`]: the Fourier-Galerkin truncation of the
//!   vorticity equation, its discrete symmetry group on coefficients,
//!   fixed-point subspaces, automatically generated reduced models (including
//!   the Lorenz 1960 three-component system) and a fixed-step RK4 integrator
//!   with invariant monitoring.

pub mod error;
pub mod expr;
pub mod timefn;
pub mod fields;
pub mod exact_solutions;
pub mod transform;
pub mod equivalence_maps;
pub mod lie_algebra;
pub mod spectral;
pub mod integrate;

mod linalg;

pub use error::{Error, Result};
