//! Concentrated vortex blobs in bounded planar domains.
//!
//! The crate integrates the Kirchhoff-Routh point-vortex equations, evolves
//! particle discretizations of concentrated vorticity under a boundary-regularized
//! velocity field, and measures how closely the blob follows the point vortex.
//!
//! Module map:
//!
//! - [`geometry`]: domains, Green function `G = Γ - h`, Robin function `H`.
//! - [`cutoff`]: smooth cutoffs `θ`, `χ` and the smoothed logarithm.
//! - [`pointvortex`]: Kirchhoff-Routh ODEs with RK4 and `ρ0` selection.
//! - [`blob`]: particle clouds, the regularized velocity field, time stepping.
//! - [`diagnostics`]: center of vorticity, inertia, support radius, sweeps.

pub mod blob;
pub mod cutoff;
pub mod diagnostics;
mod error;
pub mod geometry;
mod kernel;
pub mod pointvortex;
pub mod sum;
mod vec2;

pub use error::{Error, Result};
pub use num_complex;
pub use vec2::{Point2, Vec2};
