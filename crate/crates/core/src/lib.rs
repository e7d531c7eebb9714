//! Recovers the part-level structure of a compound object from binary
//! silhouettes taken from calibrated views.
//!
//! A library of posed 3D primitives ("templates") is rendered into every view,
//! each rendering is projected through a sparse Gaussian sketch, and an
//! l1-regularised linear program picks fractional template weights. The
//! fractional weights are then rounded to an integer part list by evaluating
//! candidate subsets against the true OR-composited silhouette.
//!
//! Pipeline stages:
//!
//! 1. [`geometry`] – convex primitives, poses, template library enumeration.
//! 2. [`camera`] – 3×4 projection matrices and synthetic ring rigs.
//! 3. [`raster`] – silhouette rendering, measurement vectors, noise.
//! 4. [`sketch`] – sparse random projection and the sketched basis.
//! 5. [`solver`] – culling, LP formulation and solve ([`simplex`] underneath).
//! 6. [`rounding`] – Max and Search rounding of the LP solution.
//! 7. [`harness`] – synthetic plant / block scenes, metrics and sweeps.

pub mod camera;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pbm;
pub mod raster;
pub mod rounding;
pub mod seed;
pub mod simplex;
pub mod sketch;
pub mod solver;

pub use error::{Error, Result};
