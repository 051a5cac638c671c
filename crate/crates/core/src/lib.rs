//! Pseudospectral incompressible Euler flow on a rotating biaxial ellipsoid.
//!
//! The crate builds the Laplace–Beltrami eigenbasis of the ellipsoid
//! `x² + y² + z²/b² = 1`, provides vector calculus and the Coriolis operator
//! in that basis, integrates the barotropic vorticity equation, and runs the
//! experiments that measure how time averages of fast-rotating flows approach
//! zonal (longitude-independent) states.

pub mod basis;
pub mod calculus;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod rotation;
pub mod toy;

pub use basis::{Basis, GridScalar, Layout, SpectralScalar};
pub use calculus::VelocityField;
pub use error::{Error, Result};
pub use geometry::Geometry;
