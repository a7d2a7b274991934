//! Pseudo-spectral simulation of the incompressible Euler equation on the
//! rotating unit sphere, written in absolute-vorticity form, together with a
//! laboratory of diagnostics for Arnold-type stability of steady and rotating
//! flows: exact Rossby–Haurwitz evolution, conserved quantities, rearrangement
//! class distances, orbit distances, semilinear steady states and rigidity
//! checks.
//!
//! Fields are stored as orthonormal complex spherical-harmonic coefficients
//! (Condon–Shortley phase) and transformed to Gauss–Legendre grids for
//! pointwise nonlinearities.

pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod harness;
mod optim;
pub mod rearrange;
pub mod spharm;
pub mod waves;

pub use error::{Error, Result};
pub use spharm::{
    Diagnostics, DiagnosticsEngine, Grid, GridField, Rotation, SpectralField, Transform,
};
