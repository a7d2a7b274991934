//! Spherical grids, harmonic transforms, degree-diagonal operators, rigid
//! rotations and integral functionals.

mod diagnostics;
mod field;
mod grid;
pub mod legendre;
mod ops;
mod rotation;
mod transform;

pub use diagnostics::{diagnostics, Diagnostics, DiagnosticsEngine};
pub use field::SpectralField;
pub use grid::{gauss_legendre, Grid, GridField};
pub use ops::{eigenvalue, energy, green, green_projected, inner, laplacian, MEAN_TOLERANCE};
pub use rotation::{rotate, rotate_matrix, rotate_polar, Rotation};
pub use transform::Transform;
