//! Linear operators that act diagonally on harmonic degree.

use super::field::SpectralField;
use crate::error::{Error, Result};

/// Largest `|a_{0,0}|` accepted as "mean zero" by [`green`].
pub const MEAN_TOLERANCE: f64 = 1e-10;

/// `λ_j = j(j+1)`, the eigenvalue of `−Δ` on degree `j`.
pub fn eigenvalue(j: usize) -> f64 {
    (j * (j + 1)) as f64
}

/// Laplace–Beltrami operator: `a_{j,m} ↦ −j(j+1) a_{j,m}`.
pub fn laplacian(a: &SpectralField) -> SpectralField {
    a.map_degree(|j| -eigenvalue(j))
}

/// Inverse of `−Δ` on mean-zero fields, normalised so the output has zero
/// mean.
pub fn green(a: &SpectralField) -> Result<SpectralField> {
    let mean = a.raw()[0].norm();
    if mean > MEAN_TOLERANCE * (1.0 + a.l2_norm()) {
        return Err(Error::NonZeroMean(mean));
    }
    Ok(green_projected(a))
}

/// [`green`] after discarding the mean, without the check.
pub fn green_projected(a: &SpectralField) -> SpectralField {
    a.map_degree(|j| if j == 0 { 0.0 } else { 1.0 / eigenvalue(j) })
}

/// `∫ u v dσ`.
pub fn inner(a: &SpectralField, b: &SpectralField) -> f64 {
    a.inner(b)
}

/// `E(ζ) = ½ ∫ ζ Gζ dσ = ½ Σ |a_{j,m}|² / (j(j+1))`.
pub fn energy(a: &SpectralField) -> f64 {
    (1..=a.trunc())
        .map(|j| a.degree_energy(j) / eigenvalue(j))
        .sum::<f64>()
        * 0.5
}
