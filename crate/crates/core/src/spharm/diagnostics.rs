use std::sync::Arc;

use nalgebra::Vector3;

use super::field::SpectralField;
use super::grid::Grid;
use super::ops::energy;
use super::transform::Transform;
use crate::error::Result;

/// Conserved and monitored functionals of a vorticity field.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `E = ½ ∫ ζ Gζ dσ`.
    pub energy: f64,
    /// `m = ∫ x ζ dσ`.
    pub moment: Vector3<f64>,
    /// `(p, ‖ζ‖_{L^p})` pairs.
    pub lp_norms: Vec<(f64, f64)>,
    /// `∫ ζ² dσ`.
    pub enstrophy: f64,
    /// `(k, ∫ ζ^k dσ)` for `k = 3..=order`.
    pub casimir_moments: Vec<(usize, f64)>,
}

impl Diagnostics {
    pub fn lp_norm(&self, p: f64) -> Option<f64> {
        self.lp_norms.iter().find(|(q, _)| *q == p).map(|&(_, v)| v)
    }

    pub fn casimir(&self, k: usize) -> Option<f64> {
        self.casimir_moments
            .iter()
            .find(|(q, _)| *q == k)
            .map(|&(_, v)| v)
    }
}

/// Evaluates [`Diagnostics`] on a grid fine enough that `∫ ζ^k dσ` is exact
/// for every configured `k` and every even integer `p`. Other exponents are
/// quadrature-limited since `|ζ|^p` is not band-limited.
#[derive(Debug, Clone)]
pub struct DiagnosticsEngine {
    transform: Transform,
    p_list: Vec<f64>,
    casimir_order: usize,
}

impl DiagnosticsEngine {
    pub fn new(trunc: usize, p_list: &[f64], casimir_order: usize) -> Result<Self> {
        let even_p = p_list
            .iter()
            .filter(|p| p.fract() == 0.0 && (**p as usize) % 2 == 0 && **p <= 8.0)
            .map(|p| *p as usize)
            .max()
            .unwrap_or(2);
        let order = casimir_order.max(even_p).max(3);
        let grid = Grid::for_products(trunc, order)?;
        let dealiased = Grid::dealiased(trunc)?;
        let grid = if dealiased.nlat() > grid.nlat() {
            dealiased
        } else {
            grid
        };
        Ok(Self {
            transform: Transform::new(Arc::new(grid), trunc)?,
            p_list: p_list.to_vec(),
            casimir_order,
        })
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn p_list(&self) -> &[f64] {
        &self.p_list
    }

    pub fn casimir_order(&self) -> usize {
        self.casimir_order
    }

    pub fn compute(&self, zeta: &SpectralField) -> Result<Diagnostics> {
        let f = self.transform.synthesize(zeta)?;
        let lp_norms = self.p_list.iter().map(|&p| (p, f.lp_norm(p))).collect();
        let casimir_moments = (3..=self.casimir_order)
            .map(|k| (k, f.integrate_with(|v| v.powi(k as i32))))
            .collect();
        Ok(Diagnostics {
            energy: energy(zeta),
            moment: f.moment(),
            lp_norms,
            enstrophy: f.integrate_with(|v| v * v),
            casimir_moments,
        })
    }
}

/// One-shot diagnostics with Casimir moments up to fourth order.
pub fn diagnostics(zeta: &SpectralField, p_list: &[f64]) -> Result<Diagnostics> {
    DiagnosticsEngine::new(zeta.trunc(), p_list, 4)?.compute(zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn scaled_x3() {
        let a = -0.6;
        let zeta = SpectralField::linear(6, Vector3::z() * a);
        let d = diagnostics(&zeta, &[2.0, 4.0]).unwrap();
        assert_relative_eq!(d.energy, PI * a * a / 3.0, epsilon = 1e-14);
        assert_relative_eq!(d.moment, Vector3::new(0.0, 0.0, 4.0 * PI * a / 3.0), epsilon = 1e-13);
        assert_relative_eq!(d.enstrophy, 4.0 * PI * a * a / 3.0, epsilon = 1e-13);
        // ∫ x3⁴ dσ = 4π/5.
        assert_relative_eq!(d.casimir(4).unwrap(), a.powi(4) * 4.0 * PI / 5.0, epsilon = 1e-13);
        assert_relative_eq!(d.lp_norm(2.0).unwrap(), d.enstrophy.sqrt(), epsilon = 1e-13);
        assert!(d.casimir(3).unwrap().abs() < 1e-14);
    }

    #[test]
    fn unit_degree_two_field() {
        let mut y = SpectralField::zeros(5);
        y.set(2, 1, Complex64::new(0.5, 0.5));
        let y = &y * (1.0 / y.l2_norm());
        let d = diagnostics(&y, &[2.0]).unwrap();
        assert_relative_eq!(d.energy, 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_field() {
        let d = diagnostics(&SpectralField::zeros(4), &[2.0, 3.0]).unwrap();
        assert_eq!(d.energy, 0.0);
        assert_eq!(d.moment, Vector3::zeros());
        assert!(d.lp_norms.iter().all(|(_, v)| *v == 0.0));
        assert!(d.casimir_moments.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn quadrature_moment_matches_spectral() {
        let mut z = SpectralField::zeros(7);
        z.set(1, 1, Complex64::new(0.3, -0.2));
        z.set(1, 0, Complex64::new(0.9, 0.0));
        z.set(5, 3, Complex64::new(1.0, 1.0));
        let d = diagnostics(&z, &[]).unwrap();
        assert_relative_eq!(d.moment, z.moment(), epsilon = 1e-13);
    }
}
