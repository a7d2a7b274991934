use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use super::nonlinearity::NonlinearitySpec;
use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::spharm::{eigenvalue, green_projected, rotate, Rotation, SpectralField, Transform};

/// Moments smaller than this fraction of `‖ζ‖_{L²}` count as zero.
pub const MOMENT_TOLERANCE: f64 = 1e-9;
const FALLBACK_AXES: usize = 96;

/// `‖ζ − ⟨ζ∘R^q_θ⟩_θ‖ / ‖ζ‖`, computed by aligning `q` with `e₃` and
/// dropping every `m ≠ 0` coefficient.
pub fn zonality_defect(zeta: &SpectralField, q: &Vector3<f64>, t: &Transform) -> Result<f64> {
    let norm = zeta.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    let aligned = rotate(zeta, &Rotation::polar_to(*q)?, t)?;
    Ok((&aligned - &aligned.zonal_part()).l2_norm() / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisChoice {
    pub axis: Vector3<f64>,
    /// True when the moment vanished and the axis came from a defect search.
    pub fallback: bool,
    pub defect: f64,
}

fn spherical(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// `m(ζ)/|m(ζ)|`, or when the moment vanishes, the axis minimising
/// [`zonality_defect`] over a Fibonacci hemisphere refined by Nelder–Mead.
pub fn best_axis(zeta: &SpectralField, t: &Transform) -> Result<AxisChoice> {
    let norm = zeta.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    let m = zeta.moment();
    if m.norm() > MOMENT_TOLERANCE * norm {
        let axis = m.normalize();
        return Ok(AxisChoice {
            axis,
            fallback: false,
            defect: zonality_defect(zeta, &axis, t)?,
        });
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..FALLBACK_AXES {
        let z = 1.0 - (i as f64 + 0.5) / FALLBACK_AXES as f64;
        let (theta, phi) = (z.acos(), golden * i as f64);
        let d = zonality_defect(zeta, &spherical(theta, phi), t)?;
        if d < best.0 {
            best = (d, theta, phi);
        }
    }
    let cost = |p: &[f64]| zonality_defect(zeta, &spherical(p[0], p[1]), t).unwrap_or(f64::INFINITY);
    let refined = nelder_mead(cost, &[best.1, best.2], 0.1, 1e-12, 300);
    let (defect, axis) = if refined.value < best.0 {
        (refined.value, spherical(refined.x[0], refined.x[1]))
    } else {
        (best.0, spherical(best.1, best.2))
    };
    Ok(AxisChoice {
        axis,
        fallback: true,
        defect,
    })
}

/// Largest relative energy outside `E₂` of `ζ∘R^p_θ − ζ` over `thetas`.
pub fn rotation_defect_outside_e2(
    zeta: &SpectralField,
    p: &Vector3<f64>,
    thetas: &[f64],
    t: &Transform,
) -> Result<f64> {
    let norm = zeta.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    let mut worst: f64 = 0.0;
    for &theta in thetas {
        let r = Rotation::new(*p, theta)?;
        let d = &rotate(zeta, &r, t)? - zeta;
        let outside = d.filter_degrees(|j| j != 2);
        worst = worst.max(outside.l2_norm().powi(2) / (norm * norm));
    }
    Ok(worst)
}

/// Real `L²`-orthonormal basis of the degree range `lo..=hi`.
pub(crate) fn real_basis(trunc: usize, lo: usize, hi: usize) -> Vec<SpectralField> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for j in lo..=hi.min(trunc) {
        let mut f = SpectralField::zeros(trunc);
        f.set(j, 0, Complex64::new(1.0, 0.0));
        out.push(f);
        for m in 1..=j as i64 {
            for c in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
                let mut f = SpectralField::zeros(trunc);
                f.set(j, m, c);
                out.push(f);
            }
        }
    }
    out
}

/// Smallest Rayleigh quotient of `∫|∇φ|² − g′(Gζ + βp·x)φ² dσ` over
/// band-limited `φ` with zero mean and zero moment (degrees `2..=J`), with
/// respect to the `L²` norm.
pub fn spectral_gap(
    zeta: &SpectralField,
    g: &NonlinearitySpec,
    beta: f64,
    p: &Vector3<f64>,
    t: &Transform,
) -> Result<f64> {
    let trunc = zeta.trunc().min(t.trunc());
    if trunc < 2 {
        return Err(Error::InvalidArgument("spectral gap needs J ≥ 2".into()));
    }
    let mut arg = green_projected(&zeta.with_trunc(t.trunc()));
    arg.axpy(beta, &SpectralField::linear(t.trunc(), *p));
    let weight = t.synthesize(&arg)?.map(|s| g.derivative(s));
    let basis = real_basis(t.trunc(), 2, trunc);
    let samples: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| t.synthesize(b).map(|f| f.into_values()))
        .collect::<Result<_>>()?;
    let grid = t.grid();
    let nlon = grid.nlon();
    let area: Vec<f64> = (0..grid.len())
        .map(|k| grid.cell_area(k / nlon) * weight.values()[k])
        .collect();
    let n = basis.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = samples[a]
                .iter()
                .zip(&samples[b])
                .zip(&area)
                .map(|((x, y), w)| x * y * w)
                .sum();
            k[(a, b)] = -v;
            k[(b, a)] = -v;
        }
    }
    let mut row = 0;
    for j in 2..=trunc {
        for _ in 0..2 * j + 1 {
            k[(row, row)] += eigenvalue(j);
            row += 1;
        }
    }
    let eig = SymmetricEigen::new(k);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zonal_and_sectoral_defects() {
        let t = Transform::minimal(6).unwrap();
        let x3 = SpectralField::linear(6, Vector3::z());
        assert!(zonality_defect(&x3, &Vector3::z(), &t).unwrap() < 1e-15);
        let x1 = SpectralField::linear(6, Vector3::x());
        assert_relative_eq!(zonality_defect(&x1, &Vector3::z(), &t).unwrap(), 1.0, epsilon = 1e-14);
        // x₃ about e₁: only the x₁ part survives averaging, so the defect is 1.
        let d = zonality_defect(&x3, &Vector3::x(), &t).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-12);
        let mix = SpectralField::linear(6, Vector3::new(1.0, 0.0, 1.0));
        assert_relative_eq!(
            zonality_defect(&mix, &Vector3::x(), &t).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert!(zonality_defect(&SpectralField::zeros(6), &Vector3::z(), &t).is_err());
    }

    #[test]
    fn axis_from_moment() {
        let t = Transform::minimal(4).unwrap();
        let a = best_axis(&SpectralField::linear(4, Vector3::z() * 0.4), &t).unwrap();
        assert!(!a.fallback);
        assert_relative_eq!(a.axis, Vector3::z(), epsilon = 1e-14);
        let b = best_axis(&SpectralField::linear(4, Vector3::new(1.0, 1.0, 0.0)), &t).unwrap();
        assert_relative_eq!(b.axis, Vector3::new(1.0, 1.0, 0.0).normalize(), epsilon = 1e-14);
    }

    #[test]
    fn degree_two_uses_fallback() {
        let t = Transform::minimal(4).unwrap();
        // 3x₁² − 1 is zonal about e₁.
        let mut z = SpectralField::zeros(4);
        z.set(2, 0, Complex64::new(-0.5, 0.0));
        let z = rotate(&z, &Rotation::polar_to(Vector3::x()).unwrap().inverse(), &t).unwrap();
        let a = best_axis(&z, &t).unwrap();
        assert!(a.fallback);
        assert!(a.defect < 1e-5, "{}", a.defect);
        assert!(a.axis.x.abs() > 1.0 - 1e-6);
    }

    #[test]
    fn gap_for_constant_slope() {
        let t = Transform::dealiased(8).unwrap();
        let z = SpectralField::linear(8, Vector3::z() * 0.2);
        for c in [0.0, 2.5, 5.0] {
            let g = NonlinearitySpec::linear(c, (-1.0, 1.0)).unwrap();
            let gap = spectral_gap(&z, &g, 0.1, &Vector3::z(), &t).unwrap();
            assert_relative_eq!(gap, 6.0 - c, epsilon = 1e-10);
        }
    }

    #[test]
    fn real_basis_is_orthonormal() {
        let b = real_basis(4, 2, 4);
        assert_eq!(b.len(), 5 + 7 + 9);
        for (i, u) in b.iter().enumerate() {
            for (k, v) in b.iter().enumerate() {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert_relative_eq!(u.inner(v), expect, epsilon = 1e-15);
            }
        }
    }
}
