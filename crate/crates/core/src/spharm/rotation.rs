use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use super::field::SpectralField;
use super::transform::Transform;
use crate::error::{Error, Result};

const AXIS_TOLERANCE: f64 = 1e-12;

/// Rigid rotation of the sphere by `angle` radians about the unit `axis`,
/// acting on points by Rodrigues' formula
/// `R x = cos θ x + sin θ (p × x) + (1 − cos θ)(p·x) p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    axis: Vector3<f64>,
    angle: f64,
}

impl Rotation {
    pub fn new(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument(format!("rotation axis {axis:?} has no direction")));
        }
        if !angle.is_finite() {
            return Err(Error::InvalidArgument(format!("rotation angle {angle}")));
        }
        let axis = if (n - 1.0).abs() > AXIS_TOLERANCE {
            axis / n
        } else {
            axis
        };
        Ok(Self { axis, angle })
    }

    pub fn identity() -> Self {
        Self {
            axis: Vector3::z(),
            angle: 0.0,
        }
    }

    /// Rotation about the polar axis `e₃`.
    pub fn about_polar(angle: f64) -> Self {
        Self {
            axis: Vector3::z(),
            angle,
        }
    }

    /// A rotation taking `e₃` to the unit vector `q` (about `e₃ × q`).
    pub fn polar_to(q: Vector3<f64>) -> Result<Self> {
        let q = q.try_normalize(0.0).ok_or(Error::ZeroField)?;
        let cross = Vector3::z().cross(&q);
        let s = cross.norm();
        if s < 1e-15 {
            return Ok(if q.z > 0.0 {
                Self::identity()
            } else {
                Self {
                    axis: Vector3::x(),
                    angle: std::f64::consts::PI,
                }
            });
        }
        Ok(Self {
            axis: cross / s,
            angle: s.atan2(q.z),
        })
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.angle.sin_cos();
        let p = &self.axis;
        x * c + p.cross(x) * s + p * ((1.0 - c) * p.dot(x))
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (col, e) in [Vector3::x(), Vector3::y(), Vector3::z()].iter().enumerate() {
            m.set_column(col, &self.apply(e));
        }
        m
    }

    pub fn inverse(&self) -> Self {
        Self {
            axis: self.axis,
            angle: -self.angle,
        }
    }

    /// Axis–angle form of a rotation matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let r = nalgebra::Rotation3::from_matrix(m);
        match r.axis_angle() {
            Some((axis, angle)) => Self {
                axis: axis.into_inner(),
                angle,
            },
            None => Self::identity(),
        }
    }

    /// Rotations about `±e₃` admit the coefficient-space fast path.
    fn polar_angle(&self) -> Option<f64> {
        if self.axis.x.abs() <= 1e-15 && self.axis.y.abs() <= 1e-15 {
            Some(self.angle * self.axis.z.signum())
        } else {
            None
        }
    }
}

/// `ζ∘R^{e₃}_θ`: multiplies `a_{j,m}` by `e^{imθ}`.
pub fn rotate_polar(a: &SpectralField, angle: f64) -> SpectralField {
    if angle == 0.0 {
        return a.clone();
    }
    a.map_coeffs(|_, m, c| c * Complex64::from_polar(1.0, m as f64 * angle))
}

/// Coefficients of `x ↦ ζ(R x)`.
///
/// Rotations about the polar axis use [`rotate_polar`]; others evaluate the
/// harmonic sum at rotated nodes and re-analyse, which is exact for
/// band-limited input.
pub fn rotate(a: &SpectralField, r: &Rotation, t: &Transform) -> Result<SpectralField> {
    if r.angle == 0.0 {
        return Ok(a.clone());
    }
    if let Some(theta) = r.polar_angle() {
        return Ok(rotate_polar(a, theta));
    }
    rotate_matrix(a, &r.matrix(), t)
}

/// Coefficients of `x ↦ ζ(M x)` for a rotation matrix `M`.
pub fn rotate_matrix(a: &SpectralField, m: &Matrix3<f64>, t: &Transform) -> Result<SpectralField> {
    if a.trunc() > t.trunc() {
        return Err(Error::Truncation {
            trunc: a.trunc(),
            nlat: t.grid().nlat(),
            nlon: t.grid().nlon(),
        });
    }
    let pts: Vec<Vector3<f64>> = t.grid().points().iter().map(|x| m * x).collect();
    let values = t.evaluate_at(a, &pts);
    Ok(t.analyze_values(&values).with_trunc(a.trunc()))
}
