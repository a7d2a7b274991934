use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::SpectralField;
use super::grid::{Grid, GridField};
use super::legendre::{fill_alf, fill_alf_derivative, tri_index, tri_len};
use crate::error::{Error, Result};

/// Spherical-harmonic transform pair between [`SpectralField`] at a fixed
/// truncation and samples on a Gauss–Legendre [`Grid`].
///
/// Legendre tables are computed once per transform; longitudinal sums use
/// FFTs of length `nlon`.
#[derive(Clone)]
pub struct Transform {
    grid: Arc<Grid>,
    trunc: usize,
    alf: Vec<f64>,
    dalf: Vec<f64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("trunc", &self.trunc)
            .field("nlat", &self.grid.nlat())
            .field("nlon", &self.grid.nlon())
            .finish()
    }
}

impl Transform {
    pub fn new(grid: Arc<Grid>, trunc: usize) -> Result<Self> {
        if grid.nlat() < trunc + 1 || grid.nlon() < 2 * trunc + 1 {
            return Err(Error::Truncation {
                trunc,
                nlat: grid.nlat(),
                nlon: grid.nlon(),
            });
        }
        let n = tri_len(trunc);
        let mut alf = vec![0.0; grid.nlat() * n];
        let mut dalf = vec![0.0; grid.nlat() * n];
        for (i, &mu) in grid.mu().iter().enumerate() {
            let p = &mut alf[i * n..(i + 1) * n];
            fill_alf(trunc, mu, p);
            fill_alf_derivative(trunc, mu, p, &mut dalf[i * n..(i + 1) * n]);
        }
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(grid.nlon());
        let fft_inverse = planner.plan_fft_inverse(grid.nlon());
        Ok(Self {
            grid,
            trunc,
            alf,
            dalf,
            fft_forward,
            fft_inverse,
        })
    }

    /// Transform on the 3/2-rule grid for truncation `trunc`.
    pub fn dealiased(trunc: usize) -> Result<Self> {
        Self::new(Arc::new(Grid::dealiased(trunc)?), trunc)
    }

    /// Transform on the smallest exact grid for truncation `trunc`.
    pub fn minimal(trunc: usize) -> Result<Self> {
        Self::new(Arc::new(Grid::for_truncation(trunc)?), trunc)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    /// Whether quadratic products of fields at this truncation are analysed
    /// without aliasing.
    pub fn is_dealiased(&self) -> bool {
        2 * self.grid.nlat() >= 3 * (self.trunc + 1) && self.grid.nlon() > 3 * self.trunc
    }

    fn check_input(&self, a: &SpectralField) -> Result<()> {
        if a.trunc() > self.trunc {
            return Err(Error::Truncation {
                trunc: a.trunc(),
                nlat: self.grid.nlat(),
                nlon: self.grid.nlon(),
            });
        }
        Ok(())
    }

    /// Forward transform: `a_{j,m} = ∫ f conj(Y_j^m) dσ` by quadrature.
    pub fn analyze(&self, f: &GridField) -> Result<SpectralField> {
        if f.grid().nlat() != self.grid.nlat() || f.grid().nlon() != self.grid.nlon() {
            return Err(Error::InvalidArgument("field lives on a different grid".into()));
        }
        Ok(self.analyze_values(f.values()))
    }

    pub(crate) fn analyze_values(&self, values: &[f64]) -> SpectralField {
        let nlon = self.grid.nlon();
        let n = tri_len(self.trunc);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        let mut buf = vec![Complex64::new(0.0, 0.0); nlon];
        let scale = 2.0 * PI / nlon as f64;
        for (i, ring) in values.chunks(nlon).enumerate() {
            for (b, &v) in buf.iter_mut().zip(ring) {
                *b = Complex64::new(v, 0.0);
            }
            self.fft_forward.process(&mut buf);
            let w = self.grid.weights()[i] * scale;
            let p = &self.alf[i * n..(i + 1) * n];
            for m in 0..=self.trunc {
                let fm = buf[m] * w;
                for j in m..=self.trunc {
                    let idx = tri_index(j, m);
                    coeffs[idx] += fm * p[idx];
                }
            }
        }
        SpectralField::from_raw(self.trunc, coeffs)
    }

    /// Inverse transform at the grid nodes.
    pub fn synthesize(&self, a: &SpectralField) -> Result<GridField> {
        self.check_input(a)?;
        let values = self.synth_with(a, &self.alf, |_, c| c);
        Ok(GridField::from_parts(Arc::clone(&self.grid), values))
    }

    /// `(∂f/∂λ, (1 − μ²) ∂f/∂μ)` at the grid nodes.
    pub fn synthesize_gradient(&self, a: &SpectralField) -> Result<(GridField, GridField)> {
        self.check_input(a)?;
        let dl = self.synth_with(a, &self.alf, |m, c| c * Complex64::new(0.0, m as f64));
        let dm = self.synth_with(a, &self.dalf, |_, c| c);
        Ok((
            GridField::from_parts(Arc::clone(&self.grid), dl),
            GridField::from_parts(Arc::clone(&self.grid), dm),
        ))
    }

    fn synth_with(
        &self,
        a: &SpectralField,
        table: &[f64],
        weight: impl Fn(usize, Complex64) -> Complex64,
    ) -> Vec<f64> {
        let nlat = self.grid.nlat();
        let nlon = self.grid.nlon();
        let n = tri_len(self.trunc);
        let ta = a.trunc();
        let coeffs = a.raw();
        let mut out = vec![0.0; nlat * nlon];
        let mut buf = vec![Complex64::new(0.0, 0.0); nlon];
        for i in 0..nlat {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            let p = &table[i * n..(i + 1) * n];
            for m in 0..=ta {
                let mut fm = Complex64::new(0.0, 0.0);
                for j in m..=ta {
                    fm += coeffs[tri_index(j, m)] * p[tri_index(j, m)];
                }
                let fm = weight(m, fm);
                if m == 0 {
                    buf[0] = Complex64::new(fm.re, 0.0);
                } else {
                    buf[m] = fm;
                    buf[nlon - m] = fm.conj();
                }
            }
            self.fft_inverse.process(&mut buf);
            for (o, b) in out[i * nlon..(i + 1) * nlon].iter_mut().zip(&buf) {
                *o = b.re;
            }
        }
        out
    }

    /// Pointwise evaluation of a band-limited field at arbitrary unit vectors.
    pub fn evaluate_at(&self, a: &SpectralField, points: &[Vector3<f64>]) -> Vec<f64> {
        let ta = a.trunc();
        let mut p = vec![0.0; tri_len(ta)];
        let coeffs = a.raw();
        points
            .iter()
            .map(|x| {
                let mu = x.z.clamp(-1.0, 1.0);
                fill_alf(ta, mu, &mut p);
                let lambda = x.y.atan2(x.x);
                let e1 = Complex64::from_polar(1.0, lambda);
                let mut phase = Complex64::new(1.0, 0.0);
                let mut total = 0.0;
                for m in 0..=ta {
                    let mut fm = Complex64::new(0.0, 0.0);
                    for j in m..=ta {
                        fm += coeffs[tri_index(j, m)] * p[tri_index(j, m)];
                    }
                    let v = (fm * phase).re;
                    total += if m == 0 { v } else { 2.0 * v };
                    phase *= e1;
                }
                total
            })
            .collect()
    }

    /// `∇⊥ψ·∇ζ` with `∇⊥ψ = ∇ψ × x`, projected onto the truncation.
    ///
    /// In `(λ, μ)` coordinates this is `ψ_μ ζ_λ − ψ_λ ζ_μ`.
    pub fn jacobian(&self, psi: &SpectralField, zeta: &SpectralField) -> Result<SpectralField> {
        if !self.is_dealiased() {
            return Err(Error::Resolution {
                trunc: self.trunc,
                nlat: self.grid.nlat(),
                nlon: self.grid.nlon(),
            });
        }
        self.jacobian_unchecked(psi, zeta)
    }

    pub(crate) fn jacobian_unchecked(
        &self,
        psi: &SpectralField,
        zeta: &SpectralField,
    ) -> Result<SpectralField> {
        let (psi_l, psi_m) = self.synthesize_gradient(psi)?;
        let (zeta_l, zeta_m) = self.synthesize_gradient(zeta)?;
        let nlon = self.grid.nlon();
        let mut prod = vec![0.0; self.grid.len()];
        for (i, &mu) in self.grid.mu().iter().enumerate() {
            let inv = 1.0 / (1.0 - mu * mu);
            for k in i * nlon..(i + 1) * nlon {
                prod[k] = (psi_m.values()[k] * zeta_l.values()[k]
                    - psi_l.values()[k] * zeta_m.values()[k])
                    * inv;
            }
        }
        Ok(self.analyze_values(&prod))
    }

    /// Applies a pointwise map on the grid and analyses the result.
    pub fn apply_pointwise(
        &self,
        a: &SpectralField,
        f: impl Fn(f64) -> f64,
    ) -> Result<SpectralField> {
        let g = self.synthesize(a)?.map(f);
        Ok(self.analyze_values(g.values()))
    }
}
