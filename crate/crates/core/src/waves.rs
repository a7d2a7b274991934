//! Rossby–Haurwitz waves `ζ = αx₃ + Y`, `Y ∈ E_j`, and their exact evolution.

use std::str::FromStr;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{TrajectoryRecord, VorticityModel};
use crate::error::{Error, Result};
use crate::spharm::{eigenvalue, rotate_polar, SpectralField, Transform};

/// Off-degree energy a wave component may carry.
pub const OFF_DEGREE_TOLERANCE: f64 = 1e-12;

/// Sign of the polar phase in the exact solution: the degree-`j` part at time
/// `t` is `Y∘R^{e₃}_{s(β+Ω)t}` with `s` this constant. Frozen against the
/// integrator by the `phase_sign_matches_integrator` regression test.
pub const PHASE_SIGN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RhWave {
    degree: usize,
    y: SpectralField,
    alpha: f64,
    beta: f64,
    omega: f64,
}

/// `β = (2 − λ_j)/(2λ_j)·α`.
pub fn dispersion_beta(degree: usize, alpha: f64) -> f64 {
    let lam = eigenvalue(degree);
    (2.0 - lam) / (2.0 * lam) * alpha
}

/// Builds a wave, taking `β` from the dispersion relation (zero for `j = 1`).
pub fn make_rh_wave(degree: usize, y: &SpectralField, alpha: f64, omega: f64) -> Result<RhWave> {
    if degree == 0 {
        return Err(Error::InvalidArgument("wave degree must be at least 1".into()));
    }
    if y.trunc() < degree {
        return Err(Error::InvalidArgument(format!(
            "component has truncation {} below degree {degree}",
            y.trunc()
        )));
    }
    let off = y.l2_norm().powi(2) - y.degree_energy(degree);
    let scale = y.l2_norm().powi(2).max(1.0);
    if off > OFF_DEGREE_TOLERANCE * scale {
        return Err(Error::OffDegree { degree, energy: off });
    }
    Ok(RhWave {
        degree,
        y: y.degree_part(degree),
        alpha,
        beta: dispersion_beta(degree, alpha),
        omega,
    })
}

impl RhWave {
    /// Overrides `β`. Only the degree-one family has a free rate; elsewhere
    /// this produces a wave that [`RhWave::residual`] rejects.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn y(&self) -> &SpectralField {
        &self.y
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Polar angle through which `Y` has turned by time `t`.
    pub fn phase(&self, t: f64) -> f64 {
        PHASE_SIGN * (self.beta + self.omega) * t
    }

    /// `αx₃ + Y∘R^{e₃}_{(β+Ω)t}` at truncation `trunc`.
    pub fn exact(&self, t: f64, trunc: usize) -> SpectralField {
        let mut z = rotate_polar(&self.y.with_trunc(trunc), self.phase(t));
        z.axpy(self.alpha, &SpectralField::linear(trunc, Vector3::z()));
        z
    }

    pub fn initial(&self, trunc: usize) -> SpectralField {
        self.exact(0.0, trunc)
    }

    /// `∂_t` of [`RhWave::exact`] at `t = 0`.
    pub fn time_derivative(&self, trunc: usize) -> SpectralField {
        &self.y.with_trunc(trunc).d_lambda() * (PHASE_SIGN * (self.beta + self.omega))
    }

    /// `‖∂_tζ_exact − rhs(ζ_exact)‖_{L²}` at `t = 0`.
    pub fn residual(&self, t: &Transform) -> Result<f64> {
        let model = VorticityModel::with_transform(t.clone(), self.omega);
        let zeta = self.initial(t.trunc());
        let r = model.rhs(&zeta)?;
        Ok((&self.time_derivative(t.trunc()) - &r).l2_norm())
    }
}

/// Free-function form of [`RhWave::exact`].
pub fn exact_rh_solution(w: &RhWave, t: f64) -> SpectralField {
    w.exact(t, w.y.trunc().max(1))
}

/// Free-function form of [`RhWave::residual`].
pub fn rh_residual(w: &RhWave, t: &Transform) -> Result<f64> {
    w.residual(t)
}

/// Real unit-`L²` field in `E_j` with coefficient `a_{j,1} = −1/√2`; for
/// `j = 2` this is `x₁x₃` normalised.
pub fn unit_tesseral(trunc: usize, degree: usize) -> SpectralField {
    let mut y = SpectralField::zeros(trunc);
    y.set(degree, 1, Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0));
    y
}

/// Least-squares rate of the unwrapped phase of `a_{j,m}` along a trajectory.
pub fn measure_phase_rate(records: &[TrajectoryRecord], degree: usize, m: i64) -> Result<f64> {
    if records.len() < 2 || m == 0 {
        return Err(Error::InvalidArgument(
            "phase tracking needs two records and m ≠ 0".into(),
        ));
    }
    let mut phases = Vec::with_capacity(records.len());
    let mut prev: Option<f64> = None;
    for r in records {
        let c = r.zeta.get(degree, m);
        if c.norm() == 0.0 {
            return Err(Error::ZeroField);
        }
        let mut ph = c.arg();
        if let Some(p) = prev {
            let two_pi = std::f64::consts::TAU;
            ph += two_pi * ((p - ph) / two_pi).round();
        }
        prev = Some(ph);
        phases.push(ph);
    }
    let n = records.len() as f64;
    let tm = records.iter().map(|r| r.t).sum::<f64>() / n;
    let pm = phases.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (r, p) in records.iter().zip(&phases) {
        num += (r.t - tm) * (p - pm);
        den += (r.t - tm).powi(2);
    }
    Ok(num / den / m as f64)
}

/// CLI preset `rh-j<j>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhPreset {
    pub degree: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    /// `(m, re, im)` for `m ≥ 0`; empty selects [`unit_tesseral`].
    #[serde(default)]
    pub y_coeffs: Vec<(usize, f64, f64)>,
    #[serde(rename = "Omega", default)]
    pub omega: f64,
    #[serde(default)]
    pub beta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl RhPreset {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            alpha: 1.0,
            y_coeffs: Vec::new(),
            omega: 0.0,
            beta: None,
        }
    }

    pub fn build(&self, trunc: usize) -> Result<RhWave> {
        if self.degree > trunc {
            return Err(Error::InvalidArgument(format!(
                "wave degree {} above truncation {trunc}",
                self.degree
            )));
        }
        let y = if self.y_coeffs.is_empty() {
            unit_tesseral(trunc, self.degree)
        } else {
            let mut y = SpectralField::zeros(trunc);
            for &(m, re, im) in &self.y_coeffs {
                if m > self.degree {
                    return Err(Error::InvalidArgument(format!(
                        "order {m} above degree {}",
                        self.degree
                    )));
                }
                let c = if m == 0 {
                    Complex64::new(re, 0.0)
                } else {
                    Complex64::new(re, im)
                };
                y.set(self.degree, m as i64, c);
            }
            y
        };
        let w = make_rh_wave(self.degree, &y, self.alpha, self.omega)?;
        Ok(match self.beta {
            Some(b) => w.with_beta(b),
            None => w,
        })
    }
}

impl FromStr for RhPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix("rh-j")
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|d| *d >= 1)
            .map(RhPreset::new)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown wave preset `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, SimConfig};
    use crate::spharm::Grid;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn dispersion_values() {
        let y = unit_tesseral(6, 2);
        assert_relative_eq!(make_rh_wave(2, &y, 1.0, 0.0).unwrap().beta(), -1.0 / 3.0);
        let y3 = unit_tesseral(6, 3);
        assert_relative_eq!(make_rh_wave(3, &y3, 1.0, 0.0).unwrap().beta(), -5.0 / 12.0);
        assert_eq!(make_rh_wave(2, &y, 0.0, 0.0).unwrap().beta(), 0.0);
        assert_eq!(make_rh_wave(1, &unit_tesseral(6, 1), 2.5, 0.0).unwrap().beta(), 0.0);
    }

    #[test]
    fn off_degree_component_is_rejected() {
        let mut y = unit_tesseral(6, 2);
        y.set(3, 0, Complex64::new(0.1, 0.0));
        assert!(matches!(
            make_rh_wave(2, &y, 1.0, 0.0),
            Err(Error::OffDegree { degree: 2, .. })
        ));
    }

    #[test]
    fn unit_tesseral_is_normalised_x1x3() {
        let grid = Arc::new(Grid::for_truncation(4).unwrap());
        let t = Transform::new(grid.clone(), 4).unwrap();
        let a = t.analyze(&grid.sample(|x| x.x * x.z)).unwrap();
        let a = &a * (1.0 / a.l2_norm());
        assert!(a.max_abs_diff(&unit_tesseral(4, 2)) < 1e-14);
    }

    #[test]
    fn exact_at_zero_and_zonal() {
        let y = unit_tesseral(8, 2);
        let w = make_rh_wave(2, &y, 1.0, 0.0).unwrap();
        let mut z0 = y.clone();
        z0.axpy(1.0, &SpectralField::linear(8, Vector3::z()));
        assert_eq!(w.exact(0.0, 8), z0);

        let mut zonal = SpectralField::zeros(8);
        zonal.set(2, 0, Complex64::new(0.7, 0.0));
        let wz = make_rh_wave(2, &zonal, 1.0, 0.3).unwrap();
        assert!(wz.exact(4.2, 8).max_abs_diff(&wz.exact(0.0, 8)) < 1e-15);
    }

    #[test]
    fn exact_is_periodic() {
        let w = make_rh_wave(2, &unit_tesseral(8, 2), 1.0, 0.0).unwrap();
        let period = std::f64::consts::TAU / w.beta().abs();
        assert!(w.exact(period, 8).max_abs_diff(&w.exact(0.0, 8)) < 1e-12);
    }

    #[test]
    fn residual_vanishes_on_dispersion_relation() {
        let t = Transform::dealiased(12).unwrap();
        for j in 1..=4 {
            for omega in [0.0, 0.5] {
                let w = make_rh_wave(j, &unit_tesseral(12, j), 1.0, omega).unwrap();
                assert!(w.residual(&t).unwrap() < 1e-12, "j={j} Ω={omega}");
            }
        }
    }

    #[test]
    fn residual_scan_isolates_beta() {
        let t = Transform::dealiased(12).unwrap();
        for j in 2..=4 {
            let w = make_rh_wave(j, &unit_tesseral(12, j), 1.0, 0.0).unwrap();
            let b0 = w.beta();
            for k in -5i32..=5 {
                let b = b0 + 0.02 * k as f64;
                let r = w.clone().with_beta(b).residual(&t).unwrap();
                assert_eq!(r < 1e-9, k == 0, "j={j} β={b} r={r}");
            }
            assert!(w.clone().with_beta(b0 + 0.1).residual(&t).unwrap() > 1e-3);
        }
    }

    #[test]
    fn phase_sign_matches_integrator() {
        let trunc = 10;
        let w = make_rh_wave(2, &unit_tesseral(trunc, 2), 1.0, 0.2).unwrap();
        let mut cfg = SimConfig::new(trunc, 0.2, 1e-2, 0.5);
        cfg.diag_every = 50;
        let recs = simulate(&w.initial(trunc), &cfg).unwrap();
        let last = recs.last().unwrap();
        let err = (&last.zeta - &w.exact(last.t, trunc)).l2_norm();
        assert!(err < 1e-8, "{err}");
        let wrong = rotate_polar(&w.exact(0.0, trunc), -w.phase(last.t));
        assert!((&last.zeta - &wrong).l2_norm() > 1e-2);
    }

    #[test]
    fn preset_parsing() {
        let p: RhPreset = "rh-j3".parse().unwrap();
        assert_eq!(p.degree, 3);
        assert!("rh-jx".parse::<RhPreset>().is_err());
        assert!("rh-j0".parse::<RhPreset>().is_err());
        let w = p.build(8).unwrap();
        assert_relative_eq!(w.beta(), -5.0 / 12.0);
        assert!(RhPreset::new(9).build(8).is_err());
    }
}
