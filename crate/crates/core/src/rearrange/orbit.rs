use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantile::{smooth_class_distance, SmoothQuantile};
use crate::elliptic::real_basis;
use crate::error::Result;
use crate::optim::{golden_min, nelder_mead};
use crate::spharm::{rotate, rotate_polar, Rotation, SpectralField, Transform};

const POLAR_GRID: usize = 72;
const SO3_SEEDS: usize = 8;
pub const DEFAULT_KAPPA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    /// All rigid rotations.
    So3,
    /// Rotations about the polar axis.
    H,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDistanceReport {
    pub distance: f64,
    pub rotation: Rotation,
    /// Best `E₂` shift (E₂-orbit searches only).
    pub e2_shift: Option<SpectralField>,
    pub class_violation: f64,
    pub converged: bool,
}

/// `‖u − v‖_{L^p}` by quadrature.
pub(crate) fn lp_distance(u: &[f64], v: &[f64], areas: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return u.iter().zip(v).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
    }
    let s: f64 = u
        .iter()
        .zip(v)
        .zip(areas)
        .map(|((a, b), w)| (a - b).abs().powf(p) * w)
        .sum();
    s.powf(1.0 / p)
}

fn cell_areas(t: &Transform) -> Vec<f64> {
    let grid = t.grid();
    let nlon = grid.nlon();
    (0..grid.len()).map(|k| grid.cell_area(k / nlon)).collect()
}

fn euler_zyz(a: f64, b: f64, c: f64) -> Matrix3<f64> {
    let rz = |t: f64| *Rotation3::from_axis_angle(&Vector3::z_axis(), t).matrix();
    let ry = *Rotation3::from_axis_angle(&Vector3::y_axis(), b).matrix();
    rz(a) * ry * rz(c)
}

struct Problem<'a> {
    w: Vec<f64>,
    zeta: &'a SpectralField,
    areas: Vec<f64>,
    points: Vec<Vector3<f64>>,
    t: &'a Transform,
    p: f64,
}

impl<'a> Problem<'a> {
    fn new(w: &SpectralField, zeta: &'a SpectralField, t: &'a Transform, p: f64) -> Result<Self> {
        Ok(Self {
            w: t.synthesize(&w.with_trunc(t.trunc()))?.into_values(),
            zeta,
            areas: cell_areas(t),
            points: t.grid().points(),
            t,
            p,
        })
    }

    fn polar(&self, theta: f64) -> f64 {
        let z = rotate_polar(self.zeta, theta).with_trunc(self.t.trunc());
        match self.t.synthesize(&z) {
            Ok(f) => lp_distance(&self.w, f.values(), &self.areas, self.p),
            Err(_) => f64::INFINITY,
        }
    }

    fn matrix(&self, m: &Matrix3<f64>) -> f64 {
        let pts: Vec<Vector3<f64>> = self.points.iter().map(|x| m * x).collect();
        let v = self.t.evaluate_at(self.zeta, &pts);
        lp_distance(&self.w, &v, &self.areas, self.p)
    }

    fn best_polar(&self) -> (f64, f64) {
        let h = TAU / POLAR_GRID as f64;
        let coarse: Vec<f64> = (0..POLAR_GRID)
            .into_par_iter()
            .map(|k| self.polar(h * k as f64))
            .collect();
        let (k, v0) = coarse
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (k, v)| if *v < b.1 { (k, *v) } else { b });
        let centre = h * k as f64;
        let (theta, v) = golden_min(|x| self.polar(x), centre - h, centre + h, 1e-12);
        if v < v0 {
            (theta.rem_euclid(TAU), v)
        } else {
            (centre, v0)
        }
    }
}

/// `inf_R ‖w − ζ∘R‖_{L^p}` over the group, by a coarse search refined with
/// golden section (polar group) or multistart Nelder–Mead on ZYZ Euler
/// angles seeded also by the polar optimum (full group), so the full-group
/// result never exceeds the polar one.
pub fn orbit_distance(
    w: &SpectralField,
    zeta: &SpectralField,
    group: Group,
    p: f64,
    t: &Transform,
) -> Result<OrbitDistanceReport> {
    let prob = Problem::new(w, zeta, t, p)?;
    let (theta, dist_h) = prob.best_polar();
    let (matrix, distance, converged) = match group {
        Group::H => (euler_zyz(theta, 0.0, 0.0), dist_h, true),
        Group::So3 => {
            let mut coarse = Vec::new();
            for ia in 0..6 {
                for ib in 0..5 {
                    for ic in 0..6 {
                        let (a, b, c) = (
                            ia as f64 * PI / 3.0,
                            (ib as f64 + 0.5) * PI / 5.0,
                            ic as f64 * PI / 3.0,
                        );
                        coarse.push([a, b, c]);
                    }
                }
            }
            let mut scored: Vec<(f64, [f64; 3])> = coarse
                .par_iter()
                .map(|e| (prob.matrix(&euler_zyz(e[0], e[1], e[2])), *e))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut seeds: Vec<[f64; 3]> = scored.iter().take(SO3_SEEDS).map(|s| s.1).collect();
            seeds.push([theta, 0.0, 0.0]);
            let cost = |x: &[f64]| prob.matrix(&euler_zyz(x[0], x[1], x[2]));
            let results: Vec<_> = seeds
                .par_iter()
                .map(|s| nelder_mead(cost, s, 0.2, 1e-13, 600))
                .collect();
            let best = results
                .iter()
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .expect("seeds");
            if best.value < dist_h {
                (
                    euler_zyz(best.x[0], best.x[1], best.x[2]),
                    best.value,
                    best.converged,
                )
            } else {
                (euler_zyz(theta, 0.0, 0.0), dist_h, true)
            }
        }
    };
    let rotation = Rotation::from_matrix(&matrix);
    let z = zeta.with_trunc(t.trunc());
    let rotated = rotate(&z, &rotation, t)?;
    Ok(OrbitDistanceReport {
        distance,
        rotation,
        e2_shift: None,
        class_violation: smooth_class_distance(&rotated, &z, 2.0, t)?,
        converged,
    })
}

/// Penalised distance from `w` to `(ζ + E₂) ∩ R_ζ`: minimises
/// `‖w − (ζ + Y_c)‖_{L^p} + κ·d_class(ζ + Y_c, ζ)` over the five real
/// `E₂` coordinates `c`, starting from `c = 0` and from the `E₂` projection
/// of `w − ζ`. The reported distance is the first term alone.
pub fn e2_orbit_distance(
    w: &SpectralField,
    zeta: &SpectralField,
    p: f64,
    kappa: f64,
    t: &Transform,
) -> Result<OrbitDistanceReport> {
    let trunc = t.trunc();
    let areas = cell_areas(t);
    let wv = t.synthesize(&w.with_trunc(trunc))?.into_values();
    let z = zeta.with_trunc(trunc);
    let nodal = |f: &SpectralField| -> Result<[Vec<f64>; 3]> {
        let (dl, dm) = t.synthesize_gradient(f)?;
        Ok([t.synthesize(f)?.into_values(), dl.into_values(), dm.into_values()])
    };
    let base = nodal(&z)?;
    let grid = t.grid();
    let target = SmoothQuantile::from_grid(grid, &base[0], &base[1], &base[2]);
    let basis = real_basis(trunc, 2, 2);
    let basis_vals: Vec<[Vec<f64>; 3]> = basis.iter().map(nodal).collect::<Result<_>>()?;
    let shifted = |c: &[f64]| -> [Vec<f64>; 3] {
        let mut v = base.clone();
        for (ci, b) in c.iter().zip(&basis_vals) {
            for (vk, bk) in v.iter_mut().zip(b) {
                for (x, y) in vk.iter_mut().zip(bk) {
                    *x += ci * y;
                }
            }
        }
        v
    };
    let terms = |c: &[f64]| -> (f64, f64) {
        let [v, dl, dm] = shifted(c);
        let d = lp_distance(&wv, &v, &areas, p);
        let cls = SmoothQuantile::from_grid(grid, &v, &dl, &dm)
            .distance(&target, p)
            .unwrap_or(f64::INFINITY);
        (d, cls)
    };
    let objective = |c: &[f64]| {
        let (d, cls) = terms(c);
        d + kappa * cls
    };
    let diff = &w.with_trunc(trunc) - &z;
    let proj: Vec<f64> = basis.iter().map(|b| b.inner(&diff)).collect();
    let scale = 0.1 * (1.0 + diff.l2_norm());
    let starts = [vec![0.0; basis.len()], proj];
    let results: Vec<_> = starts
        .par_iter()
        .map(|s| nelder_mead(objective, s, scale, 1e-14, 2000))
        .collect();
    let best = results
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("two starts");
    let (distance, class_violation) = terms(&best.x);
    let mut shift = SpectralField::zeros(trunc);
    for (ci, b) in best.x.iter().zip(&basis) {
        shift.axpy(*ci, b);
    }
    Ok(OrbitDistanceReport {
        distance,
        rotation: Rotation::identity(),
        e2_shift: Some(shift),
        class_violation,
        converged: best.converged,
    })
}
