use nalgebra::Vector3;
use serde::Serialize;

use super::nonlinearity::NonlinearitySpec;
use crate::error::{Error, Result};
use crate::spharm::{green_projected, SpectralField, Transform, MEAN_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    /// Damping `τ ∈ (0, 1]`.
    pub relax: f64,
    /// Stop once the `L²` update falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            relax: 0.5,
            tol: 1e-12,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub zeta: SpectralField,
    pub beta: f64,
    pub p: Vector3<f64>,
    /// `‖ζ − Π₀ g(Gζ + βp·x)‖_{L²}` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mean removed by `Π₀` at the last evaluation of the map.
    pub mean_projection: f64,
}

/// Evaluates `Π₀ g(Gζ + βp·x)` on the transform grid, returning the image and
/// the mean it carried before projection.
pub fn steady_map(
    g: &NonlinearitySpec,
    beta: f64,
    p: &Vector3<f64>,
    zeta: &SpectralField,
    t: &Transform,
) -> Result<(SpectralField, f64)> {
    let mut arg = green_projected(zeta);
    arg.axpy(beta, &SpectralField::linear(arg.trunc(), *p));
    let mut out = t.apply_pointwise(&arg, |s| g.eval(s))?;
    let mean = out.remove_mean();
    if !out.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "nonlinearity `{}` produced non-finite values",
            g.name()
        )));
    }
    Ok((out, mean))
}

/// Damped iteration `ζ ← (1 − τ)ζ + τ Π₀ g(Gζ + βp·x)`.
///
/// Exhausting `max_iter` is not an error: the iterate with the smallest
/// residual is returned with `converged = false`.
pub fn solve_fixed_point(
    g: &NonlinearitySpec,
    beta: f64,
    p: Vector3<f64>,
    init: &SpectralField,
    opts: &FixedPointOptions,
    t: &Transform,
) -> Result<SteadyState> {
    if !(opts.relax > 0.0 && opts.relax <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relaxation {} outside (0, 1]",
            opts.relax
        )));
    }
    let p = p
        .try_normalize(0.0)
        .ok_or_else(|| Error::InvalidArgument("axis has no direction".into()))?;
    let mean = init.raw()[0].norm();
    if mean > MEAN_TOLERANCE * (1.0 + init.l2_norm()) {
        return Err(Error::NonZeroMean(mean));
    }
    if init.trunc() > t.trunc() {
        return Err(Error::Truncation {
            trunc: init.trunc(),
            nlat: t.grid().nlat(),
            nlon: t.grid().nlon(),
        });
    }
    let mut zeta = init.with_trunc(t.trunc());
    zeta.remove_mean();
    let mut best: Option<SteadyState> = None;
    for it in 0..=opts.max_iter {
        let (image, mean) = steady_map(g, beta, &p, &zeta, t)?;
        let diff = &image - &zeta;
        let residual = diff.l2_norm();
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(SteadyState {
                zeta: zeta.clone(),
                beta,
                p,
                residual,
                iterations: it,
                converged: false,
                mean_projection: mean,
            });
        }
        if !residual.is_finite() {
            break;
        }
        if opts.relax * residual < opts.tol || it == opts.max_iter {
            if opts.relax * residual < opts.tol {
                return Ok(SteadyState {
                    zeta,
                    beta,
                    p,
                    residual,
                    iterations: it,
                    converged: true,
                    mean_projection: mean,
                });
            }
            break;
        }
        zeta.axpy(opts.relax, &diff);
    }
    Ok(best.expect("at least one iterate"))
}
