use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantile::class_distance;
use crate::error::{Error, Result};
use crate::spharm::{energy, laplacian, SpectralField, Transform};

/// Courant number for the transport substeps.
const CFL: f64 = 0.2;
const PROJECTION_ROUNDS: usize = 4;
/// Admissible moment drift as a fraction of `ε·scale`.
const MOMENT_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub zeta: SpectralField,
    /// `L²` class distance between output and input.
    pub class_distance: f64,
    pub moment_change: Vector3<f64>,
    pub substeps: usize,
}

fn max_speed(chi: &SpectralField, t: &Transform) -> Result<f64> {
    let (dl, dm) = t.synthesize_gradient(chi)?;
    let grid = t.grid();
    let nlon = grid.nlon();
    let mut vmax: f64 = 0.0;
    for (k, (a, b)) in dl.values().iter().zip(dm.values()).enumerate() {
        let s = 1.0 - grid.mu()[k / nlon].powi(2);
        vmax = vmax.max(((a * a + b * b) / s).sqrt());
    }
    Ok(vmax)
}

/// Transports `ζ` for time `ε` by the frozen divergence-free velocity `∇⊥χ`
/// (`∂_sζ + ∇⊥χ·∇ζ = 0`) with RK4 substeps under a CFL limit.
pub fn flow_perturbation(
    zeta: &SpectralField,
    chi: &SpectralField,
    eps: f64,
    t: &Transform,
) -> Result<FlowResult> {
    if !t.is_dealiased() {
        return Err(Error::Resolution {
            trunc: t.trunc(),
            nlat: t.grid().nlat(),
            nlon: t.grid().nlon(),
        });
    }
    let trunc = t.trunc();
    let z0 = zeta.with_trunc(trunc);
    let chi = chi.with_trunc(trunc);
    if eps == 0.0 {
        return Ok(FlowResult {
            zeta: z0,
            class_distance: 0.0,
            moment_change: Vector3::zeros(),
            substeps: 0,
        });
    }
    let speed = max_speed(&chi, t)?;
    let n = ((eps.abs() * speed * (trunc + 1) as f64 / CFL).ceil() as usize).max(1);
    let h = eps / n as f64;
    let rhs = |z: &SpectralField| -> Result<SpectralField> { Ok(-t.jacobian_unchecked(&chi, z)?) };
    let mut z = z0.clone();
    for _ in 0..n {
        let k1 = rhs(&z)?;
        let mut y = z.clone();
        y.axpy(0.5 * h, &k1);
        let k2 = rhs(&y)?;
        let mut y = z.clone();
        y.axpy(0.5 * h, &k2);
        let k3 = rhs(&y)?;
        let mut y = z.clone();
        y.axpy(h, &k3);
        let k4 = rhs(&y)?;
        z.axpy(h / 6.0, &k1);
        z.axpy(h / 3.0, &k2);
        z.axpy(h / 3.0, &k3);
        z.axpy(h / 6.0, &k4);
        if !z.is_finite() {
            return Err(Error::InvalidArgument(
                "transport step became unstable".into(),
            ));
        }
    }
    z.remove_mean();
    let class_distance = class_distance(&t.synthesize(&z)?, &t.synthesize(&z0)?, 2.0)?;
    Ok(FlowResult {
        moment_change: z.moment() - z0.moment(),
        zeta: z,
        class_distance,
        substeps: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    /// Expect `E(ζ∘Φ_ε) ≥ E(ζ)`.
    Min,
    /// Expect `E(ζ∘Φ_ε) ≤ E(ζ)`.
    Max,
}

impl std::str::FromStr for ProbeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            _ => Err(Error::InvalidArgument(format!("probe mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub seed: u64,
    /// Highest degree of the random stream functions.
    pub chi_degree: usize,
    /// Absolute tolerance is `rel_tol·|E(ζ)|` plus the `C ε²` allowance.
    pub rel_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            chi_degree: 6,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSample {
    pub index: usize,
    /// `E(ζ∘Φ_ε) − E(ζ)` with the sign that should be non-negative.
    pub signed_change: f64,
    /// `C ε²` with `C = ½‖∇⊥χ·∇ζ‖²_{L²}`.
    pub allowance: f64,
    pub moment_violation: f64,
    pub class_distance: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub mode: ProbeMode,
    pub eps: f64,
    pub base_energy: f64,
    pub samples: Vec<ProbeSample>,
    pub skipped: usize,
    pub min_signed_change: f64,
    pub worst_moment_violation: f64,
    pub worst_class_distance: f64,
    pub violations: usize,
    /// `|ΔE|` along the generator of rotations about `e₃`.
    pub neutral_change: f64,
    pub passed: bool,
}

/// Moment change of the transport to first order in `ε` per unit `ε`.
fn moment_rate(chi: &SpectralField, zeta: &SpectralField, t: &Transform) -> Result<Vector3<f64>> {
    Ok((-t.jacobian_unchecked(chi, zeta)?).moment())
}

/// Least-squares solve of `A c = b` through the SVD pseudo-inverse.
fn lstsq(a: &Matrix3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-10 * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| Vector3::zeros())
}

struct Trial {
    zeta: SpectralField,
    moment_violation: f64,
    class_distance: f64,
    allowance: f64,
}

/// Flows `ζ` along `χ` corrected in the directions `J(x_i, ζ)` until the
/// moment change is within the admissible band.
fn constrained_flow(
    zeta: &SpectralField,
    chi: &SpectralField,
    eps: f64,
    t: &Transform,
    limit: f64,
) -> Result<Option<Trial>> {
    let trunc = t.trunc();
    let dirs: Vec<SpectralField> = [Vector3::x(), Vector3::y(), Vector3::z()]
        .iter()
        .map(|e| t.jacobian_unchecked(&SpectralField::linear(trunc, *e), zeta))
        .collect::<Result<_>>()?;
    let mut a = Matrix3::zeros();
    for (l, d) in dirs.iter().enumerate() {
        a.set_column(l, &(moment_rate(d, zeta, t)? * eps));
    }
    let m0 = zeta.moment();
    let mut chi = chi.clone();
    // First-order removal, then Gauss–Newton on the realised moment change.
    let c = lstsq(&a, &(-moment_rate(&chi, zeta, t)? * eps));
    for (ci, d) in c.iter().zip(&dirs) {
        chi.axpy(*ci, d);
    }
    for _ in 0..PROJECTION_ROUNDS {
        let out = flow_perturbation(zeta, &chi, eps, t)?;
        let dm = out.zeta.moment() - m0;
        if dm.norm() <= limit {
            let jac = t.jacobian_unchecked(&chi, zeta)?;
            return Ok(Some(Trial {
                zeta: out.zeta,
                moment_violation: dm.norm(),
                class_distance: out.class_distance,
                allowance: 0.5 * jac.l2_norm().powi(2) * eps * eps,
            }));
        }
        let c = lstsq(&a, &(-dm));
        for (ci, d) in c.iter().zip(&dirs) {
            chi.axpy(*ci, d);
        }
    }
    Ok(None)
}

/// Gaussian stream function on degrees `2..=degree` whose velocity `∇⊥χ` has
/// unit `L²` norm.
pub fn random_stream(trunc: usize, degree: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = SpectralField::random(trunc, 2, degree.min(trunc), &mut rng);
    let n = chi.inner(&laplacian(&chi)).abs().sqrt();
    if n > 0.0 {
        &chi * (1.0 / n)
    } else {
        chi
    }
}

/// Samples measure-preserving perturbations `ζ∘Φ_ε` with approximately
/// fixed moment and checks the sign of the energy change.
pub fn extremality_probe(
    zeta: &SpectralField,
    mode: ProbeMode,
    n_samples: usize,
    eps: f64,
    opts: &ProbeOptions,
    t: &Transform,
) -> Result<ProbeReport> {
    let trunc = t.trunc();
    let z = zeta.with_trunc(trunc);
    let e0 = energy(&z);
    let sign = match mode {
        ProbeMode::Min => 1.0,
        ProbeMode::Max => -1.0,
    };
    let scale = z.moment().norm().max(z.l2_norm());
    let limit = MOMENT_FRACTION * eps.abs() * scale;
    let tol = opts.rel_tol * e0.abs();
    let outcomes: Vec<Option<ProbeSample>> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<Option<ProbeSample>> {
            let chi = random_stream(trunc, opts.chi_degree, opts.seed.wrapping_add(i as u64));
            if z.l2_norm() == 0.0 {
                return Ok(Some(ProbeSample {
                    index: i,
                    signed_change: 0.0,
                    allowance: 0.0,
                    moment_violation: 0.0,
                    class_distance: 0.0,
                    violated: false,
                }));
            }
            Ok(constrained_flow(&z, &chi, eps, t, limit)?.map(|trial| {
                let signed = sign * (energy(&trial.zeta) - e0);
                ProbeSample {
                    index: i,
                    signed_change: signed,
                    allowance: trial.allowance,
                    moment_violation: trial.moment_violation,
                    class_distance: trial.class_distance,
                    violated: signed < -(tol + trial.allowance),
                }
            }))
        })
        .collect::<Result<_>>()?;
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let samples: Vec<ProbeSample> = outcomes.into_iter().flatten().collect();
    let violations = samples.iter().filter(|s| s.violated).count();
    let neutral = flow_perturbation(&z, &SpectralField::linear(trunc, Vector3::z()), eps, t)?;
    let neutral_change = (energy(&neutral.zeta) - e0).abs();
    Ok(ProbeReport {
        mode,
        eps,
        base_energy: e0,
        min_signed_change: samples
            .iter()
            .map(|s| s.signed_change)
            .fold(f64::INFINITY, f64::min),
        worst_moment_violation: samples.iter().map(|s| s.moment_violation).fold(0.0, f64::max),
        worst_class_distance: samples.iter().map(|s| s.class_distance).fold(0.0, f64::max),
        passed: violations == 0 && skipped < n_samples.max(1),
        violations,
        skipped,
        neutral_change,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VorticityModel;
    use crate::waves::{make_rh_wave, unit_tesseral};
    use num_complex::Complex64;

    #[test]
    fn zero_time_is_identity() {
        let t = Transform::dealiased(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = SpectralField::random(6, 1, 6, &mut rng);
        let chi = SpectralField::random(6, 1, 6, &mut rng);
        assert_eq!(flow_perturbation(&z, &chi, 0.0, &t).unwrap().zeta, z);
    }

    #[test]
    fn zonal_pair_is_fixed() {
        let t = Transform::dealiased(8).unwrap();
        let mut z = SpectralField::zeros(8);
        z.set(3, 0, Complex64::new(1.0, 0.0));
        let mut chi = SpectralField::zeros(8);
        chi.set(2, 0, Complex64::new(0.4, 0.0));
        let out = flow_perturbation(&z, &chi, 0.05, &t).unwrap();
        assert!(out.zeta.max_abs_diff(&z) < 1e-15);
    }

    #[test]
    fn polar_generator_rotates() {
        // ∇⊥x₃ turns fields about e₃ at unit rate, opposite to the Ω term.
        let t = Transform::dealiased(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = SpectralField::random(8, 1, 5, &mut rng);
        let eps = 0.3;
        let out = flow_perturbation(&z, &SpectralField::linear(8, Vector3::z()), eps, &t).unwrap();
        let rotating = VorticityModel::with_transform(t.clone(), 1.0);
        let still = VorticityModel::with_transform(t.clone(), 0.0);
        let omega_term = &rotating.rhs(&z).unwrap() - &still.rhs(&z).unwrap();
        let transport = -t.jacobian(&SpectralField::linear(8, Vector3::z()), &z).unwrap();
        assert!((&omega_term + &transport).l2_norm() < 1e-12);
        let back = crate::spharm::rotate_polar(&z, -eps);
        assert!((&out.zeta - &back).l2_norm() < 1e-5);
    }

    #[test]
    fn degree_one_minimum_probe() {
        let t = Transform::dealiased(10).unwrap();
        let z = SpectralField::linear(10, Vector3::new(0.2, -0.3, 0.9));
        let r = extremality_probe(&z, ProbeMode::Min, 8, 1e-2, &ProbeOptions::default(), &t).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn rh_maximum_probe() {
        let t = Transform::dealiased(10).unwrap();
        let w = make_rh_wave(2, &unit_tesseral(10, 2), 1.0, 0.0).unwrap();
        let r = extremality_probe(&w.initial(10), ProbeMode::Max, 8, 1e-2, &ProbeOptions::default(), &t)
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.neutral_change < 1e-9);
    }

    #[test]
    fn zero_field_probe() {
        let t = Transform::dealiased(6).unwrap();
        let r = extremality_probe(&SpectralField::zeros(6), ProbeMode::Min, 4, 1e-2, &ProbeOptions::default(), &t)
            .unwrap();
        assert!(r.passed);
        assert_eq!(r.base_energy, 0.0);
        assert!(r.samples.iter().all(|s| s.signed_change == 0.0));
    }
}
