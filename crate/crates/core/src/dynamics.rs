//! Time integration of the absolute-vorticity equation on the rotating sphere,
//!
//! ```text
//! ∂ζ/∂t = −∇⊥(Gζ − Ω x₃)·∇ζ,
//! ```
//!
//! with classical RK4 in time and a 3/2-rule dealiased Jacobian.

use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spharm::{
    eigenvalue, green_projected, rotate_polar, Diagnostics, DiagnosticsEngine, SpectralField,
    Transform, MEAN_TOLERANCE,
};

fn default_true() -> bool {
    true
}

fn default_p_list() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn default_casimir_order() -> usize {
    4
}

fn default_diag_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "J")]
    pub trunc: usize,
    #[serde(rename = "Omega", default)]
    pub omega: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default = "default_casimir_order")]
    pub casimir_order: usize,
    /// Coefficient of the optional scale-selective damping
    /// `−ν (λ_j/λ_J)⁴ a_{j,m}`; zero disables it.
    #[serde(default)]
    pub damping: f64,
}

impl SimConfig {
    pub fn new(trunc: usize, omega: f64, dt: f64, t_end: f64) -> Self {
        Self {
            trunc,
            omega,
            dt,
            t_end,
            diag_every: 1,
            dealias: true,
            p_list: default_p_list(),
            casimir_order: default_casimir_order(),
            damping: 0.0,
        }
    }

    pub fn with_diag_every(mut self, n: usize) -> Self {
        self.diag_every = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.diag_every == 0 {
            return Err(Error::Config("diag_every must be at least 1".into()));
        }
        if self.trunc == 0 {
            return Err(Error::Config("J must be at least 1".into()));
        }
        if self.damping < 0.0 {
            return Err(Error::Config("damping must be non-negative".into()));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(**p >= 1.0)) {
            return Err(Error::Config(format!("L^p exponent {p} must be at least 1")));
        }
        Ok(())
    }

    /// Number of steps; the final time is within `dt/2` of `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub zeta: SpectralField,
    pub diag: Diagnostics,
}

/// Right-hand side and RK4 stepper for one truncation and frame rate.
#[derive(Debug, Clone)]
pub struct VorticityModel {
    transform: Transform,
    omega: f64,
    damping: f64,
    polar: SpectralField,
}

impl VorticityModel {
    pub fn new(trunc: usize, omega: f64, dealias: bool) -> Result<Self> {
        let transform = if dealias {
            Transform::dealiased(trunc)?
        } else {
            Transform::minimal(trunc)?
        };
        Ok(Self::with_transform(transform, omega))
    }

    pub fn with_transform(transform: Transform, omega: f64) -> Self {
        let polar = SpectralField::linear(transform.trunc(), Vector3::z());
        Self {
            transform,
            omega,
            damping: 0.0,
            polar,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `−∇⊥(Gζ − Ω x₃)·∇ζ`, mean removed.
    pub fn rhs(&self, zeta: &SpectralField) -> Result<SpectralField> {
        let mut psi = green_projected(zeta);
        psi.axpy(-self.omega, &self.polar.with_trunc(psi.trunc()));
        let mut out = -self.transform.jacobian_unchecked(&psi, zeta)?;
        out.remove_mean();
        if self.damping > 0.0 {
            let top = eigenvalue(self.transform.trunc());
            let damp = zeta.map_degree(|j| -self.damping * (eigenvalue(j) / top).powi(4));
            out += &damp;
        }
        Ok(out)
    }

    pub fn step_rk4(&self, zeta: &SpectralField, dt: f64) -> Result<SpectralField> {
        if dt == 0.0 {
            return Ok(zeta.clone());
        }
        let zeta = zeta.with_trunc(self.transform.trunc());
        let k1 = self.rhs(&zeta)?;
        let mut y = zeta.clone();
        y.axpy(0.5 * dt, &k1);
        let k2 = self.rhs(&y)?;
        let mut y = zeta.clone();
        y.axpy(0.5 * dt, &k2);
        let k3 = self.rhs(&y)?;
        let mut y = zeta.clone();
        y.axpy(dt, &k3);
        let k4 = self.rhs(&y)?;
        let mut out = zeta;
        out.axpy(dt / 6.0, &k1);
        out.axpy(dt / 3.0, &k2);
        out.axpy(dt / 3.0, &k3);
        out.axpy(dt / 6.0, &k4);
        if !out.is_finite() {
            return Err(Error::BlowUp {
                time: dt,
                records: Vec::new(),
            });
        }
        Ok(out)
    }
}

/// `−∇⊥(Gζ − Ω x₃)·∇ζ` on a dealiased transform.
pub fn rhs(zeta: &SpectralField, omega: f64, t: &Transform) -> Result<SpectralField> {
    if !t.is_dealiased() {
        return Err(Error::Resolution {
            trunc: t.trunc(),
            nlat: t.grid().nlat(),
            nlon: t.grid().nlon(),
        });
    }
    VorticityModel::with_transform(t.clone(), omega).rhs(zeta)
}

/// One classical RK4 step of [`rhs`].
pub fn step_rk4(zeta: &SpectralField, dt: f64, omega: f64, t: &Transform) -> Result<SpectralField> {
    if !t.is_dealiased() {
        return Err(Error::Resolution {
            trunc: t.trunc(),
            nlat: t.grid().nlat(),
            nlon: t.grid().nlon(),
        });
    }
    VorticityModel::with_transform(t.clone(), omega).step_rk4(zeta, dt)
}

fn check_initial(zeta0: &SpectralField, cfg: &SimConfig) -> Result<SpectralField> {
    cfg.validate()?;
    if zeta0.trunc() > cfg.trunc {
        return Err(Error::InvalidArgument(format!(
            "initial field has truncation {} above J={}",
            zeta0.trunc(),
            cfg.trunc
        )));
    }
    let mean = zeta0.raw()[0].norm();
    if mean > MEAN_TOLERANCE * (1.0 + zeta0.l2_norm()) {
        return Err(Error::NonZeroMean(mean));
    }
    let mut z = zeta0.with_trunc(cfg.trunc);
    z.remove_mean();
    Ok(z)
}

/// Integrates from `zeta0`, handing each diagnostic record to `observe`.
///
/// Records are produced at step 0, every `diag_every` steps and at the final
/// step. On blow-up the error carries every record emitted so far.
pub fn simulate_with<F>(zeta0: &SpectralField, cfg: &SimConfig, mut observe: F) -> Result<()>
where
    F: FnMut(&TrajectoryRecord) -> Result<()>,
{
    let mut kept = Vec::new();
    let res = run(zeta0, cfg, |rec| {
        kept.push(rec.clone());
        observe(rec)
    });
    match res {
        Err(Error::BlowUp { time, .. }) => Err(Error::BlowUp {
            time,
            records: kept,
        }),
        other => other,
    }
}

fn run<F>(zeta0: &SpectralField, cfg: &SimConfig, mut observe: F) -> Result<()>
where
    F: FnMut(&TrajectoryRecord) -> Result<()>,
{
    let mut zeta = check_initial(zeta0, cfg)?;
    let model = VorticityModel::new(cfg.trunc, cfg.omega, cfg.dealias)?.with_damping(cfg.damping);
    let engine = DiagnosticsEngine::new(cfg.trunc, &cfg.p_list, cfg.casimir_order)?;
    let n = cfg.n_steps();
    let record = |step: usize, zeta: &SpectralField| -> Result<TrajectoryRecord> {
        Ok(TrajectoryRecord {
            t: step as f64 * cfg.dt,
            zeta: zeta.clone(),
            diag: engine.compute(zeta)?,
        })
    };
    observe(&record(0, &zeta)?)?;
    for step in 1..=n {
        zeta = model.step_rk4(&zeta, cfg.dt).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp {
                time: step as f64 * cfg.dt,
                records: Vec::new(),
            },
            other => other,
        })?;
        if step % cfg.diag_every == 0 || step == n {
            observe(&record(step, &zeta)?)?;
        }
    }
    Ok(())
}

/// Integrates from `zeta0` and returns every diagnostic record.
pub fn simulate(zeta0: &SpectralField, cfg: &SimConfig) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    simulate_with(zeta0, cfg, |rec| {
        out.push(rec.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Runs the non-rotating and rotating problems from the same initial data and
/// returns `max_t ‖ζ_Ω(t) − ζ₀(t)∘R^{e₃}_{Ωt}‖_{L²}` over the record times.
pub fn verify_rotation_relation(zeta0: &SpectralField, omega: f64, cfg: &SimConfig) -> Result<f64> {
    let mut still = cfg.clone();
    still.omega = 0.0;
    let mut rotating = cfg.clone();
    rotating.omega = omega;
    let a = simulate(zeta0, &still)?;
    let b = simulate(zeta0, &rotating)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(r0, r1)| {
            debug_assert_eq!(r0.t, r1.t);
            (&r1.zeta - &rotate_polar(&r0.zeta, omega * r0.t)).l2_norm()
        })
        .fold(0.0, f64::max))
}

/// CSV header for a diagnostics time series.
pub fn diagnostics_header(p_list: &[f64], casimir_order: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "E", "mx", "my", "mz", "enstrophy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(p_list.iter().map(|p| format!("l{p}")));
    h.extend((3..=casimir_order).map(|k| format!("casimir{k}")));
    h
}

pub fn diagnostics_row(t: f64, d: &Diagnostics) -> Vec<String> {
    let mut row = vec![
        t.to_string(),
        d.energy.to_string(),
        d.moment.x.to_string(),
        d.moment.y.to_string(),
        d.moment.z.to_string(),
        d.enstrophy.to_string(),
    ];
    row.extend(d.lp_norms.iter().map(|(_, v)| v.to_string()));
    row.extend(d.casimir_moments.iter().map(|(_, v)| v.to_string()));
    row
}

/// Writes records as `t,E,mx,my,mz,enstrophy,l<p>...,casimir<k>...`.
pub fn write_diagnostics_csv<W: Write>(
    records: &[TrajectoryRecord],
    p_list: &[f64],
    casimir_order: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(diagnostics_header(p_list, casimir_order))
        .map_err(csv_err)?;
    for r in records {
        w.write_record(diagnostics_row(r.t, &r.diag)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
