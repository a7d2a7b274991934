use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::SimConfig;
use crate::elliptic::{solve_fixed_point, FixedPointOptions, NonlinearitySpec};
use crate::error::{Error, Result};
use crate::rearrange::DEFAULT_KAPPA;
use crate::spharm::{SpectralField, Transform};
use crate::waves::{RhPreset, RhWave};

fn default_relax() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    5000
}

fn default_p() -> f64 {
    2.0
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_distance_every() -> usize {
    10
}

fn default_noise_degree() -> usize {
    8
}

fn default_chi_degree() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    /// Preset (`linear:c`, `cubic:a,b`, `tanh:a,b`, `square`, with optional
    /// `@m1,m2`) or path of a two-column table.
    pub g: String,
    pub beta: f64,
    pub axis: [f64; 3],
    #[serde(default = "default_relax")]
    pub relax: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Initial iterate, see [`field_from_spec`]; defaults to `random:0`.
    #[serde(default)]
    pub init: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseState {
    RhWave(RhPreset),
    SteadySolve(SteadySpec),
    /// `ζ = q·x`.
    Linear { q: [f64; 3] },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// `ζ + δη`, `η` Gaussian on degrees `1..=j_max` with `‖η‖_{L^p} = 1`.
    SpectralNoise {
        delta: f64,
        #[serde(default = "default_noise_degree")]
        j_max: usize,
        seed: u64,
        #[serde(default = "default_p")]
        p: f64,
    },
    /// Transport along a random stream function of unit-`L²` velocity on
    /// degrees `2..=chi_degree`, or one read from `chi_path`.
    Flow {
        eps: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_chi_degree")]
        chi_degree: usize,
        #[serde(default)]
        chi_path: Option<PathBuf>,
    },
}

impl Perturbation {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Perturbation::None => None,
            Perturbation::SpectralNoise { seed, .. } | Perturbation::Flow { seed, .. } => Some(*seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistanceTask {
    OrbitSo3 {
        #[serde(default = "default_p")]
        p: f64,
    },
    OrbitH {
        #[serde(default = "default_p")]
        p: f64,
    },
    E2Orbit {
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    PlainLp {
        #[serde(default = "default_p")]
        p: f64,
    },
}

impl DistanceTask {
    pub fn p(&self) -> f64 {
        match *self {
            DistanceTask::OrbitSo3 { p }
            | DistanceTask::OrbitH { p }
            | DistanceTask::E2Orbit { p, .. }
            | DistanceTask::PlainLp { p } => p,
        }
    }

    pub fn column(&self) -> String {
        let p = self.p();
        match self {
            DistanceTask::OrbitSo3 { .. } => format!("orbit_so3_l{p}"),
            DistanceTask::OrbitH { .. } => format!("orbit_h_l{p}"),
            DistanceTask::E2Orbit { .. } => format!("e2_orbit_l{p}"),
            DistanceTask::PlainLp { .. } => format!("plain_l{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_state: BaseState,
    pub perturbation: Perturbation,
    pub sim: SimConfig,
    pub distance_tasks: Vec<DistanceTask>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Distances are evaluated every this many diagnostic records.
    #[serde(default = "default_distance_every")]
    pub distance_every: usize,
    /// Coefficient snapshots every this many diagnostic records.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Replaces the perturbation seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self.perturbation {
            Perturbation::SpectralNoise { seed: s, .. } | Perturbation::Flow { seed: s, .. } => {
                *s = seed
            }
            Perturbation::None => {}
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.distance_every == 0 {
            return Err(Error::Config("distance_every must be at least 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        match self.perturbation {
            Perturbation::SpectralNoise { delta, p, j_max, .. } => {
                if !(delta >= 0.0 && delta.is_finite()) {
                    return Err(Error::Config(format!("noise amplitude {delta} must be non-negative")));
                }
                if !(p >= 1.0) {
                    return Err(Error::Config(format!("noise exponent {p} below 1")));
                }
                if j_max == 0 {
                    return Err(Error::Config("noise j_max must be at least 1".into()));
                }
            }
            Perturbation::Flow { eps, chi_degree, .. } => {
                if !eps.is_finite() {
                    return Err(Error::Config("flow time must be finite".into()));
                }
                if chi_degree < 2 {
                    return Err(Error::Config("chi_degree must be at least 2".into()));
                }
            }
            Perturbation::None => {}
        }
        for task in &self.distance_tasks {
            if !(task.p() > 1.0) {
                return Err(Error::Config(format!(
                    "distance exponent {} must exceed 1",
                    task.p()
                )));
            }
        }
        Ok(())
    }
}

/// A base state together with its exact evolution when one is known.
#[derive(Debug, Clone)]
pub struct Base {
    pub zeta: SpectralField,
    pub wave: Option<RhWave>,
}

/// Field presets: `rh-j<j>` (unit α), `linear:x,y,z`, `random:<seed>`
/// (degrees 1–4, amplitude 0.1), `zero`; anything else is read as a
/// coefficient dump.
pub fn field_from_spec(spec: &str, trunc: usize) -> Result<SpectralField> {
    if spec.starts_with("rh-j") {
        let w = spec.parse::<RhPreset>()?.build(trunc)?;
        return Ok(w.initial(trunc));
    }
    if let Some(rest) = spec.strip_prefix("linear:") {
        let v = parse_vector(rest)?;
        return Ok(SpectralField::linear(trunc, v));
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let seed: u64 = rest
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad seed in `{spec}`")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(&SpectralField::random(trunc, 1, 4.min(trunc), &mut rng) * 0.1);
    }
    if spec == "zero" {
        return Ok(SpectralField::zeros(trunc));
    }
    let f = SpectralField::load(spec)?;
    if f.trunc() > trunc {
        return Err(Error::InvalidArgument(format!(
            "{spec} has truncation {} above J={trunc}",
            f.trunc()
        )));
    }
    Ok(f.with_trunc(trunc))
}

pub fn parse_vector(s: &str) -> Result<Vector3<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("bad vector `{s}`")))?;
    match v.as_slice() {
        [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(Error::InvalidArgument(format!("vector `{s}` needs 3 components"))),
    }
}

/// Preset name or table path.
pub fn nonlinearity_from_spec(spec: &str) -> Result<NonlinearitySpec> {
    match spec.parse::<NonlinearitySpec>() {
        Ok(g) => Ok(g),
        Err(e) => {
            if Path::new(spec).exists() {
                NonlinearitySpec::load_table(spec)
            } else {
                Err(e)
            }
        }
    }
}

impl SteadySpec {
    pub fn solve(&self, trunc: usize) -> Result<crate::elliptic::SteadyState> {
        let g = nonlinearity_from_spec(&self.g)?;
        let init = field_from_spec(self.init.as_deref().unwrap_or("random:0"), trunc)?;
        let t = Transform::dealiased(trunc)?;
        let opts = FixedPointOptions {
            relax: self.relax,
            tol: self.tol,
            max_iter: self.max_iter,
        };
        let [x, y, z] = self.axis;
        solve_fixed_point(&g, self.beta, Vector3::new(x, y, z), &init, &opts, &t)
    }
}

impl BaseState {
    pub fn build(&self, trunc: usize, omega: f64) -> Result<Base> {
        match self {
            BaseState::RhWave(preset) => {
                if preset.omega != 0.0 && preset.omega != omega {
                    return Err(Error::Config(format!(
                        "wave frame rate {} differs from sim Omega {omega}",
                        preset.omega
                    )));
                }
                let mut preset = preset.clone();
                preset.omega = omega;
                let w = preset.build(trunc)?;
                Ok(Base {
                    zeta: w.initial(trunc),
                    wave: Some(w),
                })
            }
            BaseState::SteadySolve(spec) => {
                let s = spec.solve(trunc)?;
                if !s.converged {
                    return Err(Error::NotConverged {
                        iterations: s.iterations,
                        residual: s.residual,
                    });
                }
                Ok(Base {
                    zeta: s.zeta,
                    wave: None,
                })
            }
            BaseState::Linear { q } => Ok(Base {
                zeta: SpectralField::linear(trunc, Vector3::new(q[0], q[1], q[2])),
                wave: None,
            }),
            BaseState::File { path } => Ok(Base {
                zeta: field_from_spec(&path.to_string_lossy(), trunc)?,
                wave: None,
            }),
        }
    }
}
