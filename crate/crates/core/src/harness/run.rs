use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::{csv_err, simulate_with, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::rearrange::{
    e2_orbit_distance, flow_perturbation, lp_distance, orbit_distance,
    random_stream, Group,
};
use crate::spharm::{rotate_polar, Diagnostics, Rotation, SpectralField, Transform};


use super::config::{Base, DistanceTask, ExperimentConfig, Perturbation};

/// Perturbed initial state and the size of the perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub zeta: SpectralField,
    /// `‖ζ' − ζ‖_{L^p}` (`p = 2` for flows).
    pub size: f64,
    /// `L²` class distance to `ζ` for flow perturbations.
    pub class_distance: Option<f64>,
}

fn areas(t: &Transform) -> Vec<f64> {
    let grid = t.grid();
    let nlon = grid.nlon();
    (0..grid.len()).map(|k| grid.cell_area(k / nlon)).collect()
}

fn grid_distance(a: &SpectralField, b: &SpectralField, p: f64, t: &Transform) -> Result<f64> {
    let trunc = t.trunc();
    let u = t.synthesize(&a.with_trunc(trunc))?;
    let v = t.synthesize(&b.with_trunc(trunc))?;
    Ok(lp_distance(u.values(), v.values(), &areas(t), p))
}

/// Applies `kind` to `zeta` on the grid of `t`.
pub fn perturb(zeta: &SpectralField, kind: &Perturbation, t: &Transform) -> Result<Perturbed> {
    let trunc = t.trunc();
    let z = zeta.with_trunc(trunc);
    match *kind {
        Perturbation::None => Ok(Perturbed {
            zeta: z,
            size: 0.0,
            class_distance: None,
        }),
        Perturbation::SpectralNoise {
            delta,
            j_max,
            seed,
            p,
        } => {
            if delta == 0.0 {
                return Ok(Perturbed {
                    zeta: z,
                    size: 0.0,
                    class_distance: None,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eta = SpectralField::random(trunc, 1, j_max.min(trunc), &mut rng);
            let n = t.synthesize(&eta)?.lp_norm(p);
            if !(n > 0.0) {
                return Err(Error::ZeroField);
            }
            let out = &z + &(&eta * (delta / n));
            let size = grid_distance(&out, &z, p, t)?;
            Ok(Perturbed {
                zeta: out,
                size,
                class_distance: None,
            })
        }
        Perturbation::Flow {
            eps,
            seed,
            chi_degree,
            ref chi_path,
        } => {
            let chi = match chi_path {
                Some(path) => SpectralField::load(path)?,
                None => random_stream(trunc, chi_degree, seed),
            };
            let f = flow_perturbation(&z, &chi, eps, t)?;
            let size = grid_distance(&f.zeta, &z, 2.0, t)?;
            Ok(Perturbed {
                zeta: f.zeta,
                size,
                class_distance: Some(f.class_distance),
            })
        }
    }
}

/// Distances and drifts per diagnostic record. Distance cells are `None` on
/// records skipped by the distance cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTimeSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Time of blow-up; rows stop at the last finite record.
    pub blow_up: Option<f64>,
    pub perturbation_size: f64,
    pub snapshots: Vec<(f64, SpectralField)>,
}

impl StabilityTimeSeries {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Largest evaluated entry of a column.
    pub fn max(&self, name: &str) -> Option<f64> {
        self.column(name)?
            .into_iter()
            .flatten()
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub blow_up: Option<f64>,
    pub perturbation_size: f64,
    pub snapshots: Vec<PathBuf>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_string(cfg)?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn columns(tasks: &[DistanceTask]) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for task in tasks {
        cols.push(task.column());
        if let DistanceTask::E2Orbit { p, .. } = task {
            cols.push(format!("e2_class_violation_l{p}"));
        }
    }
    cols.extend(["energy_drift", "moment_drift", "enstrophy_drift"].map(String::from));
    cols
}

struct Evaluator<'a> {
    base: &'a Base,
    omega: f64,
    tasks: &'a [DistanceTask],
    t: &'a Transform,
    d0: Diagnostics,
}

impl Evaluator<'_> {
    /// Where the unperturbed base sits at time `s`.
    fn reference(&self, s: f64) -> SpectralField {
        match &self.base.wave {
            Some(w) => w.exact(s, self.t.trunc()),
            None => rotate_polar(&self.base.zeta, self.omega * s),
        }
    }

    fn distances(&self, rec: &TrajectoryRecord) -> Result<Vec<Option<f64>>> {
        let mut out = Vec::new();
        for task in self.tasks {
            match *task {
                DistanceTask::PlainLp { p } => {
                    out.push(Some(grid_distance(&rec.zeta, &self.reference(rec.t), p, self.t)?));
                }
                DistanceTask::OrbitH { p } => {
                    let r = orbit_distance(&rec.zeta, &self.base.zeta, Group::H, p, self.t)?;
                    out.push(Some(r.distance));
                }
                DistanceTask::OrbitSo3 { p } => {
                    let r = orbit_distance(&rec.zeta, &self.base.zeta, Group::So3, p, self.t)?;
                    out.push(Some(r.distance));
                }
                DistanceTask::E2Orbit { p, kappa } => {
                    let r = e2_orbit_distance(&rec.zeta, &self.base.zeta, p, kappa, self.t)?;
                    out.push(Some(r.distance));
                    out.push(Some(r.class_violation));
                }
            }
        }
        Ok(out)
    }

    fn blanks(&self) -> Vec<Option<f64>> {
        let n: usize = self
            .tasks
            .iter()
            .map(|t| if matches!(t, DistanceTask::E2Orbit { .. }) { 2 } else { 1 })
            .sum();
        vec![None; n]
    }

    /// Drifts relative to the initial record; the moment is first carried
    /// back from the rotating frame.
    fn drifts(&self, time: f64, d: &Diagnostics) -> [f64; 3] {
        let rel = |a: f64, b: f64| {
            if b.abs() > 0.0 {
                (a - b).abs() / b.abs()
            } else {
                (a - b).abs()
            }
        };
        let m0 = self.d0.moment.norm();
        let m = Rotation::about_polar(self.omega * time).apply(&d.moment);
        let dm = (m - self.d0.moment).norm();
        [
            rel(d.energy, self.d0.energy),
            if m0 > 0.0 { dm / m0 } else { dm },
            rel(d.enstrophy, self.d0.enstrophy),
        ]
    }

    fn row(&self, rec: &TrajectoryRecord, with_distances: bool) -> Result<Vec<Option<f64>>> {
        let mut row = vec![Some(rec.t)];
        row.extend(if with_distances {
            self.distances(rec)?
        } else {
            self.blanks()
        });
        row.extend(self.drifts(rec.t, &rec.diag).map(Some));
        Ok(row)
    }
}

/// Perturbs the configured base state, integrates, and records distances to
/// the base (or its exact evolution) together with invariant drifts. Writes
/// the CSV, a manifest and any snapshots when `output_path` is set.
///
/// A blow-up is not an error: the series stops at the last finite record and
/// `blow_up` holds its time.
pub fn run_stability_experiment(cfg: &ExperimentConfig) -> Result<StabilityTimeSeries> {
    cfg.validate()?;
    let sim = &cfg.sim;
    let t = Transform::dealiased(sim.trunc)?;
    let base = cfg.base_state.build(sim.trunc, sim.omega)?;
    let start = perturb(&base.zeta, &cfg.perturbation, &t)?;
    let mut ev: Option<Evaluator> = None;
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut last: Option<(TrajectoryRecord, bool)> = None;
    let mut index = 0usize;
    let res = simulate_with(&start.zeta, sim, |rec| {
        let e = ev.get_or_insert_with(|| Evaluator {
            base: &base,
            omega: sim.omega,
            tasks: &cfg.distance_tasks,
            t: &t,
            d0: rec.diag.clone(),
        });
        let due = index % cfg.distance_every == 0;
        rows.push(e.row(rec, due)?);
        if cfg.snapshot_every.is_some_and(|k| index % k == 0) {
            snapshots.push((rec.t, rec.zeta.clone()));
        }
        last = Some((rec.clone(), due));
        index += 1;
        Ok(())
    });
    let blow_up = match res {
        Ok(()) => None,
        Err(Error::BlowUp { time, .. }) => Some(time),
        Err(e) => return Err(e),
    };
    if let (Some(e), Some((rec, false))) = (&ev, &last) {
        let k = rows.len() - 1;
        rows[k] = e.row(rec, true)?;
    }
    let series = StabilityTimeSeries {
        columns: columns(&cfg.distance_tasks),
        rows,
        blow_up,
        perturbation_size: start.size,
        snapshots,
    };
    if let Some(path) = &cfg.output_path {
        write_outputs(cfg, &series, path)?;
    }
    Ok(series)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn manifest_path(output: &Path) -> PathBuf {
    sibling(output, ".manifest.json")
}

fn write_outputs(cfg: &ExperimentConfig, series: &StabilityTimeSeries, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    series.write_csv(BufWriter::new(File::create(path)?))?;
    let mut snaps = Vec::new();
    for (k, (_, z)) in series.snapshots.iter().enumerate() {
        let p = sibling(path, &format!("_snap_{k:04}.txt"));
        z.save(&p)?;
        snaps.push(p);
    }
    let manifest = Manifest {
        config_sha256: config_hash(cfg)?,
        seed: cfg.perturbation.seed(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        columns: series.columns.clone(),
        rows: series.rows.len(),
        blow_up: series.blow_up,
        perturbation_size: series.perturbation_size,
        snapshots: snaps,
    };
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Distance between two CSV-free series: largest difference over evaluated
/// cells of `name`.
pub fn max_column_gap(a: &StabilityTimeSeries, b: &StabilityTimeSeries, name: &str) -> Option<f64> {
    let (x, y) = (a.column(name)?, b.column(name)?);
    Some(
        x.iter()
            .zip(&y)
            .filter_map(|(u, v)| Some((u.as_ref()? - v.as_ref()?).abs()))
            .fold(0.0, f64::max),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SimConfig;
    use crate::harness::config::BaseState;
    use crate::waves::RhPreset;

    fn rh_config(delta: f64, omega: f64) -> ExperimentConfig {
        ExperimentConfig {
            base_state: BaseState::RhWave(RhPreset::new(2)),
            perturbation: Perturbation::SpectralNoise {
                delta,
                j_max: 6,
                seed: 11,
                p: 2.0,
            },
            sim: SimConfig::new(10, omega, 0.01, 0.4).with_diag_every(10),
            distance_tasks: vec![
                DistanceTask::PlainLp { p: 2.0 },
                DistanceTask::E2Orbit { p: 2.0, kappa: 10.0 },
            ],
            output_path: None,
            distance_every: 2,
            snapshot_every: None,
        }
    }

    #[test]
    fn noise_has_requested_size() {
        let t = Transform::dealiased(10).unwrap();
        let z = SpectralField::linear(10, nalgebra::Vector3::z());
        for p in [2.0, 4.0] {
            let kind = Perturbation::SpectralNoise {
                delta: 1e-3,
                j_max: 5,
                seed: 3,
                p,
            };
            let out = perturb(&z, &kind, &t).unwrap();
            assert!((out.size - 1e-3).abs() < 1e-10, "{}", out.size);
            assert!(out.zeta.is_mean_zero(1e-14));
        }
        let zero = Perturbation::SpectralNoise {
            delta: 0.0,
            j_max: 5,
            seed: 3,
            p: 2.0,
        };
        assert_eq!(perturb(&z, &zero, &t).unwrap().zeta, z);
    }

    #[test]
    fn unperturbed_wave_stays_on_its_orbit() {
        let s = run_stability_experiment(&rh_config(0.0, 0.0)).unwrap();
        assert!(s.max("plain_l2").unwrap() < 1e-6);
        assert!(s.max("e2_orbit_l2").unwrap() < 1e-6);
        assert!(s.max("energy_drift").unwrap() < 1e-10);
        // Distances on records 0, 2 and the last.
        assert_eq!(s.rows.len(), 5);
        assert_eq!(s.column("plain_l2").unwrap().iter().flatten().count(), 3);
    }

    #[test]
    fn deterministic_and_monotone_in_delta() {
        let a = run_stability_experiment(&rh_config(1e-2, 0.0)).unwrap();
        let b = run_stability_experiment(&rh_config(1e-2, 0.0)).unwrap();
        assert_eq!(a, b);
        let half = run_stability_experiment(&rh_config(5e-3, 0.0)).unwrap();
        for col in ["plain_l2", "e2_orbit_l2"] {
            assert!(half.max(col).unwrap() < a.max(col).unwrap(), "{col}");
        }
    }

    #[test]
    fn rotating_frame_matches_on_polar_orbits() {
        let mk = |omega| ExperimentConfig {
            base_state: BaseState::Linear { q: [0.0, 0.0, 1.0] },
            distance_tasks: vec![DistanceTask::OrbitH { p: 2.0 }],
            ..rh_config(1e-2, omega)
        };
        let a = run_stability_experiment(&mk(0.0)).unwrap();
        let b = run_stability_experiment(&mk(3.0)).unwrap();
        assert!(max_column_gap(&a, &b, "orbit_h_l2").unwrap() < 1e-6);
        assert!(b.max("moment_drift").unwrap() < 1e-10);
    }

    #[test]
    fn blow_up_keeps_partial_series_and_writes_outputs() {
        let dir = std::env::temp_dir().join(format!("sphvort-blowup-{}", std::process::id()));
        let out = dir.join("series.csv");
        let cfg = ExperimentConfig {
            perturbation: Perturbation::SpectralNoise {
                delta: 50.0,
                j_max: 10,
                seed: 1,
                p: 2.0,
            },
            sim: SimConfig::new(10, 0.0, 2.0, 2000.0).with_diag_every(1),
            distance_tasks: vec![DistanceTask::PlainLp { p: 2.0 }],
            output_path: Some(out.clone()),
            snapshot_every: Some(1000),
            ..rh_config(0.0, 0.0)
        };
        let s = run_stability_experiment(&cfg).unwrap();
        assert!(s.blow_up.is_some());
        assert!(!s.rows.is_empty() && s.rows.len() < 1001);
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), s.rows.len() + 1);
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
        assert_eq!(m["seed"], 1);
        assert!(m["blow_up"].is_number());
        fs::remove_dir_all(dir).ok();
    }
}
