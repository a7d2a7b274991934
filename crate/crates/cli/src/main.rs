use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use sphvort::dynamics::{simulate, write_diagnostics_csv, SimConfig};
use sphvort::elliptic::{best_axis, zonality_defect};
use sphvort::harness::{
    field_from_spec, manifest_path, parse_vector, run_stability_experiment, ExperimentConfig,
    SteadySpec,
};
use sphvort::rearrange::{
    e2_orbit_distance, extremality_probe, orbit_distance, smooth_class_distance, Group, ProbeMode,
    ProbeOptions, DEFAULT_KAPPA,
};
use sphvort::waves::{make_rh_wave, measure_phase_rate, unit_tesseral};
use sphvort::{Result, Transform};

#[derive(Parser)]
#[command(name = "sphvort", version, about = "Vorticity dynamics and stability on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SimArgs {
    /// Spectral truncation.
    #[arg(short = 'J', long = "trunc", default_value_t = 21)]
    trunc: usize,
    /// Frame rotation rate.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 10)]
    diag_every: usize,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig::new(self.trunc, self.omega, self.dt, self.t_end).with_diag_every(self.diag_every)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate from an initial field and write diagnostics as CSV.
    Simulate {
        /// Initial field: `rh-j<j>`, `linear:x,y,z`, `random:<seed>` or a dump file.
        #[arg(long, default_value = "rh-j2")]
        init: String,
        #[command(flatten)]
        sim: SimArgs,
        /// JSON simulation config; replaces the flag values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Diagnostics CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Coefficient dump of the final state.
        #[arg(long = "final")]
        final_state: Option<PathBuf>,
    },
    /// Run a Rossby-Haurwitz wave and compare its phase speed with the exact one.
    RhWave {
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        alpha: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Solve the steady semilinear equation by relaxed fixed-point iteration.
    SolveSteady {
        #[arg(long)]
        g: String,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value = "0,0,1", allow_hyphen_values = true)]
        axis: String,
        #[arg(long, default_value_t = 0.5)]
        relax: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long)]
        init: Option<String>,
        #[arg(short = 'J', long = "trunc", default_value_t = 21)]
        trunc: usize,
        /// Coefficient dump of the solution.
        #[arg(long, default_value = "steady_state.txt")]
        out: PathBuf,
    },
    /// Orbit or class distance between two fields.
    Distance {
        #[arg(long)]
        w: String,
        #[arg(long)]
        zeta: String,
        #[arg(long, value_enum, default_value_t = Target::H)]
        group: Target,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(short = 'J', long = "trunc", default_value_t = 21)]
        trunc: usize,
    },
    /// Sample area-preserving perturbations and check the energy extremum.
    Probe {
        #[arg(long)]
        zeta: String,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        chi_degree: usize,
        #[arg(long, default_value_t = 1e-8)]
        rel_tol: f64,
        #[arg(short = 'J', long = "trunc", default_value_t = 21)]
        trunc: usize,
    },
    /// Perturb, evolve and record distances as configured in a JSON file.
    Stability {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the perturbation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    So3,
    H,
    E2,
    Class,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Min,
    Max,
}

fn csv_line(fields: &[String]) {
    println!("{}", fields.join(","));
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate {
            init,
            sim,
            config,
            out,
            final_state,
        } => {
            let cfg = match config {
                Some(path) => {
                    let cfg: SimConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                    cfg.validate()?;
                    cfg
                }
                None => sim.config(),
            };
            let z0 = field_from_spec(&init, cfg.trunc)?;
            let records = simulate(&z0, &cfg)?;
            match out {
                Some(path) => write_diagnostics_csv(
                    &records,
                    &cfg.p_list,
                    cfg.casimir_order,
                    BufWriter::new(File::create(path)?),
                )?,
                None => write_diagnostics_csv(&records, &cfg.p_list, cfg.casimir_order, io::stdout().lock())?,
            }
            if let (Some(path), Some(last)) = (final_state, records.last()) {
                last.zeta.save(path)?;
            }
        }
        Command::RhWave { degree, alpha, sim } => {
            let cfg = sim.config();
            let y = unit_tesseral(cfg.trunc, degree);
            let wave = make_rh_wave(degree, &y, alpha, cfg.omega)?;
            let t = Transform::dealiased(cfg.trunc)?;
            let records = simulate(&wave.initial(cfg.trunc), &cfg)?;
            let measured = measure_phase_rate(&records, degree, 1)?;
            let max_error = records
                .iter()
                .map(|r| (&r.zeta - &wave.exact(r.t, cfg.trunc)).l2_norm())
                .fold(0.0, f64::max);
            csv_line(&[
                "degree,alpha,beta,omega,predicted_rate,measured_rate,residual,max_error".into(),
            ]);
            csv_line(&[
                degree.to_string(),
                alpha.to_string(),
                wave.beta().to_string(),
                cfg.omega.to_string(),
                (wave.phase(1.0) - wave.phase(0.0)).to_string(),
                measured.to_string(),
                wave.residual(&t)?.to_string(),
                max_error.to_string(),
            ]);
        }
        Command::SolveSteady {
            g,
            beta,
            axis,
            relax,
            tol,
            max_iter,
            init,
            trunc,
            out,
        } => {
            let v = parse_vector(&axis)?;
            let spec = SteadySpec {
                g,
                beta,
                axis: [v.x, v.y, v.z],
                relax,
                tol,
                max_iter,
                init,
            };
            let s = spec.solve(trunc)?;
            let t = Transform::dealiased(trunc)?;
            let choice = best_axis(&s.zeta, &t)?;
            let defect = zonality_defect(&s.zeta, &v.normalize(), &t)?;
            csv_line(&["residual,iterations,converged,zonality_defect,best_axis_x,best_axis_y,best_axis_z,best_axis_defect,axis_fallback".into()]);
            csv_line(&[
                s.residual.to_string(),
                s.iterations.to_string(),
                s.converged.to_string(),
                defect.to_string(),
                choice.axis.x.to_string(),
                choice.axis.y.to_string(),
                choice.axis.z.to_string(),
                choice.defect.to_string(),
                choice.fallback.to_string(),
            ]);
            s.zeta.save(&out)?;
            if !s.converged {
                eprintln!("sphvort: fixed-point iteration did not converge");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Distance {
            w,
            zeta,
            group,
            p,
            kappa,
            trunc,
        } => {
            let t = Transform::dealiased(trunc)?;
            let (w, z) = (field_from_spec(&w, trunc)?, field_from_spec(&zeta, trunc)?);
            csv_line(&["group,p,distance,class_violation,axis_x,axis_y,axis_z,angle".into()]);
            let (name, report) = match group {
                Target::Class => {
                    let d = smooth_class_distance(&w, &z, p, &t)?;
                    csv_line(&[
                        "class".into(),
                        p.to_string(),
                        d.to_string(),
                        "0".into(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                    return Ok(ExitCode::SUCCESS);
                }
                Target::H => ("h", orbit_distance(&w, &z, Group::H, p, &t)?),
                Target::So3 => ("so3", orbit_distance(&w, &z, Group::So3, p, &t)?),
                Target::E2 => ("e2", e2_orbit_distance(&w, &z, p, kappa, &t)?),
            };
            let axis: Vector3<f64> = report.rotation.axis();
            csv_line(&[
                name.into(),
                p.to_string(),
                report.distance.to_string(),
                report.class_violation.to_string(),
                axis.x.to_string(),
                axis.y.to_string(),
                axis.z.to_string(),
                report.rotation.angle().to_string(),
            ]);
        }
        Command::Probe {
            zeta,
            mode,
            samples,
            eps,
            seed,
            chi_degree,
            rel_tol,
            trunc,
        } => {
            let t = Transform::dealiased(trunc)?;
            let z = field_from_spec(&zeta, trunc)?;
            let mode = match mode {
                Mode::Min => ProbeMode::Min,
                Mode::Max => ProbeMode::Max,
            };
            let opts = ProbeOptions {
                seed,
                chi_degree,
                rel_tol,
            };
            let r = extremality_probe(&z, mode, samples, eps, &opts, &t)?;
            csv_line(&["mode,eps,samples,skipped,violations,min_signed_change,worst_moment_violation,worst_class_distance,neutral_change,passed".into()]);
            csv_line(&[
                format!("{:?}", r.mode).to_lowercase(),
                r.eps.to_string(),
                r.samples.len().to_string(),
                r.skipped.to_string(),
                r.violations.to_string(),
                r.min_signed_change.to_string(),
                r.worst_moment_violation.to_string(),
                r.worst_class_distance.to_string(),
                r.neutral_change.to_string(),
                r.passed.to_string(),
            ]);
        }
        Command::Stability {
            config,
            seed,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg = cfg.with_seed(seed);
            }
            if output.is_some() {
                cfg.output_path = output;
            }
            let series = run_stability_experiment(&cfg)?;
            match &cfg.output_path {
                Some(path) => println!(
                    "wrote {} rows to {} (manifest {})",
                    series.rows.len(),
                    path.display(),
                    manifest_path(path).display()
                ),
                None => series.write_csv(io::stdout().lock())?,
            }
            if let Some(time) = series.blow_up {
                eprintln!("sphvort: blow-up at t={time}; series is partial");
                return Ok(ExitCode::from(2));
            }
        }
    }
    io::stdout().flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sphvort: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

