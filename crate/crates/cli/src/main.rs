use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use candyman::eval::{
    bursting_summary, classify_bursting_behavior, estimate_period, mse_sweep, periodicity_summary,
    phase_speed_error, smoothness_summary, sweep_summary, transition_smoothness, travelling_period,
    write_bursting_csv, write_chart_mse_csv, write_smoothness_csv, write_sweep_csv, ArchPolicy, BurstingOptions,
    Periodicity,
};
use candyman::dynamics::Trajectory;
use candyman::experiment::{
    generate_data, prepare_output_dir, read_dataset_dir, write_dataset_dir, DataBundle, ExperimentConfig, Model,
    SystemId,
};
use candyman::systems::shape_phase_series;
use candyman::{Error, ErrorKind, Matrix, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser)]
#[command(name = "candyman", version, about = "Atlas-of-charts models of dynamics on manifolds")]
struct Cli {
    /// Worker threads for chart training, simulations and sweep cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory from a config.
    Generate {
        /// Preset name (s1..s6) or path to a TOML config.
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Build an atlas and train chart dynamics.
    Train {
        /// Defaults to the config stored with the dataset.
        #[arg(long)]
        config: Option<String>,
        /// Dataset directory; generated in memory when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of charts.
        #[arg(long)]
        charts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Roll a trained model forward and write the trajectory as CSV.
    Rollout {
        #[arg(long)]
        model: PathBuf,
        /// Training point to start from (config default when absent).
        #[arg(long)]
        start: Option<usize>,
        /// Number of steps (config default when absent).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run diagnostics on a trained model and write CSV reports plus summary.txt.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        diagnostics: Vec<Diagnostic>,
        /// Trajectory CSV from `rollout`; the config's rollout is run when absent.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Dataset directory, for diagnostics that need the full data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Chart counts of the sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
        sweep_charts: Vec<usize>,
        /// Latent dimensions of the sweep (model's own when absent).
        #[arg(long, value_delimiter = ',')]
        sweep_dims: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Widen charts of smaller atlases to this many charts' parameters.
        #[arg(long)]
        match_params: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Diagnostic {
    Mse,
    Period,
    PhaseSpeed,
    Smoothness,
    Bursting,
    Sweep,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Training => 4,
        ErrorKind::Rollout => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            config,
            seed,
            out,
            force,
        } => {
            let cfg = ExperimentConfig::resolve(&config)?.with_overrides(seed, None)?;
            let bundle = generate_data(&cfg)?;
            write_dataset_dir(&out, &cfg, &bundle, force)?;
            info!("wrote {} samples to {}", bundle.data.len(), out.display());
            Ok(())
        }
        Command::Train {
            config,
            data,
            seed,
            charts,
            out,
            force,
        } => {
            if out.exists() && !force {
                return Err(exists(&out));
            }
            let (cfg, bundle) = match (config, data) {
                (None, None) => return Err(Error::Config("train needs --config or --data".into())),
                (cfg, Some(dir)) => {
                    let (manifest, bundle) = read_dataset_dir(&dir)?;
                    let cfg = match cfg {
                        Some(c) => ExperimentConfig::resolve(&c)?,
                        None => manifest.config,
                    };
                    (cfg.with_overrides(seed, charts)?, bundle)
                }
                (Some(c), None) => {
                    let cfg = ExperimentConfig::resolve(&c)?.with_overrides(seed, charts)?;
                    let bundle = generate_data(&cfg)?;
                    (cfg, bundle)
                }
            };
            let model = candyman::experiment::train_model(&cfg, &bundle)?;
            model.save(&out, force)?;
            info!("model with {} charts written to {}", model.atlas.charts.len(), out.display());
            Ok(())
        }
        Command::Rollout {
            model,
            start,
            steps,
            out,
            force,
        } => {
            if out.exists() && !force {
                return Err(exists(&out));
            }
            let m = Model::load(&model)?;
            let r = &m.config().rollout;
            let traj = m.rollout_from_row(start.unwrap_or(r.start), steps.unwrap_or(r.steps))?;
            traj.write_csv(fs::File::create(&out)?)?;
            info!("{} records, {} chart transitions", traj.len(), traj.transitions.len());
            Ok(())
        }
        Command::Eval {
            model,
            diagnostics,
            trajectory,
            data,
            sweep_charts,
            sweep_dims,
            trials,
            match_params,
            out,
            force,
        } => {
            let m = Model::load(&model)?;
            let bundle = match data {
                Some(d) => Some(read_dataset_dir(&d)?.1),
                None => None,
            };
            let traj = match trajectory {
                Some(p) => Some(Trajectory::read_csv(fs::File::open(&p)?)?),
                None => None,
            };
            prepare_output_dir(&out, force)?;
            let sweep = SweepArgs {
                charts: sweep_charts,
                dims: sweep_dims,
                trials,
                match_params,
            };
            let summary = evaluate(&m, bundle.as_ref(), traj, &diagnostics, &sweep, &out)?;
            fs::write(out.join("summary.txt"), &summary)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn exists(p: &Path) -> Error {
    Error::InvalidArgument(format!("{} already exists (use --force to overwrite)", p.display()))
}

struct SweepArgs {
    charts: Vec<usize>,
    dims: Vec<usize>,
    trials: usize,
    match_params: Option<usize>,
}

fn evaluate(
    model: &Model,
    bundle: Option<&DataBundle>,
    traj: Option<Trajectory>,
    diagnostics: &[Diagnostic],
    sweep: &SweepArgs,
    out: &Path,
) -> Result<String> {
    let mut summary = String::new();
    let needs_traj = diagnostics
        .iter()
        .any(|d| matches!(d, Diagnostic::Period | Diagnostic::PhaseSpeed | Diagnostic::Smoothness | Diagnostic::Bursting));
    let traj = match traj {
        Some(t) => Some(t),
        None if needs_traj => Some(model.default_rollout()?),
        None => None,
    };
    let dt = model.dt();
    for d in diagnostics {
        match d {
            Diagnostic::Mse => {
                write_chart_mse_csv(&model.atlas, fs::File::create(out.join("mse.csv"))?)?;
                summary += &format!("reconstruction mse {:.6e}\n", model.atlas.reconstruction_mse()?);
            }
            Diagnostic::Period => {
                let t = traj.as_ref().expect("trajectory");
                let states = t.states()?;
                let mut rows = vec![];
                match t.phases() {
                    Some(ph) => {
                        let (shapes, _) = shape_phase_series(&states)?;
                        let beat = estimate_period(&shapes, dt)?;
                        let travel = travelling_period(&ph, dt)?;
                        summary += &periodicity_summary("beating", &beat);
                        summary += &format!("travelling period {travel:.4}\n");
                        rows.push(period_row("beating", &beat));
                        rows.push(format!("travelling,periodic,{travel:.16e},"));
                    }
                    None => {
                        let p = estimate_period(&states, dt)?;
                        summary += &periodicity_summary("state", &p);
                        rows.push(period_row("state", &p));
                    }
                }
                fs::write(out.join("period.csv"), format!("series,verdict,period,uncertainty\n{}\n", rows.join("\n")))?;
            }
            Diagnostic::PhaseSpeed => {
                let sys = model.config().system;
                if !matches!(sys, SystemId::TorusPeriodic | SystemId::TorusQuasiperiodic) {
                    return Err(Error::Config("phase-speed applies to the torus systems".into()));
                }
                let t = traj.as_ref().expect("trajectory");
                let reference = match bundle {
                    Some(b) => b.data.points().clone(),
                    None => model.atlas.points().clone(),
                };
                let e = phase_speed_error(&t.states()?, &reference)?;
                fs::write(
                    out.join("phase_speed.csv"),
                    format!(
                        "poloidal,toroidal,max_surface_distance\n{:.16e},{:.16e},{:.16e}\n",
                        e.poloidal, e.toroidal, e.max_surface_distance
                    ),
                )?;
                summary += &format!(
                    "phase speed error: poloidal {:+.3}%, toroidal {:+.3}%\n",
                    100.0 * e.poloidal,
                    100.0 * e.toroidal
                );
            }
            Diagnostic::Smoothness => {
                let r = transition_smoothness(traj.as_ref().expect("trajectory"));
                write_smoothness_csv(&r, fs::File::create(out.join("smoothness.csv"))?)?;
                summary += &smoothness_summary(&r);
            }
            Diagnostic::Bursting => {
                let t = traj.as_ref().expect("trajectory");
                let a = classify_bursting_behavior(&t.states()?, dt, &BurstingOptions::default())?;
                write_bursting_csv(&a, dt, fs::File::create(out.join("bursting.csv"))?)?;
                summary += &bursting_summary(&a);
            }
            Diagnostic::Sweep => {
                let base = model.config().atlas_config()?;
                let dims = if sweep.dims.is_empty() {
                    vec![base.latent_dim]
                } else {
                    sweep.dims.clone()
                };
                let policy = match sweep.match_params {
                    Some(k) => ArchPolicy::ParameterMatched { reference_charts: k },
                    None => ArchPolicy::SameAsCharts,
                };
                let points: &Matrix = match bundle {
                    Some(b) => b.data.points(),
                    None => model.atlas.points(),
                };
                let r = mse_sweep(points, &base, &sweep.charts, &dims, sweep.trials, policy)?;
                write_sweep_csv(&r, fs::File::create(out.join("sweep.csv"))?)?;
                summary += &sweep_summary(&r);
            }
        }
    }
    Ok(summary)
}

fn period_row(name: &str, p: &Periodicity) -> String {
    match p {
        Periodicity::Periodic(e) => format!("{name},periodic,{:.16e},{:.16e}", e.period, e.uncertainty),
        other => format!("{name},{},,", other.label()),
    }
}
