use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soliton_lab::config::{ExperimentConfig, ExperimentKind};
use soliton_lab::experiment::{exit_code, run};
use soliton_lab::Error;

#[derive(Parser)]
#[command(
    name = "soliton-lab",
    version,
    about = "Ground states, spectra and dynamics of the double-power NLS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Problem {
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value_t = 5.0)]
    p: f64,
}

#[derive(Args)]
struct Shooting {
    /// Outer radius; defaults to 32/√ω.
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args)]
struct Box2d {
    /// Half side of the periodic box.
    #[arg(long)]
    half_length: Option<f64>,
    /// Points per axis (power of two).
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct Time {
    #[arg(long)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    probe_stride: Option<usize>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Radial ground state at one frequency.
    Groundstate {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        omega: f64,
        #[command(flatten)]
        shooting: Shooting,
    },
    /// Critical ground state q.
    Q {
        #[arg(long, default_value_t = 2)]
        d: u32,
        #[command(flatten)]
        shooting: Shooting,
    },
    /// Mass and energy over evenly spaced frequencies.
    Massmap {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        omega_min: f64,
        #[arg(long)]
        omega_max: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Energy minimizer at fixed mass.
    Minimize {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        mass: f64,
        #[command(flatten)]
        grid: Box2d,
    },
    /// Ground state at fixed frequency by the constrained flow.
    MinimizePohozaev {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        omega: f64,
        #[arg(long)]
        mass_cap: f64,
        #[command(flatten)]
        grid: Box2d,
    },
    /// Linearized spectra and mass slope at interior frequencies.
    Spectrum {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, num_args = 3.., required = true)]
        omega_list: Vec<f64>,
        #[command(flatten)]
        shooting: Shooting,
    },
    /// Plain evolution of a saved field or a moving soliton.
    Evolve {
        #[command(flatten)]
        problem: Problem,
        /// Field file to start from.
        #[arg(long, conflicts_with = "omega")]
        field: Option<PathBuf>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, num_args = 2, default_values_t = [0.0, 0.0])]
        v: Vec<f64>,
        /// Size of the seeded noise added to the initial datum.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        grid: Box2d,
        #[command(flatten)]
        time: Time,
    },
    /// Perturbed soliton and its distance to the orbit.
    Stability {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[command(flatten)]
        grid: Box2d,
        #[command(flatten)]
        time: Time,
    },
    /// Multi-soliton run from a config file.
    Multisoliton {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "T")]
        t_end: Option<f64>,
    },
    /// Any experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn apply_problem(cfg: &mut ExperimentConfig, p: &Problem) {
    cfg.d = p.d;
    cfg.p = p.p;
}

fn apply_shooting(cfg: &mut ExperimentConfig, s: &Shooting) {
    cfg.profile.r_max = s.rmax.or(cfg.profile.r_max);
    cfg.profile.nodes = s.nodes.unwrap_or(cfg.profile.nodes);
}

fn apply_grid(cfg: &mut ExperimentConfig, g: &Box2d) {
    cfg.grid.half_length = g.half_length.unwrap_or(cfg.grid.half_length);
    cfg.grid.points = g.points.unwrap_or(cfg.grid.points);
}

fn apply_time(cfg: &mut ExperimentConfig, t: &Time) {
    cfg.time.dt = t.dt.unwrap_or(cfg.time.dt);
    cfg.time.t_end = t.t_end.unwrap_or(cfg.time.t_end);
    cfg.time.probe_stride = t.probe_stride.unwrap_or(cfg.time.probe_stride);
    cfg.time.snapshot_stride = t.snapshot_stride.or(cfg.time.snapshot_stride);
}

fn build(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.command {
        Command::Groundstate {
            problem,
            omega,
            shooting,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Groundstate);
            apply_problem(&mut cfg, problem);
            apply_shooting(&mut cfg, shooting);
            cfg.groundstate.omega = Some(*omega);
            cfg
        }
        Command::Q { d, shooting } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Q);
            cfg.d = *d;
            apply_shooting(&mut cfg, shooting);
            cfg
        }
        Command::Massmap {
            problem,
            omega_min,
            omega_max,
            steps,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Massmap);
            apply_problem(&mut cfg, problem);
            cfg.massmap.omega_min = Some(*omega_min);
            cfg.massmap.omega_max = Some(*omega_max);
            cfg.massmap.steps = Some(*steps);
            cfg
        }
        Command::Minimize {
            problem,
            mass,
            grid,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Minimize);
            apply_problem(&mut cfg, problem);
            apply_grid(&mut cfg, grid);
            cfg.flow.mass = Some(*mass);
            cfg
        }
        Command::MinimizePohozaev {
            problem,
            omega,
            mass_cap,
            grid,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::MinimizePohozaev);
            apply_problem(&mut cfg, problem);
            apply_grid(&mut cfg, grid);
            cfg.flow.omega = Some(*omega);
            cfg.flow.mass_cap = Some(*mass_cap);
            cfg
        }
        Command::Spectrum {
            problem,
            omega_list,
            shooting,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Spectrum);
            apply_problem(&mut cfg, problem);
            apply_shooting(&mut cfg, shooting);
            cfg.spectrum.omegas = omega_list.clone();
            cfg
        }
        Command::Evolve {
            problem,
            field,
            omega,
            v,
            eps,
            seed,
            grid,
            time,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Evolve);
            apply_problem(&mut cfg, problem);
            apply_grid(&mut cfg, grid);
            apply_time(&mut cfg, time);
            cfg.evolve.field = field.clone();
            cfg.evolve.omega = *omega;
            cfg.evolve.v = [v[0], v[1]];
            cfg.evolve.eps = *eps;
            cfg.seed = *seed;
            cfg
        }
        Command::Stability {
            problem,
            omega,
            eps,
            grid,
            time,
        } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Stability);
            apply_problem(&mut cfg, problem);
            apply_grid(&mut cfg, grid);
            apply_time(&mut cfg, time);
            cfg.stability.omega = Some(*omega);
            cfg.stability.eps = *eps;
            cfg
        }
        Command::Multisoliton { config, t_end } => {
            let mut cfg = ExperimentConfig::from_path(config)?;
            if cfg.kind != ExperimentKind::Multisoliton {
                return Err(Error::Config(format!(
                    "{} is not a multisoliton config",
                    config.display()
                )));
            }
            cfg.time.t_end = t_end.unwrap_or(cfg.time.t_end);
            cfg
        }
        Command::Run { config } => ExperimentConfig::from_path(config)?,
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(n) = cli.threads {
        cfg.threads = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build(&cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            for f in &manifest.failures {
                eprintln!("omega {}: {} ({})", f.omega, f.class, f.message);
            }
            if let Some(e) = &manifest.error {
                eprintln!("error: {} ({})", e.class, e.message);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest.summary).unwrap_or_default()
            );
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
