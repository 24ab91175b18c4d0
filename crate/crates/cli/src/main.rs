mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timebin::analysis::{
    find_optimal_t, integrate_central_peak, local_maxima, phase_grid, phase_sweep, population_run, pulse_probabilities,
    sweep_dephasing,
};
use timebin::config::RunConfig;
use timebin::propagator::{population_pairs, populations};
use timebin::regression::g3;
use timebin::validate::run_validation;
use timebin::Error;

use output::{comment_lines, write_atomic};

#[derive(Parser)]
#[command(
    name = "timebin",
    version,
    about = "Time-bin entangled photon pairs from a dot-cavity system driven by STIRAP"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding run.output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, overriding run.workers (0 uses every core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Coarser correlator grids.
    #[arg(long, global = true)]
    fast: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Two-pulse population run.
    Populations,
    /// Triple-coincidence correlation over a τ range.
    G3 {
        #[arg(long, allow_hyphen_values = true)]
        tau_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        tau_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
        /// Interferometer delay T.
        #[arg(long)]
        delay: Option<f64>,
    },
    /// Central-peak weight against interferometer phase, and the visibility.
    PhaseSweep {
        #[arg(long)]
        phi_points: Option<usize>,
    },
    /// Visibility against pure dephasing rate.
    DephasingSweep,
    /// Central-peak weight against interferometer delay.
    OptimalT,
    /// Consistency and convergence checks.
    Validate,
}

enum Failure {
    /// Bad flags or configuration.
    Usage(String),
    /// A run that did not complete.
    Runtime(String),
    /// A run that completed but failed its checks.
    Physics(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::CutoffTooSmall(_) => {
                Failure::Usage(e.to_string())
            }
            Error::PlateauNotDetected(_) | Error::DegenerateSignal(_) | Error::Numerical(_) => {
                Failure::Physics(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Physics(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(out) = g.out {
        cfg.run.output_dir = out;
    }
    if let Some(w) = g.workers {
        cfg.run.workers = w;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let fast = g.fast;
    cfg.request(fast).map_err(usage)?.check_resolution(cfg.pulses.tau_p);
    let dir = cfg.run.output_dir.clone();

    match cli.command {
        Command::Populations => {
            let a = &cfg.analysis;
            let traj = population_run(
                cfg.hilbert.max_photons,
                &cfg.system,
                &cfg.pulses,
                &cfg.stepper,
                a.horizon,
            )?;
            let header = cfg.header_lines(fast);
            let pairs = population_pairs(traj.space());
            let path = write_atomic(&dir, "populations.csv", |w| {
                comment_lines(w, &header)?;
                traj.write_csv(w, &pairs)
            })?;
            let series = populations(&traj)?;
            let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let probs = pulse_probabilities(&series, &cfg.pulses, a.plateau_threshold)?;
            println!("output={}", path.display());
            println!("p1={:e}", probs.p1);
            println!("p2={:e}", probs.p2);
            println!("plateau_time={:e}", probs.plateau_time);
            println!("final_rho_mm={:e}", probs.final_metastable);
            println!("max_rho_uu={:e}", max(&series.biexciton));
            println!("max_rho_gp_gp={:e}", max(&series.g_two));
        }
        Command::G3 {
            tau_min,
            tau_max,
            phi,
            delay,
        } => {
            if let Some(t) = delay {
                cfg.g3.delay = t;
            }
            if let Some(t) = tau_min {
                cfg.g3.tau_min = t;
            }
            if let Some(t) = tau_max {
                cfg.g3.tau_max = t;
            }
            if let Some(p) = phi {
                cfg.g3.phi = p;
            }
            if cfg.g3.tau_min > cfg.g3.tau_max {
                return Err(Failure::Usage(format!(
                    "empty tau range [{}, {}]",
                    cfg.g3.tau_min, cfg.g3.tau_max
                )));
            }
            cfg.validate().map_err(usage)?;
            let sc = cfg.scenario(fast).map_err(usage)?;
            let grid = g3(&sc)?;
            let header = cfg.header_lines(fast);
            let path = write_atomic(&dir, "g3.csv", |w| grid.write_csv(w, &header))?;
            let peaks: Vec<String> = local_maxima(&grid.values)
                .into_iter()
                .map(|i| format!("{:e}", grid.tau()[i]))
                .collect();
            println!("output={}", path.display());
            println!("tau_points={}", grid.values.len());
            println!("local_maxima={}", peaks.len());
            println!("peak_tau={}", peaks.join(";"));
            let r = &grid.request;
            if let Ok(p) = integrate_central_peak(&grid, r.delay, r.t_bin) {
                println!("p_c={p:e}");
            }
        }
        Command::PhaseSweep { phi_points } => {
            let n = phi_points.unwrap_or(cfg.analysis.phi_points);
            if n < 4 {
                return Err(Failure::Usage(format!("phase grid needs at least 4 points, got {n}")));
            }
            let sc = cfg.scenario(fast).map_err(usage)?;
            let r = phase_sweep(&sc, &phase_grid(n))?;
            let header = cfg.header_lines(fast);
            let path = write_atomic(&dir, "phase_sweep.csv", |w| r.write_csv(w, &header))?;
            println!("output={}", path.display());
            println!("visibility={:e}", r.visibility);
            println!("fit_ratio={:e}", r.fit.ratio());
            println!("fit_max_residual={:e}", r.fit.max_residual);
            println!(
                "bell_threshold_exceeded={}",
                r.visibility > std::f64::consts::FRAC_1_SQRT_2
            );
        }
        Command::DephasingSweep => {
            let sc = cfg.scenario(fast).map_err(usage)?;
            let values = cfg.analysis.gamma_d_values.clone();
            let r = sweep_dephasing(&values, &sc, &phase_grid(cfg.analysis.phi_points))?;
            let header = cfg.header_lines(fast);
            let path = write_atomic(&dir, "dephasing_sweep.csv", |w| r.write_csv(w, &header))?;
            println!("output={}", path.display());
            for (g, v) in values.iter().zip(r.visibilities()) {
                println!("visibility[gamma_d={g:e}]={v:e}");
            }
            println!("non_increasing={}", r.is_non_increasing(0.0));
        }
        Command::OptimalT => {
            let sc = cfg.scenario(fast).map_err(usage)?;
            let r = find_optimal_t(&cfg.analysis.delay_candidates, &sc)?;
            let header = cfg.header_lines(fast);
            let path = write_atomic(&dir, "optimal_t.csv", |w| r.write_csv(w, &header))?;
            println!("output={}", path.display());
            println!("best_delay={:e}", r.best);
            println!("best_delay_over_pi={:e}", r.best / std::f64::consts::PI);
        }
        Command::Validate => {
            let report = run_validation(&cfg, fast);
            report
                .write(std::io::stdout())
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            println!("passed={}", failed.is_empty());
            if !failed.is_empty() {
                return Err(Failure::Physics(failed.join(", ")));
            }
        }
    }
    Ok(())
}
