use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn, LevelFilter};

use splitpop::harness::{self, linspace, ExperimentConfig};
use splitpop::measure::io::load_measure;
use splitpop::measure::metrics::metric_report;
use splitpop::{Error, ErrorClass};

const CONFIG_HELP: &str = "\
CONFIG FILE (JSON)
  {
    \"model\":  {\"name\": \"mckendrick\" | \"selection_growth\" (\"A\": 0..3) | \"equal_fission\"
               | \"selection_mutation\" (\"epsilon\": 0..1)},
    \"solver\": {
      \"final_time\": T, \"steps\": N,
      \"integrator\": \"rk4\" (default) | \"euler\",
      \"mass_update\": \"explicit_euler\" (default) | \"boundary_ode\",
      \"snapshot_times\": [] (default), \"position_merge_tol\": 1e-12 (default),
      \"positivity\": \"strict\" (default) | \"clamp\",
      \"offspring\": \"drop\" (default) | \"clamp\",
      \"record_diagnostics\": true (default)
    },
    \"reconstruction\": {
      \"initial\":  {\"kind\": \"fixed_location\" | \"fixed_equal_mass\", \"target\": M,
                   \"domain\": \"support_hull\" (default) | {\"fixed_interval\": [k1, k2]}},
      \"schedule\": {same fields, plus \"every\": steps}
    },
    \"experiment\": {
      \"levels\": 1 (default), \"reference\": \"exact\" (default) | \"finest_level\",
      \"error_metric\": \"rho\" (default) | \"rho_doubled_mass_gap\",
      \"normalize\": false (default), \"display_target\": none (default),
      \"initial_measure\": CSV path (default: the model's own datum),
      \"output_dir\": path (default: no files written)
    }
  }
Level l of `converge` divides the time step by 2^l and multiplies every atom
count and the schedule interval (in steps) by 2^l.

EXIT STATUS
  0 success, 2 configuration error, 3 numerical failure.";

#[derive(Parser)]
#[command(name = "splitpop", version, about = "Particle method for structured population models", after_long_help = CONFIG_HELP)]
struct Cli {
    /// Worker threads for concurrent levels and sweep points.
    #[arg(long, env = "SPLITPOP_THREADS", global = true)]
    threads: Option<usize>,

    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and export its snapshots.
    Simulate {
        config: PathBuf,
        /// Output directory; overrides `experiment.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study: error and observed order per level.
    Converge {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent runs over an evenly spaced parameter grid.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distances between two measures stored as CSV (`x,m` or `x,F`).
    Metrics { a: PathBuf, b: PathBuf },
}

fn exit_code(class: ErrorClass) -> ExitCode {
    match class {
        ErrorClass::Configuration | ErrorClass::Io => ExitCode::from(2),
        ErrorClass::Numerical => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if out.is_some() {
        config.experiment.output_dir = out;
    }
    Ok(config)
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate { config, out } => {
            let config = load(&config, out)?;
            let run = harness::longtime_run(&config)?;
            for w in &run.trace.warnings {
                warn!("{w}");
            }
            let mu = &run.trace.final_measure;
            println!("t = {}  atoms = {}  mass = {:.10e}", run.trace.final_time(), mu.len(), mu.total_mass());
            if let Some(dir) = &config.experiment.output_dir {
                run.write_csv(dir)?;
                info!("wrote {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Converge { config, out } => {
            let config = load(&config, out)?;
            let report = harness::convergence_study(&config)?;
            println!("{:>5} {:>14} {:>14} {:>14} {:>8}", "level", "dt", "dx", "err", "q");
            for r in &report.rows {
                let q = r.q.map(|q| format!("{q:.5}")).unwrap_or_default();
                println!("{:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>8}", r.level, r.dt, r.dx, r.err, q);
            }
            if let Some(dir) = &config.experiment.output_dir {
                report.write(dir)?;
                info!("wrote {}", dir.display());
            }
            match &report.failure {
                Some(f) => {
                    eprintln!("error: level {} failed: {}", f.level, f.message);
                    Ok(exit_code(f.class))
                }
                None => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Sweep { config, param, from, to, points, out } => {
            let config = load(&config, out)?;
            if points == 0 {
                return Err(Error::Config("--points must be at least 1".into()));
            }
            let sweep = harness::parameter_sweep(&config, &param, &linspace(from, to, points))?;
            for p in &sweep.points {
                match &p.outcome {
                    Ok(mu) => println!("{param} = {:<12} atoms = {:<6} mass = {:.10e}", p.value, mu.len(), mu.total_mass()),
                    Err(f) => eprintln!("{param} = {}: failed: {}", p.value, f.message),
                }
            }
            if let Some(dir) = &config.experiment.output_dir {
                sweep.write_csv(dir)?;
                info!("wrote {}", dir.display());
            }
            // Only a sweep in which every point failed is an error.
            if let Some(Err(f)) = sweep.points.first().map(|p| &p.outcome) {
                if sweep.failures().count() == sweep.points.len() {
                    return Ok(exit_code(f.class));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { a, b } => {
            let (a, b) = (load_measure(a)?, load_measure(b)?);
            let report = metric_report(&a, &b)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
