use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use vragt::harness::config::SeedSpec;
use vragt::harness::fit::{fit_rate_csv, log_spaced};
use vragt::harness::{expand_sweep, write_outputs, Experiment, ExperimentConfig};
use vragt::report::ValidationReport;
use vragt::Error;

#[derive(Parser)]
#[command(
    name = "vragt",
    version,
    about = "Noisy directed-network gradient tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write per-seed and aggregate CSVs.
    Run(RunArgs),
    /// Print validator verdicts for a config.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a log-log slope to a metric column of a trajectory or aggregate CSV.
    FitRate {
        #[arg(long)]
        csv: PathBuf,
        /// Column name; `<name>_mean` is tried as well, and `a+b` sums columns.
        #[arg(long, default_value = "opt_gap")]
        metric: String,
        #[arg(long)]
        k_lo: f64,
        #[arg(long)]
        k_hi: f64,
        /// Also write the fitted curve as `k,fit` CSV.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run the cartesian product of the config's `sweep` table, one directory per cell.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use seeds 0..N instead of the config's seed list.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run even when validators fail; failures are recorded as warnings.
    #[arg(long)]
    force: bool,
}

enum Failure {
    Config(String),
    Validation(String),
    Divergence(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Divergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Validation(m) | Failure::Divergence(m) | Failure::Other(m) => m,
        }
    }
}

fn config_error(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn run_error(e: Error) -> Failure {
    match e {
        Error::Divergence { .. } => Failure::Divergence(e.to_string()),
        other => Failure::Other(other.to_string()),
    }
}

fn load(path: &Path, seeds: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::read(path).map_err(config_error)?;
    if let Some(n) = seeds {
        cfg.seeds = SeedSpec::Count(n);
        cfg.check().map_err(config_error)?;
    }
    Ok(cfg)
}

fn print_reports(reports: &[ValidationReport]) {
    for r in reports {
        print!("{r}");
    }
}

fn failures(reports: &[ValidationReport]) -> Vec<String> {
    reports
        .iter()
        .flat_map(|r| {
            r.checks
                .iter()
                .filter(|c| !c.pass)
                .map(move |c| format!("{}: {} ({})", r.title, c.name, c.detail))
        })
        .collect()
}

/// Builds and validates one config, then runs all its seeds into `out`.
fn execute(cfg: ExperimentConfig, out: &Path, force: bool) -> Result<(), Failure> {
    let exp = Experiment::build(cfg).map_err(config_error)?;
    let reports = exp.validate().map_err(config_error)?;
    let warnings = failures(&reports);
    if !warnings.is_empty() {
        print_reports(&reports);
        if !force {
            return Err(Failure::Validation(format!(
                "{} validator check(s) failed",
                warnings.len()
            )));
        }
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    let start = Instant::now();
    let runs = exp.run_all().map_err(run_error)?;
    write_outputs(out, &exp, &runs, &reports, &warnings, start.elapsed()).map_err(|e| Failure::Other(e.to_string()))?;
    println!("{} seed(s) written to {}", runs.len(), out.display());
    Ok(())
}

fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Other(e.to_string()))?;
    Ok(pool.install(f))
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(args) => {
            let cfg = load(&args.config, args.seeds)?;
            let out = args.out.clone().unwrap_or_else(|| cfg.out.clone());
            with_pool(args.threads, || execute(cfg, &out, args.force))?
        }
        Command::Sweep(args) => {
            let cfg = load(&args.config, args.seeds)?;
            let root = args.out.clone().unwrap_or_else(|| cfg.out.clone());
            let cells = expand_sweep(&cfg).map_err(config_error)?;
            with_pool(args.threads, || {
                cells
                    .into_iter()
                    .try_for_each(|(label, cell)| execute(cell, &root.join(label), args.force))
            })?
        }
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            let exp = Experiment::build(cfg).map_err(config_error)?;
            let reports = exp.validate().map_err(config_error)?;
            print_reports(&reports);
            let failed = failures(&reports);
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Validation(format!("{} check(s) failed", failed.len())))
            }
        }
        Command::FitRate {
            csv,
            metric,
            k_lo,
            k_hi,
            emit,
        } => {
            let fit = fit_rate_csv(&csv, &metric, k_lo, k_hi).map_err(config_error)?;
            println!("{}", serde_json::to_string_pretty(&fit).expect("fit serializes"));
            if let Some(path) = emit {
                let ks: Vec<f64> = log_spaced(k_lo.ceil() as u64, k_hi.floor() as u64, 50)
                    .into_iter()
                    .map(|k| k as f64)
                    .collect();
                std::fs::write(&path, fit.curve_csv(&ks)).map_err(|e| Failure::Other(e.to_string()))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
