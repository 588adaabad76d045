use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lowmach::harness::study::{run_acoustic_only, run_boussinesq_only, run_euler_only};
use lowmach::harness::validate::run_validation;
use lowmach::harness::{run_limit_study, ExperimentConfig};
use lowmach::Error;

#[derive(Parser)]
#[command(name = "lowmach", version, about = "Low Mach, low stratification limit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random initial data and for `validate`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of output times, overriding `[run] snapshots`.
    #[arg(long, global = true)]
    snapshots: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compressible run at the configured epsilon.
    RunEuler { config: PathBuf },
    /// Limit-system run.
    RunBoussinesq { config: PathBuf },
    /// Acoustic run carried by the limit velocity.
    RunAcoustic { config: PathBuf },
    /// Epsilon sweep with relative-energy diagnostics.
    LimitStudy { config: PathBuf },
    /// Invariant suite.
    Validate,
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;
const VALIDATION_FAILURE: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => CONFIG_ERROR,
        _ => RUNTIME_ERROR,
    }
}

fn load(cli: &Cli, path: &Path) -> Result<(ExperimentConfig, PathBuf), u8> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        CONFIG_ERROR
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.snapshots {
        if n == 0 {
            eprintln!("--snapshots must be positive");
            return Err(CONFIG_ERROR);
        }
        cfg.snapshots = n;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<(), u8> {
    let fail = |e: Error| {
        eprintln!("error: {e}");
        exit_code(&e)
    };
    match &cli.command {
        Command::RunEuler { config } => {
            let (cfg, out) = load(cli, config)?;
            let run = run_euler_only(&cfg, &out).map_err(fail)?;
            if !cli.quiet {
                println!("{} steps; wrote {}", run.steps, out.join("euler.csv").display());
                if !run.entropy_violations.is_empty() {
                    println!("entropy decreased at {} recorded times", run.entropy_violations.len());
                }
            }
        }
        Command::RunBoussinesq { config } => {
            let (cfg, out) = load(cli, config)?;
            let run = run_boussinesq_only(&cfg, &out).map_err(fail)?;
            if !cli.quiet {
                println!("{} steps; wrote {}", run.steps, out.join("eb.csv").display());
                if let Some(t) = run.lost_resolution {
                    println!("resolution lost at t = {t}");
                }
            }
        }
        Command::RunAcoustic { config } => {
            let (cfg, out) = load(cli, config)?;
            let run = run_acoustic_only(&cfg, &out).map_err(fail)?;
            if !cli.quiet {
                println!("{} steps; wrote {}", run.steps, out.join("acoustic.csv").display());
            }
        }
        Command::LimitStudy { config } => {
            let (cfg, out) = load(cli, config)?;
            let report = run_limit_study(&cfg, &out, cli.quiet).map_err(fail)?;
            if !cli.quiet {
                for f in &report.fits {
                    let order = f.fit.as_ref().map_or("-".to_string(), |c| format!("{:.3}", c.order));
                    println!("{:<10} eta={:<6} order={order:<7} monotone={} {}", f.metric, f.eta, f.monotone(), f.note);
                }
                for c in &report.ill {
                    println!(
                        "eps={} eta={}: sup E corrected {:.3e}, uncorrected {:.3e}, inner decay {:.2}",
                        c.epsilon, c.eta, c.sup_corrected, c.sup_uncorrected, c.inner_decay
                    );
                }
                println!("wrote {}", out.display());
            }
            if !report.failures.is_empty() {
                for f in &report.failures {
                    eprintln!("epsilon = {}: {}", f.epsilon, f.message);
                }
                return Err(RUNTIME_ERROR);
            }
        }
        Command::Validate => {
            let quiet = cli.quiet;
            let report = run_validation(cli.seed.unwrap_or(1), |c| {
                if !quiet || !c.passed {
                    println!("{}", c.line());
                }
            });
            let failed = report.failures().count();
            println!("{} checks, {failed} failed", report.checks.len());
            if failed > 0 {
                return Err(VALIDATION_FAILURE);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
