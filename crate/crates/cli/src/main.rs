use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use eip_cli::{output, run, CliError, Command, RunOptions, Scenario, EXIT_FAILED_CHECKS};

/// Verification studies for parabolic problems with a moving interface.
#[derive(Debug, Parser)]
#[command(name = "eip", version)]
struct Args {
    command: Command,
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every absolute tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

fn execute(args: &Args) -> Result<bool, CliError> {
    if !(args.tol_scale > 0.0 && args.tol_scale.is_finite()) {
        return Err(CliError::Validation(format!("--tol-scale must be positive (got {})", args.tol_scale)));
    }
    if let Some(n) = args.jobs {
        if n == 0 {
            return Err(CliError::Validation("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--jobs: {e}")))?;
    }
    let mut scenario = Scenario::load(&args.config)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let opts = RunOptions {
        seed: scenario.seed,
        tol_scale: args.tol_scale,
    };
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    log::info!("{} on {} -> {}", args.command, scenario.name, dir.display());
    let start = Instant::now();
    let report = run(args.command, &scenario, opts)?;
    let written = output::write_run(&dir, args.command, &scenario, &report, opts, start.elapsed())?;
    for c in &report.checks {
        log::info!("{} = {:e} ({})", c.name, c.value, if c.pass() { "pass" } else { "FAIL" });
    }
    for path in written {
        log::debug!("wrote {}", path.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EIP_LOG", "warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("eip {}: checks failed, see checks.csv", args.command);
            ExitCode::from(EXIT_FAILED_CHECKS as u8)
        }
        Err(e) => {
            eprintln!("eip {}: {e}", args.command);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
