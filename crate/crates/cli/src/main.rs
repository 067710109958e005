use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qot_cli::{load_config, run, run_selftest, CliError, Outcome, RunOptions};
use qot_cli::{EXIT_CONVERGED, EXIT_ERROR, EXIT_NOT_CONVERGED};

/// Convex-regularized quantum optimal transport solver.
///
/// Exit status: 0 when the run converged, 2 when it finished without
/// converging, 1 on any error.
#[derive(Debug, Parser)]
#[command(name = "qot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Dual solver tolerance, overriding the config.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Iteration cap, overriding the config.
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write a zero wall time so repeated runs produce identical reports.
    #[arg(long, global = true)]
    canonical: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the problem described by a JSON config. QOT_SEED overrides the generator seed.
    Run { config: PathBuf },
    /// Run the scalar closed-form checks.
    Selftest,
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let opts = RunOptions {
        canonical: cli.canonical,
    };
    match &cli.command {
        Command::Selftest => run_selftest(cli.out.as_deref(), None, &opts),
        Command::Run { config } => {
            let mut cfg = load_config(config)?;
            if let Ok(raw) = std::env::var("QOT_SEED") {
                let seed = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("QOT_SEED must be an unsigned integer, got '{raw}'")))?;
                cfg.override_seed(seed);
            }
            if let Some(out) = &cli.out {
                cfg.output_dir = out.clone();
            }
            if let Some(tol) = cli.tol {
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
                }
                cfg.tolerance = tol;
            }
            if let Some(n) = cli.max_iter {
                if n == 0 {
                    return Err(CliError::Usage("--max-iter must be at least 1".into()));
                }
                cfg.max_iter = n;
            }
            run(&cfg, &opts)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED });
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if outcome.converged {
                ExitCode::from(EXIT_CONVERGED)
            } else {
                eprintln!("qot: run finished without converging");
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("qot: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
