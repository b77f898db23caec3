use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod grid;
mod output;

use commands::{Context, PhaseArgs};
use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Transfer-function numerics, rate calculus and k-NN covariate-shift experiments.
#[derive(Debug, Parser)]
#[command(name = "transfer-knn", version)]
struct Cli {
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; falls back to TRANSFER_KNN_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate T(P, Q, gamma) on a grid and bracket the integrability index.
    Transfer {
        /// `start:end:step`
        #[arg(long)]
        gamma_grid: Option<String>,
    },
    /// Rate regime and exponents at one (gamma, s, beta, d, n, m).
    Rates,
    /// Regime map over (log10 n, log10 m) or (gamma, s).
    Phase {
        /// `gamma=..,s=..` or `n=..,m=..`
        #[arg(long)]
        fix: String,
        #[arg(long)]
        log_n: Option<String>,
        #[arg(long)]
        log_m: Option<String>,
        #[arg(long)]
        gamma_grid: Option<String>,
        #[arg(long)]
        s_grid: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Fit the two-sample estimator and predict at query points.
    Simulate,
    /// Monte Carlo excess-risk sweep over (n, m).
    Sweep,
    /// Local-mass and k-NN radius concentration diagnostics.
    CheckRegularity,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("TRANSFER_KNN_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Config(format!("TRANSFER_KNN_THREADS: `{v}` is not a thread count"))
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let ctx = Context {
        config: cli.config,
        seed: cli.seed,
        format: cli.format,
    };
    let artifacts = match &cli.command {
        Command::Transfer { gamma_grid } => commands::transfer(&ctx, gamma_grid.as_deref())?,
        Command::Rates => commands::rates(&ctx)?,
        Command::Phase {
            fix,
            log_n,
            log_m,
            gamma_grid,
            s_grid,
            beta,
            d,
        } => commands::phase(
            &ctx,
            &PhaseArgs {
                fix,
                log_n: log_n.as_deref(),
                log_m: log_m.as_deref(),
                gamma_grid: gamma_grid.as_deref(),
                s_grid: s_grid.as_deref(),
                beta: *beta,
                d: *d,
            },
        )?,
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Sweep => commands::sweep(&ctx)?,
        Command::CheckRegularity => commands::check_regularity(&ctx)?,
    };
    for path in output::commit(&cli.out, &artifacts)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
