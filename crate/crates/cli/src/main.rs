//! `semiclassical`: ground-state sets, min-max solves, ε sweeps, verification
//! experiments and the degree of the boundary loop.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 solver failure,
//! 4 a verification check failed. Output goes to `--out`, else `$SNLS_OUT`,
//! else `./runs`.

mod commands;
mod error;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Experiment};
use error::CliError;
use rundir::sha256_hex;
use semiclassical::config::{canonical_json, Config, REFERENCE};

#[derive(Parser, Debug)]
#[command(name = "semiclassical", version, about = "Concentrating solutions of -eps^2 u'' + V u = f(u)")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; the built-in reference problem when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Comma-separated eps values, replacing `run.eps`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    eps: Option<Vec<f64>>,

    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Replaces `run.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground-state set and the E_m table.
    Limit,
    /// Min-max solve at one eps.
    Solve,
    /// Solves along a decreasing eps list.
    Sweep,
    /// Runs verification experiments.
    Verify {
        #[arg(value_enum, default_value = "all")]
        which: Experiment,
    },
    /// Prints the winding degree of the boundary loop at one eps.
    Degree,
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => REFERENCE.to_string(),
    };
    let config = Config::parse(&text)?;
    let spec = config.spec()?;
    let eps = cli.eps.clone().unwrap_or_else(|| config.run.eps.clone());
    if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(CliError::Usage(format!("eps values must lie in (0, 1), got {eps:?}")));
    }
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Context {
        config_sha256: sha256_hex(canonical_json(&text)?.as_bytes()),
        seed: cli.seed.unwrap_or(config.run.seed),
        out: commands::resolve_out(cli.out.as_deref()),
        config,
        spec,
        eps,
        jobs,
        pool,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = context(&cli)?;
    match cli.command {
        Command::Limit => commands::limit(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Verify { which } => commands::verify(&ctx, which),
        Command::Degree => commands::degree(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
