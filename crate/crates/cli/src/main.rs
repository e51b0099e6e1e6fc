use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qchain_cli::config::{ExperimentConfig, Mode};
use qchain_cli::{runs, validate, CliError};

#[derive(Parser)]
#[command(name = "qchain", version, about = "Qubit chains between two thermal baths")]
struct Cli {
    /// TOML experiment file; built-in defaults fill anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config value, e.g. `--set chain.beta_left=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Time evolution of the configured initial state (CSV).
    Dynamics,
    /// Stationary state, its concurrence and the spectral gap (CSV).
    Steady,
    /// Stationary two- versus three-qubit concurrence over a temperature sweep (CSV).
    Compare,
    /// Run the invariant suite (JSON report; exit 1 on any failure).
    Validate,
}

impl Command {
    fn accepts(self, mode: Mode) -> bool {
        matches!(
            (self, mode),
            (Command::Dynamics, Mode::Dynamics)
                | (Command::Steady, Mode::Steady)
                | (Command::Validate, Mode::Validate)
                | (Command::Compare, Mode::SweepEquilibrium | Mode::SweepNonequilibrium | Mode::Compare2v3)
        )
    }

    fn default_mode(self) -> Mode {
        match self {
            Command::Dynamics => Mode::Dynamics,
            Command::Steady => Mode::Steady,
            Command::Compare => Mode::Compare2v3,
            Command::Validate => Mode::Validate,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(cli.config.as_deref(), &cli.sets)?;
    match config.mode {
        Some(mode) if !cli.command.accepts(mode) => {
            return Err(CliError::Config(format!("config mode {mode:?} does not match the subcommand")));
        }
        Some(_) => {}
        None => config.mode = Some(cli.command.default_mode()),
    }
    if let Some(path) = &cli.output {
        config.output = Some(path.clone());
    }

    let mut failure = None;
    let text = match cli.command {
        Command::Dynamics => runs::run_dynamics(&config)?,
        Command::Steady => runs::run_steady(&config)?,
        Command::Compare => {
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(k) = cli.threads {
                pool = pool.num_threads(k);
            }
            let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| runs::run_compare(&config))?
        }
        Command::Validate => {
            let report = validate::run_validate(&config)?;
            if !report.passed {
                failure = Some(CliError::ChecksFailed { failed: report.n_failed, total: report.n_checks });
            }
            report.to_json()
        }
    };
    match &config.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qchain: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
