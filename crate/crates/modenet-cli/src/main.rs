//! Command-line front end for driven coupled-mode network computations.
//!
//! Exit codes: 0 on success, 2 for configuration or data-file errors, 3 for
//! numerical failures.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn config(msg: impl ToString) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn numerical(msg: impl ToString) -> Self {
        CliError::Numerical(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "modenet",
    version,
    about = "Driven parametric coupled-mode networks: scattering sweeps, isolator design, \
             model reduction, noise spectra, and least-squares fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file (default `<command>.<format>` in the working directory).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format, overriding the configuration.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,

    /// Worker threads for sweeps and fits (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Random seed for fit restarts.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// |S|^2 versus probe offset for configured port pairs.
    Spectrum,
    /// 2D |S|^2 maps over (offset, loop phase) grids.
    Sweep,
    /// Optimal loop phase, detunings, transmission difference, bandwidth.
    Design,
    /// Output-noise maps over (offset, loop phase) grids.
    Noise,
    /// Expanded network, effective parameters, and the generated edge list.
    Reduce,
    /// Least-squares fit of measured maps to the model.
    Fit,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Design => "design",
            Command::Noise => "noise",
            Command::Reduce => "reduce",
            Command::Fit => "fit",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config PATH is required"))?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(format) = &cli.format {
        config.output.format = format.clone();
    }
    let config_dir = config_path
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));

    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }

    let table = match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&config)?,
        Command::Sweep => commands::cmd_sweep(&config)?,
        Command::Design => commands::cmd_design(&config)?,
        Command::Noise => commands::cmd_noise(&config)?,
        Command::Reduce => commands::cmd_reduce(&config)?,
        Command::Fit => commands::cmd_fit(&config, &config_dir, cli.seed.unwrap_or(0))?,
    };

    let out = cli.out.clone().unwrap_or_else(|| {
        PathBuf::from(format!("{}.{}", cli.command.name(), config.output.format))
    });
    table.write(&out, &config.output.format, &config)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
