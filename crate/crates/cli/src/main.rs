//! `metastab`: landscape analysis, Eyring–Kramers constant sweeps and
//! invariant validation for a potential given in a TOML config.

mod commands;
mod config;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, parse_eps_list, parse_grid, ConfigError, Overrides};

/// Exit 1 for runtime and validation failures, 2 for configuration problems.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Usage(String),
    Library(metastab::Error),
    Io(String),
    Validation,
}

impl From<metastab::Error> for Failure {
    fn from(e: metastab::Error) -> Self {
        Failure::Library(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
            Failure::Library(e) => write!(f, "{e}"),
            Failure::Validation => f.write_str("validation failed"),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "metastab", version, about = "Metastability constants for L = εΔ − ∇H·∇")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate critical points, build the saddle graph and check assumptions.
    Analyze(Common),
    /// Sweep ε and emit Eyring–Kramers constants as CSV.
    Constants(Common),
    /// Run the invariant suites.
    Validate(Common),
}

/// Newtype so clap treats the list as one value.
#[derive(Clone)]
struct EpsList(Vec<f64>);

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Comma-separated ε values, overriding `[sweep] epsilon`.
    #[arg(long, value_name = "LIST", value_parser = |s: &str| parse_eps_list(s).map(EpsList))]
    eps: Option<EpsList>,
    /// Grid points per axis, a power of two in [64, 16384].
    #[arg(long, value_name = "N", value_parser = parse_grid)]
    grid: Option<usize>,
    #[arg(long)]
    no_oracle: bool,
    /// Run only the named validation suite.
    #[arg(long, value_name = "NAME")]
    filter: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            epsilons: self.eps.as_ref().map(|e| e.0.clone()),
            grid: self.grid,
            no_oracle: self.no_oracle,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(c) => {
            let cfg = load_config(&c.config, &c.overrides()).map_err(Failure::Config)?;
            print!("{}", commands::analyze(&cfg)?);
        }
        Command::Constants(c) => {
            let cfg = load_config(&c.config, &c.overrides()).map_err(Failure::Config)?;
            print!("{}", commands::constants(&cfg)?);
        }
        Command::Validate(c) => {
            if let Some(f) = &c.filter {
                if !validate::SUITES.contains(&f.as_str()) {
                    return Err(Failure::Usage(format!(
                        "unknown suite `{f}`; expected one of {}",
                        validate::SUITES.join(", ")
                    )));
                }
            }
            let cfg = load_config(&c.config, &c.overrides()).map_err(Failure::Config)?;
            let reports = validate::run(&cfg, c.filter.as_deref())?;
            print!("{}", validate::summary(&reports));
            if reports.iter().any(|r| !r.passed()) {
                return Err(Failure::Validation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
