//! `satprice`: command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

mod commands;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "satprice", version, about = "Saturated asset-price model: returns, fits, option prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Write to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Descriptive statistics of per-mille linear returns per horizon.
    Returns {
        #[command(flatten)]
        args: commands::ReturnsArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Maximum-likelihood fit of a t or normal law to n-day returns.
    Fit {
        #[command(flatten)]
        args: commands::FitArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// European call prices.
    Price {
        #[command(flatten)]
        args: commands::PriceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo descriptive statistics of the terminal price.
    Simulate {
        #[command(flatten)]
        args: commands::SimulateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// n-fold self-convolution of a truncated one-step density.
    Convolve {
        #[command(flatten)]
        args: commands::ConvolveArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Regenerate all result tables from a TOML config.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Output(String),
    Lib(satprice::Error),
}

impl From<satprice::Error> for CliError {
    fn from(e: satprice::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Output(_) => 3,
            CliError::Lib(e) if e.is_usage_error() => 2,
            CliError::Lib(satprice::Error::SupportNotCovered { .. }) => 2,
            CliError::Lib(e) if e.is_data_error() => 3,
            CliError::Lib(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Output(m) => write!(f, "output: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (artifact, output) = match cli.command {
        Command::Returns { args, output } => (commands::returns(&args)?, output),
        Command::Fit { args, output } => (commands::fit(&args)?, output),
        Command::Price { args, output } => (commands::price(&args)?, output),
        Command::Simulate { args, output } => (commands::simulate(&args)?, output),
        Command::Convolve { args, output } => (commands::convolve(&args)?, output),
        Command::Report { config, out_dir } => {
            let cfg = report::load_config(&config)?;
            for path in report::run(&cfg, &out_dir)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
    };
    artifact.emit(output.format, output.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
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
