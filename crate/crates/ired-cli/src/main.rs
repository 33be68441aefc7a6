//! Command-line front end for the implicit robust exact differentiator.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Format;

#[derive(Parser)]
#[command(name = "ired", version, about = "Implicit robust exact differentiation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate gains with the tuning rule and report their margins
    Tune {
        /// Scenario file
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the scenario's differentiator over its signal
    Run {
        /// Scenario file
        #[arg(long)]
        config: PathBuf,
        /// Number of steps, overriding the scenario
        #[arg(long)]
        steps: Option<usize>,
        /// Noise seed, overriding the scenario
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output style
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print worst-case accuracy bounds for the scenario's gains
    Bounds {
        /// Scenario file
        #[arg(long)]
        config: PathBuf,
        /// Noise magnitude, overriding the scenario
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Run the differentiator next to a baseline on the same samples
    Compare {
        /// Scenario file
        #[arg(long)]
        config: PathBuf,
        /// Number of steps, overriding the scenario
        #[arg(long)]
        steps: Option<usize>,
        /// Noise seed, overriding the scenario
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output style
        #[arg(long, value_enum, default_value_t = Format::Kv)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tune { config } => commands::tune(&config),
        Command::Run {
            config,
            steps,
            seed,
            out,
            format,
        } => commands::run_scenario(&config, steps, seed, out, format),
        Command::Bounds { config, noise } => commands::bounds(&config, noise),
        Command::Compare {
            config,
            steps,
            seed,
            out,
            format,
        } => commands::compare(&config, steps, seed, out, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
