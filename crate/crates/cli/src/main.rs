//! `aerosim` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! failures while simulating or writing results.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "aerosim", version, about = "Trace-driven aeronautical ad-hoc network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the OCA scenario sweep and write per-run and aggregate CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override `scenario.runs`.
        #[arg(long)]
        runs: Option<u32>,
        /// Override `scenario.base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Compare table PER with observed loss over a distance sweep.
    ValidateRadio {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic mobility and message traces plus a manifest.
    GenTraces {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print horizon, path loss, received power and SNR for one link.
    Linkbudget {
        /// Distance, km.
        #[arg(long, allow_negative_numbers = true)]
        d: f64,
        /// Frequency, MHz.
        #[arg(long, allow_negative_numbers = true)]
        f: f64,
        /// Transmitter height, km.
        #[arg(long, allow_negative_numbers = true)]
        htx: f64,
        /// Receiver height, km.
        #[arg(long, allow_negative_numbers = true)]
        hrx: f64,
        /// Config file with `link.*` keys.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, runs, seed, out } => commands::simulate(&config, runs, seed, &out),
        Command::ValidateRadio { config, out } => commands::validate_radio(&config, &out),
        Command::GenTraces { config, out } => commands::gen_traces(&config, &out),
        Command::Linkbudget { d, f, htx, hrx, params } => commands::linkbudget(d, f, htx, hrx, params.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aerosim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
