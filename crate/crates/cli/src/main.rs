//! `mdp-abr`: solve, simulate and validate network-assisted rate adaptation
//! scenarios.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 infeasible model.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdp_abr::{cmd_run, cmd_solve, cmd_validate, Error, RunOptions};

#[derive(Parser, Debug)]
#[command(
    name = "mdp-abr",
    version,
    about = "Network-assisted bitrate adaptation for shared cellular links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a scenario and write its policy table.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec and write traces and summaries.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed of the spec and the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Reuse the epoch-0 decisions at every epoch.
        #[arg(long)]
        stationary: bool,
    },
    /// Check a scenario file and print its derived constants.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
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
    match cli.command {
        Command::Solve { config, out } => match cmd_solve::<f64>(&config, &out) {
            Ok(table) => {
                println!(
                    "wrote {} ({} states x {} epochs, model {})",
                    out.display(),
                    table.space().size(),
                    table.horizon(),
                    table.fingerprint()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            spec,
            out_dir,
            seed,
            stationary,
        } => match cmd_run::<f64>(&spec, &out_dir, RunOptions { seed, stationary }) {
            Ok(report) => {
                println!(
                    "wrote {} sessions to {}",
                    report.cells.len(),
                    out_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Validate { config } => match cmd_validate::<f64>(&config) {
            Ok(d) => {
                print!("{d}");
                ExitCode::from(d.exit_code() as u8)
            }
            Err(e) => fail(&e),
        },
    }
}
