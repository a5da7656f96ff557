//! `tensorwino` command-line tool.
//!
//! Exit status: 0 on success, 1 when a validation or tolerance check fails,
//! 2 on usage or input errors.

mod cmd;
mod common;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "tensorwino",
    version,
    about = "Fast tensor convolution via synthesized transforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize and validate a transform set.
    Synth(cmd::synth::Args),
    /// Validate a transform file symbolically and with random trials.
    Verify(cmd::verify::Args),
    /// Run one convolution layer on NTSR tensors.
    Conv(cmd::conv::Args),
    /// Time fast and direct modes across thread counts.
    Bench(cmd::bench::Args),
    /// Tabulate modeled multiplication counts.
    Cost(cmd::cost::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd::synth::run(a),
        Command::Verify(a) => cmd::verify::run(a),
        Command::Conv(a) => cmd::conv::run(a),
        Command::Bench(a) => cmd::bench::run(a),
        Command::Cost(a) => cmd::cost::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<common::CheckFailed>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
