use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfpoly::Error;

mod config;
mod generate;
mod pipeline;
mod scale_bench;
mod solve;
mod spectrum;
mod sweep;

#[derive(Parser)]
#[command(
    name = "mfpoly",
    version,
    about = "Polynomially preconditioned CG for SPD systems, matrix-free",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system and write a JSON report.
    Solve(solve::SolveArgs),
    /// Map a spectrum through the preconditioner; CSV plus condition numbers.
    Spectrum(spectrum::SpectrumArgs),
    /// Solve over a xi x degree grid and tabulate the results as CSV.
    Sweep(sweep::SweepArgs),
    /// Generate a synthetic fracture block system on disk.
    Generate(generate::GenerateArgs),
    /// Repeat one solve over several thread counts and report efficiency.
    ScaleBench(scale_bench::ScaleBenchArgs),
}

/// 0 success, 2 bad input, 3 non-convergence, 4 inadmissible coupling.
fn exit_for(e: &Error) -> u8 {
    match e {
        Error::InadmissibleAlpha { .. } => 4,
        Error::NoConvergence { .. } | Error::Breakdown(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Spectrum(a) => spectrum::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Generate(a) => generate::run(a),
        Command::ScaleBench(a) => scale_bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
