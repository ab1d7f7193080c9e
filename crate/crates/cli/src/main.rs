//! `mu2lab`: spectra, μ₂ optimization, bubble sweeps and the inequality
//! battery from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, Flags};

#[derive(Parser)]
#[command(name = "mu2lab", version, about = "Numerical laboratory for the second Yamabe invariant")]
struct Cli {
    /// JSON configuration file, merged over the defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// element count per component (keeps the configured grading)
    #[arg(long, global = true)]
    mesh: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest eigenvalues of the weighted pencil and their convergence
    Spectrum(Overrides),
    /// Multistart minimization of λ₂·Vol^{2/n} over conformal factors
    Mu2(Overrides),
    /// Bubble ε-sweep and norm-scaling fits
    Bubbles(Overrides),
    /// Randomized inequality battery
    Verify(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// dotted-path overrides such as `optimizer.tau0=0.25` (values parsed as JSON)
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, ov) = match &cli.command {
        Command::Spectrum(o) => (CommandKind::Spectrum, o),
        Command::Mu2(o) => (CommandKind::Mu2, o),
        Command::Bubbles(o) => (CommandKind::Bubbles, o),
        Command::Verify(o) => (CommandKind::Verify, o),
    };
    let flags = Flags {
        config: cli.config.as_deref(),
        overrides: &ov.overrides,
        seed: cli.seed,
        mesh: cli.mesh,
        out: cli.out.as_deref(),
    };
    let result = config::load(kind, &flags).and_then(|cfg| match kind {
        CommandKind::Spectrum => commands::spectrum(&cfg),
        CommandKind::Mu2 => commands::mu2(&cfg),
        CommandKind::Bubbles => commands::bubbles(&cfg),
        CommandKind::Verify => commands::verify(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mu2lab: {e}");
            e.exit_code()
        }
    }
}
