mod campaign;
mod certify;
mod demo;
mod error;
mod ingest;
mod output;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "memrobust",
    version,
    about = "Memristor non-ideality profiling, BO campaigns and certified noise-robust training"
)]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, env = "MEMROBUST_SEED", default_value_t = 0)]
    seed: u64,

    /// Output directory (default `runs/<timestamp>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a non-ideality profile and usability from an I-V sweep file.
    Ingest(ingest::IngestArgs),
    /// Ask/tell Bayesian-optimization campaign over a fabrication grid.
    #[command(subcommand)]
    Campaign(campaign::CampaignCommand),
    /// Train an ERM or BayesMulti network.
    Train(train::TrainArgs),
    /// Evaluate models over a usability sweep.
    Sweep(train::SweepArgs),
    /// Certify a tiny model's smoothed prediction and verify it by enumeration.
    Certify(certify::CertifyArgs),
    /// Compare ERM and BayesMulti with one layer on a simulated crossbar.
    CrossbarDemo(demo::DemoArgs),
}

pub struct Global {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    let global = Global {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Ingest(a) => ingest::run(&global, a),
        Command::Campaign(c) => campaign::run(&global, c),
        Command::Train(a) => train::run_train(&global, a),
        Command::Sweep(a) => train::run_sweep(&global, a),
        Command::Certify(a) => certify::run(&global, a),
        Command::CrossbarDemo(a) => demo::run(&global, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
