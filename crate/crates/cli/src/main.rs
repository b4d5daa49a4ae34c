//! Command-line front end: CSMA sweeps, cluster sizing, the clustering
//! feasibility test and seeded simulations.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use e2mac::sim::MacVariant;

#[derive(Parser)]
#[command(name = "e2mac", version, about = "Energy-efficient clustered uplink access: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep CSMA/CA load and phase count; writes csma_sweep.csv.
    AnalyzeCsma {
        #[command(flatten)]
        io: Io,
    },
    /// Find the lifetime-maximising cluster size.
    OptimizeCluster {
        #[command(flatten)]
        io: OptionalIo,
        /// Seed for the head placements of the lifetime CDF.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decide whether clustering beats direct access in a small region.
    Feasibility {
        #[command(flatten)]
        io: OptionalIo,
    },
    /// Run one seeded simulation.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        variant: Option<MacVariant>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every configured variant over several seeds.
    Sweep {
        #[command(flatten)]
        io: Io,
        /// Comma-separated seeds; replaces `sweep.seeds`.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        /// Simulations run in parallel (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct Io {
    /// JSON run document; defaults apply to everything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Created if missing.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OptionalIo {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the results here; printed only when absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::AnalyzeCsma { io } => commands::analyze_csma(io.config.as_deref(), &io.out_dir),
        Command::OptimizeCluster { io, seed } => {
            commands::optimize_cluster(io.config.as_deref(), io.out_dir.as_deref(), seed)
        }
        Command::Feasibility { io } => commands::feasibility(io.config.as_deref(), io.out_dir.as_deref()),
        Command::Simulate { io, variant, seed } => {
            commands::simulate(io.config.as_deref(), &io.out_dir, variant, seed)
        }
        Command::Sweep { io, seed, jobs } => commands::sweep(io.config.as_deref(), &io.out_dir, &seed, jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
