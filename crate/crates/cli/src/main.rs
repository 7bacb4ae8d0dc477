//! Config-driven front end for the softtrellis toolkit.
//!
//! Every subcommand reads one JSON configuration (unknown keys rejected),
//! echoes the effective values into its output directory, and writes results
//! only there. Reruns with identical config and seed reproduce the outputs
//! byte for byte. Exit codes: 0 on success, 2 for configuration problems,
//! 3 for runtime or numerical failures.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "softtrellis",
    version,
    about = "Serially concatenated soft-modulator links: profiling, decoding, simulation, training"
)]
struct Cli {
    /// Worker threads for batched decoding and Monte-Carlo sweeps
    /// (default: all cores). Results do not depend on the thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Memory profiles and stream health for a weights file or encoder.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Override the contribution threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Build a finite-state symbol table and save it.
    BuildTrellis {
        #[command(flatten)]
        run: RunArgs,
        /// Override the contribution threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run the receiver on a file of channel observations.
    Decode {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Monte-Carlo error-rate sweep over Eb/N0 points.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write whitespace-separated curve data for plotting.
        #[arg(long)]
        emit_plotdata: bool,
    },
    /// Fine-tune modulators loaded from weight files.
    Finetune {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train randomly initialized modulators from scratch.
    TrainInner {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate seeded random starting weights.
    GenWeights {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// A failed run, split by who has to fix it.
#[derive(Debug)]
pub enum Failure {
    /// The configuration or its referenced inputs are unusable (exit 2).
    Config(String),
    /// The computation itself failed (exit 3).
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "config error: {msg}"),
            Failure::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match &cli.cmd {
        Cmd::Analyze { run, threshold } => commands::analyze(run, *threshold),
        Cmd::BuildTrellis { run, threshold } => commands::build_trellis(run, *threshold),
        Cmd::Decode { run } => commands::decode(run),
        Cmd::Simulate { run, emit_plotdata } => commands::simulate(run, *emit_plotdata),
        Cmd::Finetune { run } => commands::train(run, commands::TrainKind::Finetune),
        Cmd::TrainInner { run } => commands::train(run, commands::TrainKind::FromScratch),
        Cmd::GenWeights { run } => commands::gen_weights(run),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("{failure}");
            failure.exit_code()
        }
    };
    std::process::exit(code);
}
