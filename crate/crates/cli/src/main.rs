//! `beamtrack` — reproducible runs of the LiDAR-aided beam prediction
//! pipeline: dataset simulation, model training, accuracy tables, the
//! operation-window experiment, overhead accounting, and gradient checking.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 data-format error,
//! 4 check failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use beamtrack_cli::commands;
use beamtrack_core::tracker::TrackerMode;
use commands::{
    cmd_evaluate, cmd_gradcheck, cmd_opwindow, cmd_overhead, cmd_simulate, cmd_train,
    CliResult, EvaluateArgs, OpWindowArgs, SimulateArgs, SplitSide, TrainArgs,
};

#[derive(Parser)]
#[command(
    name = "beamtrack",
    version,
    about = "LiDAR-aided mmWave beam prediction and tracking",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic V2I dataset (binary file + manifest).
    Simulate {
        /// Run configuration (TOML); built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
        /// Override the top-level seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of sequences.
        #[arg(long)]
        sequences: Option<usize>,
    },
    /// Train a tracker on a dataset and save a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input dataset path.
        #[arg(long)]
        dataset: PathBuf,
        /// Model kind: "lidar" or "baseline".
        #[arg(long)]
        mode: String,
        /// Output checkpoint path (loss curve lands next to it).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Compute the top-k accuracy table of a checkpoint on one split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Which side of the training split to score.
        #[arg(long, default_value = "test")]
        split: String,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the operation-window experiment with recursive beam feedback.
    Opwindow {
        /// Baseline-mode checkpoint.
        #[arg(long)]
        baseline: PathBuf,
        /// LiDAR-mode checkpoint.
        #[arg(long)]
        lidar: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Largest operation window; defaults to the config echo.
        #[arg(long)]
        l_max: Option<usize>,
        /// Top-k of the accuracy axis; defaults to the config echo.
        #[arg(long)]
        k: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-step beam-training overhead ratio of the LiDAR-aided
    /// system relative to the baseline cycle.
    Overhead {
        /// Operation-window length.
        #[arg(long, default_value_t = 3)]
        l: usize,
        /// Observation window (refresh length).
        #[arg(long, default_value_t = 8)]
        w: usize,
        /// Beams refined per prediction step.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Codebook size (exhaustive-search cost).
        #[arg(long, default_value_t = 64)]
        m: usize,
    },
    /// Verify analytic gradients of both model modes against central finite
    /// differences; nonzero exit above 1e-4 relative error.
    Gradcheck {
        /// Check the configured model dimensions instead of the built-in
        /// tiny probe (slower).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate { config, out, seed, sequences } => cmd_simulate(SimulateArgs {
            config: config.as_deref(),
            out: &out,
            seed,
            sequences,
        }),
        Command::Train {
            config,
            dataset,
            mode,
            out,
            seed,
            epochs,
            batch_size,
            learning_rate,
        } => {
            let mode = TrackerMode::parse(&mode)?;
            cmd_train(TrainArgs {
                config: config.as_deref(),
                dataset: &dataset,
                mode,
                out: &out,
                seed,
                epochs,
                batch_size,
                learning_rate,
            })
        }
        Command::Evaluate { checkpoint, dataset, split, out } => {
            let side = SplitSide::parse(&split)?;
            cmd_evaluate(EvaluateArgs {
                checkpoint: &checkpoint,
                dataset: &dataset,
                side,
                out: &out,
            })
        }
        Command::Opwindow { baseline, lidar, dataset, split, l_max, k, out } => {
            let side = SplitSide::parse(&split)?;
            cmd_opwindow(OpWindowArgs {
                baseline: &baseline,
                lidar: &lidar,
                dataset: &dataset,
                side,
                l_max,
                k,
                out: &out,
            })
        }
        Command::Overhead { l, w, k, m } => cmd_overhead(l, w, k, m),
        Command::Gradcheck { config, seed } => cmd_gradcheck(config.as_deref(), seed),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
