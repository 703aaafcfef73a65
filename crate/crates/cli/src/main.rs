//! `mixbridge` command-line tool.
//!
//! Every command writes its outputs and a `manifest.json` into `--out`;
//! `mixbridge replay --manifest <dir>/manifest.json --out <dir2>` re-runs it.
//! Set `MIXBRIDGE_THREADS` to fix the worker count; results do not depend
//! on it.

mod args;
mod commands;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use args::{BenchmarkArgs, EvaluateArgs, ReplayArgs, SampleArgs, SwissRollArgs, TrainArgs, TrajectoryArgs};

#[derive(Parser)]
#[command(name = "mixbridge", version, about = "Gaussian-mixture Schrödinger bridge solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Train(TrainArgs),
    Sample(SampleArgs),
    Trajectories(TrajectoryArgs),
    Evaluate(EvaluateArgs),
    MakeBenchmark(BenchmarkArgs),
    MakeSwissRoll(SwissRollArgs),
    Replay(ReplayArgs),
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MIXBRIDGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("MIXBRIDGE_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::Train(a) => commands::train_cmd(a),
        Command::Sample(a) => commands::sample_cmd(a),
        Command::Trajectories(a) => commands::trajectories_cmd(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::MakeBenchmark(a) => commands::make_benchmark_cmd(a),
        Command::MakeSwissRoll(a) => commands::make_swiss_roll_cmd(a),
        Command::Replay(a) => commands::replay_cmd(a),
    }
}
