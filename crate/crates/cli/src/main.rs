//! Command-line pipeline for the handover motion toolkit: synthetic data,
//! model training and evaluation, joint-importance analysis, dataset
//! statistics and closed-loop controller simulation.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process;

#[derive(Parser, Debug)]
#[command(
    name = "handover",
    version,
    about = "Hip-mounted robot-arm handover pipeline: data, models, analysis, simulation"
)]
struct Cli {
    /// JSON run config; missing sections use built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root (overrides config `output_dir` and $HANDOVER_HOME).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Root seed; every component derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic mocap corpus and save it as CSV + manifest.
    SynthData(commands::SynthDataArgs),
    /// Train a model on the corpus; writes a checkpoint and a CSV log.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint; writes the per-activity report CSV.
    Eval(commands::EvalArgs),
    /// Rank joints by mean gradient magnitude of a trained model.
    Importance(commands::ImportanceArgs),
    /// Run scripted handover episodes against a controller.
    Simulate(commands::SimulateArgs),
    /// Corpus statistics: durations, transfer and palm clouds, SVG scatters.
    Stats(commands::StatsArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            process::exit(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        process::exit(2);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = config::resolve_out(cli.out, &config);
    std::fs::create_dir_all(&out)?;
    let ctx = commands::Context { config, out };
    match &cli.command {
        Command::SynthData(args) => commands::synth_data(&ctx, args),
        Command::Train(args) => commands::train(&ctx, args),
        Command::Eval(args) => commands::eval(&ctx, args),
        Command::Importance(args) => commands::importance(&ctx, args),
        Command::Simulate(args) => commands::simulate(&ctx, args),
        Command::Stats(args) => commands::stats(&ctx, args),
    }
}
