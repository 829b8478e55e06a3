//! `skippred`: synthesize a session corpus, extract features, tune, train
//! the position model bank, predict and report.

mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run_config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "skippred",
    version,
    about = "Sequential skip prediction pipeline"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding all stage artifacts.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Solutions to run, e.g. `9`, `1..12` or `1,2,9`.
    #[arg(long, global = true)]
    solutions: Option<String>,
    /// Fraction of training sessions used by `tune`.
    #[arg(long, global = true)]
    sample: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic track catalogue and session log.
    Synth,
    /// Hold out test sessions and write the feature matrix.
    Extract,
    /// Grid-search booster parameters on a sample of training sessions.
    Tune,
    /// Train the ten position models.
    Train,
    /// Write a submission for the held-out sessions.
    Predict,
    /// Score the requested solutions on the held-out sessions.
    Evaluate,
    /// Every stage in order.
    RunAll,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let config = match RunConfig::load(
        cli.global.config.as_deref(),
        cli.global.seed,
        cli.global.workdir,
        cli.global.solutions,
        cli.global.sample,
    ) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Synth => commands::synth(&config),
        Command::Extract => commands::extract(&config),
        Command::Tune => commands::tune(&config),
        Command::Train => commands::train(&config),
        Command::Predict => commands::predict(&config),
        Command::Evaluate => commands::evaluate(&config),
        Command::RunAll => commands::run_all(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
