use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tpe_as::harness::{self, report, ExperimentConfig, RunOptions};
use tpe_as::portfolio::{StrategyKind, StrategySpec};

#[derive(Parser)]
#[command(
    name = "tpe-as",
    version,
    about = "Variance-aware TPE search over synthetic portfolio black boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Number of worker threads (default: all cores).
        #[arg(long)]
        parallelism: Option<usize>,
        /// Replace existing outputs instead of refusing to start.
        #[arg(long)]
        overwrite: bool,
    },
    /// Print median and IQR of max_f and variance_f per method, strategy and scenario.
    Report { summary: PathBuf },
    /// Print the parameter space of a strategy preset as JSON.
    ShowSpace { strategy: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> tpe_as::Result<ExitCode> {
    match command {
        Command::Run {
            config,
            output_dir,
            parallelism,
            overwrite,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let options = RunOptions {
                output_dir,
                parallelism,
                overwrite,
            };
            let outcome = harness::run_experiment(&config, &options)?;
            for (run_id, message) in &outcome.failures {
                eprintln!("run {run_id} failed: {message}");
            }
            println!(
                "{} runs, {} failed; summary at {}",
                outcome.rows.len(),
                outcome.failures.len(),
                outcome.summary_path().display()
            );
            Ok(if outcome.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { summary } => {
            println!("{}", report::report(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::ShowSpace { strategy } => {
            let kind = StrategyKind::from_name(&strategy)
                .ok_or_else(|| tpe_as::Error::Config(format!("unknown strategy `{strategy}`")))?;
            let space = StrategySpec::preset(kind).param_space();
            println!("{}", serde_json::to_string_pretty(&space)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
