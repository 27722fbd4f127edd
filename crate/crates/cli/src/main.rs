use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use immortal_cli::commands::{self, AnalyzeArgs, CliError, Outcome};
use immortal_cli::Format;

#[derive(Parser)]
#[command(name = "itbias", version, about = "Immortal-time bias laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DAG utilities.
    Dag {
        #[command(subcommand)]
        command: DagCommand,
    },
    /// Simulate a cohort and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile a cohort through one design and estimate the exposure effect.
    Analyze {
        #[arg(long)]
        design: String,
        #[arg(long)]
        estimator: String,
        #[arg(long)]
        cohort: PathBuf,
        /// Follow-up periods of the simulated cohort.
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        /// Matching seed for prescription time-distribution matching.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the compiled analysis dataset.
        #[arg(long)]
        dataset_out: Option<PathBuf>,
    },
    /// Run a replicated experiment and write report files.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Report format; both are written when omitted.
        #[arg(long)]
        format: Option<Format>,
    },
}

#[derive(Subcommand)]
enum DagCommand {
    /// Print paths, classification and claims for a builtin figure or file.
    Check {
        target: String,
        /// Exposure node (repeatable); file targets only.
        #[arg(long = "exposure")]
        exposures: Vec<String>,
        /// Outcome node; file targets only.
        #[arg(long)]
        outcome: Option<String>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Dag {
            command: DagCommand::Check { target, exposures, outcome },
        } => commands::dag_check(&target, &exposures, outcome.as_deref()),
        Command::Simulate { config, seed, out } => commands::simulate(&config, seed, &out),
        Command::Analyze {
            design,
            estimator,
            cohort,
            horizon,
            tau,
            window,
            seed,
            dataset_out,
        } => commands::analyze(&AnalyzeArgs {
            design: &design,
            estimator: &estimator,
            cohort: &cohort,
            horizon,
            tau,
            window,
            seed,
            dataset_out: dataset_out.as_deref(),
        }),
        Command::Experiment {
            config,
            out,
            replicates,
            format,
        } => {
            let formats = match format {
                Some(f) => vec![f],
                None => vec![Format::Csv, Format::Svg],
            };
            commands::experiment(&config, out.as_deref(), replicates, &formats)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
