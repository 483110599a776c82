//! `telerisk`: batch driver for the telematics claim-classification pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use telerisk::featurize::LeapMethod;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "telerisk", version, about = "Telematics claim classification: features, models, redundancy studies")]
pub struct Cli {
    /// Directory all relative paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// TOML configuration file (relative to the workdir).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print failures as one JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
    /// Raise log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Glm,
    Forest,
}

impl ModelKind {
    pub fn code(self) -> &'static str {
        match self {
            ModelKind::Glm => "glm",
            ModelKind::Forest => "forest",
        }
    }
}

fn parse_method(s: &str) -> Result<LeapMethod, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// Dataset identifier such as `D12_TL` or `D0_DL`.
    #[arg(long)]
    pub dataset: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fleet (trip and contract CSVs).
    Synth {
        #[arg(long)]
        n_vehicles: Option<usize>,
    },
    /// Parse and validate the input CSVs and report what is kept.
    Ingest,
    /// Build feature tables D_k for one method.
    Featurize {
        #[arg(long, value_parser = parse_method)]
        method: Option<LeapMethod>,
        /// Observation amount; all of 0..=12 when omitted.
        #[arg(long)]
        k: Option<u8>,
    },
    /// Fit the preprocessing recipe on the training rows and transform both parts.
    Prep {
        #[command(flatten)]
        dataset: DatasetArg,
    },
    /// Cross-validated hyperparameter search.
    Tune {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, value_enum, default_value = "glm")]
        model: ModelKind,
    },
    /// Fit one model on the training rows.
    Fit {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, value_enum, default_value = "glm")]
        model: ModelKind,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        p_star: Option<usize>,
        #[arg(long)]
        n_star: Option<usize>,
    },
    /// Score the test rows with a fitted model and bootstrap the AUC.
    Eval {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, value_enum, default_value = "glm")]
        model: ModelKind,
        #[arg(long)]
        b: Option<usize>,
    },
    /// Full redundancy study over D_0..D_12 for one method.
    Study {
        #[arg(long, value_parser = parse_method)]
        method: Option<LeapMethod>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Summarize a finished study into plot-ready tables.
    Report {
        #[arg(long, value_parser = parse_method)]
        method: Option<LeapMethod>,
    },
}

fn fail(e: &CliError, json: bool) -> ExitCode {
    if json {
        eprintln!("{}", e.to_json());
    } else {
        eprintln!("error: {}", e.message);
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let error_json = std::env::args().any(|a| a == "--error-json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            if error_json {
                return fail(&CliError::usage(e.to_string()), true);
            }
            eprint!("{}", e.render());
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return fail(&CliError::usage("--jobs must be positive"), cli.error_json);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::usage(e.to_string()), cli.error_json);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, cli.error_json),
    }
}
