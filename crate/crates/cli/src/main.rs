//! `wme`: Word Mover's Distance and Word Mover's Embedding from the command
//! line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Flags, Settings};

#[derive(Parser, Debug)]
#[command(name = "wme", version, about = "Word Mover's Distance and Word Mover's Embedding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pairwise WMD matrix of a dataset.
    Wmd(Flags),
    /// WME feature matrix of a dataset, plus the basis that produced it.
    Embed(Flags),
    /// KNN over exact WMD with cross-validated k.
    Knn(Flags),
    /// WME features with a cross-validated linear classifier.
    TrainEval(Flags),
    /// Accuracy as a function of R or D_max.
    Sweep(Flags),
    /// Pearson correlation on semantic textual similarity files.
    Sts(Flags),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<wme_core::Error> for CliError {
    fn from(e: wme_core::Error) -> Self {
        use wme_core::Error as E;
        let message = e.to_string();
        match e {
            E::Numerical(_) => CliError::Numerical(message),
            E::InvalidParameter(_) => CliError::Config(message),
            _ => CliError::Data(message),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match &cli.command {
        Command::Wmd(f) => ("wmd", f),
        Command::Embed(f) => ("embed", f),
        Command::Knn(f) => ("knn", f),
        Command::TrainEval(f) => ("train-eval", f),
        Command::Sweep(f) => ("sweep", f),
        Command::Sts(f) => ("sts", f),
    };
    let settings = Settings::resolve(flags, std::env::var("WME_WORKERS").ok())?;
    if flags.print_config {
        print!("# wme {name}\n{}", settings.dump());
        return Ok(());
    }
    let workers = match settings.get::<usize>("workers")? {
        Some(0) => return Err(CliError::Config("workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Wmd(_) => commands::wmd(&settings),
        Command::Embed(_) => commands::embed(&settings),
        Command::Knn(_) => commands::knn(&settings),
        Command::TrainEval(_) => commands::train_eval(&settings),
        Command::Sweep(_) => commands::sweep(&settings),
        Command::Sts(_) => commands::sts(&settings),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wme: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
