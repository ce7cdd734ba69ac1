//! `ratecert`: batch front end for rate and gain certification.
//!
//! Exit codes: 0 success, 1 config error, 2 infeasible at the lowest rate,
//! 3 numerical trouble.

mod analyze;
mod compare;
mod config;
mod output;
mod region;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "ratecert", version, about = "Certified rate and gain bounds for beta-stable ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bisect the rate and minimize the gain at every sweep point.
    Analyze(#[command(flatten)] Args),
    /// Estimate the rate from simulated trajectories.
    Simulate(#[command(flatten)] Args),
    /// Certified regions and their nesting for a list of rates.
    Region(#[command(flatten)] Args),
    /// Fixed-gain against free-gain rational rates and the simulated rate.
    Compare(#[command(flatten)] Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// Per-solve status; the order is the severity used for the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
    Infeasible,
    NumericalTrouble,
}

pub struct Outcome(Status);

impl Outcome {
    pub fn from_statuses(s: impl IntoIterator<Item = Status>) -> Self {
        Outcome(s.into_iter().max().unwrap_or(Status::Ok))
    }

    fn code(&self) -> u8 {
        match self.0 {
            Status::Ok => 0,
            Status::Error => 1,
            Status::Infeasible => 2,
            Status::NumericalTrouble => 3,
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(o) => ExitCode::from(o.code()),
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<Outcome, Failure> {
    let (Command::Analyze(a) | Command::Simulate(a) | Command::Region(a) | Command::Compare(a)) = &cmd;
    let mut loaded = config::load(&a.config)?;
    if let Some(seed) = a.seed {
        loaded.config.seed = seed;
    }
    let out: PathBuf = a
        .out
        .clone()
        .or_else(|| loaded.config.output.clone())
        .unwrap_or_else(|| PathBuf::from("ratecert-out"));
    let jobs = a
        .jobs
        .or(loaded.config.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Failure::Config("jobs must be at least 1".into()));
    }
    std::fs::create_dir_all(&out)?;
    match cmd {
        Command::Analyze(_) => analyze::run(&loaded, &out, jobs),
        Command::Simulate(_) => simulate::run(&loaded, &out, jobs),
        Command::Region(_) => region::run(&loaded, &out, jobs),
        Command::Compare(_) => compare::run(&loaded, &out, jobs),
    }
}
