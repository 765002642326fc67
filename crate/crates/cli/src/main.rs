mod commands;
mod pool;
mod svg;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

/// Benchmark harness for hierarchical IK with an RCM constraint and
/// manipulability maximization.
#[derive(Debug, Parser)]
#[command(name = "ik-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Print progress and diagnostics to stderr (repeat for more).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check scenario and chain invariants. Exit 0 if all pass, 1 on a failed
    /// invariant, 2 if a file cannot be read or parsed.
    Validate {
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
    },
    /// Track the scenario path and write `<name>.json` and `<name>.csv`.
    Run(RunArgs),
    /// Run with and without manipulability optimization and write both
    /// reports plus `<name>_comparison.json`.
    Compare(RunArgs),
    /// Render SVG charts of one report or of an on/off pair.
    Plot {
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Scenario override, e.g. `Kt3=0`, `dt=0.002`, `n_steps=500`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Zero all wall-clock fields in written reports so repeated runs are
    /// byte-identical.
    #[arg(long)]
    deterministic: bool,
}

/// Exit codes: 1 invalid input or I/O failure, 2 unparsable input, 3 solver
/// or divergence failure during a run.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const INVALID: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const RUN: u8 = 3;

    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => commands::validate(&scenario, cli.verbose),
        Command::Run(args) => commands::run(&args.into(), cli.verbose),
        Command::Compare(args) => commands::compare(&args.into(), cli.verbose),
        Command::Plot { reports, out } => commands::plot(&reports, &out, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

impl From<RunArgs> for commands::RunOptions {
    fn from(a: RunArgs) -> Self {
        Self {
            scenarios: a.scenario,
            out: a.out,
            overrides: a.overrides,
            deterministic: a.deterministic,
        }
    }
}
