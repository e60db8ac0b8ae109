use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vlantree_cli::compare::compare_paths;
use vlantree_cli::runner::{output_dir, run};
use vlantree_cli::{CliError, Scenario};

/// Multi-spanning-tree traffic engineering experiments.
#[derive(Parser)]
#[command(name = "vlantree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write CSV reports plus a summary.
    Run {
        scenario: PathBuf,
        /// Output directory; overrides the scenario's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed; overrides the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Check invariants only; write nothing.
        #[arg(long)]
        check: bool,
    },
    /// Show numeric differences between two reports (files or directories).
    Compare { a: PathBuf, b: PathBuf },
}

fn run_command(path: &Path, out: Option<&Path>, seed: Option<u64>, check: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let scenario = Scenario::parse(&text).map_err(|e| match e {
        CliError::Parse { line, msg } => CliError::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let report = run(&scenario, base, seed)?;
    print!("{}", report.summary());
    if !check {
        let dir = output_dir(&scenario, base, out);
        report.write_to(&dir)?;
        println!("reports written to {}", dir.display());
    }
    report.status()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run { scenario, out, seed, check } => run_command(scenario, out.as_deref(), *seed, *check),
        Command::Compare { a, b } => compare_paths(a, b).map(|deltas| {
            for d in deltas {
                println!("{d}");
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vlantree: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
