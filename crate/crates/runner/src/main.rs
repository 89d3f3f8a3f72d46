use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use qdd_runner::{presets, run_experiment, ExperimentConfig, ExperimentKind, Overrides, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Eval,
    Optimize,
    Sweep,
    Boundary,
    Chernoff,
    Validate,
}

#[derive(Debug, Parser)]
#[command(name = "qdd", about = "Distributed detection experiments: sweeps, boundaries and validation")]
struct Cli {
    /// Experiment kind; overrides the config's `kind`.
    command: Option<Command>,
    /// JSON config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named parameter set: fig3 .. fig8.
    #[arg(long)]
    preset: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per axis for two-sensor evaluation.
    #[arg(long)]
    grid: Option<usize>,
    /// Optimizer starts.
    #[arg(long)]
    starts: Option<usize>,
    /// Objective evaluations per optimizer start.
    #[arg(long)]
    max_evals: Option<usize>,
    /// Monte Carlo trials.
    #[arg(long)]
    trials: Option<u64>,
}

fn kind(c: Command) -> ExperimentKind {
    match c {
        Command::Eval => ExperimentKind::Eval,
        Command::Optimize => ExperimentKind::Optimize,
        Command::Sweep => ExperimentKind::Sweep,
        Command::Boundary => ExperimentKind::Boundary,
        Command::Chernoff => ExperimentKind::Chernoff,
        Command::Validate => ExperimentKind::Validate,
    }
}

fn run(cli: Cli) -> Result<i32, RunError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        kind: cli.command.map(kind),
        out: cli.out,
        seed: cli.seed,
        grid: cli.grid,
        starts: cli.starts,
        max_evals: cli.max_evals,
        trials: cli.trials,
    });
    let summary = run_experiment(&cfg)?;
    print!("{}", summary.text);
    for p in &summary.outputs {
        println!("wrote {}", p.display());
    }
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
