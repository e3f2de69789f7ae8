use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use nearcrit::config::ExperimentKind;
use nearcrit_cli::{execute, load_config, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "nearcrit", version, about = "Simulate and check near-critical branching processes with dependent immigration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run(Common),
    /// Tabulate and plot the limit curves of the config's model.
    Curves(Common),
    /// Report the trend of each model condition along the probe rows.
    Conditions(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base directory for run directories; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (common, kind) = match cli.command {
        Command::Run(c) => (c, None),
        Command::Curves(c) => (c, Some(ExperimentKind::Curves)),
        Command::Conditions(c) => (c, Some(ExperimentKind::Conditions)),
    };
    let config = load_config(&common.config)?;
    let options = RunOptions {
        out: common.out,
        seed: common.seed,
        threads: common.threads,
        verbose: common.verbose,
        kind_override: kind,
    };
    let outcome = execute(&config, &options).with_context(|| format!("running {}", common.config.display()))?;
    for r in &outcome.reports {
        println!("{}", r.line());
    }
    println!("{}", outcome.dir.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<CliError>().is_some_and(CliError::is_config);
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
