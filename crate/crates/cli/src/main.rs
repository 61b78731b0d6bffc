use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use cwave::config::{validate_with_overrides, RunConfig};
use cwave::pipeline::{criteria_table, Pipeline, Stage};
use cwave::Error;

/// Composite-wave stability laboratory.
///
/// The worker thread count follows `RAYON_NUM_THREADS`.
#[derive(Parser)]
#[command(name = "cwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `out_dir` from the config, else `cwave-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one config entry, e.g. `--stage-override grid.n1=1024`.
    #[arg(long = "stage-override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Rarefaction, contact and interface-curve checks.
    Profiles,
    /// Periodic cell problems around both end states.
    Cell,
    /// Background state, source norms and the residual refinement study.
    Ansatz,
    /// Full channel run with norm series and field snapshots.
    Simulate,
    /// Fits of the norm series written by `simulate`.
    Analyze,
    /// Every stage plus the acceptance table.
    VerifyAll,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Profiles => Stage::Profiles,
            Command::Cell => Stage::Cell,
            Command::Ansatz => Stage::Ansatz,
            Command::Simulate => Stage::Simulate,
            Command::Analyze => Stage::Analyze,
            Command::VerifyAll => Stage::VerifyAll,
        }
    }
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default().canonical(),
    };
    Ok(validate_with_overrides(&text, &common.overrides)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            match e.downcast_ref::<Error>() {
                Some(Error::Config(list)) => {
                    eprintln!("invalid configuration:");
                    for item in list {
                        eprintln!("  {item}");
                    }
                }
                _ => eprintln!("error: {e:#}"),
            }
            return ExitCode::from(2);
        }
    };
    let out = cli
        .common
        .out
        .clone()
        .or_else(|| config.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cwave-out"));
    let stage = cli.command.stage();
    let mut pipeline = match Pipeline::new(config, &out) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = pipeline.run(stage);
    let manifest = match pipeline.finish(outcome) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("stage `{}` failed: {e}", stage.name());
            eprintln!("partial manifest: {}", out.join(cwave::io::MANIFEST).display());
            return ExitCode::FAILURE;
        }
    };
    for c in &manifest.checks {
        println!("{} {:<28} {}", if c.pass { "pass" } else { "FAIL" }, c.id, c.detail);
    }
    if stage == Stage::VerifyAll {
        println!();
        for line in criteria_table(&manifest.checks) {
            println!("criterion {:>2}: {}", line.criterion, if line.pass { "PASS" } else { "FAIL" });
        }
    }
    println!("{} files listed in {}", manifest.files.len(), out.join(cwave::io::MANIFEST).display());
    if manifest.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
