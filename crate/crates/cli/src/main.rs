//! Command-line front end for the sectorlab experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sectorlab::experiments::{run, ExperimentConfig, ExperimentKind};
use sectorlab::Error;

#[derive(Parser)]
#[command(name = "sectorlab", version, about = "Sector decompositions and randomized dispersive experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the order conditions of a dispersion symbol.
    SymbolsCheck(RunArgs),
    /// Build a sector atlas and probe its partition of unity.
    AtlasBuild(RunArgs),
    /// Build a basis net and choose sector bases.
    BasisFind(RunArgs),
    /// Draw a Wiener randomization of the configured field.
    Randomize(RunArgs),
    /// Evolve the configured field under the linear flow.
    Evolve(RunArgs),
    /// Enumerate ternary trees and evaluate the expansion terms.
    Trees(RunArgs),
    /// Monte Carlo survival table of an expansion term.
    Tails(RunArgs),
    /// Picard iteration for the remainder equation.
    Picard(RunArgs),
    /// Solve the cubic equation from randomized data.
    Solve(RunArgs),
    /// Regularity threshold tables.
    Thresholds(RunArgs),
    /// Slope regression for the directional maximal estimate.
    SlopeMaximal(RunArgs),
    /// Slope regression for the directional smoothing estimate.
    SlopeSmoothing(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::SymbolsCheck(a) => (ExperimentKind::SymbolsCheck, a),
            Command::AtlasBuild(a) => (ExperimentKind::AtlasBuild, a),
            Command::BasisFind(a) => (ExperimentKind::BasisFind, a),
            Command::Randomize(a) => (ExperimentKind::Randomize, a),
            Command::Evolve(a) => (ExperimentKind::Evolve, a),
            Command::Trees(a) => (ExperimentKind::Trees, a),
            Command::Tails(a) => (ExperimentKind::Tails, a),
            Command::Picard(a) => (ExperimentKind::Picard, a),
            Command::Solve(a) => (ExperimentKind::Solve, a),
            Command::Thresholds(a) => (ExperimentKind::Thresholds, a),
            Command::SlopeMaximal(a) => (ExperimentKind::SlopeMaximal, a),
            Command::SlopeSmoothing(a) => (ExperimentKind::SlopeSmoothing, a),
        }
    }
}

enum Outcome {
    Pass,
    VerdictFailed,
}

fn execute(kind: ExperimentKind, args: RunArgs) -> anyhow::Result<Outcome> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_toml_for(&text, kind)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let dir = args.out.or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let output = run(&config)?;
    let paths = output.write(&dir).with_context(|| format!("writing outputs to {}", dir.display()))?;
    println!("{}", serde_json::to_string(&output.summary)?);
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(match output.verdict {
        Some(false) => {
            eprintln!("verdict: FAIL");
            Outcome::VerdictFailed
        }
        Some(true) => {
            eprintln!("verdict: PASS");
            Outcome::Pass
        }
        None => Outcome::Pass,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed) => ExitCode::from(2),
        Err(e) => {
            if let Some(inner) = e.downcast_ref::<Error>() {
                eprintln!("error: {inner}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(1)
        }
    }
}
