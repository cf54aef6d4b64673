//! Batch front end: one experiment per config file, reproducible runs, and
//! manifest-hashed artifacts.
//!
//! Exit codes: 0 success, 2 invalid config or arguments, 3 resource cap
//! (including an output directory locked by another run), 4 numerical or
//! estimation failure, 1 I/O failure.

mod config;
mod exec;
mod manifest;

use std::path::PathBuf;

use clap::Parser;

use aggrolab::rng::set_workers;
use aggrolab::{Error, Result};

use crate::config::{ExperimentConfig, Kind};

/// Environment variable overriding the worker count (the `--workers` flag
/// still wins over it).
const WORKERS_ENV: &str = "AGGROLAB_WORKERS";

#[derive(Parser)]
#[command(
    name = "aggrolab",
    version,
    about = "Config-driven aggregation experiments"
)]
struct Cli {
    /// Experiment kind; must match the config file's `kind` field.
    #[arg(value_enum)]
    kind: Kind,
    /// Path to the experiment config (JSON, one experiment per file).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread override (0 = one per CPU).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) | Error::Format(_) => 2,
        Error::ResourceCap(_) => 3,
        Error::Numerical(_) | Error::Estimation(_) => 4,
        Error::Io(_) => 1,
    }
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(text) => {
            let n = text.trim().parse::<usize>().map_err(|_| {
                Error::invalid(format!(
                    "{WORKERS_ENV} must be a nonnegative integer, got {text:?}"
                ))
            })?;
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::invalid(format!(
            "{WORKERS_ENV} is not valid unicode: {e}"
        ))),
    }
}

/// Loads the config, folds the command-line and environment overrides into
/// it (so the manifest echo reproduces the run as-is), and executes.
fn run_cli(cli: &Cli) -> Result<String> {
    let mut config = ExperimentConfig::load(&cli.config, cli.kind)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers.or(workers_from_env()?) {
        config.workers = workers;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    set_workers(config.workers);

    let (seed, workers) = (config.seed, config.workers);
    let (dir, manifest) = exec::run(config, seed, workers)?;
    Ok(format!(
        "{}[{} result files in {}]\n",
        manifest.render_summary(),
        manifest.outputs.len(),
        dir.display()
    ))
}

fn main() {
    let cli = Cli::parse();
    let outcome = run_cli(&cli);
    match outcome {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_classes() {
        assert_eq!(exit_code(&Error::invalid("x")), 2);
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
        assert_eq!(exit_code(&Error::ResourceCap("x".into())), 3);
        assert_eq!(exit_code(&Error::numerical("x")), 4);
        assert_eq!(exit_code(&Error::Estimation("x".into())), 4);
        let io = Error::Io(std::io::Error::other("x"));
        assert_eq!(exit_code(&io), 1);
    }

    #[test]
    fn cli_parses_the_documented_surface() {
        let cli = Cli::try_parse_from([
            "aggrolab",
            "diagnose",
            "--config",
            "exp.json",
            "--seed",
            "7",
            "--workers",
            "2",
            "--out",
            "runs/x",
        ])
        .unwrap();
        assert_eq!(cli.kind, Kind::Diagnose);
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.workers, Some(2));
        assert!(Cli::try_parse_from(["aggrolab", "transmogrify", "--config", "x"]).is_err());
        assert!(Cli::try_parse_from(["aggrolab", "simulate"]).is_err());
    }
}
