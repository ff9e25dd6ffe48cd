use std::path::PathBuf;
use std::process::ExitCode;

use approxevo::envs::EnvKind;
use approxevo::experiment::{self, ExperimentConfig};
use approxevo::Error;
use clap::{Parser, Subcommand};

/// Genetic algorithms with surrogate fitness on Blackjack and Frozen Lake.
#[derive(Parser)]
#[command(name = "approxevo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of every algorithm and sample rate in a config.
    Run {
        /// Flat TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in config applied before the file (blackjack, blackjack_desk, frozenlake, frozenlake_desk).
        #[arg(long)]
        preset: Option<String>,
        /// `key=value` override, applied last; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory, shorthand for `--set output_dir=...`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare replicate results against a single-group reference.
    Compare {
        /// `replicates.csv` or a directory holding one.
        candidate: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print an environment's genome encoding.
    Inspect { env: String },
}

fn usage_error(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn runtime_error(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn run(config: Option<PathBuf>, preset: Option<String>, mut overrides: Vec<String>, out: Option<PathBuf>) -> ExitCode {
    if let Some(out) = out {
        overrides.push(format!("output_dir={}", out.display()));
    }
    let cfg = match ExperimentConfig::load(config.as_deref(), preset.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => return usage_error(e),
    };
    let outcome = match experiment::run_experiment(&cfg) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => return usage_error(e),
        Err(e) => return runtime_error(e),
    };
    match experiment::write_outcome(&cfg, &outcome) {
        Ok(dir) => {
            print!("{}", outcome.summary_csv);
            eprintln!("results written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => runtime_error(e),
    }
}

fn compare(candidate: PathBuf, reference: PathBuf, rounds: usize, seed: u64, out: Option<PathBuf>) -> ExitCode {
    if rounds == 0 {
        return usage_error(Error::Config("--rounds must be at least 1".into()));
    }
    let table = match experiment::compare(&candidate, &reference, rounds, seed) {
        Ok(t) => t,
        Err(e @ (Error::Io(_) | Error::Schema(_))) => return usage_error(e),
        Err(e) => return runtime_error(e),
    };
    match out {
        Some(path) => match std::fs::write(&path, table) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => runtime_error(e.into()),
        },
        None => {
            print!("{table}");
            ExitCode::SUCCESS
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            preset,
            overrides,
            out,
        } => run(config, preset, overrides, out),
        Command::Compare {
            candidate,
            reference,
            rounds,
            seed,
            out,
        } => compare(candidate, reference, rounds, seed, out),
        Command::Inspect { env } => match env.parse::<EnvKind>() {
            Ok(kind) => {
                print!("{}", experiment::inspect(kind));
                ExitCode::SUCCESS
            }
            Err(e) => usage_error(e),
        },
    }
}
