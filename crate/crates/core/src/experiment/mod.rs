//! Replicated experiments driven by a flat config, and their result files.
//!
//! A run of an experiment writes three things into the output directory:
//!
//! - `replicates.csv`: one row per run with its best fitness and simulator calls.
//! - `summary.csv`: one row per `(algorithm, sample_rate)` group, compared
//!   against the `full_ga` group when the experiment has one.
//! - `runs/*.json`: the full per-generation log of every run.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run, Algorithm, RunConfig, RunResult};
use crate::envs::{blackjack, frozen_lake, EnvKind, LakeMap, Tile};
use crate::rng::{self, stream};
use crate::stats::{summarize, ReplicateSet, SummaryRow};
use crate::{Error, Result};

pub use config::{parse_override, parse_toml, preset, ExperimentConfig, PRESETS};

pub const SUMMARY_HEADER: &str =
    "algorithm,sample_rate,absolute_fitness,relative_fitness_pct,absolute_computations,relative_computations_pct,p_value";
pub const REPLICATES_HEADER: &str = "algorithm,sample_rate,replicate,seed,best_fitness,actual_evals";

/// Environment variable capping the worker threads of an experiment.
pub const THREADS_VAR: &str = "APPROXEVO_THREADS";

/// One finished run and where it sits in the experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLog {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub sample_rate: f64,
    pub replicate: usize,
    pub seed: u64,
    pub result: RunResult,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunLog>,
    pub replicates_csv: String,
    pub summary_csv: String,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::Config(format!("{THREADS_VAR} must be a positive integer"))),
            Ok(n) => Ok(Some(n)),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every replicate of every group. Results come back in group, then
/// replicate order whatever the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let jobs: Vec<(Algorithm, f64, usize)> = cfg
        .groups()
        .into_iter()
        .flat_map(|(a, r)| (0..cfg.replicates).map(move |i| (a, r, i)))
        .collect();
    let work = || -> Result<Vec<RunLog>> {
        jobs.par_iter()
            .map(|&(algorithm, sample_rate, replicate)| {
                let seed = cfg.seed.wrapping_add(replicate as u64);
                let mut run_cfg: RunConfig = cfg.run.clone();
                run_cfg.algorithm = algorithm;
                run_cfg.sampler.rate = sample_rate;
                run_cfg.seed = seed;
                Ok(RunLog {
                    env: cfg.env,
                    algorithm,
                    sample_rate,
                    replicate,
                    seed,
                    result: run(&run_cfg, &env)?,
                })
            })
            .collect()
    };
    let runs = match threads_from_env()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let replicates_csv = replicates_csv(&runs);
    let sets = group_sets(runs.iter().map(|r| {
        (r.algorithm, r.sample_rate, r.result.best_actual_fitness, r.result.actual_eval_count)
    }));
    let summary_csv = summary_csv(&sets, cfg.permutation_rounds, cfg.seed)?;
    Ok(ExperimentOutcome {
        runs,
        replicates_csv,
        summary_csv,
    })
}

fn rate_label(rate: f64) -> String {
    format!("{rate}")
}

fn replicates_csv(runs: &[RunLog]) -> String {
    let mut out = format!("{REPLICATES_HEADER}\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.algorithm,
            rate_label(r.sample_rate),
            r.replicate,
            r.seed,
            r.result.best_actual_fitness,
            r.result.actual_eval_count
        );
    }
    out
}

/// Replicate sets keyed by `(algorithm, sample_rate)` in first-seen order.
fn group_sets(
    rows: impl IntoIterator<Item = (Algorithm, f64, f64, u64)>,
) -> Vec<(String, String, ReplicateSet)> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut map: BTreeMap<(String, String), (Vec<f64>, Vec<u64>)> = BTreeMap::new();
    for (algorithm, rate, best, evals) in rows {
        let key = (algorithm.to_string(), rate_label(rate));
        let entry = map.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        entry.0.push(best);
        entry.1.push(evals);
    }
    order
        .into_iter()
        .map(|key| {
            let (f, c) = map.remove(&key).expect("every ordered key was inserted");
            let set = ReplicateSet {
                label: format!("{}@{}", key.0, key.1),
                best_fitness: f,
                eval_counts: c,
            };
            (key.0, key.1, set)
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn summary_line(algorithm: &str, rate: &str, row: Option<&SummaryRow>, set: &ReplicateSet) -> String {
    match row {
        Some(r) => format!(
            "{algorithm},{rate},{},{},{},{},{}",
            r.absolute_fitness,
            fmt_opt(r.relative_fitness),
            r.absolute_computations,
            fmt_opt(r.relative_computations),
            r.p_value
        ),
        None => format!(
            "{algorithm},{rate},{},NA,{},NA,NA",
            set.mean_fitness(),
            set.mean_evals()
        ),
    }
}

fn summary_csv(sets: &[(String, String, ReplicateSet)], rounds: usize, seed: u64) -> Result<String> {
    let reference = sets.iter().find(|(a, _, _)| a == Algorithm::FullGa.name()).map(|s| &s.2);
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (i, (algorithm, rate, set)) in sets.iter().enumerate() {
        let row = match reference {
            Some(reference) => {
                let mut r = rng::derive(seed, &[stream::STATS, i as u64]);
                Some(summarize(set, reference, rounds, &mut r)?)
            }
            None => None,
        };
        out.push_str(&summary_line(algorithm, rate, row.as_ref(), set));
        out.push('\n');
    }
    Ok(out)
}

fn run_log_name(r: &RunLog) -> String {
    format!("{}_{}_r{}.json", r.algorithm, rate_label(r.sample_rate), r.replicate)
}

/// Writes the result files and returns the directory they went to.
pub fn write_outcome(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<PathBuf> {
    let dir = &cfg.output_dir;
    let runs_dir = dir.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    std::fs::write(dir.join("replicates.csv"), &outcome.replicates_csv)?;
    std::fs::write(dir.join("summary.csv"), &outcome.summary_csv)?;
    for r in &outcome.runs {
        std::fs::write(runs_dir.join(run_log_name(r)), serde_json::to_string_pretty(r)?)?;
    }
    Ok(dir.clone())
}

fn replicates_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("replicates.csv")
    } else {
        path.to_path_buf()
    }
}

/// Reads a `replicates.csv` (or a directory containing one) into replicate sets.
pub fn read_replicates(path: &Path) -> Result<Vec<(String, String, ReplicateSet)>> {
    let file = replicates_path(path);
    let text = std::fs::read_to_string(&file)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(REPLICATES_HEADER) {
        return Err(Error::Schema(format!(
            "{}: header must be `{REPLICATES_HEADER}`",
            file.display()
        )));
    }
    let mut runs = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = || Error::Schema(format!("{} row {}: `{line}`", file.display(), n + 1));
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 6 {
            return Err(bad());
        }
        let algorithm: Algorithm = cells[0].parse().map_err(|_| bad())?;
        let sample_rate: f64 = cells[1].parse().map_err(|_| bad())?;
        cells[2].parse::<usize>().map_err(|_| bad())?;
        cells[3].parse::<u64>().map_err(|_| bad())?;
        let best: f64 = cells[4].parse().map_err(|_| bad())?;
        let evals: u64 = cells[5].parse().map_err(|_| bad())?;
        runs.push((algorithm, sample_rate, best, evals));
    }
    if runs.is_empty() {
        return Err(Error::Schema(format!("{} has no rows", file.display())));
    }
    Ok(group_sets(runs))
}

/// Summary rows of every candidate group against a single-group reference,
/// with an `identical` column marking p-values above the significance level.
pub fn compare(candidate: &Path, reference: &Path, rounds: usize, seed: u64) -> Result<String> {
    let candidates = read_replicates(candidate)?;
    let reference = read_replicates(reference)?;
    if reference.len() != 1 {
        return Err(Error::Schema(format!(
            "reference must hold exactly one algorithm/sample_rate group, found {}",
            reference.len()
        )));
    }
    let reference = &reference[0].2;
    let mut out = format!("{SUMMARY_HEADER},identical\n");
    for (i, (algorithm, rate, set)) in candidates.iter().enumerate() {
        let mut r = rng::derive(seed, &[stream::STATS, i as u64]);
        let row = summarize(set, reference, rounds, &mut r)?;
        let _ = writeln!(
            out,
            "{},{}",
            summary_line(algorithm, rate, Some(&row), set),
            row.indistinguishable()
        );
    }
    Ok(out)
}

/// Human-readable description of an environment's genome encoding.
pub fn inspect(env: EnvKind) -> String {
    let mut out = String::new();
    match env {
        EnvKind::Blackjack => {
            let spec = blackjack::genome_spec();
            let _ = writeln!(out, "env: blackjack");
            let _ = writeln!(out, "genome: {} genes, alphabet {} (0 = stand, 1 = hit)", spec.length, spec.alphabet_size);
            let _ = writeln!(out, "index = ((player_sum - 12) * 10 + (dealer_upcard - 1)) * 2 + usable_ace");
            let _ = writeln!(out, "states: {}", spec.length);
            let _ = writeln!(out, "index,player_sum,dealer_upcard,usable_ace");
            for i in 0..spec.length {
                let s = blackjack::BlackjackState::from_index(i);
                let _ = writeln!(out, "{i},{},{},{}", s.player_sum, s.dealer_upcard, u8::from(s.usable_ace));
            }
        }
        EnvKind::FrozenLake => {
            let map = LakeMap::standard();
            let spec = map.genome_spec();
            let _ = writeln!(out, "env: frozen_lake");
            let _ = writeln!(
                out,
                "genome: {} genes, alphabet {} ({})",
                spec.length,
                spec.alphabet_size,
                frozen_lake::ACTION_NAMES
                    .iter()
                    .enumerate()
                    .map(|(i, a)| format!("{i} = {a}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            let _ = writeln!(out, "map:\n{map}");
            let _ = writeln!(out, "indexed tiles: {}", map.indexable());
            let _ = writeln!(out, "index,row,col,tile");
            for pos in 0..map.rows() * map.cols() {
                if let Some(i) = map.frozen_index(pos) {
                    let tile = if map.tile(pos) == Tile::Start { 'S' } else { 'F' };
                    let _ = writeln!(out, "{i},{},{},{tile}", pos / map.cols(), pos % map.cols());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(dir: &Path) -> ExperimentConfig {
        let overrides: Vec<String> = [
            "env=frozen_lake",
            "env_games=50",
            "generations=3",
            "population_size=10",
            "replicates=2",
            "algorithm=full_ga,approx",
            "sample_rate=0.2,0.6",
            "permutation_rounds=200",
            "switch_condition=dataset_size",
            "switch_threshold=1",
        ]
        .iter()
        .map(|s| s.to_string())
        .chain([format!("output_dir={}", dir.display())])
        .collect();
        ExperimentConfig::load(None, None, &overrides).unwrap()
    }

    #[test]
    fn experiment_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(dir.path());
        let outcome = run_experiment(&cfg).unwrap();
        assert_eq!(outcome.runs.len(), 6);
        write_outcome(&cfg, &outcome).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("full_ga,1,"));
        assert!(lines[1].ends_with(",100,1"));
        assert!(lines[2].starts_with("approx,0.2,"));
        assert_eq!(std::fs::read_dir(dir.path().join("runs")).unwrap().count(), 6);
        let rep = std::fs::read_to_string(dir.path().join("replicates.csv")).unwrap();
        assert_eq!(rep.lines().count(), 7);
    }

    #[test]
    fn summary_without_reference() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick(dir.path());
        cfg.algorithms = vec![Algorithm::Approx];
        let outcome = run_experiment(&cfg).unwrap();
        for line in outcome.summary_csv.lines().skip(1) {
            assert!(line.ends_with(",NA,NA"), "{line}");
        }
    }

    #[test]
    fn compare_against_self() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick(dir.path());
        cfg.algorithms = vec![Algorithm::FullGa];
        let outcome = run_experiment(&cfg).unwrap();
        write_outcome(&cfg, &outcome).unwrap();
        let out = compare(dir.path(), dir.path(), 500, 0).unwrap();
        let row = out.lines().nth(1).unwrap();
        assert!(row.ends_with(",1,true"), "{row}");

        let multi = tempfile::tempdir().unwrap();
        let cfg = quick(multi.path());
        write_outcome(&cfg, &run_experiment(&cfg).unwrap()).unwrap();
        assert!(matches!(compare(dir.path(), multi.path(), 10, 0), Err(Error::Schema(_))));
        assert!(matches!(compare(&dir.path().join("missing.csv"), dir.path(), 10, 0), Err(Error::Io(_))));
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,b\n1,2\n").unwrap();
        assert!(matches!(compare(&bad, dir.path(), 10, 0), Err(Error::Schema(_))));
    }

    #[test]
    fn inspect_lists_states() {
        let bj = inspect(EnvKind::Blackjack);
        assert_eq!(bj.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count(), 200);
        let fl = inspect(EnvKind::FrozenLake);
        assert!(fl.contains("indexed tiles: 53"));
        let rows = fl.lines().skip_while(|l| *l != "index,row,col,tile").skip(1).count();
        assert_eq!(rows, 53);
    }
}
