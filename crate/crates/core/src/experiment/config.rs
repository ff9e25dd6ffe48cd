use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{Algorithm, RunConfig};
use crate::envs::{blackjack, frozen_lake, Blackjack, EnvKind, Environment, FrozenLake, LakeMap};
use crate::{Error, Result};

/// Named configurations shipped with the crate.
pub const PRESETS: [(&str, &str); 4] = [
    ("blackjack", include_str!("../../presets/blackjack.toml")),
    ("blackjack_desk", include_str!("../../presets/blackjack_desk.toml")),
    ("frozenlake", include_str!("../../presets/frozenlake.toml")),
    ("frozenlake_desk", include_str!("../../presets/frozenlake_desk.toml")),
];

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown preset `{name}`; known: {}", names.join(", ")))
        })
}

/// A replicated experiment: every algorithm at every sample rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub env_games: usize,
    pub max_steps: usize,
    /// Custom Frozen Lake map file; the standard 8x8 map when absent.
    pub map: Option<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub sample_rates: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub permutation_rounds: usize,
    pub output_dir: PathBuf,
    /// Template for every run; algorithm, sample rate and seed are filled in per run.
    pub run: RunConfig,
}

/// Parses a flat TOML table into `(key, value)` strings. Arrays become
/// comma-separated lists.
pub fn parse_toml(text: &str) -> Result<Vec<(String, String)>> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(format!("bad config file: {e}")))?;
    table
        .into_iter()
        .map(|(k, v)| {
            let value = match &v {
                toml::Value::Array(items) => items
                    .iter()
                    .map(|item| scalar(&k, item))
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                _ => scalar(&k, &v)?,
            };
            Ok((k, value))
        })
        .collect()
}

fn scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(Error::Config(format!("`{key}` must be a plain value or a list"))),
    }
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("`{key}` is empty")));
    }
    Ok(items)
}

fn parsed<T: std::str::FromStr<Err = Error>>(value: &str) -> Result<T> {
    value.parse()
}

impl ExperimentConfig {
    /// Defaults for an environment before any keys are applied.
    pub fn defaults(env: EnvKind) -> Self {
        let (env_games, spec) = match env {
            EnvKind::Blackjack => (blackjack::DEFAULT_GAMES, blackjack::genome_spec()),
            EnvKind::FrozenLake => (frozen_lake::DEFAULT_GAMES, LakeMap::standard().genome_spec()),
        };
        Self {
            env,
            env_games,
            max_steps: frozen_lake::DEFAULT_MAX_STEPS,
            map: None,
            algorithms: vec![Algorithm::Approx],
            sample_rates: vec![0.2],
            replicates: 20,
            seed: 0,
            permutation_rounds: 10_000,
            output_dir: PathBuf::from("results"),
            run: RunConfig::preset(env, spec),
        }
    }

    /// Builds a config from key/value pairs; later pairs win. `env` is
    /// required and picks the defaults the other keys start from.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let env = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "env")
            .ok_or_else(|| Error::Config("`env` is required (blackjack or frozen_lake)".into()))?;
        let mut cfg = Self::defaults(parsed(&env.1)?);
        for (k, v) in pairs {
            cfg.apply(k, v)?;
        }
        if let Some(path) = &cfg.map {
            if cfg.env != EnvKind::FrozenLake {
                return Err(Error::Config("`map` only applies to frozen_lake".into()));
            }
            let map = LakeMap::load(path).map_err(|e| Error::Config(format!("map: {e}")))?;
            cfg.run.genome_spec = map.genome_spec();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads an optional config file and preset, then applies overrides.
    pub fn load(path: Option<&Path>, preset_name: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(name) = preset_name {
            pairs.extend(parse_toml(preset(name)?)?);
        }
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            pairs.extend(parse_toml(&text)?);
        }
        for o in overrides {
            pairs.push(parse_override(o)?);
        }
        Self::from_pairs(&pairs)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let run = &mut self.run;
        match key {
            "env" => {}
            "env_games" => self.env_games = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "map" => self.map = Some(PathBuf::from(value)),
            "algorithm" => {
                self.algorithms = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parsed)
                    .collect::<Result<_>>()?
            }
            "sample_rate" => self.sample_rates = list(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "permutation_rounds" => self.permutation_rounds = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "population_size" => run.population_size = num(key, value)?,
            "generations" => run.generations = num(key, value)?,
            "p_crossover" => run.operators.p_crossover = num(key, value)?,
            "p_mutation" => run.operators.p_mutation = num(key, value)?,
            "tournament_size" => run.operators.tournament_size = num(key, value)?,
            "crossover_points" => run.operators.crossover_points = num(key, value)?,
            "mutation_points" => run.operators.mutation_points = num(key, value)?,
            "model" => run.regressor.kind = parsed(value)?,
            "alpha" => run.regressor.alpha = num(key, value)?,
            "max_iter" => run.regressor.max_iter = num(key, value)?,
            "tol" => run.regressor.tol = num(key, value)?,
            "elm_hidden" => run.regressor.elm_hidden = num(key, value)?,
            "gen_weight" => run.regressor.gen_weight = parsed(value)?,
            "switch_condition" => run.switch.kind = parsed(value)?,
            "switch_threshold" => run.switch.threshold = num(key, value)?,
            "plateau_window" => run.switch.plateau_window = num(key, value)?,
            "plateau_delta" => run.switch.plateau_delta = num(key, value)?,
            "cv_folds" => run.switch.cv_folds = num(key, value)?,
            "cosine_aggregation" => run.switch.cosine_aggregation = parsed(value)?,
            "sampling_strategy" => run.sampler.kind = parsed(value)?,
            "init" => run.init = parsed(value)?,
            "novelty_neighbors" => run.novelty_neighbors = num(key, value)?,
            "novelty_iterations" => run.novelty_iterations = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.env_games == 0 {
            return Err(Error::Config("env_games must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.permutation_rounds == 0 {
            return Err(Error::Config("permutation_rounds must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithm given".into()));
        }
        for &rate in &self.sample_rates {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::Config(format!("sample_rate {rate} outside (0, 1]")));
            }
        }
        self.run.validate()
    }

    pub fn environment(&self) -> Result<Environment> {
        Ok(match self.env {
            EnvKind::Blackjack => Environment::Blackjack(Blackjack {
                games: self.env_games,
            }),
            EnvKind::FrozenLake => Environment::FrozenLake(FrozenLake {
                map: match &self.map {
                    Some(path) => LakeMap::load(path)?,
                    None => LakeMap::standard(),
                },
                games: self.env_games,
                max_steps: self.max_steps,
            }),
        })
    }

    /// `(algorithm, sample_rate)` groups in output order. Algorithms that
    /// ignore the sample rate appear once, with rate 1.
    pub fn groups(&self) -> Vec<(Algorithm, f64)> {
        let mut out = Vec::new();
        for &a in &self.algorithms {
            if a.uses_sample_rate() {
                out.extend(self.sample_rates.iter().map(|&r| (a, r)));
            } else {
                out.push((a, 1.0));
            }
        }
        out.dedup();
        out
    }
}
