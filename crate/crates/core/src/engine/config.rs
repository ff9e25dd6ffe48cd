use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::genome::GenomeSpec;
use crate::strategy::{SamplerConfig, SamplerKind, SwitchConfig, SwitchKind};
use crate::surrogate::RegressorConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Every individual simulated every generation.
    FullGa,
    /// Surrogate-assisted; sampled individuals show their actual fitness to selection.
    Approx,
    /// Surrogate-assisted; selection only ever sees predictions in prediction mode.
    HiddenApprox,
    /// Unsampled offspring inherit the mean of their parents' fitness.
    AvgInherit,
    /// Unsampled offspring inherit a similarity-weighted mean.
    PropInherit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::FullGa,
        Algorithm::Approx,
        Algorithm::HiddenApprox,
        Algorithm::AvgInherit,
        Algorithm::PropInherit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FullGa => "full_ga",
            Algorithm::Approx => "approx",
            Algorithm::HiddenApprox => "hidden_approx",
            Algorithm::AvgInherit => "avg_inherit",
            Algorithm::PropInherit => "prop_inherit",
        }
    }

    /// Whether the sample rate changes what the algorithm does.
    pub fn uses_sample_rate(self) -> bool {
        self != Algorithm::FullGa
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Uniform,
    Novelty,
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Init::Uniform),
            "novelty" => Ok(Init::Novelty),
            other => Err(Error::Config(format!("unknown init `{other}`"))),
        }
    }
}

/// Variation operator settings shared by the main GA and novelty initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Operators {
    pub p_crossover: f64,
    /// Chance that an offspring is mutated at all.
    pub p_mutation: f64,
    pub tournament_size: usize,
    pub crossover_points: usize,
    /// Loci changed when an offspring is mutated.
    pub mutation_points: usize,
}

impl Operators {
    pub fn validate(&self, spec: &GenomeSpec) -> Result<()> {
        for (name, p) in [("p_crossover", self.p_crossover), ("p_mutation", self.p_mutation)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.tournament_size == 0 {
            return Err(Error::Config("tournament_size must be at least 1".into()));
        }
        if self.crossover_points == 0 || self.crossover_points >= spec.length {
            return Err(Error::Config(format!(
                "crossover_points must lie in 1..{}",
                spec.length
            )));
        }
        if self.mutation_points == 0 || self.mutation_points > spec.length {
            return Err(Error::Config(format!(
                "mutation_points must lie in 1..={}",
                spec.length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub genome_spec: GenomeSpec,
    pub population_size: usize,
    /// Generations after the initial one.
    pub generations: usize,
    pub operators: Operators,
    pub regressor: RegressorConfig,
    pub switch: SwitchConfig,
    pub sampler: SamplerConfig,
    pub algorithm: Algorithm,
    pub init: Init,
    pub novelty_neighbors: usize,
    pub novelty_iterations: usize,
    pub seed: u64,
}

impl RunConfig {
    /// Standard hyperparameters for an environment.
    pub fn preset(env: EnvKind, genome_spec: GenomeSpec) -> Self {
        let operators = Operators {
            p_crossover: 0.7,
            p_mutation: 0.3,
            tournament_size: 4,
            crossover_points: 2,
            mutation_points: match env {
                EnvKind::Blackjack => 20,
                EnvKind::FrozenLake => 6,
            },
        };
        let (generations, regressor, switch) = match env {
            EnvKind::Blackjack => (
                200,
                RegressorConfig::ridge(0.3),
                SwitchConfig {
                    plateau_delta: 0.02,
                    ..SwitchConfig::new(SwitchKind::CosineSimilarity, 0.9)
                },
            ),
            EnvKind::FrozenLake => (
                50,
                RegressorConfig::lasso(0.65, 1000),
                SwitchConfig {
                    plateau_delta: 0.01,
                    ..SwitchConfig::new(SwitchKind::CvError, 0.02)
                },
            ),
        };
        Self {
            genome_spec,
            population_size: 100,
            generations,
            operators,
            regressor,
            switch,
            sampler: SamplerConfig {
                kind: SamplerKind::Similarity,
                rate: 0.2,
            },
            algorithm: Algorithm::Approx,
            init: Init::Uniform,
            novelty_neighbors: 20,
            novelty_iterations: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "population_size must be even and at least 2, got {}",
                self.population_size
            )));
        }
        self.operators.validate(&self.genome_spec)?;
        self.regressor.validate()?;
        self.switch.validate()?;
        self.sampler.validate()?;
        if self.init == Init::Novelty
            && (self.novelty_neighbors == 0 || self.novelty_neighbors >= self.population_size)
        {
            return Err(Error::Config(
                "novelty_neighbors must lie in 1..population_size".into(),
            ));
        }
        Ok(())
    }
}
