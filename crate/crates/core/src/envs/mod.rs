//! Game simulators that compute actual fitness, plus exact evaluators.

pub mod blackjack;
pub mod frozen_lake;

use serde::{Deserialize, Serialize};

use crate::genome::{Genome, GenomeSpec};
use crate::rng::Rng;
use crate::Result;

pub use blackjack::Blackjack;
pub use frozen_lake::{FrozenLake, LakeMap, Tile};

/// Outcome of a Monte-Carlo fitness evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessEstimate {
    pub normalized: f64,
    /// `normalized * games`, the figure reported in result tables.
    pub raw: f64,
    pub games: usize,
}

impl FitnessEstimate {
    pub(crate) fn from_score(score: i64, games: usize) -> Self {
        Self {
            normalized: score as f64 / games as f64,
            raw: score as f64,
            games,
        }
    }
}

/// Anything that can assign an actual fitness to a genome.
///
/// Implementations must be pure given the rng stream they are handed; the
/// engine evaluates individuals in parallel with per-individual streams.
pub trait FitnessFunction: Sync {
    fn spec(&self) -> GenomeSpec;

    fn evaluate(&self, genome: &Genome, rng: &mut Rng) -> Result<f64>;

    /// Inclusive bounds of the normalized fitness scale.
    fn fitness_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Blackjack,
    FrozenLake,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Blackjack => "blackjack",
            EnvKind::FrozenLake => "frozen_lake",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blackjack" => Ok(EnvKind::Blackjack),
            "frozen_lake" | "frozenlake" => Ok(EnvKind::FrozenLake),
            other => Err(crate::Error::Config(format!("unknown env `{other}`"))),
        }
    }
}

/// A configured simulator.
#[derive(Debug, Clone)]
pub enum Environment {
    Blackjack(Blackjack),
    FrozenLake(FrozenLake),
}

impl FitnessFunction for Environment {
    fn spec(&self) -> GenomeSpec {
        match self {
            Environment::Blackjack(b) => b.spec(),
            Environment::FrozenLake(f) => f.spec(),
        }
    }

    fn evaluate(&self, genome: &Genome, rng: &mut Rng) -> Result<f64> {
        match self {
            Environment::Blackjack(b) => b.evaluate(genome, rng),
            Environment::FrozenLake(f) => f.evaluate(genome, rng),
        }
    }

    fn fitness_range(&self) -> (f64, f64) {
        match self {
            Environment::Blackjack(b) => b.fitness_range(),
            Environment::FrozenLake(f) => f.fitness_range(),
        }
    }
}
