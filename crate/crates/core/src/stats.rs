//! Replicate summaries and the permutation test used to compare them.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

/// p-values above this count as statistically indistinguishable from the reference.
pub const SIGNIFICANCE: f64 = 0.05;

/// Best-of-run fitness and simulator call counts of one configuration's replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSet {
    pub label: String,
    pub best_fitness: Vec<f64>,
    pub eval_counts: Vec<u64>,
}

impl ReplicateSet {
    pub fn new(label: impl Into<String>, best_fitness: Vec<f64>, eval_counts: Vec<u64>) -> Result<Self> {
        if best_fitness.is_empty() {
            return Err(Error::invalid("replicate set is empty"));
        }
        if best_fitness.len() != eval_counts.len() {
            return Err(Error::Dimension {
                expected: best_fitness.len(),
                got: eval_counts.len(),
            });
        }
        Ok(Self {
            label: label.into(),
            best_fitness,
            eval_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.best_fitness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best_fitness.is_empty()
    }

    pub fn mean_fitness(&self) -> f64 {
        mean(&self.best_fitness)
    }

    pub fn mean_evals(&self) -> f64 {
        self.eval_counts.iter().map(|&c| c as f64).sum::<f64>() / self.eval_counts.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub absolute_fitness: f64,
    /// `None` when the reference mean is zero.
    pub relative_fitness: Option<f64>,
    pub absolute_computations: f64,
    pub relative_computations: Option<f64>,
    pub p_value: f64,
}

impl SummaryRow {
    pub fn indistinguishable(&self) -> bool {
        self.p_value > SIGNIFICANCE
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_gap(pool: &[f64], split: usize) -> f64 {
    (mean(&pool[..split]) - mean(&pool[split..])).abs()
}

/// Monte-Carlo two-sided permutation test on the difference of means.
///
/// Returns the fraction of `rounds` random relabellings whose absolute mean
/// difference reaches the observed one, but never less than `1 / rounds`.
pub fn permutation_test(a: &[f64], b: &[f64], rounds: usize, rng: &mut Rng) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("permutation test needs two nonempty samples"));
    }
    if rounds == 0 {
        return Err(Error::invalid("permutation test needs at least one round"));
    }
    let mut pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let observed = mean_gap(&pool, a.len());
    let scale = pool.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // Relabellings that reproduce the observed split differ from it only by rounding.
    let cutoff = observed - 1e-12 * scale.max(1.0);
    let mut hits = 0usize;
    for _ in 0..rounds {
        pool.shuffle(rng);
        if mean_gap(&pool, a.len()) >= cutoff {
            hits += 1;
        }
    }
    Ok(hits.max(1) as f64 / rounds as f64)
}

/// Candidate as a percentage of the reference, oriented so that better than
/// the reference is above 100 even when both means are negative.
pub fn relative_fitness(candidate: f64, reference: f64) -> Option<f64> {
    if reference > 0.0 {
        Some(100.0 * candidate / reference)
    } else if reference < 0.0 && candidate != 0.0 {
        Some(100.0 * reference / candidate)
    } else {
        None
    }
}

pub fn relative_computations(candidate: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| 100.0 * candidate / reference)
}

pub fn summarize(
    candidate: &ReplicateSet,
    reference: &ReplicateSet,
    rounds: usize,
    rng: &mut Rng,
) -> Result<SummaryRow> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::invalid("cannot summarize an empty replicate set"));
    }
    let (fc, fr) = (candidate.mean_fitness(), reference.mean_fitness());
    let (cc, cr) = (candidate.mean_evals(), reference.mean_evals());
    Ok(SummaryRow {
        absolute_fitness: fc,
        relative_fitness: relative_fitness(fc, fr),
        absolute_computations: cc,
        relative_computations: relative_computations(cc, cr),
        p_value: permutation_test(&candidate.best_fitness, &reference.best_fitness, rounds, rng)?,
    })
}
