//! Fixed-length policy genomes and the genetic operators acting on them.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape of a genome: how many loci and how many values each locus can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenomeSpec {
    pub length: usize,
    pub alphabet_size: u8,
}

impl GenomeSpec {
    pub fn new(length: usize, alphabet_size: u8) -> Result<Self> {
        if length == 0 {
            return Err(Error::invalid("genome length must be at least 1"));
        }
        if alphabet_size < 2 {
            return Err(Error::invalid("alphabet size must be at least 2"));
        }
        Ok(Self {
            length,
            alphabet_size,
        })
    }

    pub fn check(&self, genome: &Genome) -> Result<()> {
        if genome.len() != self.length {
            return Err(Error::GenomeSpec(format!(
                "length {} != {}",
                genome.len(),
                self.length
            )));
        }
        if let Some(g) = genome.genes.iter().find(|&&g| g >= self.alphabet_size) {
            return Err(Error::GenomeSpec(format!(
                "gene {g} outside alphabet of size {}",
                self.alphabet_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome {
    pub genes: Vec<u8>,
}

impl Genome {
    pub fn new(genes: Vec<u8>) -> Self {
        Self { genes }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        self.genes.iter().map(|&g| f64::from(g))
    }
}

impl From<Vec<u8>> for Genome {
    fn from(genes: Vec<u8>) -> Self {
        Self { genes }
    }
}

/// A genome together with the fitness the GA sees for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredGenome {
    pub genome: Genome,
    pub fitness: f64,
    /// `true` when the fitness came from the simulator, `false` when predicted or inherited.
    pub is_actual: bool,
}

pub fn random_genome<R: Rng + ?Sized>(spec: &GenomeSpec, rng: &mut R) -> Genome {
    (0..spec.length)
        .map(|_| rng.gen_range(0..spec.alphabet_size))
        .collect::<Vec<_>>()
        .into()
}

/// Draws `tournament_size` members uniformly with replacement and returns the
/// index of the fittest. Ties go to the earliest draw.
pub fn tournament_select_index<R: Rng + ?Sized>(
    population: &[ScoredGenome],
    tournament_size: usize,
    rng: &mut R,
) -> Result<usize> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if tournament_size == 0 {
        return Err(Error::invalid("tournament size must be at least 1"));
    }
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..tournament_size {
        let idx = rng.gen_range(0..population.len());
        if population[idx].fitness > population[best].fitness {
            best = idx;
        }
    }
    Ok(best)
}

pub fn tournament_select<'a, R: Rng + ?Sized>(
    population: &'a [ScoredGenome],
    tournament_size: usize,
    rng: &mut R,
) -> Result<&'a ScoredGenome> {
    tournament_select_index(population, tournament_size, rng).map(|i| &population[i])
}

/// Swaps alternating segments of `a` and `b` between the given cut positions.
///
/// Cuts must be sorted, distinct and lie in `1..len`.
pub fn crossover_at(a: &Genome, b: &Genome, cuts: &[usize]) -> Result<(Genome, Genome)> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) || cuts.iter().any(|&c| c == 0 || c >= a.len()) {
        return Err(Error::invalid(format!("bad crossover cuts {cuts:?}")));
    }
    let mut left = a.genes.clone();
    let mut right = b.genes.clone();
    let mut bounds = cuts.to_vec();
    bounds.push(a.len());
    let mut start = 0;
    for (segment, &end) in bounds.iter().enumerate() {
        if segment % 2 == 1 {
            left[start..end].swap_with_slice(&mut right[start..end]);
        }
        start = end;
    }
    Ok((left.into(), right.into()))
}

pub fn k_point_crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    k: usize,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if k == 0 || k >= a.len() {
        return Err(Error::invalid(format!(
            "crossover points {k} must lie in 1..{}",
            a.len()
        )));
    }
    let mut cuts: Vec<usize> = index::sample(rng, a.len() - 1, k)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    crossover_at(a, b, &cuts)
}

/// With probability `p_mutation`, perturbs `n` distinct loci: binary genes
/// are flipped, larger alphabets are redrawn uniformly (the old value may
/// come back).
pub fn n_point_mutation<R: Rng + ?Sized>(
    genome: &Genome,
    spec: &GenomeSpec,
    n: usize,
    p_mutation: f64,
    rng: &mut R,
) -> Result<Genome> {
    if n == 0 || n > genome.len() {
        return Err(Error::invalid(format!(
            "mutation points {n} must lie in 1..={}",
            genome.len()
        )));
    }
    if !(0.0..=1.0).contains(&p_mutation) {
        return Err(Error::invalid("mutation probability outside [0, 1]"));
    }
    let mut out = genome.clone();
    if !rng.gen_bool(p_mutation) {
        return Ok(out);
    }
    for locus in index::sample(rng, genome.len(), n) {
        out.genes[locus] = if spec.alphabet_size == 2 {
            1 - out.genes[locus]
        } else {
            rng.gen_range(0..spec.alphabet_size)
        };
    }
    Ok(out)
}

/// Cosine of the angle between two vectors; zero when either has zero norm.
pub fn cosine_similarity<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y): (f64, f64) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Number of loci at which two genomes differ.
pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}
