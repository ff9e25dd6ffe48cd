use crate::genome::{hamming_distance, random_genome, Genome, GenomeSpec, ScoredGenome};
use crate::rng::Rng;
use crate::{Error, Result};

use super::{breed, Operators};

fn distance_matrix(genomes: &[Genome]) -> Vec<Vec<usize>> {
    let n = genomes.len();
    let mut dist = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = hamming_distance(&genomes[i].genes, &genomes[j].genes);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    dist
}

/// Mean distance from `i` to its `k` nearest neighbours among `members`.
fn knn_mean(dist: &[Vec<usize>], members: &[usize], i: usize, k: usize) -> f64 {
    let mut row: Vec<usize> = members.iter().filter(|&&j| j != i).map(|&j| dist[i][j]).collect();
    let k = k.min(row.len());
    if k == 0 {
        return 0.0;
    }
    row.select_nth_unstable(k - 1);
    row[..k].iter().sum::<usize>() as f64 / k as f64
}

/// Mean distance from each genome to its `k` nearest neighbours in the set.
pub fn novelty_scores(genomes: &[Genome], k: usize) -> Vec<f64> {
    let dist = distance_matrix(genomes);
    let members: Vec<usize> = (0..genomes.len()).collect();
    members.iter().map(|&i| knn_mean(&dist, &members, i, k)).collect()
}

/// Initial population spread out by a short novelty search.
///
/// Each iteration breeds a full set of offspring by tournament on novelty and
/// pools them with the parents. The least novel member of the pool is then
/// dropped, and scores recomputed, until the population size is reached. No
/// fitness is computed. With zero iterations this is uniform initialization.
pub fn novelty_init(
    spec: &GenomeSpec,
    population_size: usize,
    n_neighbors: usize,
    iterations: usize,
    operators: &Operators,
    rng: &mut Rng,
) -> Result<Vec<Genome>> {
    if n_neighbors == 0 || n_neighbors >= population_size {
        return Err(Error::invalid(format!(
            "novelty neighbours {n_neighbors} must lie in 1..{population_size}"
        )));
    }
    let mut pop: Vec<Genome> = (0..population_size).map(|_| random_genome(spec, rng)).collect();
    for _ in 0..iterations {
        let scored: Vec<ScoredGenome> = pop
            .iter()
            .zip(novelty_scores(&pop, n_neighbors))
            .map(|(g, s)| ScoredGenome {
                genome: g.clone(),
                fitness: s,
                is_actual: false,
            })
            .collect();
        let mut pool = pop;
        pool.extend(breed(&scored, spec, operators, rng)?.into_iter().map(|c| c.genome));
        let dist = distance_matrix(&pool);
        let mut members: Vec<usize> = (0..pool.len()).collect();
        while members.len() > population_size {
            let scores: Vec<f64> = members
                .iter()
                .map(|&i| knn_mean(&dist, &members, i, n_neighbors))
                .collect();
            // Lowest score goes; ties drop the later member.
            let worst = (0..members.len())
                .rev()
                .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                .expect("pool is larger than the population");
            members.remove(worst);
        }
        pop = members.into_iter().map(|i| pool[i].clone()).collect();
    }
    Ok(pop)
}
