//! The generational GA and its fitness-approximation variants.
//!
//! Every run starts by simulating the whole initial population. After that
//! the algorithm decides, generation by generation, how each offspring gets
//! the fitness that selection sees:
//!
//! - `FullGa` simulates everyone.
//! - `Approx` and `HiddenApprox` ask the switch condition for a mode. In
//!   evolution mode everyone is simulated; in prediction mode a sample is
//!   simulated and the surrogate model predicts the rest. `HiddenApprox`
//!   also shows predictions (not actual scores) for the sampled individuals.
//! - `AvgInherit` and `PropInherit` simulate a random sample and let the
//!   other offspring inherit fitness from their parents.
//!
//! Actual scores always go into the population dataset, and the result of a
//! run is the best record in that dataset.

mod config;
mod novelty;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::FitnessFunction;
use crate::genome::{
    cosine_similarity, k_point_crossover, n_point_mutation, random_genome,
    tournament_select_index, Genome, GenomeSpec, ScoredGenome,
};
use crate::rng::{self, stream, Rng};
use crate::strategy::{sample_random, Mode, Switch};
use crate::surrogate::{fit_dataset, PopulationDataset};
use crate::{Error, Result};

pub use config::{Algorithm, Init, Operators, RunConfig};
pub use novelty::{novelty_init, novelty_scores};

/// An offspring and the indices of the parents it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Child {
    pub genome: Genome,
    /// Both entries are the same parent when no crossover happened.
    pub parents: [usize; 2],
}

impl Child {
    pub fn crossed(&self) -> bool {
        self.parents[0] != self.parents[1]
    }
}

/// Breeds `population.len()` offspring from tournament-selected pairs.
///
/// A pair is recombined with probability `p_crossover` and copied otherwise;
/// each offspring is then mutated on its own.
pub fn breed(
    population: &[ScoredGenome],
    spec: &GenomeSpec,
    ops: &Operators,
    rng: &mut Rng,
) -> Result<Vec<Child>> {
    let n = population.len();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let i = tournament_select_index(population, ops.tournament_size, rng)?;
        let j = tournament_select_index(population, ops.tournament_size, rng)?;
        let (a, b) = (&population[i].genome, &population[j].genome);
        let (ca, cb, parents) = if rng.gen_bool(ops.p_crossover) {
            let (ca, cb) = k_point_crossover(a, b, ops.crossover_points, rng)?;
            (ca, cb, [[i, j], [i, j]])
        } else {
            (a.clone(), b.clone(), [[i, i], [j, j]])
        };
        for (genome, parents) in [(ca, parents[0]), (cb, parents[1])] {
            if out.len() == n {
                break;
            }
            let genome = n_point_mutation(&genome, spec, ops.mutation_points, ops.p_mutation, rng)?;
            out.push(Child { genome, parents });
        }
    }
    Ok(out)
}

/// Fitness an unsimulated child inherits from its parents' scores.
pub fn inherited_fitness(
    algorithm: Algorithm,
    child: &Child,
    parents: &[ScoredGenome],
) -> Result<f64> {
    let [i, j] = child.parents;
    let (fa, fb) = (parents[i].fitness, parents[j].fitness);
    if !child.crossed() {
        return Ok(fa);
    }
    match algorithm {
        Algorithm::AvgInherit => Ok((fa + fb) / 2.0),
        Algorithm::PropInherit => {
            let wa = cosine_similarity(&child.genome.genes, &parents[i].genome.genes)?;
            let wb = cosine_similarity(&child.genome.genes, &parents[j].genome.genes)?;
            if wa + wb > 0.0 {
                Ok((wa * fa + wb * fb) / (wa + wb))
            } else {
                Ok((fa + fb) / 2.0)
            }
        }
        other => Err(Error::invalid(format!("{other} does not inherit fitness"))),
    }
}

/// The best actual record of a dataset; ties go to the earliest row.
pub fn best_of_run(dataset: &PopulationDataset) -> Result<(Genome, f64)> {
    dataset.best().map(|r| (r.genome.clone(), r.fitness))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub mode: Mode,
    /// Simulator calls made in this generation.
    pub evaluations: usize,
    /// Simulator calls so far, not counting the initial population.
    pub total_evaluations: u64,
    pub best_actual: f64,
    pub dataset_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_genome: Genome,
    pub best_actual_fitness: f64,
    /// Simulator calls after the initial population.
    pub actual_eval_count: u64,
    pub generations: Vec<GenerationLog>,
    pub dataset_final_size: usize,
}

/// What an observer sees at the end of each generation.
#[derive(Debug)]
pub struct GenerationView<'a> {
    pub generation: usize,
    pub mode: Mode,
    pub population: &'a [ScoredGenome],
    pub dataset: &'a PopulationDataset,
}

pub fn run<F: FitnessFunction + ?Sized>(cfg: &RunConfig, fitness: &F) -> Result<RunResult> {
    run_with_observer(cfg, fitness, |_| {})
}

fn evaluate<F: FitnessFunction + ?Sized>(
    fitness: &F,
    genomes: &[Genome],
    indices: &[usize],
    seed: u64,
    generation: usize,
) -> Result<Vec<f64>> {
    indices
        .par_iter()
        .map(|&i| {
            let mut r = rng::derive(seed, &[stream::EVALUATION, generation as u64, i as u64]);
            fitness.evaluate(&genomes[i], &mut r)
        })
        .collect()
}

/// Runs the configured algorithm, calling `observe` after every generation.
pub fn run_with_observer<F, O>(cfg: &RunConfig, fitness: &F, mut observe: O) -> Result<RunResult>
where
    F: FitnessFunction + ?Sized,
    O: FnMut(&GenerationView<'_>),
{
    cfg.validate()?;
    if fitness.spec() != cfg.genome_spec {
        return Err(Error::Config(format!(
            "genome spec {:?} does not match the environment's {:?}",
            cfg.genome_spec,
            fitness.spec()
        )));
    }
    let n = cfg.population_size;
    let seed = cfg.seed;
    let spec = &cfg.genome_spec;
    let all: Vec<usize> = (0..n).collect();

    let mut init_rng = rng::derive(seed, &[stream::INIT]);
    let genomes: Vec<Genome> = match cfg.init {
        Init::Uniform => (0..n).map(|_| random_genome(spec, &mut init_rng)).collect(),
        Init::Novelty => novelty_init(
            spec,
            n,
            cfg.novelty_neighbors,
            cfg.novelty_iterations,
            &cfg.operators,
            &mut init_rng,
        )?,
    };
    let mut ops_rng = rng::derive(seed, &[stream::OPERATORS]);
    let mut dataset = PopulationDataset::new();
    let mut switch = Switch::new(cfg.switch);
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let mut log = Vec::with_capacity(cfg.generations + 1);
    let mut total = 0u64;

    let actual = evaluate(fitness, &genomes, &all, seed, 0)?;
    for (g, &f) in genomes.iter().zip(&actual) {
        dataset.insert(g, f, 1)?;
    }
    let mut population = scored(genomes, actual, vec![true; n]);

    for generation in 0..=cfg.generations {
        let mut mode = Mode::Evolution;
        let mut evaluated = all.len();
        if generation > 0 {
            let children = breed(&population, spec, &cfg.operators, &mut ops_rng)?;
            let genomes: Vec<Genome> = children.iter().map(|c| c.genome.clone()).collect();
            let refs: Vec<&Genome> = genomes.iter().collect();
            let sampling_rng = || rng::derive(seed, &[stream::SAMPLING, generation as u64]);

            let (sampled, scores, is_actual, actual) = match cfg.algorithm {
                Algorithm::FullGa => {
                    let actual = evaluate(fitness, &genomes, &all, seed, generation)?;
                    (all.clone(), actual.clone(), vec![true; n], actual)
                }
                Algorithm::Approx | Algorithm::HiddenApprox => {
                    let mut switch_rng = rng::derive(seed, &[stream::SWITCH, generation as u64]);
                    mode = switch.decide(&dataset, &refs, &history, &cfg.regressor, &mut switch_rng)?;
                    match mode {
                        Mode::Evolution => {
                            let actual = evaluate(fitness, &genomes, &all, seed, generation)?;
                            (all.clone(), actual.clone(), vec![true; n], actual)
                        }
                        Mode::Prediction => {
                            let sampled = cfg.sampler.select(&refs, &dataset, &mut sampling_rng())?;
                            let actual = evaluate(fitness, &genomes, &sampled, seed, generation)?;
                            // The model is only needed here, so it is fitted on demand
                            // from the dataset as the previous generation left it.
                            let mut model_rng = rng::derive(seed, &[stream::MODEL, generation as u64]);
                            let model = fit_dataset(&cfg.regressor, &dataset, &mut model_rng)?;
                            let mut scores = model.predict_genomes(&refs)?;
                            let mut is_actual = vec![false; n];
                            if cfg.algorithm == Algorithm::Approx {
                                for (&i, &f) in sampled.iter().zip(&actual) {
                                    scores[i] = f;
                                    is_actual[i] = true;
                                }
                            }
                            (sampled, scores, is_actual, actual)
                        }
                    }
                }
                Algorithm::AvgInherit | Algorithm::PropInherit => {
                    mode = Mode::Prediction;
                    let sampled = sample_random(n, cfg.sampler.rate, &mut sampling_rng())?;
                    let actual = evaluate(fitness, &genomes, &sampled, seed, generation)?;
                    let mut scores = children
                        .iter()
                        .map(|c| inherited_fitness(cfg.algorithm, c, &population))
                        .collect::<Result<Vec<_>>>()?;
                    let mut is_actual = vec![false; n];
                    for (&i, &f) in sampled.iter().zip(&actual) {
                        scores[i] = f;
                        is_actual[i] = true;
                    }
                    (sampled, scores, is_actual, actual)
                }
            };

            let stamp = u32::try_from(generation + 1)
                .map_err(|_| Error::Config("too many generations".into()))?;
            for (&i, &f) in sampled.iter().zip(&actual) {
                dataset.insert(&genomes[i], f, stamp)?;
            }
            evaluated = sampled.len();
            total += evaluated as u64;
            population = scored(genomes, scores, is_actual);
        }

        let best = dataset.best()?.fitness;
        history.push(best);
        log.push(GenerationLog {
            generation,
            mode,
            evaluations: evaluated,
            total_evaluations: total,
            best_actual: best,
            dataset_size: dataset.len(),
        });
        observe(&GenerationView {
            generation,
            mode,
            population: &population,
            dataset: &dataset,
        });
    }

    let (best_genome, best_actual_fitness) = best_of_run(&dataset)?;
    Ok(RunResult {
        best_genome,
        best_actual_fitness,
        actual_eval_count: total,
        generations: log,
        dataset_final_size: dataset.len(),
    })
}

fn scored(genomes: Vec<Genome>, scores: Vec<f64>, is_actual: Vec<bool>) -> Vec<ScoredGenome> {
    genomes
        .into_iter()
        .zip(scores)
        .zip(is_actual)
        .map(|((genome, fitness), is_actual)| ScoredGenome {
            genome,
            fitness,
            is_actual,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;
    use crate::strategy::{SamplerConfig, SamplerKind, SwitchConfig, SwitchKind};
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Fraction of ones plus a little evaluation noise; counts its calls.
    struct OneMax {
        spec: GenomeSpec,
        calls: AtomicUsize,
    }

    impl OneMax {
        fn new(len: usize) -> Self {
            Self {
                spec: GenomeSpec::new(len, 2).unwrap(),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl FitnessFunction for OneMax {
        fn spec(&self) -> GenomeSpec {
            self.spec
        }

        fn evaluate(&self, genome: &Genome, rng: &mut Rng) -> Result<f64> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let ones = genome.genes.iter().filter(|&&g| g == 1).count();
            Ok(ones as f64 / genome.len() as f64 + rng.gen_range(-0.01..0.01))
        }
    }

    fn config(f: &OneMax, algorithm: Algorithm, generations: usize) -> RunConfig {
        RunConfig {
            generations,
            algorithm,
            seed: 11,
            ..RunConfig::preset(EnvKind::FrozenLake, f.spec)
        }
    }

    fn populations(cfg: &RunConfig, f: &OneMax) -> (RunResult, Vec<Vec<Genome>>) {
        let mut seen = Vec::new();
        let res = run_with_observer(cfg, f, |v| {
            seen.push(v.population.iter().map(|s| s.genome.clone()).collect())
        })
        .unwrap();
        (res, seen)
    }

    #[test]
    fn zero_generations() {
        let f = OneMax::new(20);
        let res = run(&config(&f, Algorithm::FullGa, 0), &f).unwrap();
        assert_eq!(res.actual_eval_count, 0);
        assert_eq!(res.generations.len(), 1);
        assert_eq!(res.dataset_final_size, 100);
        assert_eq!(f.calls.load(Ordering::Relaxed), 100);
    }

    #[test]
    fn full_ga_counts_and_improves() {
        let f = OneMax::new(40);
        let res = run(&config(&f, Algorithm::FullGa, 30), &f).unwrap();
        assert_eq!(res.actual_eval_count, 3000);
        assert_eq!(f.calls.load(Ordering::Relaxed), 3100);
        let first = res.generations[0].best_actual;
        assert!(res.best_actual_fitness > first + 0.1);
        assert!(res
            .generations
            .windows(2)
            .all(|w| w[0].best_actual <= w[1].best_actual));
    }

    #[test]
    fn unattainable_switch_matches_full_ga() {
        let f = OneMax::new(30);
        let full = config(&f, Algorithm::FullGa, 20);
        let approx = RunConfig {
            algorithm: Algorithm::Approx,
            switch: SwitchConfig::never_predict(),
            ..full.clone()
        };
        let (a, pa) = populations(&full, &f);
        let (b, pb) = populations(&approx, &f);
        assert_eq!(pa, pb);
        assert_eq!(a.best_actual_fitness, b.best_actual_fitness);
        assert_eq!(a.actual_eval_count, b.actual_eval_count);
        let hidden = RunConfig {
            algorithm: Algorithm::HiddenApprox,
            ..approx
        };
        assert_eq!(populations(&hidden, &f).1, pa);
    }

    #[test]
    fn forced_prediction_counts() {
        let f = OneMax::new(30);
        for (rate, expected) in [(0.2, 1000), (0.4, 2000), (0.6, 3000), (0.8, 4000), (1.0, 5000)] {
            for algorithm in [Algorithm::Approx, Algorithm::HiddenApprox] {
                let cfg = RunConfig {
                    switch: SwitchConfig::always_predict(),
                    sampler: SamplerConfig {
                        kind: SamplerKind::Similarity,
                        rate,
                    },
                    ..config(&f, algorithm, 50)
                };
                let res = run(&cfg, &f).unwrap();
                assert_eq!(res.actual_eval_count, expected, "{algorithm} at {rate}");
                assert!(res.generations[1..].iter().all(|g| g.mode == Mode::Prediction));
            }
        }
    }

    #[test]
    fn inheritance_counts() {
        let f = OneMax::new(30);
        for algorithm in [Algorithm::AvgInherit, Algorithm::PropInherit] {
            let cfg = RunConfig {
                sampler: SamplerConfig {
                    kind: SamplerKind::Random,
                    rate: 0.8,
                },
                ..config(&f, algorithm, 50)
            };
            let res = run(&cfg, &f).unwrap();
            assert_eq!(res.actual_eval_count, 4000);
            assert!(res.generations[1..].iter().all(|g| g.evaluations == 80));
        }
    }

    #[test]
    fn dataset_size_switch_is_monotone() {
        let f = OneMax::new(30);
        let cfg = RunConfig {
            switch: SwitchConfig::new(SwitchKind::DatasetSize, 450.0),
            ..config(&f, Algorithm::Approx, 30)
        };
        let res = run(&cfg, &f).unwrap();
        let modes: Vec<Mode> = res.generations.iter().map(|g| g.mode).collect();
        let first = modes.iter().position(|&m| m == Mode::Prediction).unwrap();
        assert!(first > 1);
        assert!(modes[first..].iter().all(|&m| m == Mode::Prediction));
        let expected: u64 = res.generations[1..]
            .iter()
            .map(|g| if g.mode == Mode::Evolution { 100 } else { 20 })
            .sum();
        assert_eq!(res.actual_eval_count, expected);
    }

    #[test]
    fn best_is_dataset_maximum() {
        let f = OneMax::new(30);
        let cfg = RunConfig {
            switch: SwitchConfig::always_predict(),
            ..config(&f, Algorithm::Approx, 15)
        };
        let mut first_gen = Vec::new();
        let mut last_max = f64::NAN;
        let res = run_with_observer(&cfg, &f, |v| {
            if v.generation == 0 {
                first_gen = v.population.iter().map(|s| s.fitness).collect();
            }
            last_max = v.dataset.iter().map(|r| r.fitness).fold(f64::NEG_INFINITY, f64::max);
        })
        .unwrap();
        assert_eq!(res.best_actual_fitness, last_max);
        assert!(first_gen.iter().all(|&f| f <= res.best_actual_fitness));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let f = OneMax::new(30);
        let cfg = RunConfig {
            switch: SwitchConfig::always_predict(),
            ..config(&f, Algorithm::Approx, 10)
        };
        let a = run(&cfg, &f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run(&cfg, &f)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_fails_before_simulating() {
        let f = OneMax::new(30);
        let mut cfg = config(&f, Algorithm::FullGa, 5);
        cfg.population_size = 99;
        assert!(matches!(run(&cfg, &f), Err(Error::Config(_))));
        let mut cfg = config(&f, Algorithm::FullGa, 5);
        cfg.operators.p_crossover = 1.5;
        assert!(run(&cfg, &f).is_err());
        let mut cfg = config(&f, Algorithm::FullGa, 5);
        cfg.genome_spec = GenomeSpec::new(31, 2).unwrap();
        assert!(run(&cfg, &f).is_err());
        assert_eq!(f.calls.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn novelty_init_runs() {
        let f = OneMax::new(30);
        let cfg = RunConfig {
            init: Init::Novelty,
            ..config(&f, Algorithm::FullGa, 3)
        };
        assert_eq!(run(&cfg, &f).unwrap().actual_eval_count, 300);
    }

    fn parent(genes: &[u8], fitness: f64) -> ScoredGenome {
        ScoredGenome {
            genome: Genome::new(genes.to_vec()),
            fitness,
            is_actual: true,
        }
    }

    #[test]
    fn inheritance_rules() {
        let parents = [parent(&[1, 1, 0, 0], 0.4), parent(&[0, 0, 1, 1], 0.8)];
        let child = |genes: &[u8], parents: [usize; 2]| Child {
            genome: Genome::new(genes.to_vec()),
            parents,
        };
        let inherit = |a, c: &Child| inherited_fitness(a, c, &parents).unwrap();
        let avg = Algorithm::AvgInherit;
        let prop = Algorithm::PropInherit;

        assert!((inherit(avg, &child(&[1, 1, 1, 1], [0, 1])) - 0.6).abs() < 1e-12);
        // Identical to A, orthogonal to B.
        assert!((inherit(prop, &child(&[1, 1, 0, 0], [0, 1])) - 0.4).abs() < 1e-12);
        // Both similarities zero: plain average.
        assert!((inherit(prop, &child(&[0, 0, 0, 0], [0, 1])) - 0.6).abs() < 1e-12);
        // A clone inherits from its single parent.
        assert_eq!(inherit(avg, &child(&[1, 1, 0, 1], [1, 1])), 0.8);
        let same = [parent(&[1, 0], 0.3), parent(&[0, 1], 0.3)];
        for a in [avg, prop] {
            let c = child(&[1, 1], [0, 1]);
            assert!((inherited_fitness(a, &c, &same).unwrap() - 0.3).abs() < 1e-12);
        }
        assert!(inherited_fitness(Algorithm::Approx, &child(&[1, 1, 0, 0], [0, 1]), &parents).is_err());
    }

    #[test]
    fn best_of_run_examples() {
        let mut ds = PopulationDataset::new();
        assert!(best_of_run(&ds).is_err());
        ds.insert(&Genome::new(vec![0]), 0.1, 1).unwrap();
        assert_eq!(best_of_run(&ds).unwrap().1, 0.1);
        ds.insert(&Genome::new(vec![1]), 0.9, 1).unwrap();
        ds.insert(&Genome::new(vec![2]), 0.5, 1).unwrap();
        assert_eq!(best_of_run(&ds).unwrap(), (Genome::new(vec![1]), 0.9));
    }

    #[test]
    fn breeding_keeps_size_and_validity() {
        let spec = GenomeSpec::new(12, 4).unwrap();
        let mut r = rng::from_seed(9);
        let pop: Vec<ScoredGenome> = (0..10)
            .map(|i| ScoredGenome {
                genome: random_genome(&spec, &mut r),
                fitness: i as f64,
                is_actual: true,
            })
            .collect();
        let ops = Operators {
            p_crossover: 0.7,
            p_mutation: 0.3,
            tournament_size: 4,
            crossover_points: 2,
            mutation_points: 3,
        };
        let kids = breed(&pop, &spec, &ops, &mut r).unwrap();
        assert_eq!(kids.len(), 10);
        for k in &kids {
            spec.check(&k.genome).unwrap();
            assert!(k.parents.iter().all(|&p| p < 10));
        }
    }
}
