//! Switch conditions between evolution and prediction mode, and the
//! strategies that pick which individuals are simulated in prediction mode.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::genome::Genome;
use crate::rng::Rng;
use crate::surrogate::{cv_error, PopulationDataset, RegressorConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every individual is simulated.
    Evolution,
    /// Only a sample is simulated; the rest get model predictions.
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    DatasetSize,
    Plateau,
    CvError,
    CosineSimilarity,
}

impl std::str::FromStr for SwitchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dataset_size" => Ok(SwitchKind::DatasetSize),
            "plateau" => Ok(SwitchKind::Plateau),
            "cv_error" => Ok(SwitchKind::CvError),
            "cosine" | "cosine_similarity" => Ok(SwitchKind::CosineSimilarity),
            other => Err(Error::Config(format!("unknown switch_condition `{other}`"))),
        }
    }
}

/// How per-individual similarities to the dataset are reduced to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineAggregation {
    /// Population mean of each individual's best match.
    #[default]
    MeanOfMax,
    /// Worst individual's best match.
    MinOfMax,
    /// Population mean of each individual's average similarity.
    MeanOfMeans,
}

impl std::str::FromStr for CosineAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_of_max" => Ok(CosineAggregation::MeanOfMax),
            "min_of_max" => Ok(CosineAggregation::MinOfMax),
            "mean_of_means" => Ok(CosineAggregation::MeanOfMeans),
            other => Err(Error::Config(format!("unknown cosine_aggregation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub kind: SwitchKind,
    /// DatasetSize: minimum rows. Plateau: unused (see `plateau_delta`).
    /// CvError: maximum weighted MSE. CosineSimilarity: minimum score.
    pub threshold: f64,
    pub plateau_window: usize,
    pub plateau_delta: f64,
    pub cv_folds: usize,
    pub cosine_aggregation: CosineAggregation,
}

impl SwitchConfig {
    pub fn new(kind: SwitchKind, threshold: f64) -> Self {
        Self {
            kind,
            threshold,
            ..Self::default()
        }
    }

    /// A dataset-size condition that holds as soon as the dataset has a row.
    pub fn always_predict() -> Self {
        Self::new(SwitchKind::DatasetSize, 1.0)
    }

    /// A dataset-size condition that never holds.
    pub fn never_predict() -> Self {
        Self::new(SwitchKind::DatasetSize, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() {
            return Err(Error::Config("switch_threshold is NaN".into()));
        }
        if self.plateau_window == 0 {
            return Err(Error::Config("plateau_window must be at least 1".into()));
        }
        if !(self.plateau_delta >= 0.0) {
            return Err(Error::Config("plateau_delta must be nonnegative".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            kind: SwitchKind::CosineSimilarity,
            threshold: 0.9,
            plateau_window: 5,
            plateau_delta: 0.01,
            cv_folds: 5,
            cosine_aggregation: CosineAggregation::MeanOfMax,
        }
    }
}

/// Best and mean cosine similarity of each individual to the dataset rows.
pub fn similarity_to_dataset(
    population: &[&Genome],
    dataset: &PopulationDataset,
) -> Result<Vec<(f64, f64)>> {
    let dim = dataset.dim().ok_or(Error::EmptyDataset)?;
    let rows: Vec<(&[u8], f64)> = dataset
        .iter()
        .map(|r| {
            let genes = r.genome.genes.as_slice();
            let sq: u32 = genes.iter().map(|&g| u32::from(g) * u32::from(g)).sum();
            (genes, f64::from(sq).sqrt())
        })
        .collect();
    population
        .par_iter()
        .map(|g| {
            if g.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: g.len(),
                });
            }
            let sq: u32 = g.genes.iter().map(|&v| u32::from(v) * u32::from(v)).sum();
            let norm = f64::from(sq).sqrt();
            let (mut best, mut total) = (f64::NEG_INFINITY, 0.0);
            for (genes, row_norm) in &rows {
                let sim = if norm == 0.0 || *row_norm == 0.0 {
                    0.0
                } else {
                    let dot: u32 = g
                        .genes
                        .iter()
                        .zip(*genes)
                        .map(|(&a, &b)| u32::from(a) * u32::from(b))
                        .sum();
                    f64::from(dot) / (norm * row_norm)
                };
                best = best.max(sim);
                total += sim;
            }
            Ok((best, total / rows.len() as f64))
        })
        .collect()
}

/// Each individual's highest cosine similarity to any dataset row.
pub fn max_similarities(population: &[&Genome], dataset: &PopulationDataset) -> Result<Vec<f64>> {
    Ok(similarity_to_dataset(population, dataset)?
        .into_iter()
        .map(|(best, _)| best)
        .collect())
}

pub fn population_similarity(
    population: &[&Genome],
    dataset: &PopulationDataset,
    aggregation: CosineAggregation,
) -> Result<f64> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let sims = similarity_to_dataset(population, dataset)?;
    let n = sims.len() as f64;
    Ok(match aggregation {
        CosineAggregation::MeanOfMax => sims.iter().map(|s| s.0).sum::<f64>() / n,
        CosineAggregation::MinOfMax => sims.iter().map(|s| s.0).fold(f64::INFINITY, f64::min),
        CosineAggregation::MeanOfMeans => sims.iter().map(|s| s.1).sum::<f64>() / n,
    })
}

/// A switch condition with its latch. Dataset-size and plateau conditions
/// never leave prediction mode once entered; cross-validation and cosine
/// conditions are re-evaluated from scratch every generation.
#[derive(Debug, Clone)]
pub struct Switch {
    cfg: SwitchConfig,
    latched: bool,
    armed_at: usize,
}

impl Switch {
    pub fn new(cfg: SwitchConfig) -> Self {
        Self {
            cfg,
            latched: false,
            armed_at: 0,
        }
    }

    pub fn config(&self) -> &SwitchConfig {
        &self.cfg
    }

    /// Drops a plateau latch; the window must refill from `history_len` on.
    pub fn rearm(&mut self, history_len: usize) {
        self.latched = false;
        self.armed_at = history_len;
    }

    pub fn decide(
        &mut self,
        dataset: &PopulationDataset,
        population: &[&Genome],
        best_history: &[f64],
        regressor: &RegressorConfig,
        rng: &mut Rng,
    ) -> Result<Mode> {
        if self.latched {
            return Ok(Mode::Prediction);
        }
        let history = &best_history[self.armed_at.min(best_history.len())..];
        let mode = switch_decide(&self.cfg, dataset, population, history, regressor, rng)?;
        if mode == Mode::Prediction
            && matches!(self.cfg.kind, SwitchKind::DatasetSize | SwitchKind::Plateau)
        {
            self.latched = true;
        }
        Ok(mode)
    }
}

/// Stateless evaluation of a switch condition for the upcoming generation.
pub fn switch_decide(
    cfg: &SwitchConfig,
    dataset: &PopulationDataset,
    population: &[&Genome],
    best_history: &[f64],
    regressor: &RegressorConfig,
    rng: &mut Rng,
) -> Result<Mode> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if dataset.is_empty() {
        return Ok(Mode::Evolution);
    }
    let predict = match cfg.kind {
        SwitchKind::DatasetSize => dataset.len() as f64 >= cfg.threshold,
        SwitchKind::Plateau => {
            let p = cfg.plateau_window;
            best_history.len() >= p && {
                let window = &best_history[best_history.len() - p..];
                let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo <= cfg.plateau_delta
            }
        }
        SwitchKind::CvError => match cv_error(dataset, regressor, cfg.cv_folds, rng) {
            Ok(err) => err <= cfg.threshold,
            Err(Error::InsufficientData { .. }) => false,
            Err(e) => return Err(e),
        },
        SwitchKind::CosineSimilarity => {
            population_similarity(population, dataset, cfg.cosine_aggregation)? >= cfg.threshold
        }
    };
    Ok(if predict {
        Mode::Prediction
    } else {
        Mode::Evolution
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Random,
    #[default]
    Similarity,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SamplerKind::Random),
            "similarity" => Ok(SamplerKind::Similarity),
            other => Err(Error::Config(format!("unknown sampling_strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub rate: f64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::Config(format!(
                "sample_rate {} outside (0, 1]",
                self.rate
            )));
        }
        Ok(())
    }

    pub fn select(
        &self,
        population: &[&Genome],
        dataset: &PopulationDataset,
        rng: &mut Rng,
    ) -> Result<Vec<usize>> {
        match self.kind {
            SamplerKind::Random => sample_random(population.len(), self.rate, rng),
            SamplerKind::Similarity => sample_similarity(population, dataset, self.rate),
        }
    }
}

/// `round(rate * n)` with halves rounded up, at least 1 and at most `n`.
pub fn sample_size(rate: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    // The epsilon absorbs representation error such as 0.6 * 100 = 60.000000000000007.
    let k = (rate * n as f64 + 0.5 + 1e-9).floor() as usize;
    k.clamp(1, n)
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sample rate {rate} outside (0, 1]")))
    }
}

/// Uniform sample without replacement; returned indices are ascending.
pub fn sample_random(n: usize, rate: f64, rng: &mut Rng) -> Result<Vec<usize>> {
    check_rate(rate)?;
    let mut picked = index::sample(rng, n, sample_size(rate, n)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Picks the `sample_size(rate, n)` lowest `scores`, ties by index;
/// returned indices are ascending.
pub fn lowest_scores(scores: &[f64], rate: f64) -> Result<Vec<usize>> {
    check_rate(rate)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(sample_size(rate, scores.len()));
    order.sort_unstable();
    Ok(order)
}

/// The individuals least similar to anything already in the dataset.
pub fn sample_similarity(
    population: &[&Genome],
    dataset: &PopulationDataset,
    rate: f64,
) -> Result<Vec<usize>> {
    check_rate(rate)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    lowest_scores(&max_similarities(population, dataset)?, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{random_genome, GenomeSpec};
    use crate::rng;

    fn g(v: &[u8]) -> Genome {
        Genome::new(v.to_vec())
    }

    fn dataset_of(genomes: &[Genome]) -> PopulationDataset {
        let mut ds = PopulationDataset::new();
        for (i, x) in genomes.iter().enumerate() {
            ds.insert(x, i as f64 * 0.01, 1).unwrap();
        }
        ds
    }

    #[test]
    fn empty_dataset_means_evolution() {
        let pop = [g(&[1, 0])];
        let refs: Vec<&Genome> = pop.iter().collect();
        for kind in [
            SwitchKind::DatasetSize,
            SwitchKind::Plateau,
            SwitchKind::CvError,
            SwitchKind::CosineSimilarity,
        ] {
            let cfg = SwitchConfig::new(kind, 0.0);
            let mode = switch_decide(
                &cfg,
                &PopulationDataset::new(),
                &refs,
                &[0.0; 10],
                &RegressorConfig::default(),
                &mut rng::from_seed(0),
            )
            .unwrap();
            assert_eq!(mode, Mode::Evolution);
        }
    }

    #[test]
    fn dataset_size_threshold_latches() {
        let spec = GenomeSpec::new(10, 2).unwrap();
        let mut r = rng::from_seed(1);
        let pop: Vec<Genome> = (0..150).map(|_| random_genome(&spec, &mut r)).collect();
        let ds = dataset_of(&pop);
        let refs: Vec<&Genome> = pop.iter().collect();
        let mut sw = Switch::new(SwitchConfig::new(SwitchKind::DatasetSize, 100.0));
        let reg = RegressorConfig::default();
        assert_eq!(
            sw.decide(&ds, &refs, &[], &reg, &mut r).unwrap(),
            Mode::Prediction
        );
        // Latched even against a smaller dataset.
        assert_eq!(
            sw.decide(&dataset_of(&pop[..3]), &refs, &[], &reg, &mut r)
                .unwrap(),
            Mode::Prediction
        );
        let mut sw = Switch::new(SwitchConfig::never_predict());
        assert_eq!(
            sw.decide(&ds, &refs, &[], &reg, &mut r).unwrap(),
            Mode::Evolution
        );
    }

    #[test]
    fn plateau_window() {
        let pop = [g(&[1])];
        let refs: Vec<&Genome> = pop.iter().collect();
        let ds = dataset_of(&pop);
        let cfg = SwitchConfig {
            plateau_window: 3,
            plateau_delta: 0.05,
            ..SwitchConfig::new(SwitchKind::Plateau, 0.0)
        };
        let reg = RegressorConfig::default();
        let mut r = rng::from_seed(0);
        let decide = |h: &[f64], r: &mut Rng| switch_decide(&cfg, &ds, &refs, h, &reg, r).unwrap();
        assert_eq!(decide(&[0.5, 0.5], &mut r), Mode::Evolution);
        assert_eq!(decide(&[0.1, 0.5, 0.52, 0.54], &mut r), Mode::Prediction);
        assert_eq!(decide(&[0.5, 0.52, 0.6], &mut r), Mode::Evolution);

        let mut sw = Switch::new(cfg);
        let hist = [0.5, 0.5, 0.5];
        assert_eq!(sw.decide(&ds, &refs, &hist, &reg, &mut r).unwrap(), Mode::Prediction);
        sw.rearm(hist.len());
        assert_eq!(sw.decide(&ds, &refs, &hist, &reg, &mut r).unwrap(), Mode::Evolution);
        let more = [0.5, 0.5, 0.5, 0.6, 0.6, 0.6];
        assert_eq!(sw.decide(&ds, &refs, &more, &reg, &mut r).unwrap(), Mode::Prediction);
    }

    #[test]
    fn cosine_identity_population() {
        let spec = GenomeSpec::new(20, 4).unwrap();
        let mut r = rng::from_seed(2);
        let pop: Vec<Genome> = (0..10).map(|_| random_genome(&spec, &mut r)).collect();
        let ds = dataset_of(&pop);
        let refs: Vec<&Genome> = pop.iter().collect();
        let score = population_similarity(&refs, &ds, CosineAggregation::MeanOfMax).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
        let cfg = SwitchConfig::new(SwitchKind::CosineSimilarity, 0.9);
        let mode = switch_decide(&cfg, &ds, &refs, &[], &RegressorConfig::default(), &mut r).unwrap();
        assert_eq!(mode, Mode::Prediction);
        let min = population_similarity(&refs, &ds, CosineAggregation::MinOfMax).unwrap();
        let means = population_similarity(&refs, &ds, CosineAggregation::MeanOfMeans).unwrap();
        assert!((min - 1.0).abs() < 1e-12);
        assert!(means < 1.0);
    }

    #[test]
    fn cosine_decision_ignores_positive_rescaling() {
        let ds = dataset_of(&[g(&[1, 0, 1, 1]), g(&[0, 1, 1, 0])]);
        let a = [g(&[1, 1, 0, 1]), g(&[0, 1, 0, 0])];
        let b = [g(&[3, 3, 0, 3]), g(&[0, 2, 0, 0])];
        let sa = population_similarity(&a.iter().collect::<Vec<_>>(), &ds, CosineAggregation::MeanOfMax).unwrap();
        let sb = population_similarity(&b.iter().collect::<Vec<_>>(), &ds, CosineAggregation::MeanOfMax).unwrap();
        assert!((sa - sb).abs() < 1e-12);
    }

    #[test]
    fn cv_switch_with_tiny_dataset_stays_in_evolution() {
        let pop = [g(&[1, 2]), g(&[2, 1])];
        let ds = dataset_of(&pop);
        let refs: Vec<&Genome> = pop.iter().collect();
        let cfg = SwitchConfig::new(SwitchKind::CvError, 1e9);
        let mode = switch_decide(&cfg, &ds, &refs, &[], &RegressorConfig::default(), &mut rng::from_seed(0)).unwrap();
        assert_eq!(mode, Mode::Evolution);
    }

    #[test]
    fn sample_sizes() {
        assert_eq!(sample_size(0.2, 100), 20);
        assert_eq!(sample_size(0.6, 100), 60);
        assert_eq!(sample_size(0.001, 100), 1);
        assert_eq!(sample_size(0.25, 10), 3);
        assert_eq!(sample_size(1.0, 7), 7);
    }

    #[test]
    fn random_sampling() {
        let mut r = rng::from_seed(3);
        assert_eq!(sample_random(10, 1.0, &mut r).unwrap(), (0..10).collect::<Vec<_>>());
        let s = sample_random(100, 0.2, &mut r).unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_random(10, 0.0, &mut r).is_err());
        assert!(sample_random(10, 1.5, &mut r).is_err());
    }

    #[test]
    fn random_sampling_frequencies() {
        let (n, rate, draws) = (50, 0.2, 10_000);
        let mut r = rng::from_seed(4);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            for i in sample_random(n, rate, &mut r).unwrap() {
                counts[i] += 1;
            }
        }
        let sigma = (draws as f64 * rate * (1.0 - rate)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * rate).abs() <= 3.0 * sigma, "{c}");
        }
    }

    #[test]
    fn similarity_sampling_prefers_novel_individuals() {
        let ds = dataset_of(&[g(&[1, 1, 1, 1])]);
        let pop = [g(&[1, 1, 1, 1]), g(&[1, 0, 0, 0])];
        let refs: Vec<&Genome> = pop.iter().collect();
        assert_eq!(sample_similarity(&refs, &ds, 0.5).unwrap(), vec![1]);
        assert_eq!(sample_similarity(&refs, &ds, 1.0).unwrap(), vec![0, 1]);
        assert!(sample_similarity(&refs, &PopulationDataset::new(), 0.5).is_err());
    }

    #[test]
    fn similarity_sampling_by_hand() {
        // Dataset row [1, 0]; cosines are 1.0, 0.7071 and 0.3162.
        let ds = dataset_of(&[g(&[1, 0])]);
        let pop = [g(&[2, 0]), g(&[1, 1]), g(&[1, 3])];
        let refs: Vec<&Genome> = pop.iter().collect();
        let sims = max_similarities(&refs, &ds).unwrap();
        assert!((sims[0] - 1.0).abs() < 1e-12);
        assert!((sims[1] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((sims[2] - 0.1f64.sqrt()).abs() < 1e-12);
        assert_eq!(sample_similarity(&refs, &ds, 1.0 / 3.0).unwrap(), vec![2]);
        // Ties by index.
        assert_eq!(lowest_scores(&[0.5, 0.1, 0.1, 0.9], 0.5).unwrap(), vec![1, 2]);
        assert_eq!(lowest_scores(&[0.5, 0.1, 0.1, 0.9], 0.25).unwrap(), vec![1]);
    }
}
