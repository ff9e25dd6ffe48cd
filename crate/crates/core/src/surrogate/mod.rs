//! Fitness surrogate: the population dataset and the regressors trained on it.

mod cv;
mod dataset;
mod elm;
mod linear;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::genome::Genome;
use crate::rng::Rng;
use crate::{Error, Result};

pub use cv::cv_error;
pub use dataset::{EvalRecord, PopulationDataset};
pub use elm::{fit_elm, hidden_features, HiddenLayer};
pub use linear::{fit_lasso, fit_ridge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Lasso,
    Elm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ridge" => Ok(ModelKind::Ridge),
            "lasso" => Ok(ModelKind::Lasso),
            "elm" => Ok(ModelKind::Elm),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// How a record's generation stamp turns into a training weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenWeight {
    #[default]
    Sqrt,
    Constant,
    Linear,
}

impl GenWeight {
    pub fn weight(self, generation: u32) -> Result<f64> {
        if generation < 1 {
            return Err(Error::invalid("generation must be at least 1"));
        }
        let g = f64::from(generation);
        Ok(match self {
            GenWeight::Sqrt => g.sqrt(),
            GenWeight::Constant => 1.0,
            GenWeight::Linear => g,
        })
    }
}

impl std::str::FromStr for GenWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(GenWeight::Sqrt),
            "constant" => Ok(GenWeight::Constant),
            "linear" => Ok(GenWeight::Linear),
            other => Err(Error::Config(format!("unknown gen_weight `{other}`"))),
        }
    }
}

/// Training weight of a record: the square root of its generation.
pub fn sample_weight(generation: u32) -> Result<f64> {
    GenWeight::Sqrt.weight(generation)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub kind: ModelKind,
    pub alpha: f64,
    /// Coordinate-descent sweeps (Lasso only).
    pub max_iter: usize,
    pub tol: f64,
    pub elm_hidden: usize,
    /// Ridge penalty of the ELM output solve.
    pub elm_ridge: f64,
    pub gen_weight: GenWeight,
}

impl RegressorConfig {
    pub fn ridge(alpha: f64) -> Self {
        Self {
            kind: ModelKind::Ridge,
            alpha,
            ..Self::default()
        }
    }

    pub fn lasso(alpha: f64, max_iter: usize) -> Self {
        Self {
            kind: ModelKind::Lasso,
            alpha,
            max_iter,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Config("alpha must be nonnegative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.elm_hidden == 0 {
            return Err(Error::Config("elm_hidden must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Ridge,
            alpha: 0.3,
            max_iter: 3000,
            tol: 1e-6,
            elm_hidden: 64,
            elm_ridge: 1e-6,
            gen_weight: GenWeight::Sqrt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitInfo {
    pub converged: bool,
    /// Set when a singular normal system was solved by pseudo-inverse.
    pub least_norm: bool,
    pub iterations: usize,
}

/// A fitted predictor. For ELM the coefficients are the output weights over
/// the hidden activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub kind: ModelKind,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub hidden: Option<HiddenLayer>,
    pub info: FitInfo,
}

impl SurrogateModel {
    /// A model that predicts `value` everywhere.
    pub fn constant(kind: ModelKind, dim: usize, value: f64) -> Self {
        Self {
            kind,
            coefficients: vec![0.0; dim],
            intercept: value,
            hidden: None,
            info: FitInfo::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.hidden {
            Some(h) => h.input_dim(),
            None => self.coefficients.len(),
        }
    }

    /// Unclipped predictions for each row of `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let features = match &self.hidden {
            Some(h) => h.transform(x),
            None => x.clone(),
        };
        Ok((0..features.nrows())
            .map(|i| {
                features
                    .row(i)
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + self.intercept
            })
            .collect())
    }

    pub fn predict_genomes(&self, genomes: &[&Genome]) -> Result<Vec<f64>> {
        self.predict(&genome_matrix(genomes.iter().copied(), self.input_dim())?)
    }
}

pub fn predict(model: &SurrogateModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    model.predict(x)
}

pub(crate) fn genome_matrix<'a>(
    genomes: impl IntoIterator<Item = &'a Genome>,
    dim: usize,
) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut rows = 0;
    for g in genomes {
        if g.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: g.len(),
            });
        }
        data.extend(g.features());
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, dim, &data))
}

/// Features, targets and training weights of a set of records.
pub fn design(
    records: &[&EvalRecord],
    gen_weight: GenWeight,
) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let dim = records.first().map(|r| r.genome.len()).ok_or(Error::EmptyDataset)?;
    let x = genome_matrix(records.iter().map(|r| &r.genome), dim)?;
    let y = records.iter().map(|r| r.fitness).collect();
    let s = records
        .iter()
        .map(|r| gen_weight.weight(r.generation))
        .collect::<Result<_>>()?;
    Ok((x, y, s))
}

/// Fits the configured regressor. The rng is only consumed by ELM.
pub fn fit_model(
    cfg: &RegressorConfig,
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    rng: &mut Rng,
) -> Result<SurrogateModel> {
    match cfg.kind {
        ModelKind::Ridge => fit_ridge(x, y, weights, cfg.alpha),
        ModelKind::Lasso => fit_lasso(x, y, weights, cfg.alpha, cfg.max_iter, cfg.tol),
        ModelKind::Elm => fit_elm(x, y, weights, cfg.elm_hidden, cfg.elm_ridge, rng),
    }
}

/// Fits the configured regressor on the whole dataset.
pub fn fit_dataset(
    cfg: &RegressorConfig,
    dataset: &PopulationDataset,
    rng: &mut Rng,
) -> Result<SurrogateModel> {
    let records: Vec<&EvalRecord> = dataset.iter().collect();
    let (x, y, s) = design(&records, cfg.gen_weight)?;
    fit_model(cfg, &x, &y, &s, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_weights() {
        assert_eq!(sample_weight(1).unwrap(), 1.0);
        assert_eq!(sample_weight(4).unwrap(), 2.0);
        assert_eq!(sample_weight(9).unwrap(), 3.0);
        assert!(sample_weight(0).is_err());
        assert_eq!(GenWeight::Linear.weight(5).unwrap(), 5.0);
        assert_eq!(GenWeight::Constant.weight(5).unwrap(), 1.0);
    }

    #[test]
    fn predictions() {
        let m = SurrogateModel::constant(ModelKind::Ridge, 3, 0.3);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.predict(&x).unwrap(), vec![0.3, 0.3]);
        assert!(m.predict(&DMatrix::zeros(1, 2)).is_err());

        let m = SurrogateModel {
            coefficients: vec![0.5, -1.0, 2.0],
            intercept: 0.25,
            ..m
        };
        let x1 = [1.0, 2.0, 0.0];
        let x2 = [3.0, 1.0, 1.0];
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let p = m
            .predict(&DMatrix::from_row_slice(3, 3, &[x1, x2, sum.try_into().unwrap()].concat()))
            .unwrap();
        assert!((p[2] - (p[0] + p[1] - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn interpolating_fit_reproduces_training_rows() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = [0.2, 0.7, 0.9];
        let m = fit_ridge(&x, &y, &[1.0, 2.0, 3.0], 0.0).unwrap();
        for (p, t) in m.predict(&x).unwrap().iter().zip(y) {
            assert!((p - t).abs() < 1e-9);
        }
    }
}
