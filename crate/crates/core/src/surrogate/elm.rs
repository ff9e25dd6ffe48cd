//! Extreme learning machine: a random, frozen sigmoid hidden layer with
//! output weights from a weighted ridge solve.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::linear::{center, solve_ridge, validate};
use super::{FitInfo, ModelKind, SurrogateModel};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    /// One row per hidden unit.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl HiddenLayer {
    /// Draws each unit's input weights and then its bias from U[-1, 1].
    /// Units are drawn one after another, so a narrower layer from the same
    /// stream is a prefix of a wider one.
    pub fn random(input_dim: usize, width: usize, rng: &mut Rng) -> Self {
        let mut weights = Vec::with_capacity(width);
        let mut biases = Vec::with_capacity(width);
        for _ in 0..width {
            weights.push((0..input_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect());
            biases.push(rng.gen_range(-1.0..=1.0));
        }
        Self { weights, biases }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn width(&self) -> usize {
        self.biases.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), self.width(), |i, h| {
            let z: f64 = x
                .row(i)
                .iter()
                .zip(&self.weights[h])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + self.biases[h];
            1.0 / (1.0 + (-z).exp())
        })
    }
}

/// Hidden activations of `x` under `layer`.
pub fn hidden_features(layer: &HiddenLayer, x: &DMatrix<f64>) -> DMatrix<f64> {
    layer.transform(x)
}

pub fn fit_elm(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    hidden: usize,
    ridge_alpha: f64,
    rng: &mut Rng,
) -> Result<SurrogateModel> {
    validate(x, y, weights)?;
    if hidden == 0 {
        return Err(Error::invalid("hidden width must be at least 1"));
    }
    if !(ridge_alpha >= 0.0) {
        return Err(Error::invalid("ridge alpha must be nonnegative"));
    }
    let layer = HiddenLayer::random(x.ncols(), hidden, rng);
    let h = layer.transform(x);
    let centered = center(&h, y, weights);
    let (w, least_norm) = solve_ridge(&centered, ridge_alpha);
    let intercept = centered.y_mean - centered.x_mean.dot(&w);
    Ok(SurrogateModel {
        kind: ModelKind::Elm,
        coefficients: w.iter().copied().collect(),
        intercept,
        hidden: Some(layer),
        info: FitInfo {
            converged: true,
            least_norm,
            iterations: 1,
        },
    })
}
