use rand::seq::SliceRandom;

use super::{design, fit_model, EvalRecord, PopulationDataset, RegressorConfig};
use crate::rng::Rng;
use crate::{Error, Result};

/// Shuffled k-fold cross-validation error of `cfg` on `dataset`.
///
/// Each fold is fitted on the remaining rows with their generation weights
/// and scored by weighted squared error on its own rows. The result is the
/// weight-averaged MSE over all held-out rows, in normalized fitness units.
pub fn cv_error(
    dataset: &PopulationDataset,
    cfg: &RegressorConfig,
    folds: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let n = dataset.len();
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if n < folds {
        return Err(Error::InsufficientData { rows: n, folds });
    }
    let records = dataset.records();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let (mut sse, mut total_weight) = (0.0, 0.0);
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let held: Vec<&EvalRecord> = order[lo..hi].iter().map(|&i| &records[i]).collect();
        let train: Vec<&EvalRecord> = order[..lo]
            .iter()
            .chain(&order[hi..])
            .map(|&i| &records[i])
            .collect();
        let (x, y, s) = design(&train, cfg.gen_weight)?;
        let model = fit_model(cfg, &x, &y, &s, rng)?;
        let (xv, yv, sv) = design(&held, cfg.gen_weight)?;
        for ((p, t), w) in model.predict(&xv)?.iter().zip(&yv).zip(&sv) {
            sse += w * (p - t).powi(2);
            total_weight += w;
        }
    }
    Ok(sse / total_weight)
}
