//! Weighted Ridge and Lasso with an unpenalized intercept.
//!
//! Both minimize `sum_i s_i (y_i - x_i.w - b)^2 + penalty(w)` with
//! `penalty = alpha * |w|_2^2` (Ridge) or `alpha * |w|_1` (Lasso). There is
//! no `1/(2n)` factor in front of the data term, so `alpha` values are not
//! interchangeable with libraries that scale the loss by the sample count.
//! The intercept is eliminated by centering features and targets on their
//! weighted means.

use nalgebra::{DMatrix, DVector};

use super::{FitInfo, ModelKind, SurrogateModel};
use crate::{Error, Result};

/// Centered, weight-scaled problem: `gram = Xc' S Xc`, `xty = Xc' S yc`.
pub(crate) struct Centered {
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
}

pub(crate) fn validate(x: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<()> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: weights.len(),
        });
    }
    if weights.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(Error::invalid("sample weights must be finite and nonnegative"));
    }
    if weights.iter().all(|&s| s == 0.0) {
        return Err(Error::invalid("sample weights are all zero"));
    }
    Ok(())
}

pub(crate) fn center(x: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Centered {
    let (n, d) = x.shape();
    let total: f64 = weights.iter().sum();
    let mut x_mean = DVector::zeros(d);
    for i in 0..n {
        x_mean.axpy(weights[i] / total, &x.row(i).transpose(), 1.0);
    }
    let y_mean = y.iter().zip(weights).map(|(v, s)| v * s).sum::<f64>() / total;

    let mut z = x.clone();
    let mut t = DVector::zeros(n);
    for i in 0..n {
        let root = weights[i].sqrt();
        for j in 0..d {
            z[(i, j)] = (z[(i, j)] - x_mean[j]) * root;
        }
        t[i] = (y[i] - y_mean) * root;
    }
    Centered {
        gram: z.tr_mul(&z),
        xty: z.tr_mul(&t),
        x_mean,
        y_mean,
    }
}

fn finish(
    kind: ModelKind,
    centered: &Centered,
    coefficients: DVector<f64>,
    info: FitInfo,
) -> SurrogateModel {
    let intercept = centered.y_mean - centered.x_mean.dot(&coefficients);
    SurrogateModel {
        kind,
        coefficients: coefficients.iter().copied().collect(),
        intercept,
        hidden: None,
        info,
    }
}

/// Solves `(gram + alpha I) w = xty`, falling back to the least-norm
/// pseudo-inverse solution when the system is numerically singular.
pub(crate) fn solve_ridge(centered: &Centered, alpha: f64) -> (DVector<f64>, bool) {
    let d = centered.gram.nrows();
    if d == 0 {
        return (DVector::zeros(0), false);
    }
    let mut a = centered.gram.clone();
    for j in 0..d {
        a[(j, j)] += alpha;
    }
    let scale = (0..d).map(|j| a[(j, j)]).fold(0.0, f64::max);
    if let Some(chol) = a.clone().cholesky() {
        let l = chol.l_dirty();
        let min_pivot = (0..d).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
        if scale > 0.0 && min_pivot > scale * 1e-12 {
            return (chol.solve(&centered.xty), false);
        }
    }
    let svd = a.svd(true, true);
    let cutoff = svd.singular_values.max() * d as f64 * f64::EPSILON * 16.0;
    let w = svd
        .solve(&centered.xty, cutoff)
        .unwrap_or_else(|_| DVector::zeros(d));
    (w, true)
}

pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    alpha: f64,
) -> Result<SurrogateModel> {
    validate(x, y, weights)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be nonnegative"));
    }
    let centered = center(x, y, weights);
    let (w, least_norm) = solve_ridge(&centered, alpha);
    Ok(finish(
        ModelKind::Ridge,
        &centered,
        w,
        FitInfo {
            converged: true,
            least_norm,
            iterations: 1,
        },
    ))
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on the covariance form of the problem.
///
/// The coordinate minimizer of `a w^2 - 2 rho w + alpha |w|` is
/// `soft(rho, alpha / 2) / a`. Stops once a full sweep moves no coefficient
/// by `tol` or more.
pub fn fit_lasso(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    alpha: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SurrogateModel> {
    validate(x, y, weights)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be nonnegative"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let centered = center(x, y, weights);
    let gram = &centered.gram;
    let d = gram.nrows();
    let mut w = DVector::<f64>::zeros(d);
    // gw = gram * w, kept in sync with every coordinate update
    let mut gw = DVector::<f64>::zeros(d);
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < max_iter {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            let a = gram[(j, j)];
            if a <= 0.0 {
                continue;
            }
            let rho = centered.xty[j] - (gw[j] - a * w[j]);
            let new = soft_threshold(rho, alpha / 2.0) / a;
            let delta = new - w[j];
            if delta != 0.0 {
                gw.axpy(delta, &gram.column(j), 1.0);
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            converged = true;
            break;
        }
    }

    Ok(finish(
        ModelKind::Lasso,
        &centered,
        w,
        FitInfo {
            converged,
            least_norm: false,
            iterations: sweeps,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn column(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn weighted_loss(x: &DMatrix<f64>, y: &[f64], s: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
        let mut loss = 0.0;
        for i in 0..x.nrows() {
            let pred: f64 = (0..x.ncols()).map(|j| x[(i, j)] * w[j]).sum::<f64>() + b;
            loss += s[i] * (y[i] - pred).powi(2);
        }
        loss + l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn exact_linear_fit() {
        let m = fit_ridge(&column(&[1.0, 2.0, 3.0]), &[2.0, 4.0, 6.0], &[1.0; 3], 0.0).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        assert!(!m.info.least_norm);
    }

    #[test]
    fn ridge_shrinkage_by_hand() {
        // w = sum(xy) / (sum(x^2) + alpha) = 2 / 3
        let m = fit_ridge(&column(&[-1.0, 0.0, 1.0]), &[-1.0, 0.0, 1.0], &[1.0; 3], 1.0).unwrap();
        assert!((m.coefficients[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn ridge_singular_falls_back_to_least_norm() {
        // Two identical columns: least-norm splits the slope evenly.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let m = fit_ridge(&x, &[2.0, 4.0, 6.0], &[1.0; 3], 0.0).unwrap();
        assert!(m.info.least_norm);
        assert!((m.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
    }

    #[test]
    fn ridge_rejects_bad_inputs() {
        let x = column(&[1.0, 2.0]);
        assert!(fit_ridge(&x, &[1.0], &[1.0, 1.0], 0.1).is_err());
        assert!(fit_ridge(&x, &[1.0, 2.0], &[0.0, 0.0], 0.1).is_err());
        assert!(fit_ridge(&x, &[1.0, 2.0], &[1.0, -1.0], 0.1).is_err());
        assert!(fit_ridge(&x, &[1.0, 2.0], &[1.0, 1.0], -0.1).is_err());
    }

    #[test]
    fn ridge_optimality_probe() {
        let mut r = rng::from_seed(17);
        let (n, d) = (30, 6);
        let x = DMatrix::from_fn(n, d, |_, _| r.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..3.0)).collect();
        let m = fit_ridge(&x, &y, &s, 0.3).unwrap();
        let base = weighted_loss(&x, &y, &s, &m.coefficients, m.intercept, 0.3);
        for _ in 0..100 {
            let mut dir: Vec<f64> = (0..=d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v *= 1e-3 / norm);
            let w: Vec<f64> = m.coefficients.iter().zip(&dir).map(|(a, b)| a + b).collect();
            let loss = weighted_loss(&x, &y, &s, &w, m.intercept + dir[d], 0.3);
            assert!(loss >= base - 1e-12);
        }
    }

    #[test]
    fn lasso_by_hand() {
        // rho = 4, sum x^2 = 2, alpha = 2 -> w = (4 - 1) / 2
        let x = column(&[-1.0, 0.0, 1.0]);
        let y = [-2.0, 0.0, 2.0];
        let m = fit_lasso(&x, &y, &[1.0; 3], 2.0, 100, 1e-12).unwrap();
        assert!((m.coefficients[0] - 1.5).abs() < 1e-12);
        assert!(m.info.converged);
        for alpha in [8.0, 9.0, 100.0] {
            let m = fit_lasso(&x, &y, &[1.0; 3], alpha, 100, 1e-12).unwrap();
            assert_eq!(m.coefficients[0], 0.0);
        }
    }

    #[test]
    fn lasso_reports_non_convergence() {
        let mut r = rng::from_seed(3);
        let x = DMatrix::from_fn(40, 8, |_, _| r.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..40).map(|_| r.gen_range(-1.0..1.0)).collect();
        let m = fit_lasso(&x, &y, &[1.0; 40], 0.01, 1, 1e-15).unwrap();
        assert!(!m.info.converged);
        assert_eq!(m.info.iterations, 1);
    }

    #[test]
    fn lasso_objective_never_increases_across_sweeps() {
        let mut r = rng::from_seed(5);
        let (n, d) = (50, 10);
        let x = DMatrix::from_fn(n, d, |_, _| r.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 0.5 * x[(i, 3)] + 0.1 * r.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|i| ((i % 7) as f64 + 1.0).sqrt()).collect();
        let alpha = 0.65;
        let objective = |m: &SurrogateModel| {
            weighted_loss(&x, &y, &s, &m.coefficients, m.intercept, 0.0)
                + alpha * m.coefficients.iter().map(|v| v.abs()).sum::<f64>()
        };
        let mut prev = f64::INFINITY;
        for sweeps in 1..40 {
            let m = fit_lasso(&x, &y, &s, alpha, sweeps, 0.0).unwrap();
            let obj = objective(&m);
            assert!(obj <= prev + 1e-12, "sweep {sweeps}: {obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn weight_and_alpha_scaling() {
        let mut r = rng::from_seed(8);
        let (n, d) = (40, 5);
        let x = DMatrix::from_fn(n, d, |_, _| r.gen_range(0.0f64..3.0).floor());
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (1..=n).map(|g| (g as f64).sqrt()).collect();
        let s2: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let a = fit_ridge(&x, &y, &s, 0.3).unwrap();
        let b = fit_ridge(&x, &y, &s2, 0.6).unwrap();
        let a_l = fit_lasso(&x, &y, &s, 0.65, 10_000, 1e-12).unwrap();
        let b_l = fit_lasso(&x, &y, &s2, 1.3, 10_000, 1e-12).unwrap();
        for j in 0..d {
            assert!((a.coefficients[j] - b.coefficients[j]).abs() < 1e-10);
            assert!((a_l.coefficients[j] - b_l.coefficients[j]).abs() < 1e-9);
        }
    }
}
