use nalgebra::{DMatrix, DVector};

use super::{DesignMatrix, LinearModel, PenaltySpec, SolverOptions};
use crate::{Error, Result};

/// `sign(z) · max(|z| − gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Centered (and optionally scaled) copy of the design.
struct Prepared {
    z: DMatrix<f64>,
    y: DVector<f64>,
    x_mean: DVector<f64>,
    y_mean: f64,
    scales: Vec<f64>,
}

impl Prepared {
    fn new(d: &DesignMatrix, opts: &SolverOptions) -> Self {
        let (n, p) = (d.n(), d.p());
        let (x_mean, y_mean) = if opts.fit_intercept {
            (
                DVector::from_iterator(p, d.x.column_iter().map(|c| c.mean())),
                d.y.mean(),
            )
        } else {
            (DVector::zeros(p), 0.0)
        };
        let mut z = d.x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_mean[j]);
        }
        let mut scales = vec![1.0; p];
        if opts.standardize {
            for (j, mut col) in z.column_iter_mut().enumerate() {
                let sd = (col.norm_squared() / n as f64).sqrt();
                if sd > 0.0 {
                    col /= sd;
                    scales[j] = sd;
                }
            }
        }
        let y = d.y.add_scalar(-y_mean);
        Prepared {
            z,
            y,
            x_mean,
            y_mean,
            scales,
        }
    }

    /// Maps coefficients of the scaled problem back to the original columns.
    fn finish(
        &self,
        d: &DesignMatrix,
        opts: &SolverOptions,
        beta_scaled: &DVector<f64>,
        penalty: PenaltySpec,
        converged: bool,
        iterations: usize,
        rank_deficient: bool,
    ) -> LinearModel {
        let coefficients: Vec<f64> = beta_scaled
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| b / s)
            .collect();
        let intercept = if opts.fit_intercept {
            self.y_mean - coefficients.iter().zip(self.x_mean.iter()).map(|(b, m)| b * m).sum::<f64>()
        } else {
            0.0
        };
        LinearModel {
            intercept,
            coefficients,
            column_names: d.column_names.clone(),
            penalty,
            fit_intercept: opts.fit_intercept,
            penalty_scales: self.scales.clone(),
            converged,
            iterations,
            rank_deficient,
        }
    }
}

/// Least squares with a minimum-norm (SVD) solution when the normal
/// equations are singular; `rank_deficient` is set in that case.
pub fn fit_ols(d: &DesignMatrix, opts: &SolverOptions) -> Result<LinearModel> {
    solve_ridge(d, 0.0, opts, PenaltySpec::ridge(0.0)?)
}

/// Closed-form ridge: `(ZᵀZ + λI) β = Zᵀy` on centered data.
pub fn fit_ridge(d: &DesignMatrix, lambda: f64, opts: &SolverOptions) -> Result<LinearModel> {
    solve_ridge(d, lambda, opts, PenaltySpec::ridge(lambda)?)
}

fn solve_ridge(d: &DesignMatrix, lambda: f64, opts: &SolverOptions, penalty: PenaltySpec) -> Result<LinearModel> {
    let prep = Prepared::new(d, opts);
    let p = d.p();
    let mut gram = prep.z.tr_mul(&prep.z);
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = prep.z.tr_mul(&prep.y);

    if lambda > 0.0 {
        if let Some(chol) = gram.clone().cholesky() {
            let beta = chol.solve(&rhs);
            return Ok(prep.finish(d, opts, &beta, penalty, true, 1, false));
        }
    }

    // Minimum-norm least squares through the SVD of Z itself, which is
    // better conditioned than the Gram matrix.
    let (beta, rank) = if lambda > 0.0 {
        let svd = gram.svd(true, true);
        let cutoff = singular_cutoff(&svd.singular_values, p, p);
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        (svd.solve(&rhs, cutoff).map_err(|e| Error::InvalidInput(e.into()))?, rank)
    } else {
        let svd = prep.z.clone().svd(true, true);
        let cutoff = singular_cutoff(&svd.singular_values, d.n(), p);
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        (svd.solve(&prep.y, cutoff).map_err(|e| Error::InvalidInput(e.into()))?, rank)
    };
    Ok(prep.finish(d, opts, &beta, penalty, true, 1, rank < p))
}

fn singular_cutoff(values: &DVector<f64>, rows: usize, cols: usize) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    max * rows.max(cols) as f64 * f64::EPSILON
}

/// Cyclic coordinate-descent lasso for `RSS + λ Σ|β_j|`.
pub fn fit_lasso(d: &DesignMatrix, lambda: f64, opts: &SolverOptions) -> Result<LinearModel> {
    coordinate_descent(d, PenaltySpec::lasso(lambda)?, opts)
}

/// Cyclic coordinate-descent elastic net for `RSS + λ1 Σ|β_j| + λ2 Σβ_j²`.
pub fn fit_elastic_net(d: &DesignMatrix, lambda1: f64, lambda2: f64, opts: &SolverOptions) -> Result<LinearModel> {
    coordinate_descent(d, PenaltySpec::elastic_net(lambda1, lambda2)?, opts)
}

pub(crate) fn coordinate_descent(d: &DesignMatrix, penalty: PenaltySpec, opts: &SolverOptions) -> Result<LinearModel> {
    opts.validate()?;
    let (l1, l2) = penalty.l1_l2();
    let prep = Prepared::new(d, opts);
    let p = d.p();
    let col_sq: Vec<f64> = prep.z.column_iter().map(|c| c.norm_squared()).collect();
    let mut beta = DVector::<f64>::zeros(p);
    let mut resid = prep.y.clone();
    let half_l1 = l1 / 2.0;

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let denom = col_sq[j] + l2;
            let col = prep.z.column(j);
            let old = beta[j];
            let updated = if denom > 0.0 {
                let rho = col.dot(&resid) + col_sq[j] * old;
                soft_threshold(rho, half_l1) / denom
            } else {
                0.0
            };
            let delta = updated - old;
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(prep.finish(d, opts, &beta, penalty, converged, sweeps, false))
}

/// Smallest L1 weight at which the lasso solution is identically zero:
/// `max_j |2 z_jᵀ(y − ȳ)|` over the prepared columns.
pub fn lambda_max(d: &DesignMatrix, opts: &SolverOptions) -> f64 {
    let prep = Prepared::new(d, opts);
    prep.z
        .column_iter()
        .map(|c| (2.0 * c.dot(&prep.y)).abs())
        .fold(0.0, f64::max)
}
