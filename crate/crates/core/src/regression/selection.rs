//! λ selection: contiguous-block cross-validation and regularization paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_mse, compute_r2, fit, predict, write_row, DesignMatrix, PathReport, PenaltySpec, SolverOptions};
use crate::{Error, Result};

/// Ridge grid 0, 0.01, …, 0.50.
pub fn default_ridge_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 100.0).collect()
}

/// `count` values spaced evenly in log scale from `lo` to `hi`, ascending.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(Error::InvalidInput(format!("bad log grid ({lo}, {hi}, {count})")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub penalty: PenaltySpec,
    pub cv_mse: f64,
    pub fold_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: PenaltySpec,
    pub table: Vec<CvRow>,
}

/// Contiguous fold boundaries over `n` ordered samples.
fn fold_ranges(n: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    (0..folds).map(|k| (k * n / folds)..((k + 1) * n / folds)).collect()
}

/// K-fold cross-validation with contiguous blocks in sample order.
///
/// The winner has the lowest mean validation MSE; near-ties (relative
/// difference below 1e-12) go to the stronger penalty.
pub fn cross_validate(d: &DesignMatrix, candidates: &[PenaltySpec], folds: usize, opts: &SolverOptions) -> Result<CvResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("λ grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if d.n() < folds {
        return Err(Error::InvalidInput(format!("{} samples cannot fill {folds} folds", d.n())));
    }

    let splits: Vec<(DesignMatrix, DesignMatrix)> = fold_ranges(d.n(), folds)
        .into_iter()
        .map(|held| {
            let train: Vec<usize> = (0..d.n()).filter(|i| !held.contains(i)).collect();
            let test: Vec<usize> = held.collect();
            Ok((d.select_rows(&train)?, d.select_rows(&test)?))
        })
        .collect::<Result<_>>()?;

    let table: Vec<CvRow> = candidates
        .par_iter()
        .map(|penalty| {
            let fold_mse = splits
                .iter()
                .map(|(train, test)| {
                    let model = fit(train, penalty, opts)?;
                    let y_hat = predict(&model, &test.x)?;
                    compute_mse(test.y.as_slice(), y_hat.as_slice())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(CvRow {
                penalty: *penalty,
                cv_mse: fold_mse.iter().sum::<f64>() / folds as f64,
                fold_mse,
            })
        })
        .collect::<Result<_>>()?;

    let mut best = &table[0];
    for row in &table[1..] {
        let scale = row.cv_mse.abs().max(best.cv_mse.abs()).max(f64::MIN_POSITIVE);
        let diff = (row.cv_mse - best.cv_mse) / scale;
        let tie = diff.abs() <= 1e-12;
        if (!tie && diff < 0.0) || (tie && row.penalty.strength() > best.penalty.strength()) {
            best = row;
        }
    }
    Ok(CvResult {
        best: best.penalty,
        table,
    })
}

/// Fits every penalty of an ascending grid from a cold start and records the
/// coefficients with the training R² and MSE.
pub fn iterate_lambda(d: &DesignMatrix, grid: &[PenaltySpec], opts: &SolverOptions) -> Result<PathReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("λ grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1].strength() < w[0].strength()) {
        return Err(Error::InvalidInput("λ grid must be ascending".into()));
    }
    let fits = grid
        .par_iter()
        .map(|penalty| {
            let model = fit(d, penalty, opts)?;
            let y_hat = predict(&model, &d.x)?;
            let r2 = compute_r2(d.y.as_slice(), y_hat.as_slice())?;
            let mse = compute_mse(d.y.as_slice(), y_hat.as_slice())?;
            Ok((model, r2, mse))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = PathReport {
        column_names: d.column_names.clone(),
        penalties: grid.to_vec(),
        lambdas: grid.iter().map(PenaltySpec::strength).collect(),
        coefficients: Vec::with_capacity(fits.len()),
        intercepts: Vec::with_capacity(fits.len()),
        r2: Vec::with_capacity(fits.len()),
        mse: Vec::with_capacity(fits.len()),
        converged: Vec::with_capacity(fits.len()),
    };
    for (model, r2, mse) in fits {
        report.intercepts.push(model.intercept);
        report.converged.push(model.converged);
        report.coefficients.push(model.coefficients);
        report.r2.push(r2);
        report.mse.push(mse);
    }
    Ok(report)
}

/// CSV `lambda,<coef names...>,r2,mse`.
pub fn path_csv(path: &PathReport) -> String {
    let mut out = String::new();
    write_row(
        &mut out,
        std::iter::once("lambda".to_string())
            .chain(path.column_names.iter().map(|n| crate::dataio::csv_field(n)))
            .chain(["r2".to_string(), "mse".to_string()]),
    );
    for (i, lambda) in path.lambdas.iter().enumerate() {
        write_row(
            &mut out,
            std::iter::once(lambda.to_string())
                .chain(path.coefficients[i].iter().map(f64::to_string))
                .chain([path.r2[i].to_string(), path.mse[i].to_string()]),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{fit_lasso, lambda_max, PenaltyKind};

    fn two_feature() -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin() + t * 0.1, (t * 1.3).cos()]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 * r[0] - 0.8 * r[1] + 0.3).collect();
        DesignMatrix::from_rows(&rows, &y).unwrap()
    }

    #[test]
    fn grids() {
        let g = default_ridge_grid();
        assert_eq!(g.len(), 51);
        assert_eq!(g[1], 0.01);
        assert_eq!(g[50], 0.5);
        let l = log_grid(1e-3, 10.0, 5).unwrap();
        assert_eq!(l.len(), 5);
        assert!((l[2] - 0.1).abs() < 1e-12);
        assert_eq!(l[4], 10.0);
    }

    #[test]
    fn single_candidate_wins() {
        let d = two_feature();
        let only = PenaltySpec::lasso(0.3).unwrap();
        let cv = cross_validate(&d, &[only], 3, &SolverOptions::default()).unwrap();
        assert_eq!(cv.best, only);
        assert_eq!(cv.table.len(), 1);
        assert_eq!(cv.table[0].fold_mse.len(), 3);
    }

    #[test]
    fn cv_errors() {
        let d = two_feature();
        let opts = SolverOptions::default();
        assert!(cross_validate(&d, &[], 3, &opts).is_err());
        assert!(cross_validate(&d, &[PenaltySpec::ridge(0.1).unwrap()], 1, &opts).is_err());
        assert!(cross_validate(&d, &[PenaltySpec::ridge(0.1).unwrap()], 13, &opts).is_err());
    }

    #[test]
    fn cv_ties_prefer_stronger_penalty() {
        // Above λ_max every lasso fit is the intercept-only model.
        let d = two_feature();
        let opts = SolverOptions::default();
        let lmax = lambda_max(&d, &opts);
        let grid: Vec<PenaltySpec> = [2.0, 3.0, 4.0].iter().map(|m| PenaltySpec::lasso(m * lmax * 10.0).unwrap()).collect();
        let cv = cross_validate(&d, &grid, 3, &opts).unwrap();
        assert_eq!(cv.best, grid[2]);
    }

    #[test]
    fn fold_ranges_cover_samples() {
        let r = fold_ranges(15, 4);
        assert_eq!(r, vec![0..3, 3..7, 7..11, 11..15]);
    }

    #[test]
    fn path_matches_pointwise_fits() {
        let d = two_feature();
        let opts = SolverOptions::default();
        let lmax = lambda_max(&d, &opts);
        let grid: Vec<PenaltySpec> = log_grid(lmax * 1e-3, lmax * 2.0, 12)
            .unwrap()
            .into_iter()
            .map(|l| PenaltyKind::Lasso.spec(l, 1.0).unwrap())
            .collect();
        let path = iterate_lambda(&d, &grid, &opts).unwrap();
        for (i, spec) in grid.iter().enumerate() {
            let one = fit_lasso(&d, spec.lambda, &opts).unwrap();
            assert_eq!(one.coefficients, path.coefficients[i]);
        }
        assert!(path.coefficients.last().unwrap().iter().all(|&b| b == 0.0));

        let csv = path_csv(&path);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("lambda,x1,x2,r2,mse"));
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn path_rejects_descending_grid() {
        let d = two_feature();
        let grid = [PenaltySpec::ridge(1.0).unwrap(), PenaltySpec::ridge(0.5).unwrap()];
        assert!(iterate_lambda(&d, &grid, &SolverOptions::default()).is_err());
    }
}
