//! Penalized linear regression.
//!
//! All objectives are written on the residual sum of squares without any
//! `1/n` or `1/2` factor:
//!
//! ```text
//! ridge:        Σ(y_i − ŷ_i)² + λ Σβ_j²
//! lasso:        Σ(y_i − ŷ_i)² + λ Σ|β_j|
//! elastic net:  Σ(y_i − ŷ_i)² + λ1 Σ|β_j| + λ2 Σβ_j²
//! ```
//!
//! so λ values are on the scale of the residual sum of squares. To convert a
//! λ from the `(1/2n)·RSS` convention, multiply it by `2n`.
//!
//! The intercept is never penalized: fits center `y` and the columns of `X`
//! and recover `a_0` afterwards. Ridge (and OLS) use the closed form, lasso
//! and elastic net use cyclic coordinate descent in column order.

mod kkt;
mod selection;
mod solver;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use kkt::kkt_check;
pub use selection::{
    cross_validate, default_ridge_grid, iterate_lambda, log_grid, path_csv, CvResult, CvRow,
};
pub use solver::{fit_elastic_net, fit_lasso, fit_ols, fit_ridge, lambda_max, soft_threshold};

/// Coefficients with `|β_j|` at or below this count as zero.
pub const NONZERO_THRESHOLD: f64 = 1e-10;

/// Samples × regressors design with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, column_names: Vec<String>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput("design needs at least one row and one column".into()));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if column_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: column_names.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design contains non-finite values".into()));
        }
        Ok(DesignMatrix { x, y, column_names })
    }

    /// Builds a design from row slices, naming columns `x1..xp`.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged design rows".into()));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(
            x,
            DVector::from_column_slice(y),
            (1..=p).map(|j| format!("x{j}")).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows at the given indices, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DesignMatrix> {
        DesignMatrix::new(
            self.x.select_rows(rows),
            DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            self.column_names.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Ridge,
    Lasso,
    ElasticNet,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 3] = [PenaltyKind::Ridge, PenaltyKind::Lasso, PenaltyKind::ElasticNet];

    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyKind::Ridge => "ridge",
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::ElasticNet => "elastic_net",
        }
    }

    /// Penalty of this kind at total strength `lambda`; `alpha` is only used
    /// by the elastic net.
    pub fn spec(self, lambda: f64, alpha: f64) -> Result<PenaltySpec> {
        match self {
            PenaltyKind::Ridge => PenaltySpec::ridge(lambda),
            PenaltyKind::Lasso => PenaltySpec::lasso(lambda),
            PenaltyKind::ElasticNet => PenaltySpec::elastic_net_mix(lambda, alpha),
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge" => Ok(PenaltyKind::Ridge),
            "lasso" => Ok(PenaltyKind::Lasso),
            "elastic_net" | "elastic-net" | "enet" => Ok(PenaltyKind::ElasticNet),
            other => Err(Error::InvalidInput(format!("unknown penalty kind {other:?}"))),
        }
    }
}

/// Penalty kind and weights. Ridge and lasso use `lambda`; the elastic net
/// uses `lambda1` (L1) and `lambda2` (L2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `lambda1 / (lambda1 + lambda2)`; absent when both are zero.
    pub alpha: Option<f64>,
}

fn check_weight(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be a non-negative finite number, got {v}")))
    }
}

impl PenaltySpec {
    pub fn ridge(lambda: f64) -> Result<Self> {
        check_weight("lambda", lambda)?;
        Ok(PenaltySpec {
            kind: PenaltyKind::Ridge,
            lambda,
            lambda1: 0.0,
            lambda2: lambda,
            alpha: Some(0.0),
        })
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        check_weight("lambda", lambda)?;
        Ok(PenaltySpec {
            kind: PenaltyKind::Lasso,
            lambda,
            lambda1: lambda,
            lambda2: 0.0,
            alpha: Some(1.0),
        })
    }

    pub fn elastic_net(lambda1: f64, lambda2: f64) -> Result<Self> {
        check_weight("lambda1", lambda1)?;
        check_weight("lambda2", lambda2)?;
        let total = lambda1 + lambda2;
        Ok(PenaltySpec {
            kind: PenaltyKind::ElasticNet,
            lambda: total,
            lambda1,
            lambda2,
            alpha: (total > 0.0).then(|| lambda1 / total),
        })
    }

    /// `λ1 = α·λ`, `λ2 = (1 − α)·λ`.
    pub fn elastic_net_mix(lambda: f64, alpha: f64) -> Result<Self> {
        check_weight("lambda", lambda)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let mut spec = Self::elastic_net(alpha * lambda, (1.0 - alpha) * lambda)?;
        spec.lambda = lambda;
        spec.alpha = Some(alpha);
        Ok(spec)
    }

    /// Effective `(L1, L2)` weights of the objective.
    pub fn l1_l2(&self) -> (f64, f64) {
        match self.kind {
            PenaltyKind::Ridge => (0.0, self.lambda),
            PenaltyKind::Lasso => (self.lambda, 0.0),
            PenaltyKind::ElasticNet => (self.lambda1, self.lambda2),
        }
    }

    /// Total penalty weight, used to order candidates by strength.
    pub fn strength(&self) -> f64 {
        let (l1, l2) = self.l1_l2();
        l1 + l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Coordinate descent stops once no coefficient moves more than this in a sweep.
    pub tol: f64,
    pub max_iter: usize,
    pub fit_intercept: bool,
    /// Scale centered columns to unit variance before penalizing.
    pub standardize: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 100_000,
            fit_intercept: true,
            standardize: false,
        }
    }
}

impl SolverOptions {
    pub fn without_intercept(mut self) -> Self {
        self.fit_intercept = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    pub penalty: PenaltySpec,
    pub fit_intercept: bool,
    /// Per-column factor applied to β_j inside the penalty (1 unless the fit
    /// standardized its columns).
    pub penalty_scales: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// The normal equations were singular and a minimum-norm solution was used.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (usize, &str, f64)> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > NONZERO_THRESHOLD)
            .map(|(j, &b)| (j, self.column_names[j].as_str(), b))
    }

    pub fn support(&self) -> Vec<usize> {
        self.nonzero().map(|(j, _, _)| j).collect()
    }

    pub fn export(&self) -> ModelExport {
        ModelExport {
            intercept: self.intercept,
            coefficients: self
                .column_names
                .iter()
                .zip(&self.coefficients)
                .map(|(name, &value)| NamedCoefficient {
                    name: name.clone(),
                    value,
                })
                .collect(),
            penalty: self.penalty,
            converged: self.converged,
            iterations: self.iterations,
            rank_deficient: self.rank_deficient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCoefficient {
    pub name: String,
    pub value: f64,
}

/// JSON shape of an exported model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub intercept: f64,
    pub coefficients: Vec<NamedCoefficient>,
    pub penalty: PenaltySpec,
    pub converged: bool,
    pub iterations: usize,
    pub rank_deficient: bool,
}

/// Fits any penalty kind; ridge goes through the closed form.
pub fn fit(d: &DesignMatrix, penalty: &PenaltySpec, opts: &SolverOptions) -> Result<LinearModel> {
    match penalty.kind {
        PenaltyKind::Ridge => fit_ridge(d, penalty.lambda, opts),
        PenaltyKind::Lasso | PenaltyKind::ElasticNet => solver::coordinate_descent(d, *penalty, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mse: f64,
    pub r2: f64,
    pub sparsity: f64,
    pub residuals: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub y_bar: f64,
}

pub fn fit_report(model: &LinearModel, d: &DesignMatrix) -> Result<FitReport> {
    let y_hat = predict(model, &d.x)?;
    let y = d.y.as_slice();
    Ok(FitReport {
        mse: compute_mse(y, y_hat.as_slice())?,
        r2: compute_r2(y, y_hat.as_slice())?,
        sparsity: compute_sparsity(model)?,
        residuals: y.iter().zip(y_hat.iter()).map(|(a, b)| a - b).collect(),
        y_hat: y_hat.iter().copied().collect(),
        y_bar: d.y.mean(),
    })
}

/// `ŷ = a_0 + X β`.
pub fn predict(model: &LinearModel, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x_new.ncols() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            got: x_new.ncols(),
        });
    }
    Ok(DVector::from_iterator(
        x_new.nrows(),
        x_new.row_iter().map(|row| {
            model.intercept + row.iter().zip(&model.coefficients).map(|(x, b)| x * b).sum::<f64>()
        }),
    ))
}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("metrics need at least one sample".into()));
    }
    Ok(())
}

pub fn compute_mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// `1 − RSS / TSS`; a constant target is an error rather than NaN.
pub fn compute_r2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if tss == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let rss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - rss / tss)
}

/// Fraction of coefficients with `|β_j| > 1e-10`.
pub fn compute_sparsity(model: &LinearModel) -> Result<f64> {
    if model.p() == 0 {
        return Err(Error::InvalidInput("model has no coefficients".into()));
    }
    Ok(model.nonzero().count() as f64 / model.p() as f64)
}

/// Regularization path: one row of coefficients per penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub column_names: Vec<String>,
    pub penalties: Vec<PenaltySpec>,
    /// Total penalty weight per row, ascending.
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub r2: Vec<f64>,
    pub mse: Vec<f64>,
    pub converged: Vec<bool>,
}

pub(crate) fn write_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let row: Vec<String> = cells.into_iter().collect();
    let _ = writeln!(out, "{}", row.join(","));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn univariate(x: &[f64], y: &[f64]) -> DesignMatrix {
        DesignMatrix::from_rows(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>(), y).unwrap()
    }

    #[test]
    fn ols_exact_fits() {
        let opts = SolverOptions::default();
        let m = fit_ols(&univariate(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), &opts).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        let d = univariate(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!(fit_report(&m, &d).unwrap().mse < 1e-24);

        let m = fit_ols(&univariate(&[1.0, -1.0], &[1.0, -1.0]), &opts).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn ols_rank_deficient_uses_min_norm() {
        // Duplicate columns: min-norm solution splits the weight evenly.
        let d = DesignMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![4.0, 4.0]], &[2.0, 4.0, 8.0]).unwrap();
        let m = fit_ols(&d, &SolverOptions::default()).unwrap();
        assert!(m.rank_deficient);
        assert!((m.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn univariate_closed_forms() {
        let opts = SolverOptions::default().without_intercept();
        let ridge = fit_ridge(&univariate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0, &opts).unwrap();
        assert!((ridge.coefficients[0] - 14.0 / 15.0).abs() < 1e-10);

        let d = univariate(&[1.0, -1.0], &[1.0, -1.0]);
        let lasso = fit_lasso(&d, 1.0, &opts).unwrap();
        assert!(lasso.converged);
        assert!((lasso.coefficients[0] - 0.75).abs() < 1e-10);

        let enet = fit_elastic_net(&d, 1.0, 1.0, &opts).unwrap();
        assert!((enet.coefficients[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        for z in [-3.0, -0.1, 0.0, 0.7, 12.5] {
            assert_eq!(soft_threshold(z, 0.0), z);
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let d = DesignMatrix::from_rows(
            &[vec![1.0, 0.9], vec![2.0, 2.1], vec![3.0, 2.9], vec![4.0, 4.2]],
            &[1.0, 2.0, 3.1, 3.9],
        )
        .unwrap();
        let opts = SolverOptions {
            max_iter: 2,
            ..SolverOptions::default()
        };
        let m = fit_lasso(&d, 0.01, &opts).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }

    #[test]
    fn metrics() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(compute_mse(&y, &y).unwrap(), 0.0);
        assert_eq!(compute_r2(&y, &y).unwrap(), 1.0);
        let mean = [7.0 / 3.0; 3];
        assert!(compute_r2(&y, &mean).unwrap().abs() < 1e-15);
        assert!(matches!(compute_r2(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(compute_mse(&y, &[1.0]).is_err());
    }

    #[test]
    fn sparsity_counts_nonzero() {
        let mut coefficients = vec![0.0; 16];
        for j in [1, 7, 8, 9, 12, 13, 14] {
            coefficients[j] = 0.1;
        }
        coefficients[0] = 1e-11;
        let model = LinearModel {
            intercept: 0.0,
            column_names: (0..16).map(|j| format!("c{j}")).collect(),
            penalty_scales: vec![1.0; 16],
            coefficients,
            penalty: PenaltySpec::lasso(0.0081).unwrap(),
            fit_intercept: true,
            converged: true,
            iterations: 1,
            rank_deficient: false,
        };
        assert_eq!(compute_sparsity(&model).unwrap(), 0.4375);
    }

    #[test]
    fn predict_contract() {
        let d = univariate(&[1.0, 2.0, 5.0], &[1.0, 3.0, 4.0]);
        let m = fit_ridge(&d, 0.3, &SolverOptions::default()).unwrap();
        let report = fit_report(&m, &d).unwrap();
        let again = predict(&m, &d.x).unwrap();
        assert_eq!(report.y_hat, again.as_slice());

        let zero = LinearModel {
            intercept: 0.0,
            coefficients: vec![0.0],
            ..m.clone()
        };
        assert!(predict(&zero, &d.x).unwrap().iter().all(|&v| v == 0.0));
        assert!(predict(&m, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn penalty_spec_mapping() {
        let mix = PenaltySpec::elastic_net_mix(2.0 * 2.7826e-4, 0.5).unwrap();
        assert_eq!(mix.lambda1, mix.lambda2);
        assert!((mix.lambda1 - 2.7826e-4).abs() < 1e-18);
        assert_eq!(PenaltySpec::elastic_net(0.2, 0.6).unwrap().alpha, Some(0.25));
        assert_eq!(PenaltySpec::elastic_net(0.0, 0.0).unwrap().alpha, None);
        assert!(PenaltySpec::lasso(-1.0).is_err());
        assert!(PenaltySpec::elastic_net_mix(1.0, 1.5).is_err());
        assert_eq!("enet".parse::<PenaltyKind>().unwrap(), PenaltyKind::ElasticNet);
    }

    #[test]
    fn standardized_fit_reports_original_units() {
        let d = DesignMatrix::from_rows(
            &[vec![1.0, 100.0], vec![2.0, 310.0], vec![3.0, 290.0], vec![4.0, 420.0], vec![5.0, 480.0]],
            &[1.0, 2.5, 2.9, 4.2, 5.1],
        )
        .unwrap();
        let opts = SolverOptions {
            standardize: true,
            ..SolverOptions::default()
        };
        let ols = fit_ols(&d, &SolverOptions::default()).unwrap();
        let std_ols = fit_ridge(&d, 0.0, &opts).unwrap();
        for (a, b) in ols.coefficients.iter().zip(&std_ols.coefficients) {
            assert!((a - b).abs() < 1e-9);
        }
        let lasso = fit_lasso(&d, 0.5, &opts).unwrap();
        assert!(kkt_check(&lasso, &d) < 1e-7);
    }
}
