use super::{predict, DesignMatrix, LinearModel};

/// Largest violation of the subgradient optimality conditions of the
/// model's own objective on `d`.
///
/// With `g_j = −2 x_jᵀ(y − ŷ)` (columns centered when the model has an
/// intercept) and penalty weights scaled by the model's `penalty_scales`:
///
/// - `β_j = 0`: `max(|g_j| − λ1, 0)`
/// - `β_j ≠ 0`: `|g_j + λ1·sign(β_j) + 2λ2β_j|`
///
/// The intercept is not checked: centering recovers it exactly.
pub fn kkt_check(model: &LinearModel, d: &DesignMatrix) -> f64 {
    let Ok(y_hat) = predict(model, &d.x) else {
        return f64::INFINITY;
    };
    let resid = &d.y - y_hat;
    let (l1, l2) = model.penalty.l1_l2();

    let mut worst = 0.0f64;
    for (j, col) in d.x.column_iter().enumerate() {
        let shift = if model.fit_intercept { col.mean() } else { 0.0 };
        // Same arithmetic as the solver's centered columns, so an all-zero
        // model at exactly λ_max reports no violation.
        let g = -2.0 * col.add_scalar(-shift).dot(&resid);
        let s = model.penalty_scales.get(j).copied().unwrap_or(1.0);
        let beta = model.coefficients[j];
        let violation = if beta == 0.0 {
            (g.abs() - l1 * s).max(0.0)
        } else {
            (g + l1 * s * beta.signum() + 2.0 * l2 * s * s * beta).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{fit_lasso, lambda_max, LinearModel, PenaltySpec, SolverOptions};

    fn design() -> DesignMatrix {
        DesignMatrix::from_rows(&[vec![1.0], vec![-1.0]], &[1.0, -1.0]).unwrap()
    }

    #[test]
    fn exact_univariate_solution_passes() {
        let d = design();
        let model = LinearModel {
            intercept: 0.0,
            coefficients: vec![0.75],
            column_names: vec!["x1".into()],
            penalty: PenaltySpec::lasso(1.0).unwrap(),
            fit_intercept: false,
            penalty_scales: vec![1.0],
            converged: true,
            iterations: 1,
            rank_deficient: false,
        };
        assert!(kkt_check(&model, &d) < 1e-8);

        let mut perturbed = model.clone();
        perturbed.coefficients[0] += 0.1;
        assert!(kkt_check(&perturbed, &d) > 0.0);
    }

    #[test]
    fn dead_zone_has_zero_violation() {
        let d = DesignMatrix::from_rows(&[vec![1.0], vec![2.0], vec![4.0]], &[1.0, 3.0, 2.5]).unwrap();
        let no_intercept = SolverOptions::default().without_intercept();
        let lmax = lambda_max(&d, &no_intercept);
        let model = fit_lasso(&d, 2.0 * lmax, &no_intercept).unwrap();
        assert_eq!(model.coefficients, vec![0.0]);
        assert_eq!(kkt_check(&model, &d), 0.0);

        // With an intercept only rounding in Σ(y − ȳ) remains.
        let opts = SolverOptions::default();
        let lmax = lambda_max(&d, &opts);
        let model = fit_lasso(&d, lmax, &opts).unwrap();
        assert_eq!(model.coefficients, vec![0.0]);
        assert!(kkt_check(&model, &d) < 1e-12);
    }
}
