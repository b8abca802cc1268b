//! Least squares via Householder QR.

use nalgebra::{DMatrix, DVector};

use super::EstimationError;
use crate::dgp::PopulationTable;

/// A fitted linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// Coefficients in regressor order (intercept first when requested).
    pub coefficients: Vec<f64>,
    /// Classical homoskedastic standard errors.
    pub standard_errors: Vec<f64>,
    pub residual_variance: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` on the given columns.
///
/// Solved through the QR decomposition of the design matrix; exact on
/// noiseless data up to factorization roundoff. An intercept column is
/// prepended when `intercept` is set.
pub fn fit_ols(
    y: &[f64],
    columns: &[&[f64]],
    intercept: bool,
) -> Result<RegressionFit, EstimationError> {
    let n = y.len();
    fit_weighted_impl(y, columns, None, intercept, n)
}

/// Weighted least squares with nonnegative weights (rows scaled by the
/// square root of the weight).
pub fn fit_wls(
    y: &[f64],
    columns: &[&[f64]],
    weights: &[f64],
    intercept: bool,
) -> Result<RegressionFit, EstimationError> {
    let n = y.len();
    fit_weighted_impl(y, columns, Some(weights), intercept, n)
}

fn fit_weighted_impl(
    y: &[f64],
    columns: &[&[f64]],
    weights: Option<&[f64]>,
    intercept: bool,
    n: usize,
) -> Result<RegressionFit, EstimationError> {
    let p = columns.len() + usize::from(intercept);
    if n <= p {
        return Err(EstimationError::InsufficientRows { n, p });
    }

    let mut x = DMatrix::zeros(n, p);
    let mut yv = DVector::zeros(n);
    for row in 0..n {
        let w = weights.map_or(1.0, |w| w[row].max(0.0).sqrt());
        let mut col = 0;
        if intercept {
            x[(row, col)] = w;
            col += 1;
        }
        for c in columns {
            x[(row, col)] = w * c[row];
            col += 1;
        }
        yv[row] = w * y[row];
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag == 0.0 || (0..p).any(|i| r[(i, i)].abs() < 1e-10 * max_diag) {
        return Err(EstimationError::RankDeficient);
    }

    let mut qty = yv.clone();
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or(EstimationError::RankDeficient)?;

    let residuals = &yv - &x * &beta;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let residual_variance = ssr / (n - p) as f64;

    // (X'X)^{-1} = R^{-1} R^{-T}.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(EstimationError::RankDeficient)?;
    let standard_errors: Vec<f64> = (0..p)
        .map(|j| {
            let row_norm_sq: f64 = (0..p).map(|k| r_inv[(j, k)] * r_inv[(j, k)]).sum();
            (residual_variance * row_norm_sq).sqrt()
        })
        .collect();

    Ok(RegressionFit {
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        residual_variance,
        n,
    })
}

/// Exact-weights regression of the observed outcome mean on
/// `[1, exposure, stratum indicators]` over an enumerated population: every
/// `(exposure, stratum)` cell enters as one row weighted by its probability.
///
/// The coefficient on the exposure is the population regression slope; when
/// the cell means carry no exposure-stratum interaction it equals the
/// standardized unit contrast exactly.
pub fn fit_population_regression(table: &PopulationTable) -> Result<RegressionFit, EstimationError> {
    let agg = table.aggregates();
    let n_c = agg.n_strata;
    let n_a = agg.n_exposures;

    let mut y = Vec::new();
    let mut exposure = Vec::new();
    let mut dummies: Vec<Vec<f64>> = vec![Vec::new(); n_c.saturating_sub(1)];
    let mut weights = Vec::new();
    for c in 0..n_c {
        for ai in 0..n_a {
            let mass = agg.cell_mass[agg.cell(c, ai)];
            if mass <= 0.0 {
                continue;
            }
            y.push(agg.cell_outcome_sum[agg.cell(c, ai)] / mass);
            exposure.push(table.exposure_values()[ai]);
            for (d, col) in dummies.iter_mut().enumerate() {
                col.push(if c == d + 1 { 1.0 } else { 0.0 });
            }
            weights.push(mass);
        }
    }

    let mut columns: Vec<&[f64]> = Vec::with_capacity(1 + dummies.len());
    columns.push(&exposure);
    for d in &dummies {
        columns.push(d);
    }
    fit_wls(&y, &columns, &weights, true)
}
