//! Bootstrap Wald test of the structural-proportionality implication.
//!
//! Under a structural one-factor model the covariate-adjusted association of
//! each standardized indicator with the outcome equals a common constant
//! times its loading. The test estimates loadings from the pooled
//! within-stratum correlation matrix, per-indicator associations from
//! marginal covariate-adjusted regressions, projects out the best
//! proportionality constant, and refers the residual quadratic form --
//! weighted by the bootstrap covariance of the residual vector -- to a
//! chi-square with one fewer degrees of freedom than indicators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{factor::fit_one_factor_lenient, PsychometricsError};
use crate::dgp::Dataset;
use crate::rng;

pub const MIN_PROPORTIONALITY_REPLICATES: usize = 500;
const MIN_INDICATORS: usize = 3;
/// Bootstrap covariance eigenvalues below this (absolute) floor are treated
/// as exact degeneracies and skipped; with a degenerate residual the
/// statistic is zero, not infinite.
const EIGEN_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalityReport {
    /// Loadings fitted from the pooled within-stratum correlations.
    pub loadings: Vec<f64>,
    /// Covariate-adjusted association of each standardized indicator.
    pub associations: Vec<f64>,
    /// Fitted proportionality constant.
    pub kappa: f64,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub bootstrap_replicates: usize,
    /// Share of bootstrap factor fits that hit a Heywood boundary.
    pub heywood_rate: f64,
}

/// Pooled within-stratum moment sums for a row subset.
struct Moments {
    n_ind: usize,
    /// Pooled centered cross-products of the indicators.
    sxx: Vec<f64>,
    /// Pooled centered indicator-outcome products.
    sxy: Vec<f64>,
    /// Rows minus strata actually present.
    df: f64,
}

impl Moments {
    fn correlation(&self) -> DMatrix<f64> {
        let p = self.n_ind;
        DMatrix::from_fn(p, p, |i, j| {
            self.sxx[i * p + j] / (self.sxx[i * p + i] * self.sxx[j * p + j]).sqrt()
        })
    }

    /// Slope of the outcome on standardized indicator `i`, covariates
    /// partialled out (exact for categorical strata).
    fn standardized_slope(&self, i: usize) -> f64 {
        let p = self.n_ind;
        self.sxy[i] / (self.sxx[i * p + i] * self.df).sqrt()
    }
}

fn accumulate<I: Iterator<Item = usize>>(ds: &Dataset, rows: I) -> Moments {
    let p = ds.n_indicators();
    let s = ds.n_strata;
    let mut count = vec![0.0f64; s];
    let mut sum_x = vec![0.0f64; s * p];
    let mut sum_y = vec![0.0f64; s];
    let mut sum_xx = vec![0.0f64; s * p * p];
    let mut sum_xy = vec![0.0f64; s * p];

    for row in rows {
        let c = ds.stratum[row] as usize;
        count[c] += 1.0;
        let y = ds.outcome[row];
        sum_y[c] += y;
        for i in 0..p {
            let xi = ds.indicators[i][row];
            sum_x[c * p + i] += xi;
            sum_xy[c * p + i] += xi * y;
            for j in i..p {
                sum_xx[(c * p + i) * p + j] += xi * ds.indicators[j][row];
            }
        }
    }

    let mut sxx = vec![0.0f64; p * p];
    let mut sxy = vec![0.0f64; p];
    let mut df = 0.0;
    for c in 0..s {
        let nc = count[c];
        if nc == 0.0 {
            continue;
        }
        df += nc - 1.0;
        for i in 0..p {
            let mx_i = sum_x[c * p + i] / nc;
            sxy[i] += sum_xy[c * p + i] - mx_i * sum_y[c];
            for j in i..p {
                let centered =
                    sum_xx[(c * p + i) * p + j] - mx_i * sum_x[c * p + j];
                sxx[i * p + j] += centered;
            }
        }
    }
    // Pooling over strata spends one mean per stratum per variable.
    df -= (count.iter().filter(|&&n| n > 0.0).count() as f64 - 1.0).max(0.0);
    for i in 0..p {
        for j in (i + 1)..p {
            sxx[j * p + i] = sxx[i * p + j];
        }
    }
    Moments {
        n_ind: p,
        sxx,
        sxy,
        df: df.max(1.0),
    }
}

struct PipelineOut {
    loadings: Vec<f64>,
    associations: Vec<f64>,
    kappa: f64,
    residual: Vec<f64>,
    heywood: bool,
}

fn pipeline(m: &Moments) -> Result<PipelineOut, PsychometricsError> {
    let fit = fit_one_factor_lenient(&m.correlation())?;
    let p = m.n_ind;
    let associations: Vec<f64> = (0..p).map(|i| m.standardized_slope(i)).collect();
    let num: f64 = fit
        .loadings
        .iter()
        .zip(&associations)
        .map(|(l, b)| l * b)
        .sum();
    let den: f64 = fit.loadings.iter().map(|l| l * l).sum();
    let kappa = if den > 0.0 { num / den } else { 0.0 };
    let residual: Vec<f64> = associations
        .iter()
        .zip(&fit.loadings)
        .map(|(b, l)| b - kappa * l)
        .collect();
    Ok(PipelineOut {
        loadings: fit.loadings,
        associations,
        kappa,
        residual,
        heywood: fit.heywood,
    })
}

/// Tests whether per-indicator outcome associations are proportional to the
/// fitted loadings.
///
/// `b` bootstrap resamples estimate the covariance of the residual vector
/// `b_hat - kappa_hat * loadings`; the statistic is the quadratic form of
/// the observed residual restricted to the leading `n-1` eigendirections
/// (one direction is spent fitting the constant), referred to a chi-square
/// with `n-1` degrees of freedom.
pub fn structural_proportionality_test(
    ds: &Dataset,
    b: usize,
    seed: u64,
) -> Result<ProportionalityReport, PsychometricsError> {
    let p = ds.n_indicators();
    if p < MIN_INDICATORS {
        return Err(PsychometricsError::TooFewIndicators {
            n: p,
            min: MIN_INDICATORS,
        });
    }
    if b < MIN_PROPORTIONALITY_REPLICATES {
        return Err(PsychometricsError::TooFewReplicates {
            b,
            min: MIN_PROPORTIONALITY_REPLICATES,
        });
    }
    let n = ds.len();
    if n == 0 {
        return Err(PsychometricsError::EmptyData);
    }

    let point = pipeline(&accumulate(ds, 0..n))?;

    let base = rng::master(seed);
    let replicate_residuals: Vec<Result<(Vec<f64>, bool), PsychometricsError>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::substream(&base, rep as u64);
            let m = accumulate(ds, (0..n).map(|_| r.gen_range(0..n)));
            pipeline(&m).map(|out| (out.residual, out.heywood))
        })
        .collect();

    let mut residuals = Vec::with_capacity(b);
    let mut heywood_count = 0usize;
    for item in replicate_residuals {
        let (res, heywood) = item?;
        if heywood {
            heywood_count += 1;
        }
        residuals.push(res);
    }

    // Bootstrap covariance of the residual vector.
    let mut mean = vec![0.0f64; p];
    for res in &residuals {
        for i in 0..p {
            mean[i] += res[i];
        }
    }
    for m in &mut mean {
        *m /= b as f64;
    }
    let mut cov = DMatrix::zeros(p, p);
    for res in &residuals {
        for i in 0..p {
            for j in i..p {
                cov[(i, j)] += (res[i] - mean[i]) * (res[j] - mean[j]);
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            cov[(i, j)] /= (b - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }

    // Quadratic form on the leading df = p-1 eigendirections.
    let df = p - 1;
    let eigen = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, usize)> = eigen
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, e)| (e, i))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
    let r_vec = DVector::from_row_slice(&point.residual);
    let mut statistic = 0.0;
    for &(e, idx) in pairs.iter().take(df) {
        if e <= EIGEN_FLOOR {
            continue;
        }
        let proj = eigen.eigenvectors.column(idx).dot(&r_vec);
        statistic += proj * proj / e;
    }

    let chi = ChiSquared::new(df as f64).expect("df >= 1");
    let p_value = 1.0 - chi.cdf(statistic);

    Ok(ProportionalityReport {
        loadings: point.loadings,
        associations: point.associations,
        kappa: point.kappa,
        statistic,
        degrees_of_freedom: df,
        p_value,
        bootstrap_replicates: b,
        heywood_rate: heywood_count as f64 / b as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guards_indicator_count_and_replicates() {
        let ds = Dataset::from_observed(
            1,
            vec![0; 4],
            vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 1.0, 4.0, 3.0]],
            vec![0.0; 4],
            vec![0.1, 0.2, 0.3, 0.4],
        );
        assert!(matches!(
            structural_proportionality_test(&ds, 500, 1),
            Err(PsychometricsError::TooFewIndicators { n: 2, min: 3 })
        ));
        let ds3 = Dataset::from_observed(
            1,
            vec![0; 4],
            vec![
                vec![1.0, 2.0, 3.0, 4.0],
                vec![2.0, 1.0, 4.0, 3.0],
                vec![0.5, 1.5, 2.5, 3.5],
            ],
            vec![0.0; 4],
            vec![0.1, 0.2, 0.3, 0.4],
        );
        assert!(matches!(
            structural_proportionality_test(&ds3, 100, 1),
            Err(PsychometricsError::TooFewReplicates { b: 100, min: 500 })
        ));
    }

    #[test]
    fn noiseless_structural_data_has_zero_statistic() {
        // X_i = loading_i * eta exactly and Y = eta exactly: associations are
        // exactly proportional, the residual degenerates, and the guarded
        // quadratic form is zero.
        let eta: Vec<f64> = (0..200).map(|i| (f64::from(i) - 99.5) / 50.0).collect();
        let loadings = [0.9, 0.8, 0.7];
        let cols: Vec<Vec<f64>> = loadings
            .iter()
            .map(|l| eta.iter().map(|e| l * e).collect())
            .collect();
        let ds = Dataset::from_observed(
            1,
            vec![0; eta.len()],
            cols,
            vec![0.0; eta.len()],
            eta.clone(),
        );
        let report = structural_proportionality_test(&ds, 500, 3).unwrap();
        assert!(
            report.statistic < 1e-6,
            "statistic {} on exactly proportional data",
            report.statistic
        );
        assert!(report.p_value > 0.99);
    }
}
