//! Two-wave indicator dynamics and time-varying adjustment strategies.
//!
//! The system is linear-Gaussian: wave `t-1` indicators (or latents) are
//! independent noise, wave `t` values are cross-lagged functions of wave
//! `t-1` plus innovations, and the outcome is linear in both waves. Because
//! everything is linear-Gaussian, every regression strategy has an exact
//! population slope computable from the implied covariance matrix
//! ([`analytic_bias`]); the sampled estimates converge to those targets.
//!
//! Strategies for estimating the effect of one current indicator:
//!
//! - `naive`: regress the outcome on the indicator alone;
//! - `current_all`: add the other current indicators;
//! - `current_plus_prior`: add the full prior wave — this blocks every
//!   confounding path that runs through wave `t-1`;
//! - `prior_summary`: add only a summary (for example the mean) of the
//!   prior wave — a cheaper adjustment that removes part of the
//!   confounding.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgp::Provenance;
use crate::estimation::{fit_ols, EstimationError};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LongitudinalError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("target indicator {target} out of range for {n} indicators")]
    TargetOutOfRange { target: usize, n: usize },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Measurement layer placing the two-wave dynamics on latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWaveLatentLayer {
    pub loadings_prior: Vec<f64>,
    pub loadings_current: Vec<f64>,
    pub noise_sd_prior: Vec<f64>,
    pub noise_sd_current: Vec<f64>,
}

/// Linear-Gaussian two-wave system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWaveParams {
    /// `cross_lag[i][j]`: effect of variable `j` at wave `t-1` on variable
    /// `i` at wave `t`.
    pub cross_lag: Vec<Vec<f64>>,
    /// Outcome coefficients on the wave-`t` variables.
    pub outcome_current: Vec<f64>,
    /// Outcome coefficients on the wave-`t-1` variables.
    pub outcome_prior: Vec<f64>,
    pub error_sd_prior: Vec<f64>,
    pub error_sd_current: Vec<f64>,
    pub outcome_noise_sd: f64,
    /// When present, the dynamics act on latents and each indicator is
    /// `loading * latent + noise`.
    pub latent: Option<TwoWaveLatentLayer>,
}

impl TwoWaveParams {
    pub fn n_indicators(&self) -> usize {
        self.cross_lag.len()
    }

    pub fn validate(&self) -> Result<(), LongitudinalError> {
        let n = self.cross_lag.len();
        if n == 0 {
            return Err(LongitudinalError::Dimension("no indicators".into()));
        }
        if self.cross_lag.iter().any(|row| row.len() != n) {
            return Err(LongitudinalError::Dimension(
                "cross-lag matrix must be square".into(),
            ));
        }
        for (name, v) in [
            ("outcome_current", &self.outcome_current),
            ("outcome_prior", &self.outcome_prior),
            ("error_sd_prior", &self.error_sd_prior),
            ("error_sd_current", &self.error_sd_current),
        ] {
            if v.len() != n {
                return Err(LongitudinalError::Dimension(format!(
                    "{name} has {} entries for {n} indicators",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LongitudinalError::NonFinite("coefficient vector"));
            }
        }
        if self
            .cross_lag
            .iter()
            .flatten()
            .any(|x| !x.is_finite())
        {
            return Err(LongitudinalError::NonFinite("cross_lag"));
        }
        if !self.outcome_noise_sd.is_finite() || self.outcome_noise_sd < 0.0 {
            return Err(LongitudinalError::NonFinite("outcome_noise_sd"));
        }
        if let Some(layer) = &self.latent {
            for (name, v) in [
                ("loadings_prior", &layer.loadings_prior),
                ("loadings_current", &layer.loadings_current),
                ("noise_sd_prior", &layer.noise_sd_prior),
                ("noise_sd_current", &layer.noise_sd_current),
            ] {
                if v.len() != n {
                    return Err(LongitudinalError::Dimension(format!(
                        "latent layer {name} has {} entries for {n} indicators",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(LongitudinalError::NonFinite("latent layer"));
                }
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        let encoded = serde_json::to_string(self).expect("params serialize");
        let mut hash: u64 = 0xcbf29ce484222325;
        for byte in encoded.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }
}

/// Sampled two-wave data: prior-wave columns, current-wave columns, outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoWaveDataset {
    pub prior: Vec<Vec<f64>>,
    pub current: Vec<Vec<f64>>,
    pub outcome: Vec<f64>,
    pub provenance: Provenance,
}

impl TwoWaveDataset {
    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn n_indicators(&self) -> usize {
        self.prior.len()
    }
}

/// Samples the two-wave system; reproducible given `(params, n, seed)`.
pub fn simulate_two_wave(
    params: &TwoWaveParams,
    n: usize,
    seed: u64,
) -> Result<TwoWaveDataset, LongitudinalError> {
    params.validate()?;
    let k = params.n_indicators();
    let mut prior = vec![Vec::with_capacity(n); k];
    let mut current = vec![Vec::with_capacity(n); k];
    let mut outcome = Vec::with_capacity(n);

    let base = rng::master(seed);
    let mut prior_latent = vec![0.0f64; k];
    let mut current_latent = vec![0.0f64; k];
    for row in 0..n {
        let mut r = rng::substream(&base, row as u64);
        for i in 0..k {
            let z: f64 = r.sample(StandardNormal);
            prior_latent[i] = params.error_sd_prior[i] * z;
        }
        for i in 0..k {
            let mut v = 0.0;
            for j in 0..k {
                v += params.cross_lag[i][j] * prior_latent[j];
            }
            let z: f64 = r.sample(StandardNormal);
            current_latent[i] = v + params.error_sd_current[i] * z;
        }
        let mut y = 0.0;
        for i in 0..k {
            y += params.outcome_current[i] * current_latent[i]
                + params.outcome_prior[i] * prior_latent[i];
        }
        let z: f64 = r.sample(StandardNormal);
        y += params.outcome_noise_sd * z;

        match &params.latent {
            None => {
                for i in 0..k {
                    prior[i].push(prior_latent[i]);
                    current[i].push(current_latent[i]);
                }
            }
            Some(layer) => {
                for i in 0..k {
                    let zp: f64 = r.sample(StandardNormal);
                    prior[i].push(
                        layer.loadings_prior[i] * prior_latent[i]
                            + layer.noise_sd_prior[i] * zp,
                    );
                    let zc: f64 = r.sample(StandardNormal);
                    current[i].push(
                        layer.loadings_current[i] * current_latent[i]
                            + layer.noise_sd_current[i] * zc,
                    );
                }
            }
        }
        outcome.push(y);
    }

    Ok(TwoWaveDataset {
        prior,
        current,
        outcome,
        provenance: Provenance {
            seed,
            scenario_fingerprint: params.fingerprint(),
        },
    })
}

/// Summary function of the prior wave used by the `prior_summary` strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMeasure {
    Mean,
    Sum,
    Weighted(Vec<f64>),
}

impl SummaryMeasure {
    fn weights(&self, n: usize) -> Result<Vec<f64>, LongitudinalError> {
        match self {
            SummaryMeasure::Mean => Ok(vec![1.0 / n as f64; n]),
            SummaryMeasure::Sum => Ok(vec![1.0; n]),
            SummaryMeasure::Weighted(w) => {
                if w.len() != n {
                    return Err(LongitudinalError::Dimension(format!(
                        "{} summary weights for {n} indicators",
                        w.len()
                    )));
                }
                Ok(w.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Naive,
    CurrentAll,
    CurrentPlusPrior,
    PriorSummary,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Naive,
        Strategy::CurrentAll,
        Strategy::CurrentPlusPrior,
        Strategy::PriorSummary,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::CurrentAll => "current_all",
            Strategy::CurrentPlusPrior => "current_plus_prior",
            Strategy::PriorSummary => "prior_summary",
        }
    }
}

/// Implied covariance of `(prior_1.., current_1.., Y)` under the observed
/// (indicator-level) variables.
fn implied_covariance(params: &TwoWaveParams) -> DMatrix<f64> {
    let k = params.n_indicators();
    let lag = DMatrix::from_fn(k, k, |i, j| params.cross_lag[i][j]);
    let v_pp = DMatrix::from_diagonal(&DVector::from_fn(k, |i, _| {
        params.error_sd_prior[i] * params.error_sd_prior[i]
    }));
    let v_cp = &lag * &v_pp;
    let v_cc = &v_cp * lag.transpose()
        + DMatrix::from_diagonal(&DVector::from_fn(k, |i, _| {
            params.error_sd_current[i] * params.error_sd_current[i]
        }));

    let b = DVector::from_fn(k, |i, _| params.outcome_current[i]);
    let d = DVector::from_fn(k, |i, _| params.outcome_prior[i]);
    // Latent-level outcome covariances.
    let cov_y_prior = v_cp.transpose() * &b + &v_pp * &d;
    let cov_y_current = &v_cc * &b + &v_cp * &d;
    let var_y = (b.transpose() * &v_cc * &b)[(0, 0)]
        + 2.0 * (b.transpose() * &v_cp * &d)[(0, 0)]
        + (d.transpose() * &v_pp * &d)[(0, 0)]
        + params.outcome_noise_sd * params.outcome_noise_sd;

    let dim = 2 * k + 1;
    let mut full = DMatrix::zeros(dim, dim);
    match &params.latent {
        None => {
            for i in 0..k {
                for j in 0..k {
                    full[(i, j)] = v_pp[(i, j)];
                    full[(k + i, k + j)] = v_cc[(i, j)];
                    full[(k + i, j)] = v_cp[(i, j)];
                    full[(j, k + i)] = v_cp[(i, j)];
                }
                full[(2 * k, i)] = cov_y_prior[i];
                full[(i, 2 * k)] = cov_y_prior[i];
                full[(2 * k, k + i)] = cov_y_current[i];
                full[(k + i, 2 * k)] = cov_y_current[i];
            }
        }
        Some(layer) => {
            let lp = &layer.loadings_prior;
            let lc = &layer.loadings_current;
            for i in 0..k {
                for j in 0..k {
                    full[(i, j)] = lp[i] * v_pp[(i, j)] * lp[j];
                    full[(k + i, k + j)] = lc[i] * v_cc[(i, j)] * lc[j];
                    full[(k + i, j)] = lc[i] * v_cp[(i, j)] * lp[j];
                    full[(j, k + i)] = full[(k + i, j)];
                }
                full[(i, i)] += layer.noise_sd_prior[i] * layer.noise_sd_prior[i];
                full[(k + i, k + i)] += layer.noise_sd_current[i] * layer.noise_sd_current[i];
                full[(2 * k, i)] = lp[i] * cov_y_prior[i];
                full[(i, 2 * k)] = full[(2 * k, i)];
                full[(2 * k, k + i)] = lc[i] * cov_y_current[i];
                full[(k + i, 2 * k)] = full[(2 * k, k + i)];
            }
        }
    }
    full[(2 * k, 2 * k)] = var_y;
    full
}

/// Exact population regression slope of the outcome on `target_var`,
/// controlling for `controls`, all indices into the implied covariance.
fn population_slope(cov: &DMatrix<f64>, y: usize, target_var: usize, controls: &[usize]) -> f64 {
    if controls.is_empty() {
        return cov[(y, target_var)] / cov[(target_var, target_var)];
    }
    let m = controls.len();
    let ctrl_cov = DMatrix::from_fn(m, m, |i, j| cov[(controls[i], controls[j])]);
    let ctrl_y = DVector::from_fn(m, |i, _| cov[(controls[i], y)]);
    let ctrl_t = DVector::from_fn(m, |i, _| cov[(controls[i], target_var)]);
    let lu = ctrl_cov.lu();
    let w = lu.solve(&ctrl_y).expect("control covariance is invertible");
    let v = lu.solve(&ctrl_t).expect("control covariance is invertible");
    let mut num = cov[(y, target_var)];
    let mut den = cov[(target_var, target_var)];
    for i in 0..m {
        num -= cov[(target_var, controls[i])] * w[i];
        den -= cov[(target_var, controls[i])] * v[i];
    }
    num / den
}

/// Extends the implied covariance with the prior-wave summary variable as
/// index `2k+1`.
fn with_summary(cov: &DMatrix<f64>, k: usize, weights: &[f64]) -> DMatrix<f64> {
    let dim = cov.nrows();
    let mut out = DMatrix::zeros(dim + 1, dim + 1);
    out.view_mut((0, 0), (dim, dim)).copy_from(cov);
    for v in 0..dim {
        let mut acc = 0.0;
        for j in 0..k {
            acc += weights[j] * cov[(j, v)];
        }
        out[(dim, v)] = acc;
        out[(v, dim)] = acc;
    }
    let mut var = 0.0;
    for i in 0..k {
        for j in 0..k {
            var += weights[i] * weights[j] * cov[(i, j)];
        }
    }
    out[(dim, dim)] = var;
    out
}

/// Exact population slopes of each strategy for the target indicator,
/// path-traced from the implied covariance matrix.
pub fn analytic_bias(
    params: &TwoWaveParams,
    target: usize,
    summary: &SummaryMeasure,
) -> Result<Vec<(Strategy, f64)>, LongitudinalError> {
    params.validate()?;
    let k = params.n_indicators();
    if target >= k {
        return Err(LongitudinalError::TargetOutOfRange { target, n: k });
    }
    let cov = implied_covariance(params);
    let y = 2 * k;
    let t = k + target;

    let mut out = Vec::with_capacity(4);
    out.push((Strategy::Naive, population_slope(&cov, y, t, &[])));
    let other_current: Vec<usize> = (0..k).filter(|&i| i != target).map(|i| k + i).collect();
    out.push((
        Strategy::CurrentAll,
        population_slope(&cov, y, t, &other_current),
    ));
    let prior_all: Vec<usize> = (0..k).collect();
    out.push((
        Strategy::CurrentPlusPrior,
        population_slope(&cov, y, t, &prior_all),
    ));
    let weights = summary.weights(k)?;
    let cov_s = with_summary(&cov, k, &weights);
    out.push((
        Strategy::PriorSummary,
        population_slope(&cov_s, y, t, &[2 * k + 1]),
    ));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyEstimate {
    pub strategy: Strategy,
    pub estimate: f64,
    pub standard_error: f64,
    pub analytic_target: Option<f64>,
    pub bias: Option<f64>,
}

/// Per-strategy estimates for one target indicator on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub target: usize,
    pub rows: Vec<StrategyEstimate>,
}

/// Runs the four regression strategies on sampled (or ingested) two-wave
/// data; analytic targets are attached when the generating parameters are
/// known.
pub fn analyze_strategies(
    data: &TwoWaveDataset,
    target: usize,
    summary: &SummaryMeasure,
    params: Option<&TwoWaveParams>,
) -> Result<StrategyReport, LongitudinalError> {
    let k = data.n_indicators();
    if target >= k {
        return Err(LongitudinalError::TargetOutOfRange { target, n: k });
    }
    let n = data.len();
    let weights = summary.weights(k)?;
    let summary_col: Vec<f64> = (0..n)
        .map(|row| {
            let mut acc = 0.0;
            for j in 0..k {
                acc += weights[j] * data.prior[j][row];
            }
            acc
        })
        .collect();

    let targets = params
        .map(|p| analytic_bias(p, target, summary))
        .transpose()?;
    let target_of = |strategy: Strategy| -> Option<f64> {
        targets
            .as_ref()
            .and_then(|t| t.iter().find(|(s, _)| *s == strategy).map(|(_, v)| *v))
    };

    let mut rows = Vec::with_capacity(4);
    for strategy in Strategy::ALL {
        let mut columns: Vec<&[f64]> = vec![&data.current[target]];
        match strategy {
            Strategy::Naive => {}
            Strategy::CurrentAll => {
                for i in 0..k {
                    if i != target {
                        columns.push(&data.current[i]);
                    }
                }
            }
            Strategy::CurrentPlusPrior => {
                for i in 0..k {
                    columns.push(&data.prior[i]);
                }
            }
            Strategy::PriorSummary => columns.push(&summary_col),
        }
        let fit = fit_ols(&data.outcome, &columns, true)?;
        let estimate = fit.coefficients[1];
        let analytic_target = target_of(strategy);
        rows.push(StrategyEstimate {
            strategy,
            estimate,
            standard_error: fit.standard_errors[1],
            analytic_target,
            bias: analytic_target.map(|t| estimate - t),
        });
    }
    Ok(StrategyReport { target, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures;

    #[test]
    fn confounding_fixture_naive_slope_is_exactly_one_tenth() {
        let params = fixtures::two_wave_confounding();
        let slopes = analytic_bias(&params, 0, &SummaryMeasure::Mean).unwrap();
        let naive = slopes
            .iter()
            .find(|(s, _)| *s == Strategy::Naive)
            .unwrap()
            .1;
        assert_eq!(naive, 0.1);
    }

    #[test]
    fn confounding_fixture_prior_adjustment_is_exactly_zero() {
        let params = fixtures::two_wave_confounding();
        let slopes = analytic_bias(&params, 0, &SummaryMeasure::Mean).unwrap();
        let cpp = slopes
            .iter()
            .find(|(s, _)| *s == Strategy::CurrentPlusPrior)
            .unwrap()
            .1;
        assert_eq!(cpp, 0.0);
    }

    #[test]
    fn summary_adjustment_sits_strictly_between() {
        let params = fixtures::two_wave_confounding();
        let slopes = analytic_bias(&params, 0, &SummaryMeasure::Mean).unwrap();
        let get = |s: Strategy| slopes.iter().find(|(x, _)| *x == s).unwrap().1;
        let partial = get(Strategy::PriorSummary);
        assert!(partial > get(Strategy::CurrentPlusPrior));
        assert!(partial < get(Strategy::Naive));
    }

    #[test]
    fn no_cross_lags_means_every_strategy_returns_the_true_effect() {
        let params = TwoWaveParams {
            cross_lag: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            outcome_current: vec![0.3, 0.0],
            outcome_prior: vec![0.0, 0.0],
            error_sd_prior: vec![1.0, 1.0],
            error_sd_current: vec![1.0, 1.0],
            outcome_noise_sd: 1.0,
            latent: None,
        };
        for (_, slope) in analytic_bias(&params, 0, &SummaryMeasure::Mean).unwrap() {
            assert!((slope - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_latent_layer_reproduces_indicator_analysis() {
        let plain = fixtures::two_wave_confounding();
        let latent = fixtures::two_wave_confounding_latent(0.0);
        let a = analytic_bias(&plain, 0, &SummaryMeasure::Mean).unwrap();
        let b = analytic_bias(&latent, 0, &SummaryMeasure::Mean).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn prior_adjustment_bias_grows_with_indicator_noise() {
        let mut last = -1.0;
        for scale in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let params = fixtures::two_wave_confounding_latent(scale);
            let slopes = analytic_bias(&params, 0, &SummaryMeasure::Mean).unwrap();
            let cpp = slopes
                .iter()
                .find(|(s, _)| *s == Strategy::CurrentPlusPrior)
                .unwrap()
                .1;
            assert!(
                cpp > last - 1e-14,
                "bias not monotone at noise {scale}: {cpp} after {last}"
            );
            last = cpp;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn simulation_is_reproducible() {
        let params = fixtures::two_wave_confounding();
        let a = simulate_two_wave(&params, 100, 9).unwrap();
        let b = simulate_two_wave(&params, 100, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn null_system_columns_are_independent_noise() {
        let params = TwoWaveParams {
            cross_lag: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            outcome_current: vec![0.0, 0.0],
            outcome_prior: vec![0.0, 0.0],
            error_sd_prior: vec![1.0, 1.0],
            error_sd_current: vec![1.0, 1.0],
            outcome_noise_sd: 1.0,
            latent: None,
        };
        let data = simulate_two_wave(&params, 20_000, 11).unwrap();
        let report = analyze_strategies(&data, 0, &SummaryMeasure::Mean, Some(&params)).unwrap();
        for row in &report.rows {
            assert!(
                row.estimate.abs() < 3.0 * row.standard_error,
                "{} drifted: {} (se {})",
                row.strategy.label(),
                row.estimate,
                row.standard_error
            );
        }
    }
}
