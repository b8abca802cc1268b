//! One-factor measurement models and the structural-proportionality test.
//!
//! A structural one-factor interpretation forces every indicator's
//! covariate-adjusted outcome association to be proportional to its loading.
//! Covariance fit alone cannot distinguish a causally efficacious latent
//! from causally efficacious indicators; the proportionality test can.

mod factor;
mod proportionality;

pub use factor::{fit_one_factor, fit_one_factor_lenient, implied_covariance, FactorFit};
pub use proportionality::{
    structural_proportionality_test, ProportionalityReport, MIN_PROPORTIONALITY_REPLICATES,
};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsychometricsError {
    #[error("input matrix is not symmetric positive semidefinite")]
    NonPsdInput,
    #[error("one-factor fitting needs at least 3 indicators, got {dim}")]
    DimensionTooSmall { dim: usize },
    #[error("Heywood case: a uniqueness was driven to zero")]
    HeywoodCase(Box<FactorFit>),
    #[error("uniqueness {index} is negative")]
    NegativeUniqueness { index: usize },
    #[error("{got} weights for {expected} indicators")]
    WeightLengthMismatch { expected: usize, got: usize },
    #[error("the proportionality test needs at least {min} indicators, got {n}")]
    TooFewIndicators { n: usize, min: usize },
    #[error("{b} bootstrap replicates requested; at least {min} required")]
    TooFewReplicates { b: usize, min: usize },
    #[error("dataset has no rows")]
    EmptyData,
}

/// Weighted composite of the indicators plus optional Gaussian error:
/// the formative construction of a latent from its indicators.
///
/// With `error_sd = 0` and weights matching the measure, the composite is
/// the measure itself.
pub fn formative_composite(
    columns: &[Vec<f64>],
    weights: &[f64],
    error_sd: f64,
    seed: u64,
) -> Result<Vec<f64>, PsychometricsError> {
    if weights.len() != columns.len() {
        return Err(PsychometricsError::WeightLengthMismatch {
            expected: columns.len(),
            got: weights.len(),
        });
    }
    let n = columns.first().map_or(0, Vec::len);
    let base = rng::master(seed);
    let mut out = Vec::with_capacity(n);
    for row in 0..n {
        let mut acc = 0.0;
        for (w, col) in weights.iter().zip(columns) {
            acc += w * col[row];
        }
        if error_sd > 0.0 {
            let mut r = rng::substream(&base, row as u64);
            let z: f64 = r.sample(StandardNormal);
            acc += error_sd * z;
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_with_equal_weights_is_the_mean() {
        let cols = vec![vec![1.0], vec![2.0], vec![3.0], vec![0.0]];
        let got = formative_composite(&cols, &[0.25; 4], 0.0, 1).unwrap();
        assert!((got[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_zero_composite() {
        let cols = vec![vec![1.0, 5.0], vec![2.0, -3.0]];
        let got = formative_composite(&cols, &[0.0, 0.0], 0.0, 1).unwrap();
        assert_eq!(got, vec![0.0, 0.0]);
    }

    #[test]
    fn composite_error_variance_matches_scale() {
        let n = 100_000;
        let cols = vec![vec![0.0; n]];
        let got = formative_composite(&cols, &[1.0], 1.0, 42).unwrap();
        let mean = got.iter().sum::<f64>() / n as f64;
        let var = got.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "composite error variance {var}");
    }

    #[test]
    fn weight_length_checked() {
        let cols = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            formative_composite(&cols, &[1.0], 0.0, 1),
            Err(PsychometricsError::WeightLengthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }
}
