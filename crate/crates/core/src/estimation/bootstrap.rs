//! Nonparametric bootstrap over row indices.

use rand::Rng;
use rayon::prelude::*;

use super::EstimationError;
use crate::rng;

pub const MIN_BOOTSTRAP_REPLICATES: usize = 100;

/// Statistic values over `b` with-replacement resamples of `0..n_rows`.
///
/// Replicate `r` draws from stream `r` of the seed, so the replicate set is
/// reproducible and independent of evaluation order.
pub fn bootstrap_replicates<F>(
    n_rows: usize,
    b: usize,
    seed: u64,
    statistic: F,
) -> Result<Vec<f64>, EstimationError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if n_rows == 0 {
        return Err(EstimationError::EmptyData);
    }
    let base = rng::master(seed);
    let stats: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::substream(&base, rep as u64);
            let idx: Vec<usize> = (0..n_rows).map(|_| r.gen_range(0..n_rows)).collect();
            statistic(&idx)
        })
        .collect();
    Ok(stats)
}

/// Percentile confidence interval from `b` nonparametric resamples.
pub fn bootstrap_ci<F>(
    n_rows: usize,
    b: usize,
    seed: u64,
    level: f64,
    statistic: F,
) -> Result<(f64, f64), EstimationError>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if b < MIN_BOOTSTRAP_REPLICATES {
        return Err(EstimationError::TooFewReplicates {
            b,
            min: MIN_BOOTSTRAP_REPLICATES,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimationError::InvalidLevel);
    }
    let mut stats = bootstrap_replicates(n_rows, b, seed, statistic)?;
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let tail = (1.0 - level) / 2.0;
    Ok((percentile(&stats, tail), percentile(&stats, 1.0 - tail)))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_statistic_yields_zero_width_interval() {
        let (lo, hi) = bootstrap_ci(50, 200, 7, 0.95, |_| 1.25).unwrap();
        assert_eq!(lo, 1.25);
        assert_eq!(hi, 1.25);
    }

    #[test]
    fn guards_replicate_count() {
        assert!(matches!(
            bootstrap_ci(50, 10, 7, 0.95, |_| 0.0),
            Err(EstimationError::TooFewReplicates { b: 10, min: 100 })
        ));
    }

    #[test]
    fn reproducible_by_seed() {
        let data: Vec<f64> = (0..100).map(|i| f64::from(i) * 0.1).collect();
        let stat = |idx: &[usize]| idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64;
        let a = bootstrap_ci(data.len(), 200, 42, 0.9, stat).unwrap();
        let b = bootstrap_ci(data.len(), 200, 42, 0.9, stat).unwrap();
        assert_eq!(a, b);
    }
}
