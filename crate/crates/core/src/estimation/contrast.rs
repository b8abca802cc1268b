//! Plug-in standardization of exposure contrasts over covariate strata.

use super::EstimationError;
use crate::dgp::Dataset;

/// Exposure values match a contrast level within this tolerance.
pub(crate) const EXPOSURE_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StratumContrast {
    pub stratum: usize,
    pub contrast: f64,
    pub weight: f64,
}

/// `sum_c {E[Y|a,c] - E[Y|a*,c]} P(c)` with empirical cell means and
/// empirical stratum weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastEstimate {
    pub value: f64,
    pub a: f64,
    pub a_star: f64,
    pub per_stratum: Vec<StratumContrast>,
}

/// Standardizes the `a` versus `a_star` outcome contrast over the empirical
/// stratum distribution. Every stratum containing rows must contain rows at
/// both exposure levels.
pub fn standardized_contrast(
    dataset: &Dataset,
    a: f64,
    a_star: f64,
) -> Result<ContrastEstimate, EstimationError> {
    if dataset.is_empty() {
        return Err(EstimationError::EmptyData);
    }
    let n_strata = dataset.n_strata;
    let mut count = vec![0usize; n_strata];
    let mut sum_a = vec![0.0f64; n_strata];
    let mut n_a = vec![0usize; n_strata];
    let mut sum_star = vec![0.0f64; n_strata];
    let mut n_star = vec![0usize; n_strata];

    for row in 0..dataset.len() {
        let c = dataset.stratum[row] as usize;
        count[c] += 1;
        let e = dataset.exposure[row];
        if (e - a).abs() <= EXPOSURE_MATCH_TOL {
            sum_a[c] += dataset.outcome[row];
            n_a[c] += 1;
        } else if (e - a_star).abs() <= EXPOSURE_MATCH_TOL {
            sum_star[c] += dataset.outcome[row];
            n_star[c] += 1;
        }
    }

    let total = dataset.len() as f64;
    let mut value = 0.0;
    let mut per_stratum = Vec::new();
    for c in 0..n_strata {
        if count[c] == 0 {
            continue;
        }
        if n_a[c] == 0 || n_star[c] == 0 {
            return Err(EstimationError::PositivityViolation { stratum: c });
        }
        let contrast = sum_a[c] / n_a[c] as f64 - sum_star[c] / n_star[c] as f64;
        let weight = count[c] as f64 / total;
        value += contrast * weight;
        per_stratum.push(StratumContrast {
            stratum: c,
            contrast,
            weight,
        });
    }

    Ok(ContrastEstimate {
        value,
        a,
        a_star,
        per_stratum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::Dataset;

    fn toy(strata: &[u32], exposure: &[f64], outcome: &[f64], n_strata: usize) -> Dataset {
        Dataset::from_observed(
            n_strata,
            strata.to_vec(),
            Vec::new(),
            exposure.to_vec(),
            outcome.to_vec(),
        )
    }

    #[test]
    fn weights_stratum_contrasts() {
        // Stratum 0 (3 of 4 rows... constructed so P(c=1)=0.25): contrast 1,
        // stratum 1: contrast 3 -> 0.75*1 + 0.25*3 = 1.5.
        let ds = toy(
            &[0, 0, 0, 0, 0, 0, 1, 1],
            &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 3.0, 0.0],
            2,
        );
        let est = standardized_contrast(&ds, 1.0, 0.0).unwrap();
        assert!((est.value - 1.5).abs() < 1e-12);
        assert_eq!(est.per_stratum.len(), 2);
    }

    #[test]
    fn single_stratum_is_difference_of_means() {
        let ds = toy(
            &[0, 0, 0, 0],
            &[1.0, 1.0, 0.0, 0.0],
            &[2.0, 4.0, 1.0, 1.0],
            1,
        );
        let est = standardized_contrast(&ds, 1.0, 0.0).unwrap();
        assert!((est.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_cell_is_positivity_violation() {
        let ds = toy(&[0, 0], &[1.0, 1.0], &[1.0, 2.0], 1);
        assert_eq!(
            standardized_contrast(&ds, 1.0, 0.0),
            Err(EstimationError::PositivityViolation { stratum: 0 })
        );
    }

    #[test]
    fn invariant_to_stratum_relabeling_and_row_duplication() {
        let ds = toy(
            &[0, 0, 0, 0, 1, 1],
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            &[2.0, 1.0, 3.0, 0.0, 5.0, 1.0],
            2,
        );
        let base = standardized_contrast(&ds, 1.0, 0.0).unwrap().value;

        // Relabel strata 0<->1.
        let relabeled = toy(
            &[1, 1, 1, 1, 0, 0],
            &ds.exposure,
            &ds.outcome,
            2,
        );
        let rel = standardized_contrast(&relabeled, 1.0, 0.0).unwrap().value;
        assert!((base - rel).abs() < 1e-12);

        // Duplicate all rows.
        let mut strata2 = ds.stratum.clone();
        strata2.extend_from_slice(&ds.stratum);
        let mut exp2 = ds.exposure.clone();
        exp2.extend_from_slice(&ds.exposure);
        let mut out2 = ds.outcome.clone();
        out2.extend_from_slice(&ds.outcome);
        let doubled = toy(&strata2, &exp2, &out2, 2);
        let dup = standardized_contrast(&doubled, 1.0, 0.0).unwrap().value;
        assert!((base - dup).abs() < 1e-12);
    }
}
