//! Turns a scenario into an exact population table (enumeration) or a
//! sampled dataset with per-unit potential outcomes.
//!
//! Discrete scenarios enumerate to a [`PopulationTable`]: one row ("atom")
//! per reachable joint state of stratum, violation variables `U`, version,
//! and exposure, each carrying the conditional outcome mean and the full
//! vector of potential-outcome means `E[Y_k' | state]`. The table is the
//! substrate every exact identity check runs on.
//!
//! Sampling mirrors the same generative arithmetic with per-row random
//! streams, so row order is irrelevant and generation could be split across
//! workers without changing output. In discrete mode each unit carries its
//! full potential-outcome vector and the realized outcome is looked up from
//! it, making consistency exact by construction rather than approximate.

mod enumerate;
mod sample;

pub use enumerate::enumerate_population;
pub(crate) use enumerate::enumerate_support;
pub use sample::{sample_dataset, sample_observed};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{MeasureForm, MeasureSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DgpError {
    #[error("scenario has continuous components and cannot be enumerated exactly")]
    ContinuousScenarioNotEnumerable,
    #[error("measure weights cover {got} indicators but {expected} are present")]
    WeightLengthMismatch { expected: usize, got: usize },
    #[error("coarsening produced empty category {index}")]
    EmptyCategory { index: usize },
    #[error("measure form `{0}` is not applicable here")]
    MeasureNotApplicable(&'static str),
    #[error("discrete state space too large: {0}")]
    StateSpaceTooLarge(String),
    #[error("{0}")]
    UnsupportedKind(&'static str),
}

/// One reachable joint state of the enumerated population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub stratum: u32,
    pub version: u32,
    pub a_index: u32,
    /// One bit per violation-owned `U`, in canonical violation order.
    pub u_mask: u32,
    pub probability: f64,
    /// Realized indicator values (empty for scalar-version designs).
    pub indicators: Vec<f64>,
    /// `E[Y | this state]`.
    pub outcome_mean: f64,
    /// `E[Y_k' | this state]` for every version `k'`.
    pub potential_means: Vec<f64>,
}

/// Exact joint law of `(C, U, K, A)` with tracked potential outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTable {
    n_strata: usize,
    stratum_probs: Vec<f64>,
    /// Sorted distinct exposure values.
    a_values: Vec<f64>,
    /// Numeric display label per version.
    version_values: Vec<f64>,
    atoms: Vec<Atom>,
}

/// Aggregated row of the table over `(stratum, version, exposure)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRow {
    pub stratum: usize,
    pub version: usize,
    pub exposure: f64,
    pub probability: f64,
}

impl PopulationTable {
    pub(crate) fn new(
        n_strata: usize,
        stratum_probs: Vec<f64>,
        a_values: Vec<f64>,
        version_values: Vec<f64>,
        atoms: Vec<Atom>,
    ) -> Self {
        PopulationTable {
            n_strata,
            stratum_probs,
            a_values,
            version_values,
            atoms,
        }
    }

    pub fn n_strata(&self) -> usize {
        self.n_strata
    }

    pub fn n_versions(&self) -> usize {
        self.version_values.len()
    }

    pub fn exposure_values(&self) -> &[f64] {
        &self.a_values
    }

    pub fn version_values(&self) -> &[f64] {
        &self.version_values
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn stratum_probs(&self) -> &[f64] {
        &self.stratum_probs
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability).sum()
    }

    /// Index of the exposure value within `1e-9` of `a`, if unique.
    pub fn find_exposure(&self, a: f64) -> Option<usize> {
        let mut hit = None;
        for (i, &v) in self.a_values.iter().enumerate() {
            if (v - a).abs() <= 1e-9 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(i);
            }
        }
        hit
    }

    /// Exposure values with positive probability in every positive-probability
    /// stratum.
    pub fn common_exposure_support(&self) -> Vec<f64> {
        let agg = self.aggregates();
        let mut out = Vec::new();
        for (ai, &a) in self.a_values.iter().enumerate() {
            let everywhere = (0..self.n_strata).all(|c| {
                agg.stratum_mass[c] <= 0.0 || agg.cell_mass[agg.cell(c, ai)] > 0.0
            });
            if everywhere {
                out.push(a);
            }
        }
        out
    }

    /// Stratum with the fewest positive-mass exposure values (diagnostic for
    /// positivity rejections).
    pub fn thinnest_stratum(&self) -> usize {
        let agg = self.aggregates();
        (0..self.n_strata)
            .filter(|&c| agg.stratum_mass[c] > 0.0)
            .min_by_key(|&c| {
                (0..self.a_values.len())
                    .filter(|&ai| agg.cell_mass[agg.cell(c, ai)] > 0.0)
                    .count()
            })
            .unwrap_or(0)
    }

    /// Aggregated `(stratum, version, exposure)` rows with their joint
    /// probability.
    pub fn rows(&self) -> Vec<PopulationRow> {
        let n_a = self.a_values.len();
        let n_k = self.version_values.len();
        let mut mass = vec![0.0f64; self.n_strata * n_k * n_a];
        for atom in &self.atoms {
            let idx = (atom.stratum as usize * n_k + atom.version as usize) * n_a
                + atom.a_index as usize;
            mass[idx] += atom.probability;
        }
        let mut rows = Vec::new();
        for c in 0..self.n_strata {
            for k in 0..n_k {
                for ai in 0..n_a {
                    let p = mass[(c * n_k + k) * n_a + ai];
                    if p > 0.0 {
                        rows.push(PopulationRow {
                            stratum: c,
                            version: k,
                            exposure: self.a_values[ai],
                            probability: p,
                        });
                    }
                }
            }
        }
        rows
    }

    /// `E[Y_k | c]`, the potential-outcome mean of version `k` in stratum `c`.
    pub fn potential_outcome_mean(&self, version: usize, stratum: usize) -> Option<f64> {
        let mut mass = 0.0;
        let mut sum = 0.0;
        for atom in &self.atoms {
            if atom.stratum as usize == stratum {
                mass += atom.probability;
                sum += atom.probability * atom.potential_means[version];
            }
        }
        (mass > 0.0).then(|| sum / mass)
    }

    /// Single-pass aggregates backing the identity and derivation-chain
    /// computations.
    pub fn aggregates(&self) -> TableAggregates {
        let n_c = self.n_strata;
        let n_a = self.a_values.len();
        let n_k = self.version_values.len();
        let mut agg = TableAggregates {
            n_strata: n_c,
            n_exposures: n_a,
            n_versions: n_k,
            stratum_mass: vec![0.0; n_c],
            cell_mass: vec![0.0; n_c * n_a],
            cell_outcome_sum: vec![0.0; n_c * n_a],
            cell_version_mass: vec![0.0; n_c * n_a * n_k],
            cell_version_outcome_sum: vec![0.0; n_c * n_a * n_k],
            version_mass: vec![0.0; n_c * n_k],
            version_outcome_sum: vec![0.0; n_c * n_k],
            version_po_own_sum: vec![0.0; n_c * n_k],
            po_sum: vec![0.0; n_c * n_k],
        };
        for atom in &self.atoms {
            let c = atom.stratum as usize;
            let a = atom.a_index as usize;
            let k = atom.version as usize;
            let p = atom.probability;
            agg.stratum_mass[c] += p;
            agg.cell_mass[c * n_a + a] += p;
            agg.cell_outcome_sum[c * n_a + a] += p * atom.outcome_mean;
            agg.cell_version_mass[(c * n_a + a) * n_k + k] += p;
            agg.cell_version_outcome_sum[(c * n_a + a) * n_k + k] += p * atom.outcome_mean;
            agg.version_mass[c * n_k + k] += p;
            agg.version_outcome_sum[c * n_k + k] += p * atom.outcome_mean;
            agg.version_po_own_sum[c * n_k + k] += p * atom.potential_means[k];
            for kp in 0..n_k {
                agg.po_sum[c * n_k + kp] += p * atom.potential_means[kp];
            }
        }
        agg
    }
}

/// Moment sums of a [`PopulationTable`], indexed flat.
#[derive(Debug, Clone)]
pub struct TableAggregates {
    pub n_strata: usize,
    pub n_exposures: usize,
    pub n_versions: usize,
    /// `P(c)`.
    pub stratum_mass: Vec<f64>,
    /// `P(a, c)`.
    pub cell_mass: Vec<f64>,
    /// `Σ p·E[Y|state]` over the `(a, c)` cell.
    pub cell_outcome_sum: Vec<f64>,
    /// `P(k, a, c)`.
    pub cell_version_mass: Vec<f64>,
    /// `Σ p·E[Y|state]` over the `(k, a, c)` cell.
    pub cell_version_outcome_sum: Vec<f64>,
    /// `P(k, c)`.
    pub version_mass: Vec<f64>,
    /// `Σ p·E[Y|state]` over the `(k, c)` cell.
    pub version_outcome_sum: Vec<f64>,
    /// `Σ p·E[Y_k|state]` over atoms whose realized version is `k`.
    pub version_po_own_sum: Vec<f64>,
    /// `Σ p·E[Y_k|state]` over the whole stratum.
    pub po_sum: Vec<f64>,
}

impl TableAggregates {
    pub fn cell(&self, stratum: usize, a_index: usize) -> usize {
        stratum * self.n_exposures + a_index
    }

    pub fn vcell(&self, stratum: usize, a_index: usize, version: usize) -> usize {
        (stratum * self.n_exposures + a_index) * self.n_versions + version
    }

    pub fn vidx(&self, stratum: usize, version: usize) -> usize {
        stratum * self.n_versions + version
    }
}

/// Per-stratum exposure mass, used for positivity validation.
#[derive(Debug, Clone)]
pub(crate) struct SupportTable {
    pub n_strata: usize,
    pub a_values: Vec<f64>,
    /// `[stratum][a]` mass.
    pub mass: Vec<Vec<f64>>,
    pub stratum_mass: Vec<f64>,
}

impl SupportTable {
    pub fn common_exposure_support(&self) -> Vec<f64> {
        self.a_values
            .iter()
            .enumerate()
            .filter(|(ai, _)| {
                (0..self.n_strata)
                    .all(|c| self.stratum_mass[c] <= 0.0 || self.mass[c][*ai] > 0.0)
            })
            .map(|(_, &a)| a)
            .collect()
    }

    pub fn thinnest_stratum(&self) -> usize {
        (0..self.n_strata)
            .filter(|&c| self.stratum_mass[c] > 0.0)
            .min_by_key(|&c| self.mass[c].iter().filter(|&&m| m > 0.0).count())
            .unwrap_or(0)
    }
}

/// Sampled rectangular data with optional per-unit potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_strata: usize,
    /// Stratum index per row.
    pub stratum: Vec<u32>,
    /// Realized version index per row (discrete scenarios).
    pub version: Option<Vec<u32>>,
    /// Realized scalar latent per row (continuous latent scenarios).
    pub latent: Option<Vec<f64>>,
    /// Realized latent vector columns (multidimensional designs).
    pub latents: Option<Vec<Vec<f64>>>,
    /// Indicator columns.
    pub indicators: Vec<Vec<f64>>,
    pub exposure: Vec<f64>,
    pub outcome: Vec<f64>,
    pub potentials: Option<Potentials>,
    pub provenance: Provenance,
}

/// Per-unit potential outcomes `Y_k` for every version.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub version_values: Vec<f64>,
    /// One column per version.
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub scenario_fingerprint: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn n_indicators(&self) -> usize {
        self.indicators.len()
    }

    /// Dataset with no simulation-only columns, as ingested from real data.
    pub fn from_observed(
        n_strata: usize,
        stratum: Vec<u32>,
        indicators: Vec<Vec<f64>>,
        exposure: Vec<f64>,
        outcome: Vec<f64>,
    ) -> Self {
        Dataset {
            n_strata,
            stratum,
            version: None,
            latent: None,
            latents: None,
            indicators,
            exposure,
            outcome,
            potentials: None,
            provenance: Provenance {
                seed: 0,
                scenario_fingerprint: 0,
            },
        }
    }
}

/// Applies the measure form to an indicator matrix, one exposure value per
/// row. Coarsening is a separate step ([`coarsen_exposure`]).
pub fn apply_measure(columns: &[Vec<f64>], spec: &MeasureSpec) -> Result<Vec<f64>, DgpError> {
    let n_ind = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    match &spec.form {
        MeasureForm::Mean | MeasureForm::Sum | MeasureForm::WeightedSum { .. } => {}
        MeasureForm::CustomTable { .. } => {
            return Err(DgpError::MeasureNotApplicable(
                "custom_table maps versions, not indicator rows",
            ))
        }
        MeasureForm::Stochastic { .. } => {
            return Err(DgpError::MeasureNotApplicable(
                "stochastic assignment maps versions, not indicator rows",
            ))
        }
    }
    if let MeasureForm::WeightedSum { weights } = &spec.form {
        if weights.len() != n_ind {
            return Err(DgpError::WeightLengthMismatch {
                expected: n_ind,
                got: weights.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut row = vec![0.0f64; n_ind];
    for r in 0..n {
        for (i, col) in columns.iter().enumerate() {
            row[i] = col[r];
        }
        out.push(measure_row(&spec.form, &row));
    }
    Ok(out)
}

/// Measure arithmetic for one unit; shared by enumeration and sampling so
/// both realizations of a scenario agree bit for bit.
pub(crate) fn measure_row(form: &MeasureForm, x: &[f64]) -> f64 {
    match form {
        MeasureForm::Mean => {
            let mut acc = 0.0;
            for v in x {
                acc += v;
            }
            acc / x.len() as f64
        }
        MeasureForm::Sum => {
            let mut acc = 0.0;
            for v in x {
                acc += v;
            }
            acc
        }
        MeasureForm::WeightedSum { weights } => {
            let mut acc = 0.0;
            for (w, v) in weights.iter().zip(x) {
                acc += w * v;
            }
            acc
        }
        MeasureForm::CustomTable { .. } | MeasureForm::Stochastic { .. } => {
            unreachable!("checked by apply_measure / the walkers")
        }
    }
}

/// Maps each exposure value to the half-open interval containing it:
/// `a < cuts[0]` is category 0, `cuts[i-1] <= a < cuts[i]` is category `i`,
/// and values at or above the last cutpoint land in category `cuts.len()`.
///
/// Errors if any category receives no observations, since a contrast over
/// categories would then be unverifiable.
pub fn coarsen_exposure(exposure: &[f64], cutpoints: &[f64]) -> Result<Vec<usize>, DgpError> {
    if cutpoints.is_empty() || cutpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DgpError::MeasureNotApplicable(
            "cutpoints must be non-empty and strictly increasing",
        ));
    }
    let categories: Vec<usize> = exposure
        .iter()
        .map(|&a| coarsen_value(a, cutpoints))
        .collect();
    let mut seen = vec![false; cutpoints.len() + 1];
    for &cat in &categories {
        seen[cat] = true;
    }
    if let Some(index) = seen.iter().position(|&s| !s) {
        return Err(DgpError::EmptyCategory { index });
    }
    Ok(categories)
}

pub(crate) fn coarsen_value(a: f64, cutpoints: &[f64]) -> usize {
    cutpoints.iter().take_while(|&&cut| a >= cut).count()
}

/// Canonical bit key for grouping exposure values (collapses `-0.0`).
pub(crate) fn f64_key(v: f64) -> u64 {
    (v + 0.0).to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MeasureForm;

    #[test]
    fn measure_mean_of_row() {
        let cols = vec![vec![1.0], vec![2.0], vec![3.0], vec![0.0]];
        let spec = MeasureSpec {
            form: MeasureForm::Mean,
            coarsening: None,
        };
        assert_eq!(apply_measure(&cols, &spec).unwrap(), vec![1.5]);
    }

    #[test]
    fn measure_sum_hits_index_maximum() {
        let cols = vec![vec![3.0]; 4];
        let spec = MeasureSpec {
            form: MeasureForm::Sum,
            coarsening: None,
        };
        assert_eq!(apply_measure(&cols, &spec).unwrap(), vec![12.0]);
    }

    #[test]
    fn measure_weighted_sum() {
        let cols = vec![vec![1.0], vec![2.0]];
        let spec = MeasureSpec {
            form: MeasureForm::WeightedSum {
                weights: vec![0.7, 0.3],
            },
            coarsening: None,
        };
        let got = apply_measure(&cols, &spec).unwrap();
        assert!((got[0] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn measure_weight_length_checked() {
        let cols = vec![vec![1.0], vec![2.0]];
        let spec = MeasureSpec {
            form: MeasureForm::WeightedSum {
                weights: vec![1.0],
            },
            coarsening: None,
        };
        assert!(matches!(
            apply_measure(&cols, &spec),
            Err(DgpError::WeightLengthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn coarsening_by_interval_membership() {
        let got = coarsen_exposure(&[2.0, 5.0, 9.0], &[4.0, 8.0]).unwrap();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn coarsening_rejects_empty_categories() {
        assert!(matches!(
            coarsen_exposure(&[1.0, 2.0], &[100.0]),
            Err(DgpError::EmptyCategory { index: 1 })
        ));
    }

    #[test]
    fn coarsening_commutes_with_permutation() {
        let vals = [3.0, 7.0, 1.0, 9.0, 4.0];
        let cuts = [2.0, 6.0];
        let direct = coarsen_exposure(&vals, &cuts).unwrap();
        let mut permuted = vals;
        permuted.reverse();
        let mut via_perm = coarsen_exposure(&permuted, &cuts).unwrap();
        via_perm.reverse();
        assert_eq!(direct, via_perm);
    }
}
