//! Verification of the multiple-versions-of-treatment identity.
//!
//! For a coarse exposure `A` over versions `K` with covariates `C`, the
//! identity equates the standardized observational contrast
//!
//! ```text
//! sum_c { E[Y | A=a, c] - E[Y | A=a*, c] } P(c)
//! ```
//!
//! with the hypothetical-trial contrast in which each arm draws a version
//! from the conditional version distribution of its exposure level:
//!
//! ```text
//! sum_{k,c} E[Y_k | c] { P(k | a, c) - P(k | a*, c) } P(c)
//! ```
//!
//! The equality holds whenever (i) the outcome is independent of the
//! exposure given version and covariates, (ii) the version-outcome
//! relation is unconfounded given covariates, and (iii) consistency holds.
//! [`verify_derivation_chain`] evaluates the five-expression chain that
//! proves it and attributes the first broken equality to the assumption
//! that would have justified the step.

mod quadrature;

pub use quadrature::{trial_contrast_quadrature, DEFAULT_QUADRATURE_NODES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgp::{self, Dataset, DgpError, PopulationTable};
use crate::estimation::{self, EstimationError};
use crate::rng;
use crate::scenario::{Augmentation, Scenario, ScenarioError, ViolationKind};

/// Tolerance separating theorem failure from accumulated rounding in exact
/// mode.
pub const EXACT_TOLERANCE: f64 = 1e-10;

/// Exposure values match a requested contrast level within this tolerance.
const EXPOSURE_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MvtError {
    #[error("stratum {stratum} has no probability mass at one of the contrast exposures")]
    PositivityViolation { stratum: usize },
    #[error("exposure value {0} not found in the support")]
    ExposureNotFound(f64),
    #[error("per-unit potential outcomes are required and absent")]
    MissingPotentialOutcomes,
    #[error("exact mode requires a discrete scenario")]
    NotDiscrete,
    #[error("augmentation not applicable: {0}")]
    InapplicableAugmentation(&'static str),
    #[error("quadrature unsupported here: {0}")]
    QuadratureUnsupported(&'static str),
    #[error(transparent)]
    Dgp(#[from] DgpError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// The standardized observational contrast, exact from a population table.
pub fn observed_contrast(table: &PopulationTable, a: f64, a_star: f64) -> Result<f64, MvtError> {
    let agg = table.aggregates();
    let ai = find_exposure(table, a)?;
    let si = find_exposure(table, a_star)?;
    let mut value = 0.0;
    for c in 0..agg.n_strata {
        let pc = agg.stratum_mass[c];
        if pc <= 0.0 {
            continue;
        }
        let m_a = agg.cell_mass[agg.cell(c, ai)];
        let m_s = agg.cell_mass[agg.cell(c, si)];
        if m_a <= 0.0 || m_s <= 0.0 {
            return Err(MvtError::PositivityViolation { stratum: c });
        }
        let mean_a = agg.cell_outcome_sum[agg.cell(c, ai)] / m_a;
        let mean_s = agg.cell_outcome_sum[agg.cell(c, si)] / m_s;
        value += (mean_a - mean_s) * pc;
    }
    Ok(value)
}

/// The hypothetical-trial contrast, exact from a population table: arms draw
/// versions from `P(k | a, c)` versus `P(k | a*, c)` within strata.
pub fn trial_contrast(table: &PopulationTable, a: f64, a_star: f64) -> Result<f64, MvtError> {
    let agg = table.aggregates();
    let ai = find_exposure(table, a)?;
    let si = find_exposure(table, a_star)?;
    let mut value = 0.0;
    for c in 0..agg.n_strata {
        let pc = agg.stratum_mass[c];
        if pc <= 0.0 {
            continue;
        }
        let m_a = agg.cell_mass[agg.cell(c, ai)];
        let m_s = agg.cell_mass[agg.cell(c, si)];
        if m_a <= 0.0 || m_s <= 0.0 {
            return Err(MvtError::PositivityViolation { stratum: c });
        }
        for k in 0..agg.n_versions {
            let po_mean = agg.po_sum[agg.vidx(c, k)] / pc;
            let p_a = agg.cell_version_mass[agg.vcell(c, ai, k)] / m_a;
            let p_s = agg.cell_version_mass[agg.vcell(c, si, k)] / m_s;
            value += po_mean * (p_a - p_s) * pc;
        }
    }
    Ok(value)
}

/// Plug-in observational contrast from a sampled dataset.
pub fn observed_contrast_empirical(ds: &Dataset, a: f64, a_star: f64) -> Result<f64, MvtError> {
    Ok(estimation::standardized_contrast(ds, a, a_star)?.value)
}

/// Plug-in hypothetical-trial contrast from a sampled dataset; requires the
/// realized version column and per-unit potential-outcome columns.
pub fn trial_contrast_empirical(ds: &Dataset, a: f64, a_star: f64) -> Result<f64, MvtError> {
    trial_contrast_empirical_on(ds, a, a_star, None)
}

fn trial_contrast_empirical_on(
    ds: &Dataset,
    a: f64,
    a_star: f64,
    rows: Option<&[usize]>,
) -> Result<f64, MvtError> {
    let versions = ds.version.as_ref().ok_or(MvtError::MissingPotentialOutcomes)?;
    let potentials = ds
        .potentials
        .as_ref()
        .ok_or(MvtError::MissingPotentialOutcomes)?;
    let n_k = potentials.columns.len();
    let n_c = ds.n_strata;

    let mut count = vec![0.0f64; n_c];
    let mut po_sum = vec![0.0f64; n_c * n_k];
    let mut cell_a = vec![0.0f64; n_c * n_k];
    let mut cell_s = vec![0.0f64; n_c * n_k];

    let total = rows.map_or(ds.len(), <[usize]>::len) as f64;
    let mut visit = |row: usize| {
        let c = ds.stratum[row] as usize;
        count[c] += 1.0;
        for k in 0..n_k {
            po_sum[c * n_k + k] += potentials.columns[k][row];
        }
        let e = ds.exposure[row];
        let k = versions[row] as usize;
        if (e - a).abs() <= EXPOSURE_MATCH_TOL {
            cell_a[c * n_k + k] += 1.0;
        } else if (e - a_star).abs() <= EXPOSURE_MATCH_TOL {
            cell_s[c * n_k + k] += 1.0;
        }
    };
    match rows {
        Some(idx) => idx.iter().for_each(|&row| visit(row)),
        None => (0..ds.len()).for_each(&mut visit),
    }

    let mut value = 0.0;
    for c in 0..n_c {
        if count[c] == 0.0 {
            continue;
        }
        let n_a: f64 = (0..n_k).map(|k| cell_a[c * n_k + k]).sum();
        let n_s: f64 = (0..n_k).map(|k| cell_s[c * n_k + k]).sum();
        if n_a == 0.0 || n_s == 0.0 {
            return Err(MvtError::PositivityViolation { stratum: c });
        }
        let pc = count[c] / total;
        for k in 0..n_k {
            let po_mean = po_sum[c * n_k + k] / count[c];
            value += po_mean * (cell_a[c * n_k + k] / n_a - cell_s[c * n_k + k] / n_s) * pc;
        }
    }
    Ok(value)
}

/// How an identity check is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Enumerate the joint law and compare exactly.
    Exact,
    /// Sample datasets and compare plug-in estimates; the verdict tolerance
    /// is three Monte Carlo standard errors.
    Empirical {
        n: usize,
        seed: u64,
        replicates: usize,
    },
}

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    pub exact: bool,
    pub a: f64,
    pub a_star: f64,
    /// Atom count (exact) or sample size (empirical).
    pub size: usize,
    pub tolerance: f64,
    pub pass: bool,
    /// Monte Carlo standard error of the difference (empirical mode).
    pub standard_error: Option<f64>,
}

/// Evaluates both sides of the identity and the verdict
/// `|lhs - rhs| <= tolerance`.
///
/// In exact mode on a violation-free discrete scenario a pass is the
/// theorem, not a coincidence; the default tolerance only absorbs
/// floating-point accumulation.
pub fn verify_identity(
    scenario: &Scenario,
    mode: VerifyMode,
    contrast: (f64, f64),
    tolerance: Option<f64>,
) -> Result<IdentityReport, MvtError> {
    let (a, a_star) = contrast;
    match mode {
        VerifyMode::Exact => {
            if !scenario.is_discrete() {
                return Err(MvtError::NotDiscrete);
            }
            let table = dgp::enumerate_population(scenario)?;
            let lhs = observed_contrast(&table, a, a_star)?;
            let rhs = trial_contrast(&table, a, a_star)?;
            let tol = tolerance.unwrap_or(EXACT_TOLERANCE);
            let abs_diff = (lhs - rhs).abs();
            Ok(IdentityReport {
                lhs,
                rhs,
                abs_diff,
                exact: true,
                a,
                a_star,
                size: table.atoms().len(),
                tolerance: tol,
                pass: abs_diff <= tol,
                standard_error: None,
            })
        }
        VerifyMode::Empirical {
            n,
            seed,
            replicates,
        } => {
            let replicates = replicates.max(1);
            let mut lhs_sum = 0.0;
            let mut rhs_sum = 0.0;
            let mut diffs = Vec::with_capacity(replicates);
            let mut first: Option<Dataset> = None;
            for rep in 0..replicates {
                let ds = dgp::sample_dataset(scenario, n, rng::derive_seed(seed, rep as u64))?;
                let lhs = observed_contrast_empirical(&ds, a, a_star)?;
                let rhs = trial_contrast_empirical(&ds, a, a_star)?;
                lhs_sum += lhs;
                rhs_sum += rhs;
                diffs.push(lhs - rhs);
                if rep == 0 {
                    first = Some(ds);
                }
            }
            let mean_diff = diffs.iter().sum::<f64>() / replicates as f64;
            let se = if replicates >= 2 {
                let var = diffs
                    .iter()
                    .map(|d| (d - mean_diff) * (d - mean_diff))
                    .sum::<f64>()
                    / (replicates - 1) as f64;
                (var / replicates as f64).sqrt()
            } else {
                // Single replicate: bootstrap the difference over rows.
                let ds = first.expect("one replicate ran");
                let reps = estimation::bootstrap_replicates(
                    ds.len(),
                    200,
                    rng::derive_seed(seed, u64::MAX),
                    |idx| bootstrap_diff(&ds, a, a_star, idx),
                )?;
                let m = reps.iter().sum::<f64>() / reps.len() as f64;
                (reps.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (reps.len() - 1) as f64)
                    .sqrt()
            };
            let tol = tolerance.unwrap_or(3.0 * se);
            Ok(IdentityReport {
                lhs: lhs_sum / replicates as f64,
                rhs: rhs_sum / replicates as f64,
                abs_diff: mean_diff.abs(),
                exact: false,
                a,
                a_star,
                size: n,
                tolerance: tol,
                pass: mean_diff.abs() <= tol,
                standard_error: Some(se),
            })
        }
    }
}

fn bootstrap_diff(ds: &Dataset, a: f64, a_star: f64, idx: &[usize]) -> f64 {
    let lhs = subset_observed(ds, a, a_star, idx);
    let rhs = trial_contrast_empirical_on(ds, a, a_star, Some(idx)).unwrap_or(f64::NAN);
    lhs - rhs
}

fn subset_observed(ds: &Dataset, a: f64, a_star: f64, idx: &[usize]) -> f64 {
    let n_c = ds.n_strata;
    let mut count = vec![0.0f64; n_c];
    let mut sum_a = vec![0.0f64; n_c];
    let mut n_a = vec![0.0f64; n_c];
    let mut sum_s = vec![0.0f64; n_c];
    let mut n_s = vec![0.0f64; n_c];
    for &row in idx {
        let c = ds.stratum[row] as usize;
        count[c] += 1.0;
        let e = ds.exposure[row];
        if (e - a).abs() <= EXPOSURE_MATCH_TOL {
            sum_a[c] += ds.outcome[row];
            n_a[c] += 1.0;
        } else if (e - a_star).abs() <= EXPOSURE_MATCH_TOL {
            sum_s[c] += ds.outcome[row];
            n_s[c] += 1.0;
        }
    }
    let total: f64 = count.iter().sum();
    let mut value = 0.0;
    for c in 0..n_c {
        if count[c] == 0.0 {
            continue;
        }
        if n_a[c] == 0.0 || n_s[c] == 0.0 {
            return f64::NAN;
        }
        value += (sum_a[c] / n_a[c] - sum_s[c] / n_s[c]) * count[c] / total;
    }
    value
}

/// The assumption justifying each step of the derivation chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Step 1 to 2: the law of iterated expectations (always holds).
    IteratedExpectation,
    /// Step 2 to 3: outcome independent of exposure given version and
    /// covariates.
    Independence,
    /// Step 3 to 4: observed outcome equals the potential outcome at the
    /// realized version.
    Consistency,
    /// Step 4 to 5: potential outcomes independent of the version given
    /// covariates.
    Unconfoundedness,
}

impl Assumption {
    pub fn label(self) -> &'static str {
        match self {
            Assumption::IteratedExpectation => "iterated expectation",
            Assumption::Independence => "independence of outcome and exposure given version",
            Assumption::Consistency => "consistency",
            Assumption::Unconfoundedness => "unconfoundedness of the version",
        }
    }

    const ALL: [Assumption; 4] = [
        Assumption::IteratedExpectation,
        Assumption::Independence,
        Assumption::Consistency,
        Assumption::Unconfoundedness,
    ];
}

/// First broken equality of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    /// Gap index `i` for the step from expression `i+1` to `i+2` (1-based
    /// expression numbering).
    pub index: usize,
    pub assumption: Assumption,
    pub gap: f64,
}

/// The five chained expressions and their pairwise gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationChain {
    pub values: [f64; 5],
    pub gaps: [f64; 4],
}

impl DerivationChain {
    /// First step whose gap exceeds `tol`, attributed to its assumption.
    pub fn first_break(&self, tol: f64) -> Option<ChainStep> {
        self.gaps
            .iter()
            .enumerate()
            .find(|(_, g)| g.abs() > tol)
            .map(|(i, &gap)| ChainStep {
                index: i,
                assumption: Assumption::ALL[i],
                gap,
            })
    }
}

/// Evaluates each expression of the identity's derivation:
///
/// 1. the standardized observational contrast;
/// 2. the same after expanding over versions, `E[Y|k,a,c] P(k|a,c)`;
/// 3. with the exposure dropped from the inner mean, `E[Y|k,c]`;
/// 4. with the observed outcome replaced by the potential outcome at the
///    realized version, `E[Y_k|k,c]`;
/// 5. with the conditioning on the realized version dropped, `E[Y_k|c]`
///    (the hypothetical-trial contrast).
pub fn verify_derivation_chain(
    table: &PopulationTable,
    a: f64,
    a_star: f64,
) -> Result<DerivationChain, MvtError> {
    let agg = table.aggregates();
    let ai = find_exposure(table, a)?;
    let si = find_exposure(table, a_star)?;

    let mut values = [0.0f64; 5];
    values[0] = observed_contrast(table, a, a_star)?;
    values[4] = trial_contrast(table, a, a_star)?;

    for c in 0..agg.n_strata {
        let pc = agg.stratum_mass[c];
        if pc <= 0.0 {
            continue;
        }
        let m_a = agg.cell_mass[agg.cell(c, ai)];
        let m_s = agg.cell_mass[agg.cell(c, si)];
        if m_a <= 0.0 || m_s <= 0.0 {
            return Err(MvtError::PositivityViolation { stratum: c });
        }
        for k in 0..agg.n_versions {
            let pk_a = agg.cell_version_mass[agg.vcell(c, ai, k)] / m_a;
            let pk_s = agg.cell_version_mass[agg.vcell(c, si, k)] / m_s;

            // Expression 2: E[Y | k, a, c] P(k | a, c).
            if pk_a > 0.0 {
                let mean = agg.cell_version_outcome_sum[agg.vcell(c, ai, k)]
                    / agg.cell_version_mass[agg.vcell(c, ai, k)];
                values[1] += mean * pk_a * pc;
            }
            if pk_s > 0.0 {
                let mean = agg.cell_version_outcome_sum[agg.vcell(c, si, k)]
                    / agg.cell_version_mass[agg.vcell(c, si, k)];
                values[1] -= mean * pk_s * pc;
            }

            // Expressions 3 and 4 share P(k | a, c) but swap the inner mean.
            let km = agg.version_mass[agg.vidx(c, k)];
            if km > 0.0 {
                let obs_mean = agg.version_outcome_sum[agg.vidx(c, k)] / km;
                let po_own = agg.version_po_own_sum[agg.vidx(c, k)] / km;
                values[2] += obs_mean * (pk_a - pk_s) * pc;
                values[3] += po_own * (pk_a - pk_s) * pc;
            }
        }
    }

    let gaps = [
        values[1] - values[0],
        values[2] - values[1],
        values[3] - values[2],
        values[4] - values[3],
    ];
    Ok(DerivationChain { values, gaps })
}

/// Re-defines the version variable over an augmented space.
///
/// `IncludeIndicators` joins the indicator vector into the version;
/// `IncludeCommonCause` joins the violation-owned common-cause variables.
/// Potential outcomes are re-indexed by the population enumeration.
pub fn redefine_versions(
    scenario: &Scenario,
    augmentation: Augmentation,
) -> Result<Scenario, MvtError> {
    match augmentation {
        Augmentation::None => {}
        Augmentation::IncludeIndicators => {
            if scenario.n_indicators() == 0 {
                return Err(MvtError::InapplicableAugmentation(
                    "the scenario has no indicators to include",
                ));
            }
        }
        Augmentation::IncludeCommonCause => {
            let has_common = scenario
                .violations()
                .iter()
                .any(|v| v.kind == ViolationKind::CommonCauseU);
            if !has_common {
                return Err(MvtError::InapplicableAugmentation(
                    "no common-cause violation is present to include",
                ));
            }
        }
    }
    Ok(scenario.with_augmentation(augmentation))
}

fn find_exposure(table: &PopulationTable, a: f64) -> Result<usize, MvtError> {
    table.find_exposure(a).ok_or(MvtError::ExposureNotFound(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures;

    // Hand enumeration of the three-point fixture:
    //   E[Y|A=1] = (0.2*1 + 0.3*2) / 0.5 = 1.6, E[Y|A=0] = 3.0.
    const THREE_POINT_CONTRAST: f64 = 1.6 - 3.0;

    #[test]
    fn three_point_fixture_observed_side() {
        let table = dgp::enumerate_population(&fixtures::three_point_versions()).unwrap();
        let lhs = observed_contrast(&table, 1.0, 0.0).unwrap();
        assert!((lhs - THREE_POINT_CONTRAST).abs() < 1e-12);
    }

    #[test]
    fn three_point_fixture_trial_side() {
        // P(k|A=1) = (0.4, 0.6, 0) and P(k|A=0) = (0, 0, 1):
        //   0.4*1 + 0.6*2 - 3 = -1.4.
        let table = dgp::enumerate_population(&fixtures::three_point_versions()).unwrap();
        let rhs = trial_contrast(&table, 1.0, 0.0).unwrap();
        assert!((rhs - THREE_POINT_CONTRAST).abs() < 1e-12);
    }

    #[test]
    fn identical_contrast_is_zero() {
        let table = dgp::enumerate_population(&fixtures::three_point_versions()).unwrap();
        assert_eq!(observed_contrast(&table, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn chain_equal_everywhere_on_clean_fixture() {
        let table = dgp::enumerate_population(&fixtures::three_point_versions()).unwrap();
        let chain = verify_derivation_chain(&table, 1.0, 0.0).unwrap();
        for v in chain.values {
            assert!((v - THREE_POINT_CONTRAST).abs() < 1e-12);
        }
        assert!(chain.first_break(EXACT_TOLERANCE).is_none());
    }

    #[test]
    fn verify_exact_passes_on_fixture() {
        let report = verify_identity(
            &fixtures::three_point_versions(),
            VerifyMode::Exact,
            (1.0, 0.0),
            None,
        )
        .unwrap();
        assert!(report.pass);
        assert!((report.lhs - THREE_POINT_CONTRAST).abs() < 1e-12);
        assert!((report.rhs - THREE_POINT_CONTRAST).abs() < 1e-12);
    }

    #[test]
    fn exact_mode_rejects_continuous_scenarios() {
        let err = verify_identity(
            &fixtures::standardized_reflective(),
            VerifyMode::Exact,
            (1.0, 0.0),
            None,
        )
        .unwrap_err();
        assert_eq!(err, MvtError::NotDiscrete);
    }

    #[test]
    fn missing_exposure_is_reported() {
        let table = dgp::enumerate_population(&fixtures::three_point_versions()).unwrap();
        assert!(matches!(
            observed_contrast(&table, 7.0, 0.0),
            Err(MvtError::ExposureNotFound(_))
        ));
    }
}
