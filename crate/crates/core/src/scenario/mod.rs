//! Validated data-generating-process specifications.
//!
//! A [`Scenario`] pins down one causal diagram over a coarse exposure `A`,
//! its finer-grained version variable `K`, covariate strata `C`, an outcome
//! `Y`, and (for measurement designs) indicators `X_1..X_n` with their
//! latent structure. Scenarios come in two modes:
//!
//! - **discrete**: every stochastic element has finite support, so the joint
//!   law can be enumerated exactly and the version-of-treatment identity can
//!   be checked to floating-point accuracy;
//! - **continuous**: Gaussian latents and errors with linear outcome models,
//!   so closed-form path-tracing oracles exist and sampling is exact.
//!
//! Violations inject extra edges into an otherwise clean diagram:
//!
//! - `DirectIndicatorEffect` adds `magnitude * x_t` to the outcome mean for
//!   each target indicator `t` (an `X -> Y` edge bypassing the version
//!   variable);
//! - `CommonCauseU` introduces an independent `U ~ Bernoulli(1/2)` on
//!   `{0, 1}` that shifts each target indicator by `+1` and the outcome mean
//!   by `magnitude * u`;
//! - `UnmeasuredConfounder` introduces an independent `U ~ Bernoulli(1/2)`
//!   that shifts the version law (finite laws are exponentially tilted
//!   toward larger version values, Gaussian latents gain a unit mean shift,
//!   composed formative latents gain `+u`) and the outcome mean by
//!   `magnitude * u`.
//!
//! Each injected violation carries its own independent `U`, so a set of
//! violations defines one data-generating process regardless of injection
//! order; scenarios store the set canonically sorted.

mod params;
mod random;

pub mod fixtures;

pub use params::ScenarioParams;
pub use random::{random_discrete_scenario, random_violated_scenario, RandomScenario};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::longitudinal::TwoWaveParams;

/// Hard limits for discrete scenarios so exact enumeration stays desk-scale.
pub const MAX_STRATA: usize = 8;
/// Cap on explicitly tabulated version spaces.
pub const MAX_TABLED_VERSIONS: usize = 64;
/// Cap on version spaces induced by indicator grids (joint combinations).
pub const MAX_INDUCED_VERSIONS: usize = 4096;
/// Cap on violations that introduce their own binary `U`.
pub const MAX_U_VIOLATIONS: usize = 3;

/// Probability vectors must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("missing parameter `{0}` for scenario kind")]
    MissingParameter(&'static str),
    #[error("invalid probability vector ({0})")]
    InvalidProbability(String),
    #[error("loading {index} is zero; a structural reflective model requires every indicator to load on the latent")]
    ZeroLoadingInStructuralReflective { index: usize },
    #[error("violation target index {index} out of range for {len} indicators")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("coarsening cutpoints must be strictly increasing")]
    InvalidCutpoints,
    #[error("measure form `{form}` is not applicable to scenario kind `{kind:?}`")]
    MeasureNotApplicable { form: &'static str, kind: ScenarioKind },
    #[error("discrete scenario exceeds size cap: {0}")]
    StateSpaceTooLarge(String),
    #[error("stratum {stratum} lacks positive probability at two common exposure levels; no contrast is identifiable")]
    InsufficientExposureSupport { stratum: usize },
    #[error("parameter `{field}` is not finite")]
    NonFiniteParameter { field: &'static str },
    #[error("violation `{0}` is not applicable to this scenario kind")]
    ViolationNotApplicable(&'static str),
}

/// The causal diagrams a scenario can instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// A coarse exposure over an explicit finite version space.
    CoarsenedVersions,
    /// Latent causes indicators and the outcome; the measure acts only
    /// through the latent.
    StructuralReflective,
    /// Indicators compose a latent which alone affects the outcome.
    StructuralFormative,
    /// Latent causes indicators, but the indicators affect the outcome.
    IndicatorCausalReflective,
    /// Exogenous indicators affect the outcome; any composite is inert.
    IndicatorCausalFormative,
    /// Several latents drive the indicator set and the outcome.
    MultidimLatent,
    /// Indicators measured at two waves with cross-lagged effects.
    TwoWaveIndicators,
    /// Latents at two waves drive per-wave indicators.
    TwoWaveLatents,
}

/// Finite discrete distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Grid {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Self {
        Grid { values, probs }
    }

    /// Degenerate grid concentrated at one value.
    pub fn point(value: f64) -> Self {
        Grid {
            values: vec![value],
            probs: vec![1.0],
        }
    }
}

/// Distribution of a latent variable across covariate strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentLaw {
    /// `P(latent = values[j] | c) = probs[c][j]`.
    Finite { values: Vec<f64>, probs: Vec<Vec<f64>> },
    /// `latent | c ~ Normal(stratum_means[c], 1)`.
    Gaussian { stratum_means: Vec<f64> },
}

/// Error distribution attached to one indicator (or to a composed latent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Gaussian { sd: f64 },
    Finite(Grid),
}

impl ErrorLaw {
    pub fn is_finite_support(&self) -> bool {
        matches!(self, ErrorLaw::Finite(_))
    }

    /// Error that is identically zero.
    pub fn none() -> Self {
        ErrorLaw::Finite(Grid::point(0.0))
    }
}

/// Law of one exogenous indicator, per covariate stratum.
///
/// A single entry is broadcast across strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorLaw {
    Finite { grids: Vec<Grid> },
    Gaussian { means: Vec<f64>, sd: f64 },
}

impl IndicatorLaw {
    pub fn is_finite_support(&self) -> bool {
        matches!(self, IndicatorLaw::Finite { .. })
    }
}

/// How the composed latent of a structural formative design arises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub loadings: Vec<f64>,
    pub error: ErrorLaw,
}

/// Outcome mean structure plus additive noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeModel {
    /// `E[Y_k | c] = means[k][c]`.
    VersionTable { means: Vec<Vec<f64>>, noise_sd: f64 },
    /// `E[Y | latent, c] = intercept + slope * latent + stratum_effects[c]`.
    Latent {
        intercept: f64,
        slope: f64,
        stratum_effects: Vec<f64>,
        noise_sd: f64,
    },
    /// `E[Y | x, c] = intercept + coefs . x + stratum_effects[c]`.
    Indicators {
        intercept: f64,
        coefs: Vec<f64>,
        stratum_effects: Vec<f64>,
        noise_sd: f64,
    },
    /// `E[Y | latents, c] = intercept + coefs . latents + stratum_effects[c]`.
    Latents {
        intercept: f64,
        coefs: Vec<f64>,
        stratum_effects: Vec<f64>,
        noise_sd: f64,
    },
}

impl OutcomeModel {
    pub fn noise_sd(&self) -> f64 {
        match self {
            OutcomeModel::VersionTable { noise_sd, .. }
            | OutcomeModel::Latent { noise_sd, .. }
            | OutcomeModel::Indicators { noise_sd, .. }
            | OutcomeModel::Latents { noise_sd, .. } => *noise_sd,
        }
    }
}

/// The measure `A = f(...)` mapping versions or indicators to the exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub form: MeasureForm,
    /// Ordered cutpoints mapping the raw exposure to category labels
    /// `0..=cutpoints.len()` by half-open intervals.
    pub coarsening: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureForm {
    /// Mean of the indicators.
    Mean,
    /// Sum of the indicators.
    Sum,
    /// Weighted sum of the indicators.
    WeightedSum { weights: Vec<f64> },
    /// Explicit exposure value per version (scalar-version scenarios).
    CustomTable { map: Vec<f64> },
    /// Stochastic assignment `P(a = a_values[j] | k) = probs[k][j]`
    /// (scalar-version scenarios).
    Stochastic {
        a_values: Vec<f64>,
        probs: Vec<Vec<f64>>,
    },
}

impl MeasureSpec {
    pub fn mean() -> Self {
        MeasureSpec {
            form: MeasureForm::Mean,
            coarsening: None,
        }
    }

    pub fn sum() -> Self {
        MeasureSpec {
            form: MeasureForm::Sum,
            coarsening: None,
        }
    }

    fn form_name(&self) -> &'static str {
        match self.form {
            MeasureForm::Mean => "mean",
            MeasureForm::Sum => "sum",
            MeasureForm::WeightedSum { .. } => "weighted_sum",
            MeasureForm::CustomTable { .. } => "custom_table",
            MeasureForm::Stochastic { .. } => "stochastic",
        }
    }
}

/// An extra causal edge that breaks one of the identity's assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Indicator indices (0-based) the edge attaches to; empty for
    /// `UnmeasuredConfounder`.
    pub targets: Vec<usize>,
    /// Effect on the outcome, in outcome units per unit of the source.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DirectIndicatorEffect,
    CommonCauseU,
    UnmeasuredConfounder,
}

impl Violation {
    pub fn direct_indicator_effect(target: usize, magnitude: f64) -> Self {
        Violation {
            kind: ViolationKind::DirectIndicatorEffect,
            targets: vec![target],
            magnitude,
        }
    }

    pub fn common_cause(targets: Vec<usize>, magnitude: f64) -> Self {
        Violation {
            kind: ViolationKind::CommonCauseU,
            targets,
            magnitude,
        }
    }

    pub fn unmeasured_confounder(magnitude: f64) -> Self {
        Violation {
            kind: ViolationKind::UnmeasuredConfounder,
            targets: Vec::new(),
            magnitude,
        }
    }

    /// True when the violation carries its own binary `U`.
    pub fn has_u(&self) -> bool {
        matches!(
            self.kind,
            ViolationKind::CommonCauseU | ViolationKind::UnmeasuredConfounder
        )
    }

    fn canonical_key(&self) -> (ViolationKind, Vec<usize>, u64) {
        (self.kind, self.targets.clone(), self.magnitude.to_bits())
    }
}

/// Version-space augmentation applied when re-defining `K` (see the
/// verifier's redefinition operation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    #[default]
    None,
    /// `K` is extended to include the full indicator vector.
    IncludeIndicators,
    /// `K` is extended to include the common-cause variables `U`.
    IncludeCommonCause,
}

/// Kind-specific mechanism of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// Explicit version table: `P(K = values[k] | c) = probs[c][k]`.
    ScalarVersions {
        values: Vec<f64>,
        probs: Vec<Vec<f64>>,
    },
    /// Latent drives indicators: `X_i = loadings[i] * latent + e_i`.
    Reflective {
        latent: LatentLaw,
        loadings: Vec<f64>,
        errors: Vec<ErrorLaw>,
        /// Optional correlation among Gaussian indicator errors.
        error_correlation: Option<Vec<Vec<f64>>>,
    },
    /// Exogenous indicators; `composition` present means a structural
    /// formative latent `eta = loadings . x + e` carries the outcome.
    Formative {
        indicators: Vec<IndicatorLaw>,
        composition: Option<Composition>,
    },
    /// `X = effects * latents + e`, latents standard normal.
    MultidimLatent {
        n_latents: usize,
        effects: Vec<Vec<f64>>,
        errors: Vec<ErrorLaw>,
    },
    /// Two-wave system handled by the longitudinal module.
    TwoWave(TwoWaveParams),
}

/// A validated data-generating process.
///
/// Construction goes through [`build_scenario`] (or a fixture); every value
/// reachable from a `Scenario` has passed the kind's completeness and
/// probability checks, and discrete scenarios are guaranteed enumerable with
/// a verifiable exposure contrast in every stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    kind: ScenarioKind,
    stratum_probs: Vec<f64>,
    structure: Structure,
    outcome: OutcomeModel,
    measure: MeasureSpec,
    violations: Vec<Violation>,
    augmentation: Augmentation,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn n_strata(&self) -> usize {
        self.stratum_probs.len()
    }

    pub fn stratum_probs(&self) -> &[f64] {
        &self.stratum_probs
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn outcome(&self) -> &OutcomeModel {
        &self.outcome
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn augmentation(&self) -> Augmentation {
        self.augmentation
    }

    /// Number of indicators in the measurement layer (0 for scalar-version
    /// and two-wave designs, where violations targeting indicators are
    /// rejected).
    pub fn n_indicators(&self) -> usize {
        match &self.structure {
            Structure::ScalarVersions { .. } | Structure::TwoWave(_) => 0,
            Structure::Reflective { loadings, .. } => loadings.len(),
            Structure::Formative { indicators, .. } => indicators.len(),
            Structure::MultidimLatent { effects, .. } => effects.len(),
        }
    }

    /// True when every stochastic element has finite support, so the joint
    /// law can be enumerated exactly.
    pub fn is_discrete(&self) -> bool {
        match &self.structure {
            Structure::ScalarVersions { .. } => true,
            Structure::Reflective {
                latent,
                errors,
                error_correlation,
                ..
            } => {
                matches!(latent, LatentLaw::Finite { .. })
                    && errors.iter().all(ErrorLaw::is_finite_support)
                    && error_correlation.is_none()
            }
            Structure::Formative {
                indicators,
                composition,
            } => {
                indicators.iter().all(IndicatorLaw::is_finite_support)
                    && composition
                        .as_ref()
                        .map_or(true, |c| c.error.is_finite_support())
            }
            Structure::MultidimLatent { .. } | Structure::TwoWave(_) => false,
        }
    }

    /// Stable 64-bit fingerprint of the full specification.
    pub fn fingerprint(&self) -> u64 {
        let encoded = serde_json::to_string(self).expect("scenario serializes");
        // FNV-1a
        let mut hash: u64 = 0xcbf29ce484222325;
        for byte in encoded.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }

    /// Returns a copy with one more violation injected; the original is
    /// untouched. The injected set is kept canonically sorted so injection
    /// order cannot matter.
    pub fn inject_violation(&self, violation: Violation) -> Result<Self, ScenarioError> {
        let n = self.n_indicators();
        match violation.kind {
            ViolationKind::DirectIndicatorEffect | ViolationKind::CommonCauseU => {
                if violation.targets.is_empty() {
                    return Err(ScenarioError::MissingParameter("violation.targets"));
                }
                for &t in &violation.targets {
                    if t >= n {
                        return Err(ScenarioError::IndexOutOfRange { index: t, len: n });
                    }
                }
            }
            ViolationKind::UnmeasuredConfounder => {
                if !violation.targets.is_empty() {
                    return Err(ScenarioError::ViolationNotApplicable(
                        "unmeasured_confounder takes no indicator targets",
                    ));
                }
                if matches!(self.structure, Structure::TwoWave(_)) {
                    return Err(ScenarioError::ViolationNotApplicable(
                        "unmeasured_confounder on a two-wave design",
                    ));
                }
            }
        }
        if !violation.magnitude.is_finite() {
            return Err(ScenarioError::NonFiniteParameter {
                field: "violation.magnitude",
            });
        }
        let mut next = self.clone();
        next.violations.push(violation);
        next.violations.sort_by_key(Violation::canonical_key);
        next.validate()?;
        Ok(next)
    }

    /// Copy with the version-space augmentation switched. Applicability is
    /// the verifier's concern; this only re-runs structural validation.
    pub(crate) fn with_augmentation(&self, augmentation: Augmentation) -> Self {
        let mut next = self.clone();
        next.augmentation = augmentation;
        next
    }

    pub(crate) fn from_parts(
        kind: ScenarioKind,
        stratum_probs: Vec<f64>,
        structure: Structure,
        outcome: OutcomeModel,
        measure: MeasureSpec,
        violations: Vec<Violation>,
    ) -> Result<Self, ScenarioError> {
        let mut violations = violations;
        violations.sort_by_key(Violation::canonical_key);
        let scenario = Scenario {
            kind,
            stratum_probs,
            structure,
            outcome,
            measure,
            violations,
            augmentation: Augmentation::None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        validate::check(self)
    }
}

/// Builds and validates a scenario from flat parameters.
///
/// Deterministic: identical parameters produce identical scenarios.
pub fn build_scenario(kind: ScenarioKind, params: ScenarioParams) -> Result<Scenario, ScenarioError> {
    params::assemble(kind, params)
}

/// Alias kept close to the verb used at call sites.
pub fn inject_violation(scenario: &Scenario, violation: Violation) -> Result<Scenario, ScenarioError> {
    scenario.inject_violation(violation)
}

mod validate {
    use super::*;

    pub(super) fn check(s: &Scenario) -> Result<(), ScenarioError> {
        check_prob_vector(&s.stratum_probs, "stratum probabilities")?;
        if s.stratum_probs.len() > MAX_STRATA {
            return Err(ScenarioError::StateSpaceTooLarge(format!(
                "{} strata exceeds the cap of {MAX_STRATA}",
                s.stratum_probs.len()
            )));
        }
        let n_strata = s.stratum_probs.len();

        check_structure(s, n_strata)?;
        check_outcome(s, n_strata)?;
        check_measure(s)?;
        check_violations(s)?;

        // Discrete scenarios must be enumerable with an identifiable
        // contrast: two exposure levels carrying positive probability in
        // every positive-probability stratum.
        if s.is_discrete() && !matches!(s.structure, Structure::TwoWave(_)) {
            let table = crate::dgp::enumerate_support(s)
                .map_err(|e| ScenarioError::StateSpaceTooLarge(e.to_string()))?;
            let common = table.common_exposure_support();
            if common.len() < 2 {
                let stratum = table.thinnest_stratum();
                return Err(ScenarioError::InsufficientExposureSupport { stratum });
            }
        }
        Ok(())
    }

    pub(super) fn check_prob_vector(p: &[f64], what: &str) -> Result<(), ScenarioError> {
        if p.is_empty() {
            return Err(ScenarioError::InvalidProbability(format!("{what}: empty")));
        }
        let mut sum = 0.0;
        for &v in p {
            if !v.is_finite() || v < 0.0 {
                return Err(ScenarioError::InvalidProbability(format!(
                    "{what}: entry {v} is negative or non-finite"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ScenarioError::InvalidProbability(format!(
                "{what}: sums to {sum}, not 1"
            )));
        }
        Ok(())
    }

    fn check_grid(g: &Grid, what: &str) -> Result<(), ScenarioError> {
        if g.values.len() != g.probs.len() {
            return Err(ScenarioError::LengthMismatch(format!(
                "{what}: {} values vs {} probabilities",
                g.values.len(),
                g.probs.len()
            )));
        }
        for &v in &g.values {
            if !v.is_finite() {
                return Err(ScenarioError::NonFiniteParameter { field: "grid value" });
            }
        }
        check_prob_vector(&g.probs, what)
    }

    fn check_error_law(e: &ErrorLaw, what: &str) -> Result<(), ScenarioError> {
        match e {
            ErrorLaw::Gaussian { sd } => {
                if !sd.is_finite() || *sd < 0.0 {
                    return Err(ScenarioError::NonFiniteParameter { field: "error sd" });
                }
            }
            ErrorLaw::Finite(g) => check_grid(g, what)?,
        }
        Ok(())
    }

    fn check_latent_law(l: &LatentLaw, n_strata: usize) -> Result<(), ScenarioError> {
        match l {
            LatentLaw::Finite { values, probs } => {
                if values.len() > MAX_TABLED_VERSIONS {
                    return Err(ScenarioError::StateSpaceTooLarge(format!(
                        "{} latent levels exceeds the cap of {MAX_TABLED_VERSIONS}",
                        values.len()
                    )));
                }
                if probs.len() != n_strata {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "latent law has {} stratum rows for {n_strata} strata",
                        probs.len()
                    )));
                }
                for (c, row) in probs.iter().enumerate() {
                    if row.len() != values.len() {
                        return Err(ScenarioError::LengthMismatch(format!(
                            "latent probabilities row {c} has {} entries for {} levels",
                            row.len(),
                            values.len()
                        )));
                    }
                    check_prob_vector(row, &format!("latent probabilities, stratum {c}"))?;
                }
                for &v in values {
                    if !v.is_finite() {
                        return Err(ScenarioError::NonFiniteParameter {
                            field: "latent value",
                        });
                    }
                }
            }
            LatentLaw::Gaussian { stratum_means } => {
                if stratum_means.len() != n_strata {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "latent stratum means: {} entries for {n_strata} strata",
                        stratum_means.len()
                    )));
                }
                for &m in stratum_means {
                    if !m.is_finite() {
                        return Err(ScenarioError::NonFiniteParameter {
                            field: "latent stratum mean",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_structure(s: &Scenario, n_strata: usize) -> Result<(), ScenarioError> {
        match (&s.kind, &s.structure) {
            (ScenarioKind::CoarsenedVersions, Structure::ScalarVersions { values, probs }) => {
                if values.is_empty() {
                    return Err(ScenarioError::MissingParameter("version_values"));
                }
                if values.len() > MAX_TABLED_VERSIONS {
                    return Err(ScenarioError::StateSpaceTooLarge(format!(
                        "{} versions exceeds the cap of {MAX_TABLED_VERSIONS}",
                        values.len()
                    )));
                }
                if probs.len() != n_strata {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "version probabilities: {} stratum rows for {n_strata} strata",
                        probs.len()
                    )));
                }
                for (c, row) in probs.iter().enumerate() {
                    if row.len() != values.len() {
                        return Err(ScenarioError::LengthMismatch(format!(
                            "version probabilities row {c} has {} entries for {} versions",
                            row.len(),
                            values.len()
                        )));
                    }
                    check_prob_vector(row, &format!("version probabilities, stratum {c}"))?;
                }
            }
            (
                ScenarioKind::StructuralReflective | ScenarioKind::IndicatorCausalReflective,
                Structure::Reflective {
                    latent,
                    loadings,
                    errors,
                    error_correlation,
                },
            ) => {
                if loadings.is_empty() {
                    return Err(ScenarioError::MissingParameter("loadings"));
                }
                if errors.len() != loadings.len() {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} error laws for {} loadings",
                        errors.len(),
                        loadings.len()
                    )));
                }
                check_latent_law(latent, n_strata)?;
                for (i, e) in errors.iter().enumerate() {
                    check_error_law(e, &format!("indicator {i} error"))?;
                }
                for (i, &l) in loadings.iter().enumerate() {
                    if !l.is_finite() {
                        return Err(ScenarioError::NonFiniteParameter { field: "loading" });
                    }
                    if s.kind == ScenarioKind::StructuralReflective && l == 0.0 {
                        return Err(ScenarioError::ZeroLoadingInStructuralReflective { index: i });
                    }
                }
                if let Some(corr) = error_correlation {
                    let n = loadings.len();
                    if corr.len() != n || corr.iter().any(|row| row.len() != n) {
                        return Err(ScenarioError::LengthMismatch(
                            "error correlation matrix shape".into(),
                        ));
                    }
                    if errors.iter().any(ErrorLaw::is_finite_support) {
                        return Err(ScenarioError::ViolationNotApplicable(
                            "error correlation requires Gaussian indicator errors",
                        ));
                    }
                }
            }
            (
                ScenarioKind::StructuralFormative | ScenarioKind::IndicatorCausalFormative,
                Structure::Formative {
                    indicators,
                    composition,
                },
            ) => {
                if indicators.is_empty() {
                    return Err(ScenarioError::MissingParameter("indicator_laws"));
                }
                for (i, law) in indicators.iter().enumerate() {
                    match law {
                        IndicatorLaw::Finite { grids } => {
                            if grids.len() != n_strata && grids.len() != 1 {
                                return Err(ScenarioError::LengthMismatch(format!(
                                    "indicator {i}: {} grids for {n_strata} strata",
                                    grids.len()
                                )));
                            }
                            for g in grids {
                                check_grid(g, &format!("indicator {i} grid"))?;
                            }
                        }
                        IndicatorLaw::Gaussian { means, sd } => {
                            if means.len() != n_strata && means.len() != 1 {
                                return Err(ScenarioError::LengthMismatch(format!(
                                    "indicator {i}: {} means for {n_strata} strata",
                                    means.len()
                                )));
                            }
                            if !sd.is_finite() || *sd < 0.0 {
                                return Err(ScenarioError::NonFiniteParameter {
                                    field: "indicator sd",
                                });
                            }
                        }
                    }
                }
                match (s.kind, composition) {
                    (ScenarioKind::StructuralFormative, Some(c)) => {
                        if c.loadings.len() != indicators.len() {
                            return Err(ScenarioError::LengthMismatch(format!(
                                "{} composition loadings for {} indicators",
                                c.loadings.len(),
                                indicators.len()
                            )));
                        }
                        check_error_law(&c.error, "composition error")?;
                    }
                    (ScenarioKind::StructuralFormative, None) => {
                        return Err(ScenarioError::MissingParameter("composition loadings"));
                    }
                    (ScenarioKind::IndicatorCausalFormative, Some(_)) => {
                        return Err(ScenarioError::ViolationNotApplicable(
                            "indicator-causal formative has no causal composite",
                        ));
                    }
                    _ => {}
                }
            }
            (
                ScenarioKind::MultidimLatent,
                Structure::MultidimLatent {
                    n_latents,
                    effects,
                    errors,
                },
            ) => {
                if *n_latents == 0 {
                    return Err(ScenarioError::MissingParameter("n_latents"));
                }
                if effects.is_empty() {
                    return Err(ScenarioError::MissingParameter("latent_effects"));
                }
                if effects.iter().any(|row| row.len() != *n_latents) {
                    return Err(ScenarioError::LengthMismatch(
                        "latent effect matrix shape".into(),
                    ));
                }
                if errors.len() != effects.len() {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} error laws for {} indicators",
                        errors.len(),
                        effects.len()
                    )));
                }
                for (i, e) in errors.iter().enumerate() {
                    if e.is_finite_support() {
                        return Err(ScenarioError::ViolationNotApplicable(
                            "multidimensional-latent designs are continuous",
                        ));
                    }
                    check_error_law(e, &format!("indicator {i} error"))?;
                }
            }
            (ScenarioKind::TwoWaveIndicators | ScenarioKind::TwoWaveLatents, Structure::TwoWave(p)) => {
                p.validate()
                    .map_err(|e| ScenarioError::LengthMismatch(e.to_string()))?;
                let wants_latents = s.kind == ScenarioKind::TwoWaveLatents;
                if wants_latents != p.latent.is_some() {
                    return Err(ScenarioError::MissingParameter(
                        "two-wave latent layer must match the scenario kind",
                    ));
                }
            }
            (kind, _) => {
                return Err(ScenarioError::LengthMismatch(format!(
                    "structure does not match scenario kind {kind:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_outcome(s: &Scenario, n_strata: usize) -> Result<(), ScenarioError> {
        let n_ind = s.n_indicators();
        let noise = s.outcome.noise_sd();
        if !noise.is_finite() || noise < 0.0 {
            return Err(ScenarioError::NonFiniteParameter {
                field: "outcome noise sd",
            });
        }
        match (&s.kind, &s.outcome) {
            (ScenarioKind::CoarsenedVersions, OutcomeModel::VersionTable { means, .. }) => {
                let n_versions = match &s.structure {
                    Structure::ScalarVersions { values, .. } => values.len(),
                    _ => unreachable!("validated above"),
                };
                if means.len() != n_versions {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "outcome table has {} version rows for {n_versions} versions",
                        means.len()
                    )));
                }
                for row in means {
                    if row.len() != n_strata {
                        return Err(ScenarioError::LengthMismatch(format!(
                            "outcome table row has {} entries for {n_strata} strata",
                            row.len()
                        )));
                    }
                    if row.iter().any(|m| !m.is_finite()) {
                        return Err(ScenarioError::NonFiniteParameter {
                            field: "outcome mean",
                        });
                    }
                }
            }
            (
                ScenarioKind::StructuralReflective | ScenarioKind::StructuralFormative,
                OutcomeModel::Latent {
                    stratum_effects, ..
                },
            ) => {
                if stratum_effects.len() != n_strata {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} outcome stratum effects for {n_strata} strata",
                        stratum_effects.len()
                    )));
                }
            }
            (
                ScenarioKind::IndicatorCausalReflective | ScenarioKind::IndicatorCausalFormative,
                OutcomeModel::Indicators {
                    coefs,
                    stratum_effects,
                    ..
                },
            ) => {
                if coefs.len() != n_ind {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} outcome coefficients for {n_ind} indicators",
                        coefs.len()
                    )));
                }
                if stratum_effects.len() != n_strata {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} outcome stratum effects for {n_strata} strata",
                        stratum_effects.len()
                    )));
                }
            }
            (
                ScenarioKind::MultidimLatent,
                OutcomeModel::Latents {
                    coefs,
                    stratum_effects,
                    ..
                },
            ) => {
                let n_latents = match &s.structure {
                    Structure::MultidimLatent { n_latents, .. } => *n_latents,
                    _ => unreachable!("validated above"),
                };
                if coefs.len() != n_latents {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} outcome coefficients for {n_latents} latents",
                        coefs.len()
                    )));
                }
                if stratum_effects.len() != n_strata {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} outcome stratum effects for {n_strata} strata",
                        stratum_effects.len()
                    )));
                }
            }
            // Two-wave outcomes live inside TwoWaveParams; any placeholder is
            // accepted here and ignored downstream.
            (ScenarioKind::TwoWaveIndicators | ScenarioKind::TwoWaveLatents, _) => {}
            (kind, _) => {
                return Err(ScenarioError::LengthMismatch(format!(
                    "outcome model does not match scenario kind {kind:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_measure(s: &Scenario) -> Result<(), ScenarioError> {
        let n_ind = s.n_indicators();
        let scalar = matches!(s.kind, ScenarioKind::CoarsenedVersions);
        match &s.measure.form {
            MeasureForm::Mean | MeasureForm::Sum => {
                if scalar {
                    return Err(ScenarioError::MeasureNotApplicable {
                        form: s.measure.form_name(),
                        kind: s.kind,
                    });
                }
            }
            MeasureForm::WeightedSum { weights } => {
                if scalar {
                    return Err(ScenarioError::MeasureNotApplicable {
                        form: "weighted_sum",
                        kind: s.kind,
                    });
                }
                if weights.len() != n_ind {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "{} measure weights for {n_ind} indicators",
                        weights.len()
                    )));
                }
            }
            MeasureForm::CustomTable { map } => {
                if !scalar {
                    return Err(ScenarioError::MeasureNotApplicable {
                        form: "custom_table",
                        kind: s.kind,
                    });
                }
                let n_versions = match &s.structure {
                    Structure::ScalarVersions { values, .. } => values.len(),
                    _ => 0,
                };
                if map.len() != n_versions {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "custom measure table has {} entries for {n_versions} versions",
                        map.len()
                    )));
                }
            }
            MeasureForm::Stochastic { a_values, probs } => {
                if !scalar {
                    return Err(ScenarioError::MeasureNotApplicable {
                        form: "stochastic",
                        kind: s.kind,
                    });
                }
                let n_versions = match &s.structure {
                    Structure::ScalarVersions { values, .. } => values.len(),
                    _ => 0,
                };
                if probs.len() != n_versions {
                    return Err(ScenarioError::LengthMismatch(format!(
                        "stochastic measure has {} version rows for {n_versions} versions",
                        probs.len()
                    )));
                }
                for (k, row) in probs.iter().enumerate() {
                    if row.len() != a_values.len() {
                        return Err(ScenarioError::LengthMismatch(format!(
                            "stochastic measure row {k} has {} entries for {} exposure values",
                            row.len(),
                            a_values.len()
                        )));
                    }
                    check_prob_vector(row, &format!("stochastic measure, version {k}"))?;
                }
            }
        }
        if let Some(cuts) = &s.measure.coarsening {
            if cuts.is_empty() || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ScenarioError::InvalidCutpoints);
            }
        }
        Ok(())
    }

    fn check_violations(s: &Scenario) -> Result<(), ScenarioError> {
        let n = s.n_indicators();
        let mut u_count = 0usize;
        for v in &s.violations {
            if !v.magnitude.is_finite() {
                return Err(ScenarioError::NonFiniteParameter {
                    field: "violation.magnitude",
                });
            }
            if v.has_u() {
                u_count += 1;
            }
            match v.kind {
                ViolationKind::DirectIndicatorEffect | ViolationKind::CommonCauseU => {
                    if v.targets.is_empty() {
                        return Err(ScenarioError::MissingParameter("violation.targets"));
                    }
                    for &t in &v.targets {
                        if t >= n {
                            return Err(ScenarioError::IndexOutOfRange { index: t, len: n });
                        }
                    }
                }
                ViolationKind::UnmeasuredConfounder => {
                    if !v.targets.is_empty() {
                        return Err(ScenarioError::ViolationNotApplicable(
                            "unmeasured_confounder takes no indicator targets",
                        ));
                    }
                    if matches!(s.structure, Structure::TwoWave(_)) {
                        return Err(ScenarioError::ViolationNotApplicable(
                            "unmeasured_confounder on a two-wave design",
                        ));
                    }
                }
            }
        }
        if u_count > MAX_U_VIOLATIONS {
            return Err(ScenarioError::StateSpaceTooLarge(format!(
                "{u_count} violations with latent U exceeds the cap of {MAX_U_VIOLATIONS}"
            )));
        }
        if matches!(s.structure, Structure::TwoWave(_)) && !s.violations.is_empty() {
            return Err(ScenarioError::ViolationNotApplicable(
                "two-wave designs do not take violation injections",
            ));
        }
        Ok(())
    }
}

