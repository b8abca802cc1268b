//! Flat parameter bag for scenario construction.
//!
//! [`ScenarioParams`] is the serialized form of a scenario: every field is
//! optional, each kind requires its own subset, and [`assemble`] turns the
//! bag into a validated [`Scenario`] or reports the first missing piece.

use serde::{Deserialize, Serialize};

use super::{
    Composition, ErrorLaw, Grid, IndicatorLaw, LatentLaw, MeasureForm, MeasureSpec, OutcomeModel,
    Scenario, ScenarioError, ScenarioKind, Structure, Violation,
};
use crate::longitudinal::TwoWaveParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// `P(c)` over covariate strata; defaults to a single stratum.
    pub stratum_probs: Option<Vec<f64>>,

    /// Explicit version values (coarsened designs) or finite latent levels
    /// (discrete structural designs).
    pub version_values: Option<Vec<f64>>,
    /// `P(k | c)`, one row per stratum.
    pub version_probs: Option<Vec<Vec<f64>>>,
    /// Continuous latent: per-stratum mean of a unit-variance Gaussian.
    pub latent_stratum_means: Option<Vec<f64>>,

    /// Reflective loadings, or composition loadings for structural
    /// formative designs.
    pub loadings: Option<Vec<f64>>,
    /// Gaussian indicator error scales (continuous mode).
    pub error_sds: Option<Vec<f64>>,
    /// Finite indicator error distributions (discrete mode).
    pub error_grids: Option<Vec<Grid>>,
    /// Optional correlation among Gaussian indicator errors.
    pub error_correlation: Option<Vec<Vec<f64>>>,

    /// Exogenous indicator grids, indexed `[indicator][stratum]`
    /// (a single inner entry is broadcast across strata).
    pub indicator_grids: Option<Vec<Vec<Grid>>>,
    /// Exogenous Gaussian indicators: per-indicator per-stratum means.
    pub indicator_means: Option<Vec<Vec<f64>>>,
    /// Exogenous Gaussian indicators: per-indicator scale.
    pub indicator_sds: Option<Vec<f64>>,

    /// Composition error for structural formative designs; omit for an
    /// error-free composite.
    pub composition_error_sd: Option<f64>,
    pub composition_error_grid: Option<Grid>,

    /// Multidimensional designs: number of latents and the effect matrix
    /// `[indicator][latent]`.
    pub n_latents: Option<usize>,
    pub latent_effects: Option<Vec<Vec<f64>>>,

    /// Outcome mean table `[version][stratum]` (coarsened designs).
    pub outcome_version_means: Option<Vec<Vec<f64>>>,
    pub outcome_intercept: Option<f64>,
    /// Slope on the causal latent (structural designs).
    pub outcome_slope: Option<f64>,
    /// Per-indicator or per-latent outcome coefficients.
    pub outcome_coefs: Option<Vec<f64>>,
    pub outcome_stratum_effects: Option<Vec<f64>>,
    /// Additive outcome noise scale; defaults to 1.
    pub outcome_noise_sd: Option<f64>,

    /// Measure form: "mean", "sum", "weighted_sum", "custom_table",
    /// "stochastic". Defaults to sum for finite indicator grids, mean for
    /// other indicator designs.
    pub measure_form: Option<String>,
    pub measure_weights: Option<Vec<f64>>,
    pub measure_custom_map: Option<Vec<f64>>,
    pub measure_a_values: Option<Vec<f64>>,
    pub measure_probs: Option<Vec<Vec<f64>>>,
    pub measure_coarsening: Option<Vec<f64>>,

    pub violations: Vec<Violation>,

    /// Two-wave designs delegate their full parameterization.
    pub two_wave: Option<TwoWaveParams>,
}

/// Default outcome noise scale when none is given.
pub const DEFAULT_OUTCOME_NOISE_SD: f64 = 1.0;

pub(super) fn assemble(
    kind: ScenarioKind,
    params: ScenarioParams,
) -> Result<Scenario, ScenarioError> {
    let stratum_probs = params.stratum_probs.clone().unwrap_or_else(|| vec![1.0]);
    let noise_sd = params.outcome_noise_sd.unwrap_or(DEFAULT_OUTCOME_NOISE_SD);

    let structure = build_structure(kind, &params)?;
    let outcome = build_outcome(kind, &params, noise_sd)?;
    let measure = build_measure(kind, &params, &structure)?;

    Scenario::from_parts(
        kind,
        stratum_probs,
        structure,
        outcome,
        measure,
        params.violations,
    )
}

fn build_structure(kind: ScenarioKind, p: &ScenarioParams) -> Result<Structure, ScenarioError> {
    match kind {
        ScenarioKind::CoarsenedVersions => {
            let values = p
                .version_values
                .clone()
                .ok_or(ScenarioError::MissingParameter("version_values"))?;
            let probs = p
                .version_probs
                .clone()
                .ok_or(ScenarioError::MissingParameter("version_probs"))?;
            Ok(Structure::ScalarVersions { values, probs })
        }
        ScenarioKind::StructuralReflective | ScenarioKind::IndicatorCausalReflective => {
            let loadings = p
                .loadings
                .clone()
                .ok_or(ScenarioError::MissingParameter("loadings"))?;
            let latent = if let Some(values) = p.version_values.clone() {
                let probs = p
                    .version_probs
                    .clone()
                    .ok_or(ScenarioError::MissingParameter("version_probs"))?;
                LatentLaw::Finite { values, probs }
            } else {
                let n_strata = p.stratum_probs.as_ref().map_or(1, Vec::len);
                LatentLaw::Gaussian {
                    stratum_means: p
                        .latent_stratum_means
                        .clone()
                        .unwrap_or_else(|| vec![0.0; n_strata]),
                }
            };
            let errors = build_indicator_errors(p, loadings.len())?;
            Ok(Structure::Reflective {
                latent,
                loadings,
                errors,
                error_correlation: p.error_correlation.clone(),
            })
        }
        ScenarioKind::StructuralFormative | ScenarioKind::IndicatorCausalFormative => {
            let indicators = build_exogenous_indicators(p)?;
            let composition = if kind == ScenarioKind::StructuralFormative {
                let loadings = p
                    .loadings
                    .clone()
                    .ok_or(ScenarioError::MissingParameter("loadings"))?;
                let error = if let Some(grid) = p.composition_error_grid.clone() {
                    ErrorLaw::Finite(grid)
                } else if let Some(sd) = p.composition_error_sd {
                    ErrorLaw::Gaussian { sd }
                } else {
                    ErrorLaw::none()
                };
                Some(Composition { loadings, error })
            } else {
                None
            };
            Ok(Structure::Formative {
                indicators,
                composition,
            })
        }
        ScenarioKind::MultidimLatent => {
            let n_latents = p
                .n_latents
                .ok_or(ScenarioError::MissingParameter("n_latents"))?;
            let effects = p
                .latent_effects
                .clone()
                .ok_or(ScenarioError::MissingParameter("latent_effects"))?;
            let n_ind = effects.len();
            let errors = match (&p.error_sds, &p.error_grids) {
                (Some(sds), None) => sds
                    .iter()
                    .map(|&sd| ErrorLaw::Gaussian { sd })
                    .collect::<Vec<_>>(),
                (None, None) => vec![ErrorLaw::Gaussian { sd: 1.0 }; n_ind],
                _ => {
                    return Err(ScenarioError::ViolationNotApplicable(
                        "multidimensional-latent designs take Gaussian errors",
                    ))
                }
            };
            Ok(Structure::MultidimLatent {
                n_latents,
                effects,
                errors,
            })
        }
        ScenarioKind::TwoWaveIndicators | ScenarioKind::TwoWaveLatents => {
            let params = p
                .two_wave
                .clone()
                .ok_or(ScenarioError::MissingParameter("two_wave"))?;
            Ok(Structure::TwoWave(params))
        }
    }
}

fn build_indicator_errors(p: &ScenarioParams, n: usize) -> Result<Vec<ErrorLaw>, ScenarioError> {
    match (&p.error_grids, &p.error_sds) {
        (Some(grids), None) => {
            if grids.len() != n {
                return Err(ScenarioError::LengthMismatch(format!(
                    "{} error grids for {n} indicators",
                    grids.len()
                )));
            }
            Ok(grids.iter().cloned().map(ErrorLaw::Finite).collect())
        }
        (None, Some(sds)) => {
            if sds.len() != n {
                return Err(ScenarioError::LengthMismatch(format!(
                    "{} error sds for {n} indicators",
                    sds.len()
                )));
            }
            Ok(sds.iter().map(|&sd| ErrorLaw::Gaussian { sd }).collect())
        }
        (Some(_), Some(_)) => Err(ScenarioError::LengthMismatch(
            "give error_grids or error_sds, not both".into(),
        )),
        (None, None) => Err(ScenarioError::MissingParameter("error_sds or error_grids")),
    }
}

fn build_exogenous_indicators(p: &ScenarioParams) -> Result<Vec<IndicatorLaw>, ScenarioError> {
    if let Some(grids) = &p.indicator_grids {
        return Ok(grids
            .iter()
            .map(|per_stratum| IndicatorLaw::Finite {
                grids: per_stratum.clone(),
            })
            .collect());
    }
    if let Some(means) = &p.indicator_means {
        let sds = p
            .indicator_sds
            .clone()
            .ok_or(ScenarioError::MissingParameter("indicator_sds"))?;
        if sds.len() != means.len() {
            return Err(ScenarioError::LengthMismatch(format!(
                "{} indicator sds for {} indicators",
                sds.len(),
                means.len()
            )));
        }
        return Ok(means
            .iter()
            .zip(&sds)
            .map(|(m, &sd)| IndicatorLaw::Gaussian {
                means: m.clone(),
                sd,
            })
            .collect());
    }
    Err(ScenarioError::MissingParameter(
        "indicator_grids or indicator_means",
    ))
}

fn build_outcome(
    kind: ScenarioKind,
    p: &ScenarioParams,
    noise_sd: f64,
) -> Result<OutcomeModel, ScenarioError> {
    let n_strata = p.stratum_probs.as_ref().map_or(1, Vec::len);
    let effects = p
        .outcome_stratum_effects
        .clone()
        .unwrap_or_else(|| vec![0.0; n_strata]);
    match kind {
        ScenarioKind::CoarsenedVersions => {
            let means = p
                .outcome_version_means
                .clone()
                .ok_or(ScenarioError::MissingParameter("outcome_version_means"))?;
            Ok(OutcomeModel::VersionTable { means, noise_sd })
        }
        ScenarioKind::StructuralReflective | ScenarioKind::StructuralFormative => {
            let slope = p
                .outcome_slope
                .ok_or(ScenarioError::MissingParameter("outcome_slope"))?;
            Ok(OutcomeModel::Latent {
                intercept: p.outcome_intercept.unwrap_or(0.0),
                slope,
                stratum_effects: effects,
                noise_sd,
            })
        }
        ScenarioKind::IndicatorCausalReflective | ScenarioKind::IndicatorCausalFormative => {
            let coefs = p
                .outcome_coefs
                .clone()
                .ok_or(ScenarioError::MissingParameter("outcome_coefs"))?;
            Ok(OutcomeModel::Indicators {
                intercept: p.outcome_intercept.unwrap_or(0.0),
                coefs,
                stratum_effects: effects,
                noise_sd,
            })
        }
        ScenarioKind::MultidimLatent => {
            let coefs = p
                .outcome_coefs
                .clone()
                .ok_or(ScenarioError::MissingParameter("outcome_coefs"))?;
            Ok(OutcomeModel::Latents {
                intercept: p.outcome_intercept.unwrap_or(0.0),
                coefs,
                stratum_effects: effects,
                noise_sd,
            })
        }
        // Ignored downstream; kept well-formed for serialization.
        ScenarioKind::TwoWaveIndicators | ScenarioKind::TwoWaveLatents => {
            Ok(OutcomeModel::Latent {
                intercept: 0.0,
                slope: 0.0,
                stratum_effects: effects,
                noise_sd,
            })
        }
    }
}

fn build_measure(
    kind: ScenarioKind,
    p: &ScenarioParams,
    structure: &Structure,
) -> Result<MeasureSpec, ScenarioError> {
    let default_form = match kind {
        ScenarioKind::CoarsenedVersions => "custom_table",
        _ => match structure {
            Structure::Formative { indicators, .. }
                if indicators.iter().all(IndicatorLaw::is_finite_support) =>
            {
                "sum"
            }
            _ => "mean",
        },
    };
    let requested = p.measure_form.as_deref().unwrap_or(default_form);
    let form = match requested {
        "mean" => MeasureForm::Mean,
        "sum" => MeasureForm::Sum,
        "weighted_sum" => MeasureForm::WeightedSum {
            weights: p
                .measure_weights
                .clone()
                .ok_or(ScenarioError::MissingParameter("measure_weights"))?,
        },
        "custom_table" => MeasureForm::CustomTable {
            map: p
                .measure_custom_map
                .clone()
                .ok_or(ScenarioError::MissingParameter("measure_custom_map"))?,
        },
        "stochastic" => MeasureForm::Stochastic {
            a_values: p
                .measure_a_values
                .clone()
                .ok_or(ScenarioError::MissingParameter("measure_a_values"))?,
            probs: p
                .measure_probs
                .clone()
                .ok_or(ScenarioError::MissingParameter("measure_probs"))?,
        },
        other => {
            return Err(ScenarioError::InvalidProbability(format!(
                "unknown measure form `{other}`"
            )))
        }
    };
    Ok(MeasureSpec {
        form,
        coarsening: p.measure_coarsening.clone(),
    })
}
