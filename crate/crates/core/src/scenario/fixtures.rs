//! Named scenario fixtures used across the test studies and the CLI.

use super::{build_scenario, Grid, Scenario, ScenarioKind, ScenarioParams};
use crate::longitudinal::{TwoWaveLatentLayer, TwoWaveParams};

/// Three versions `K in {1,2,3}` with `P = (0.2, 0.3, 0.5)`, exposure
/// `A = 1` when `K <= 2`, outcome mean `E[Y_k] = k`, single stratum.
///
/// The contrast `(a, a*) = (1, 0)` evaluates to `-1.4` on both sides of the
/// identity: `E[Y | A=1] = (0.2*1 + 0.3*2) / 0.5 = 1.6` against
/// `E[Y | A=0] = 3`.
pub fn three_point_versions() -> Scenario {
    build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            version_values: Some(vec![1.0, 2.0, 3.0]),
            version_probs: Some(vec![vec![0.2, 0.3, 0.5]]),
            outcome_version_means: Some(vec![vec![1.0], vec![2.0], vec![3.0]]),
            measure_form: Some("custom_table".into()),
            measure_custom_map: Some(vec![1.0, 1.0, 0.0]),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Standardized reflective design: loadings `(0.9, 0.8, 0.7, 0.6)`,
/// unit-variance Gaussian latent, error variances `1 - loading^2` so each
/// indicator has unit variance, outcome slope 0.4 on the latent, exposure is
/// the indicator mean.
pub fn standardized_reflective() -> Scenario {
    let loadings: Vec<f64> = vec![0.9, 0.8, 0.7, 0.6];
    let error_sds = loadings
        .iter()
        .map(|l| (1.0 - l * l).sqrt())
        .collect::<Vec<_>>();
    build_scenario(
        ScenarioKind::StructuralReflective,
        ScenarioParams {
            loadings: Some(loadings),
            error_sds: Some(error_sds),
            outcome_slope: Some(0.4),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Indicator-causal counterpart of [`standardized_reflective`]: identical
/// measurement layer (so identical indicator covariance), but only the first
/// indicator affects the outcome, with coefficient 0.4.
///
/// The two fixtures are covariance-indistinguishable; they differ only in
/// which causal diagram generated the outcome.
pub fn indicator_causal_matched() -> Scenario {
    let loadings: Vec<f64> = vec![0.9, 0.8, 0.7, 0.6];
    let error_sds = loadings
        .iter()
        .map(|l| (1.0 - l * l).sqrt())
        .collect::<Vec<_>>();
    build_scenario(
        ScenarioKind::IndicatorCausalReflective,
        ScenarioParams {
            loadings: Some(loadings),
            error_sds: Some(error_sds),
            outcome_coefs: Some(vec![0.4, 0.0, 0.0, 0.0]),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Summed index of four ordinal indicators, each scored 0-3, with exactly
/// one causal indicator.
///
/// Two covariate strata shift both the indicator distributions and the
/// outcome, so covariate adjustment is non-trivial; indicators are
/// conditionally independent given the stratum. The exposure `A` is the sum,
/// with range `{0, ..., 12}`. Indicator 0 carries effect 0.3; indicators
/// 1-3 have exactly zero effect.
pub fn social_integration_like() -> Scenario {
    let low = Grid::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.4, 0.3, 0.2, 0.1]);
    let high = Grid::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3, 0.4]);
    let per_indicator = vec![low, high];
    build_scenario(
        ScenarioKind::IndicatorCausalFormative,
        ScenarioParams {
            stratum_probs: Some(vec![0.5, 0.5]),
            indicator_grids: Some(vec![per_indicator.clone(); 4]),
            outcome_coefs: Some(vec![0.3, 0.0, 0.0, 0.0]),
            outcome_stratum_effects: Some(vec![0.0, 0.5]),
            measure_form: Some("sum".into()),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Discrete scenario whose observational regression is exactly linear in the
/// exposure and additive in the stratum: six versions valued `0..=5`,
/// uniform in every stratum, coarse exposure `A = floor(k / 2)`, outcome
/// mean `0.5 + 1.5 * k + 0.7 * c`.
///
/// With uniform version probabilities the within-exposure version mix is the
/// same in every stratum, so `E[Y | a, c] = 1.25 + 3 a + 0.7 c`: no
/// exposure-stratum interaction, and the population regression slope on the
/// exposure equals 3.
pub fn no_interaction_bridge() -> Scenario {
    let values: Vec<f64> = (0..6).map(f64::from).collect();
    let uniform = vec![1.0 / 6.0; 6];
    let means = values
        .iter()
        .map(|&v| vec![0.5 + 1.5 * v, 0.5 + 1.5 * v + 0.7])
        .collect::<Vec<_>>();
    build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            stratum_probs: Some(vec![0.4, 0.6]),
            version_values: Some(values),
            version_probs: Some(vec![uniform.clone(), uniform]),
            outcome_version_means: Some(means),
            measure_form: Some("custom_table".into()),
            measure_custom_map: Some(vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Small discrete scenario used for the empirical-convergence study: two
/// strata, four versions with stratum-dependent probabilities, binary
/// exposure.
pub fn empirical_convergence() -> Scenario {
    build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            stratum_probs: Some(vec![0.3, 0.7]),
            version_values: Some(vec![0.0, 1.0, 2.0, 3.0]),
            version_probs: Some(vec![
                vec![0.4, 0.3, 0.2, 0.1],
                vec![0.1, 0.2, 0.3, 0.4],
            ]),
            outcome_version_means: Some(vec![
                vec![0.0, 0.5],
                vec![1.0, 1.5],
                vec![2.0, 2.5],
                vec![3.0, 3.5],
            ]),
            measure_form: Some("custom_table".into()),
            measure_custom_map: Some(vec![0.0, 0.0, 1.0, 1.0]),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Two-wave confounding fixture: the last indicator at wave `t-1` drives
/// both the first and the last indicator at wave `t` (coefficients 0.5),
/// only the last indicator at wave `t` affects the outcome (coefficient
/// 0.5), all error variances 1.
///
/// The naive regression of `Y` on the first current indicator has
/// population slope `0.125 / 1.25 = 0.1` even though its true effect is 0;
/// controlling the prior wave removes the bias entirely.
pub fn two_wave_confounding() -> TwoWaveParams {
    TwoWaveParams {
        cross_lag: vec![vec![0.0, 0.5], vec![0.0, 0.5]],
        outcome_current: vec![0.0, 0.5],
        outcome_prior: vec![0.0, 0.0],
        error_sd_prior: vec![1.0, 1.0],
        error_sd_current: vec![1.0, 1.0],
        outcome_noise_sd: 1.0,
        latent: None,
    }
}

/// [`two_wave_confounding`] lifted to a latent layer: the same dynamics act
/// on latents, and each indicator is its latent plus measurement noise of
/// the given scale.
pub fn two_wave_confounding_latent(indicator_noise_sd: f64) -> TwoWaveParams {
    let mut params = two_wave_confounding();
    params.latent = Some(TwoWaveLatentLayer {
        loadings_prior: vec![1.0, 1.0],
        loadings_current: vec![1.0, 1.0],
        noise_sd_prior: vec![indicator_noise_sd, indicator_noise_sd],
        noise_sd_current: vec![indicator_noise_sd, indicator_noise_sd],
    });
    params
}

/// Wraps [`two_wave_confounding`] as a scenario for the CLI.
pub fn two_wave_confounding_scenario() -> Scenario {
    build_scenario(
        ScenarioKind::TwoWaveIndicators,
        ScenarioParams {
            two_wave: Some(two_wave_confounding()),
            ..Default::default()
        },
    )
    .expect("fixture is valid")
}

/// Looks a fixture up by name; used by the CLI configuration format.
pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "three_point_versions" => Some(three_point_versions()),
        "standardized_reflective" => Some(standardized_reflective()),
        "indicator_causal_matched" => Some(indicator_causal_matched()),
        "social_integration_like" => Some(social_integration_like()),
        "no_interaction_bridge" => Some(no_interaction_bridge()),
        "empirical_convergence" => Some(empirical_convergence()),
        "two_wave_confounding" => Some(two_wave_confounding_scenario()),
        _ => None,
    }
}

/// Names accepted by [`by_name`].
pub const FIXTURE_NAMES: &[&str] = &[
    "three_point_versions",
    "standardized_reflective",
    "indicator_causal_matched",
    "social_integration_like",
    "no_interaction_bridge",
    "empirical_convergence",
    "two_wave_confounding",
];
