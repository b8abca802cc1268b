//! Randomized discrete scenarios for the verification batteries.
//!
//! Each generated scenario is fully determined by its seed. Violated
//! scenarios are screened at generation time so the injected edge produces a
//! detectable break (gap above [`MIN_DETECTABLE_GAP`]) at the step matching
//! the violated assumption; screening retries with derived seeds and is
//! itself deterministic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    build_scenario, Grid, Scenario, ScenarioKind, ScenarioParams, Violation, ViolationKind,
};
use crate::mvt::{self, Assumption};
use crate::rng;

/// Gap size a screened violation must produce at its broken step.
pub const MIN_DETECTABLE_GAP: f64 = 1e-7;

const MAX_ATTEMPTS: u64 = 200;

/// A generated scenario together with the exposure contrast to verify.
#[derive(Debug, Clone)]
pub struct RandomScenario {
    pub scenario: Scenario,
    /// `(a, a*)` drawn from the exposure support common to all strata.
    pub contrast: (f64, f64),
    pub label: String,
}

/// Violation-free discrete scenario: up to 4 covariate strata and at most 16
/// versions, drawn over all five enumerable designs.
pub fn random_discrete_scenario(seed: u64) -> RandomScenario {
    for attempt in 0..MAX_ATTEMPTS {
        let attempt_seed = rng::derive_seed(seed, attempt);
        if let Some(found) = try_generate(attempt_seed, None) {
            return found;
        }
    }
    unreachable!("no valid scenario after {MAX_ATTEMPTS} attempts from seed {seed}");
}

/// Discrete scenario carrying one injected violation of the requested kind,
/// screened so the derivation chain breaks exactly at the assumption the
/// violation targets.
pub fn random_violated_scenario(seed: u64, kind: ViolationKind) -> RandomScenario {
    for attempt in 0..MAX_ATTEMPTS {
        let attempt_seed = rng::derive_seed(seed, attempt);
        if let Some(found) = try_generate(attempt_seed, Some(kind)) {
            return found;
        }
    }
    unreachable!("no violated scenario after {MAX_ATTEMPTS} attempts from seed {seed}");
}

fn try_generate(seed: u64, violation: Option<ViolationKind>) -> Option<RandomScenario> {
    let mut r = rng::master(seed);
    let kind = pick_kind(&mut r, violation);
    let scenario = match kind {
        ScenarioKind::CoarsenedVersions => gen_coarsened(&mut r),
        ScenarioKind::StructuralReflective => gen_reflective(&mut r, true),
        ScenarioKind::IndicatorCausalReflective => gen_reflective(&mut r, false),
        ScenarioKind::StructuralFormative => gen_formative(&mut r, true),
        ScenarioKind::IndicatorCausalFormative => gen_formative(&mut r, false),
        _ => unreachable!("generator only draws enumerable kinds"),
    }
    .ok()?;

    let scenario = match violation {
        None => scenario,
        Some(vkind) => {
            let v = draw_violation(&mut r, vkind, scenario.n_indicators());
            scenario.inject_violation(v).ok()?
        }
    };

    let table = crate::dgp::enumerate_population(&scenario).ok()?;
    let support = table.common_exposure_support();
    if support.len() < 2 {
        return None;
    }
    let contrast = (
        *support.last().expect("non-empty"),
        *support.first().expect("non-empty"),
    );

    if let Some(vkind) = violation {
        let chain = mvt::verify_derivation_chain(&table, contrast.0, contrast.1).ok()?;
        let expected = expected_assumption(vkind);
        match chain.first_break(MIN_DETECTABLE_GAP) {
            Some(step) if step.assumption == expected => {}
            _ => return None,
        }
    } else {
        let lhs = mvt::observed_contrast(&table, contrast.0, contrast.1).ok()?;
        let rhs = mvt::trial_contrast(&table, contrast.0, contrast.1).ok()?;
        if (lhs - rhs).abs() > 1e-10 {
            // The identity is a theorem for clean discrete scenarios; any
            // violation here is an arithmetic bug, not a retry case.
            panic!(
                "clean scenario from seed {seed} broke the identity: lhs={lhs} rhs={rhs}"
            );
        }
    }

    Some(RandomScenario {
        label: format!("{:?}/{seed:016x}", scenario.kind()),
        scenario,
        contrast,
    })
}

/// The assumption each violation kind breaks: direct indicator effects and
/// indicator-outcome common causes both defeat the conditional independence
/// of outcome and exposure given the version, while a confounder of the
/// version defeats unconfoundedness.
pub fn expected_assumption(kind: ViolationKind) -> Assumption {
    match kind {
        ViolationKind::DirectIndicatorEffect | ViolationKind::CommonCauseU => {
            Assumption::Independence
        }
        ViolationKind::UnmeasuredConfounder => Assumption::Unconfoundedness,
    }
}

fn pick_kind(r: &mut ChaCha8Rng, violation: Option<ViolationKind>) -> ScenarioKind {
    match violation {
        // The indicator-directed edges only bypass the version variable when
        // the version is a latent, so draw structural designs.
        Some(ViolationKind::DirectIndicatorEffect) | Some(ViolationKind::CommonCauseU) => {
            if r.gen_bool(0.5) {
                ScenarioKind::StructuralReflective
            } else {
                ScenarioKind::StructuralFormative
            }
        }
        // A version-level confounder leaves independence intact only when the
        // version law is not composed of the observed indicators.
        Some(ViolationKind::UnmeasuredConfounder) => match r.gen_range(0..3u8) {
            0 => ScenarioKind::CoarsenedVersions,
            1 => ScenarioKind::StructuralReflective,
            _ => ScenarioKind::IndicatorCausalReflective,
        },
        None => match r.gen_range(0..5u8) {
            0 => ScenarioKind::CoarsenedVersions,
            1 => ScenarioKind::StructuralReflective,
            2 => ScenarioKind::StructuralFormative,
            3 => ScenarioKind::IndicatorCausalReflective,
            _ => ScenarioKind::IndicatorCausalFormative,
        },
    }
}

fn draw_violation(r: &mut ChaCha8Rng, kind: ViolationKind, n_indicators: usize) -> Violation {
    let magnitude = draw_signed(r, 0.3, 1.0);
    match kind {
        ViolationKind::DirectIndicatorEffect => {
            Violation::direct_indicator_effect(r.gen_range(0..n_indicators), magnitude)
        }
        ViolationKind::CommonCauseU => {
            Violation::common_cause(vec![r.gen_range(0..n_indicators)], magnitude)
        }
        ViolationKind::UnmeasuredConfounder => Violation::unmeasured_confounder(magnitude),
    }
}

fn draw_signed(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    sign * r.gen_range(lo..hi)
}

fn draw_probs(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn gen_coarsened(r: &mut ChaCha8Rng) -> Result<Scenario, super::ScenarioError> {
    let n_strata = r.gen_range(1..=4usize);
    let n_versions = r.gen_range(2..=8usize);
    let values: Vec<f64> = (0..n_versions)
        .map(|k| k as f64 + r.gen_range(0.0..0.3))
        .collect();
    let probs: Vec<Vec<f64>> = (0..n_strata).map(|_| draw_probs(r, n_versions)).collect();
    let means: Vec<Vec<f64>> = (0..n_versions)
        .map(|_| (0..n_strata).map(|_| r.gen_range(-2.0..2.0)).collect())
        .collect();

    let n_exposures = r.gen_range(2..=3usize).min(n_versions);
    let (form, map, a_values, a_probs) = if r.gen_bool(0.3) {
        // Stochastic version-to-exposure assignment.
        let a_values: Vec<f64> = (0..n_exposures).map(|a| a as f64).collect();
        let a_probs: Vec<Vec<f64>> = (0..n_versions).map(|_| draw_probs(r, n_exposures)).collect();
        ("stochastic", None, Some(a_values), Some(a_probs))
    } else {
        // Deterministic assignment covering every exposure value.
        let mut map: Vec<f64> = (0..n_versions)
            .map(|k| {
                if k < n_exposures {
                    k as f64
                } else {
                    r.gen_range(0..n_exposures) as f64
                }
            })
            .collect();
        // Shuffle which versions land on which exposure.
        for k in (1..map.len()).rev() {
            let j = r.gen_range(0..=k);
            map.swap(k, j);
        }
        ("custom_table", Some(map), None, None)
    };

    build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            stratum_probs: Some(draw_probs(r, n_strata)),
            version_values: Some(values),
            version_probs: Some(probs),
            outcome_version_means: Some(means),
            measure_form: Some(form.into()),
            measure_custom_map: map,
            measure_a_values: a_values,
            measure_probs: a_probs,
            ..Default::default()
        },
    )
}

fn draw_error_grid(r: &mut ChaCha8Rng, max_points: usize) -> Grid {
    let spread = r.gen_range(0.3..1.0);
    if max_points < 3 || r.gen_bool(0.5) {
        Grid::new(vec![-spread, spread], draw_probs(r, 2))
    } else {
        Grid::new(vec![-spread, 0.0, spread], draw_probs(r, 3))
    }
}

fn gen_reflective(r: &mut ChaCha8Rng, structural: bool) -> Result<Scenario, super::ScenarioError> {
    let n_strata = r.gen_range(1..=4usize);
    let n_indicators = 2usize;
    // Indicator-causal versions are the joint indicator states; keep the
    // grid product within the 16-version battery cap.
    let n_latent = if structural {
        r.gen_range(2..=4usize)
    } else {
        2
    };
    let latent_values: Vec<f64> = (0..n_latent)
        .map(|j| j as f64 + r.gen_range(0.0..0.3))
        .collect();
    let latent_probs: Vec<Vec<f64>> = (0..n_strata).map(|_| draw_probs(r, n_latent)).collect();
    let loadings: Vec<f64> = (0..n_indicators).map(|_| draw_signed(r, 0.4, 1.0)).collect();
    // Indicator-causal versions are the joint indicator states: with two
    // latent levels and two indicators, two-point error grids keep the
    // version count at 8, inside the 16-version battery cap.
    let error_points = if structural { 3 } else { 2 };
    let error_grids: Vec<Grid> = (0..n_indicators)
        .map(|_| draw_error_grid(r, error_points))
        .collect();

    let measure_form = if r.gen_bool(0.5) { "mean" } else { "sum" };
    let stratum_effects: Vec<f64> = (0..n_strata).map(|_| r.gen_range(-1.0..1.0)).collect();

    let params = ScenarioParams {
        stratum_probs: Some(draw_probs(r, n_strata)),
        version_values: Some(latent_values),
        version_probs: Some(latent_probs),
        loadings: Some(loadings),
        error_grids: Some(error_grids),
        outcome_stratum_effects: Some(stratum_effects),
        measure_form: Some(measure_form.into()),
        ..Default::default()
    };

    if structural {
        build_scenario(
            ScenarioKind::StructuralReflective,
            ScenarioParams {
                outcome_slope: Some(draw_signed(r, 0.5, 2.0)),
                ..params
            },
        )
    } else {
        build_scenario(
            ScenarioKind::IndicatorCausalReflective,
            ScenarioParams {
                outcome_coefs: Some(
                    (0..n_indicators).map(|_| draw_signed(r, 0.3, 1.5)).collect(),
                ),
                ..params
            },
        )
    }
}

fn gen_formative(r: &mut ChaCha8Rng, structural: bool) -> Result<Scenario, super::ScenarioError> {
    let n_strata = r.gen_range(1..=4usize);
    let n_indicators = 2usize;
    let max_levels: usize = if structural { 2 } else { 4 };
    let levels = r.gen_range(2..=max_levels);
    let shared_values: Vec<f64> = (0..levels)
        .map(|v| v as f64 + r.gen_range(0.0..0.3))
        .collect();
    let indicator_grids: Vec<Vec<Grid>> = (0..n_indicators)
        .map(|_| {
            (0..n_strata)
                .map(|_| Grid::new(shared_values.clone(), draw_probs(r, levels)))
                .collect()
        })
        .collect();
    let stratum_effects: Vec<f64> = (0..n_strata).map(|_| r.gen_range(-1.0..1.0)).collect();

    let params = ScenarioParams {
        stratum_probs: Some(draw_probs(r, n_strata)),
        indicator_grids: Some(indicator_grids),
        outcome_stratum_effects: Some(stratum_effects),
        measure_form: Some(if r.gen_bool(0.5) { "mean" } else { "sum" }.into()),
        ..Default::default()
    };

    if structural {
        let composition_error = if r.gen_bool(0.5) {
            Some(Grid::new(
                vec![-r.gen_range(0.2..0.6), r.gen_range(0.2..0.6)],
                draw_probs(r, 2),
            ))
        } else {
            None
        };
        build_scenario(
            ScenarioKind::StructuralFormative,
            ScenarioParams {
                loadings: Some((0..n_indicators).map(|_| draw_signed(r, 0.4, 1.0)).collect()),
                composition_error_grid: composition_error,
                outcome_slope: Some(draw_signed(r, 0.5, 2.0)),
                ..params
            },
        )
    } else {
        build_scenario(
            ScenarioKind::IndicatorCausalFormative,
            ScenarioParams {
                outcome_coefs: Some(
                    (0..n_indicators).map(|_| draw_signed(r, 0.3, 1.5)).collect(),
                ),
                ..params
            },
        )
    }
}
