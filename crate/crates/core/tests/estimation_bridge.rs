//! Bridges between the observational estimators and the identity: the
//! population regression coefficient against the hypothetical-trial
//! contrast, sampled regressions against the quadrature oracle, and the
//! item-by-item association patterns.

use mvtlab_core::dgp::{enumerate_population, sample_dataset, sample_observed};
use mvtlab_core::estimation::{
    bootstrap_ci, fit_ols, fit_population_regression, item_by_item, standardized_contrast,
    AssociationMode,
};
use mvtlab_core::mvt::{trial_contrast, trial_contrast_quadrature, DEFAULT_QUADRATURE_NODES};
use mvtlab_core::rng;
use mvtlab_core::scenario::{fixtures, random_discrete_scenario};

#[test]
fn population_regression_equals_trial_contrast_without_interaction() {
    // On the no-interaction fixture the exact-weights regression slope, the
    // standardized unit contrast, and the trial contrast all coincide.
    let scenario = fixtures::no_interaction_bridge();
    let table = enumerate_population(&scenario).unwrap();
    let fit = fit_population_regression(&table).unwrap();
    let slope = fit.coefficients[1];
    assert!((slope - 3.0).abs() < 1e-10, "population slope {slope}");

    let rhs = trial_contrast(&table, 1.0, 0.0).unwrap();
    assert!(
        (slope - rhs).abs() <= 1e-10,
        "slope {slope} vs trial contrast {rhs}"
    );
    let rhs_high = trial_contrast(&table, 2.0, 1.0).unwrap();
    assert!((slope - rhs_high).abs() <= 1e-10);
}

#[test]
fn population_regression_matches_standardization_on_sampled_data() {
    // Large-sample check of the same equivalence through the estimators.
    let scenario = fixtures::no_interaction_bridge();
    let ds = sample_dataset(&scenario, 60_000, 51).unwrap();
    let contrast = standardized_contrast(&ds, 1.0, 0.0).unwrap();

    let dummies: Vec<f64> = ds.stratum.iter().map(|&c| f64::from(c)).collect();
    let fit = fit_ols(&ds.outcome, &[&ds.exposure, &dummies], true).unwrap();
    let diff = (fit.coefficients[1] - contrast.value).abs();
    assert!(
        diff < 4.0 * fit.standard_errors[1],
        "regression {} vs standardization {}",
        fit.coefficients[1],
        contrast.value
    );
}

#[test]
fn sampled_regression_matches_the_quadrature_oracle() {
    // Reflective continuous design with outcome slope 0.4 on the latent: the
    // regression of the outcome on the indicator mean must agree with the
    // trial contrast computed by latent quadrature, within three standard
    // errors.
    let scenario = fixtures::standardized_reflective();
    let ds = sample_dataset(&scenario, 100_000, 8080).unwrap();
    let fit = fit_ols(&ds.outcome, &[&ds.exposure], true).unwrap();
    let slope = fit.coefficients[1];
    let se = fit.standard_errors[1];

    let oracle =
        trial_contrast_quadrature(&scenario, 1.0, 0.0, DEFAULT_QUADRATURE_NODES).unwrap();
    assert!(
        (slope - oracle).abs() < 3.0 * se,
        "slope {slope} (se {se}) vs quadrature {oracle}"
    );
}

#[test]
fn joint_item_analysis_recovers_the_single_causal_indicator() {
    let scenario = fixtures::social_integration_like();
    let ds = sample_observed(&scenario, 50_000, 613).unwrap();
    let items = item_by_item(&ds, AssociationMode::Joint).unwrap();
    assert_eq!(items.len(), 4);
    let causal = &items[0];
    assert!(
        (causal.estimate - 0.3).abs() < 3.0 * causal.standard_error,
        "causal indicator estimate {} se {}",
        causal.estimate,
        causal.standard_error
    );
    assert!(causal.estimate / causal.standard_error > 3.0);
    for item in &items[1..] {
        assert!(
            item.estimate.abs() < 3.0 * item.standard_error,
            "null indicator {} drifted: {} (se {})",
            item.indicator,
            item.estimate,
            item.standard_error
        );
    }
}

#[test]
fn marginal_item_analysis_keeps_nulls_at_zero_after_adjustment() {
    // Indicators are conditionally independent given the stratum, so the
    // covariate-adjusted marginal associations of the null indicators
    // vanish.
    let scenario = fixtures::social_integration_like();
    let ds = sample_observed(&scenario, 50_000, 1207).unwrap();
    let items = item_by_item(&ds, AssociationMode::Marginal).unwrap();
    assert!(items[0].estimate / items[0].standard_error > 3.0);
    for item in &items[1..] {
        assert!(
            item.estimate.abs() < 3.0 * item.standard_error,
            "null indicator {} drifted under adjustment: {} (se {})",
            item.indicator,
            item.estimate,
            item.standard_error
        );
    }
}

#[test]
fn pure_noise_outcome_shows_no_associations() {
    let scenario = fixtures::social_integration_like();
    let mut ds = sample_observed(&scenario, 20_000, 42).unwrap();
    // Replace the outcome with fresh noise detached from everything.
    let base = rng::master(987);
    ds.outcome = (0..ds.len())
        .map(|row| {
            use rand::Rng;
            let mut r = rng::substream(&base, row as u64);
            r.sample::<f64, _>(rand_distr::StandardNormal)
        })
        .collect();
    for mode in [AssociationMode::Marginal, AssociationMode::Joint] {
        for item in item_by_item(&ds, mode).unwrap() {
            assert!(
                item.estimate.abs() < 3.5 * item.standard_error,
                "{:?} indicator {}: {} (se {})",
                mode,
                item.indicator,
                item.estimate,
                item.standard_error
            );
        }
    }
}

#[test]
fn marginal_slopes_scale_with_loadings_under_the_reflective_model() {
    // Marginal slopes on standardized reflective data are proportional to
    // the loadings: slope_i = 0.4 * loading_i with unit indicator variances.
    let scenario = fixtures::standardized_reflective();
    let ds = sample_dataset(&scenario, 100_000, 2719).unwrap();
    let items = item_by_item(&ds, AssociationMode::Marginal).unwrap();
    let loadings = [0.9, 0.8, 0.7, 0.6];
    for (item, &loading) in items.iter().zip(&loadings) {
        let want = 0.4 * loading;
        assert!(
            (item.estimate - want).abs() < 4.0 * item.standard_error,
            "indicator {}: slope {} vs implied {}",
            item.indicator,
            item.estimate,
            want
        );
    }
}

#[test]
fn bootstrap_interval_covers_the_mean_at_nominal_rate() {
    // Small coverage study: 60 replicates of n=400 standard normal data;
    // the 95% percentile interval for the mean should cover zero close to
    // 95% of the time (binomial 3-sigma band around 57).
    use rand::Rng;
    let mut covered = 0;
    for rep in 0..60u64 {
        let base = rng::master(rng::derive_seed(5150, rep));
        let data: Vec<f64> = (0..400)
            .map(|i| {
                let mut r = rng::substream(&base, i);
                r.sample::<f64, _>(rand_distr::StandardNormal)
            })
            .collect();
        let stat = |idx: &[usize]| idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64;
        let (lo, hi) = bootstrap_ci(data.len(), 400, rng::derive_seed(17, rep), 0.95, stat).unwrap();
        if lo <= 0.0 && 0.0 <= hi {
            covered += 1;
        }
    }
    assert!(
        (51..=60).contains(&covered),
        "covered {covered}/60 at nominal 95%"
    );
}

#[test]
fn randomized_no_interaction_scenarios_bridge_exactly() {
    // Uniform version probabilities shared across strata plus additive
    // outcome tables keep the population regression and the trial contrast
    // equal; exercise the equivalence across random scenarios.
    use mvtlab_core::scenario::{build_scenario, ScenarioKind, ScenarioParams};
    use rand::Rng;
    for seed in 0..10u64 {
        let mut r = rng::master(rng::derive_seed(31_415, seed));
        let n_versions = 2 * r.gen_range(2..=3usize);
        let n_strata = r.gen_range(1..=3usize);
        let values: Vec<f64> = (0..n_versions).map(|k| k as f64).collect();
        let uniform = vec![1.0 / n_versions as f64; n_versions];
        let base = r.gen_range(-1.0..1.0);
        let slope = r.gen_range(0.5..2.0);
        let effects: Vec<f64> = (0..n_strata).map(|_| r.gen_range(-1.0..1.0)).collect();
        let means: Vec<Vec<f64>> = values
            .iter()
            .map(|&v| effects.iter().map(|e| base + slope * v + e).collect())
            .collect();
        let map: Vec<f64> = (0..n_versions).map(|k| (k / 2) as f64).collect();
        let probs = vec![1.0 / n_strata as f64; n_strata];
        let scenario = build_scenario(
            ScenarioKind::CoarsenedVersions,
            ScenarioParams {
                stratum_probs: Some(probs),
                version_values: Some(values),
                version_probs: Some(vec![uniform; n_strata]),
                outcome_version_means: Some(means),
                measure_form: Some("custom_table".into()),
                measure_custom_map: Some(map),
                ..Default::default()
            },
        )
        .unwrap();
        let table = enumerate_population(&scenario).unwrap();
        let fit = fit_population_regression(&table).unwrap();
        let rhs = trial_contrast(&table, 1.0, 0.0).unwrap();
        assert!(
            (fit.coefficients[1] - rhs).abs() <= 1e-10,
            "seed {seed}: slope {} vs trial {rhs}",
            fit.coefficients[1]
        );
    }
}

#[test]
fn battery_scenarios_allow_empirical_standardization() {
    // The sampled standardized contrast tracks the exact observational
    // contrast on randomized discrete scenarios.
    for seed in 40..44u64 {
        let case = random_discrete_scenario(seed);
        let table = enumerate_population(&case.scenario).unwrap();
        let exact =
            mvtlab_core::mvt::observed_contrast(&table, case.contrast.0, case.contrast.1).unwrap();
        let ds = sample_dataset(&case.scenario, 40_000, seed).unwrap();
        let est = standardized_contrast(&ds, case.contrast.0, case.contrast.1)
            .unwrap()
            .value;
        assert!(
            (est - exact).abs() < 0.15,
            "{}: empirical {est} vs exact {exact}",
            case.label
        );
    }
}
