//! Oracle checks on enumeration and sampling: a hand-rolled test-side
//! enumerator for a violated reflective design, exact consistency of
//! sampled potential outcomes, enumeration-sampling agreement, and the
//! measurement-structure moments implied by the reflective equations.

use std::collections::BTreeMap;

use mvtlab_core::dgp::{enumerate_population, sample_dataset, sample_observed};
use mvtlab_core::mvt::{observed_contrast, trial_contrast, verify_derivation_chain};
use mvtlab_core::scenario::{
    build_scenario, fixtures, Grid, Scenario, ScenarioError, ScenarioKind, ScenarioParams,
    Violation,
};

/// Small structural reflective design used by the hand oracle: one stratum,
/// two latent levels, two indicators with two-point errors, exposure is the
/// indicator sum.
fn oracle_scenario(direct_magnitude: f64) -> Scenario {
    let base = build_scenario(
        ScenarioKind::StructuralReflective,
        ScenarioParams {
            version_values: Some(vec![0.0, 1.0]),
            version_probs: Some(vec![vec![0.5, 0.5]]),
            loadings: Some(vec![1.0, 0.5]),
            error_grids: Some(vec![
                Grid::new(vec![-0.5, 0.5], vec![0.5, 0.5]),
                Grid::new(vec![-0.25, 0.25], vec![0.4, 0.6]),
            ]),
            outcome_slope: Some(1.0),
            measure_form: Some("sum".into()),
            ..Default::default()
        },
    )
    .unwrap();
    if direct_magnitude == 0.0 {
        base
    } else {
        base.inject_violation(Violation::direct_indicator_effect(0, direct_magnitude))
            .unwrap()
    }
}

/// Test-side enumeration of `oracle_scenario`, written as bare loops with no
/// shared code: returns `(lhs, rhs)` for the `(a, a_star)` contrast.
fn hand_enumerate(direct: f64, a: f64, a_star: f64) -> (f64, f64) {
    let latents = [0.0f64, 1.0];
    let p_latent = [0.5f64, 0.5];
    let e0 = [(-0.5f64, 0.5f64), (0.5, 0.5)];
    let e1 = [(-0.25f64, 0.4f64), (0.25, 0.6)];

    // Joint states: (eta, x0, x1, p) with y_mean and po per latent level.
    struct State {
        p: f64,
        a: f64,
        y: f64,
        po: [f64; 2],
        eta_idx: usize,
    }
    let mut states = Vec::new();
    for (j, (&eta, &pj)) in latents.iter().zip(&p_latent).enumerate() {
        for &(v0, p0) in &e0 {
            for &(v1, p1) in &e1 {
                let x0 = 1.0 * eta + v0;
                let x1 = 0.5 * eta + v1;
                let po = [
                    latents[0] + direct * (1.0 * latents[0] + v0),
                    latents[1] + direct * (1.0 * latents[1] + v0),
                ];
                states.push(State {
                    p: pj * p0 * p1,
                    a: x0 + x1,
                    y: po[j],
                    po,
                    eta_idx: j,
                });
            }
        }
    }

    let close = |x: f64, y: f64| (x - y).abs() < 1e-9;

    // lhs: E[Y | A=a] - E[Y | A=a*] (single stratum).
    let cell = |target: f64| {
        let mut mass = 0.0;
        let mut sum = 0.0;
        for s in &states {
            if close(s.a, target) {
                mass += s.p;
                sum += s.p * s.y;
            }
        }
        (mass, sum / mass)
    };
    let (_, mean_a) = cell(a);
    let (_, mean_star) = cell(a_star);
    let lhs = mean_a - mean_star;

    // rhs: sum_k E[Y_k] { P(k|a) - P(k|a*) }.
    let po_mean: Vec<f64> = (0..2)
        .map(|k| states.iter().map(|s| s.p * s.po[k]).sum::<f64>())
        .collect();
    let mut rhs = 0.0;
    for k in 0..2 {
        let p_given = |target: f64| {
            let mut mass = 0.0;
            let mut hit = 0.0;
            for s in &states {
                if close(s.a, target) {
                    mass += s.p;
                    if s.eta_idx == k {
                        hit += s.p;
                    }
                }
            }
            hit / mass
        };
        rhs += po_mean[k] * (p_given(a) - p_given(a_star));
    }
    (lhs, rhs)
}

#[test]
fn enumeration_matches_the_hand_oracle_clean_and_violated() {
    for direct in [0.0, 0.3, -0.7] {
        let scenario = oracle_scenario(direct);
        let table = enumerate_population(&scenario).unwrap();
        // Contrast the extreme exposure sums: 1.75 vs -0.75.
        let (a, a_star) = (1.75, -0.75);
        let lhs = observed_contrast(&table, a, a_star).unwrap();
        let rhs = trial_contrast(&table, a, a_star).unwrap();
        let (want_lhs, want_rhs) = hand_enumerate(direct, a, a_star);
        assert!(
            (lhs - want_lhs).abs() < 1e-12,
            "direct={direct}: lhs {lhs} vs oracle {want_lhs}"
        );
        assert!(
            (rhs - want_rhs).abs() < 1e-12,
            "direct={direct}: rhs {rhs} vs oracle {want_rhs}"
        );
        if direct == 0.0 {
            assert!((lhs - rhs).abs() < 1e-12);
        } else {
            assert!((lhs - rhs).abs() > 1e-6, "direct edge left no gap");
            let chain = verify_derivation_chain(&table, a, a_star).unwrap();
            let step = chain.first_break(1e-10).unwrap();
            assert_eq!(step.index, 1, "break must sit at the independence step");
        }
    }
}

#[test]
fn zero_magnitude_direct_edge_changes_nothing() {
    let clean = oracle_scenario(0.0);
    let zero = clean
        .inject_violation(Violation::direct_indicator_effect(0, 0.0))
        .unwrap();
    let a = enumerate_population(&clean).unwrap();
    let b = enumerate_population(&zero).unwrap();
    let rows_a = a.rows();
    let rows_b = b.rows();
    assert_eq!(rows_a.len(), rows_b.len());
    for (ra, rb) in rows_a.iter().zip(&rows_b) {
        assert_eq!(ra.stratum, rb.stratum);
        assert_eq!(ra.version, rb.version);
        assert_eq!(ra.exposure, rb.exposure);
        assert!((ra.probability - rb.probability).abs() < 1e-15);
    }
    for (x, y) in a
        .atoms()
        .iter()
        .flat_map(|at| at.potential_means.iter())
        .zip(b.atoms().iter().flat_map(|at| at.potential_means.iter()))
    {
        assert_eq!(x, y);
    }
}

#[test]
fn violation_injection_is_order_invariant() {
    let base = oracle_scenario(0.0);
    let v1 = Violation::direct_indicator_effect(0, 0.3);
    let v2 = Violation::common_cause(vec![1], 0.5);
    let ab = base
        .inject_violation(v1.clone())
        .unwrap()
        .inject_violation(v2.clone())
        .unwrap();
    let ba = base
        .inject_violation(v2)
        .unwrap()
        .inject_violation(v1)
        .unwrap();
    assert_eq!(ab, ba);
    assert_eq!(
        enumerate_population(&ab).unwrap(),
        enumerate_population(&ba).unwrap()
    );
}

#[test]
fn unmeasured_confounder_gap_matches_hand_integration() {
    // Three-point fixture plus a version-level confounder, enumerated by
    // hand with U integrated out.
    let scenario = fixtures::three_point_versions()
        .inject_violation(Violation::unmeasured_confounder(0.8))
        .unwrap();
    let table = enumerate_population(&scenario).unwrap();
    let lhs = observed_contrast(&table, 1.0, 0.0).unwrap();
    let rhs = trial_contrast(&table, 1.0, 0.0).unwrap();

    // Hand enumeration. U ~ Bernoulli(1/2); P(k|u=1) tilts by exp(v_k - 2);
    // Y mean is k + 0.8 u; A = 1 for k in {1,2}.
    let values = [1.0f64, 2.0, 3.0];
    let probs = [0.2f64, 0.3, 0.5];
    let tilted: Vec<f64> = {
        let raw: Vec<f64> = values
            .iter()
            .zip(&probs)
            .map(|(&v, &p)| p * (v - 2.0).exp())
            .collect();
        let t: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / t).collect()
    };
    let mut states = Vec::new();
    for (u, row) in [(0.0, probs.to_vec()), (1.0, tilted)] {
        for k in 0..3 {
            states.push((0.5 * row[k], k, u, values[k] + 0.8 * u));
        }
    }
    let cell = |a: f64| {
        let sel = |k: usize| (a == 1.0 && k < 2) || (a == 0.0 && k == 2);
        let mass: f64 = states.iter().filter(|s| sel(s.1)).map(|s| s.0).sum();
        let sum: f64 = states.iter().filter(|s| sel(s.1)).map(|s| s.0 * s.3).sum();
        (mass, sum / mass)
    };
    let want_lhs = cell(1.0).1 - cell(0.0).1;
    // E[Y_k] integrates U out marginally: k + 0.8 * 0.5.
    let po: Vec<f64> = values.iter().map(|v| v + 0.4).collect();
    let p_k_given = |a: f64| -> Vec<f64> {
        let sel = |k: usize| (a == 1.0 && k < 2) || (a == 0.0 && k == 2);
        let mass: f64 = states.iter().filter(|s| sel(s.1)).map(|s| s.0).sum();
        (0..3)
            .map(|k| {
                states
                    .iter()
                    .filter(|s| s.1 == k && sel(s.1))
                    .map(|s| s.0)
                    .sum::<f64>()
                    / mass
            })
            .collect()
    };
    let p1 = p_k_given(1.0);
    let p0 = p_k_given(0.0);
    let want_rhs: f64 = (0..3).map(|k| po[k] * (p1[k] - p0[k])).sum();

    assert!((lhs - want_lhs).abs() < 1e-12, "lhs {lhs} vs {want_lhs}");
    assert!((rhs - want_rhs).abs() < 1e-12, "rhs {rhs} vs {want_rhs}");
    assert!((lhs - rhs).abs() > 1e-3, "confounding left no gap");
}

#[test]
fn three_point_table_transcribes_the_parameters() {
    let table = enumerate_population(&fixtures::three_point_versions()).unwrap();
    let rows = table.rows();
    assert_eq!(rows.len(), 3);
    let probs: Vec<f64> = rows.iter().map(|r| r.probability).collect();
    assert_eq!(probs, vec![0.2, 0.3, 0.5]);
}

#[test]
fn degenerate_version_distribution_gives_single_row_per_stratum() {
    let scenario = build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            stratum_probs: Some(vec![0.5, 0.5]),
            version_values: Some(vec![0.0, 1.0]),
            version_probs: Some(vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
            outcome_version_means: Some(vec![vec![1.0, 2.0], vec![3.0, 4.0]]),
            measure_form: Some("stochastic".into()),
            measure_a_values: Some(vec![0.0, 1.0]),
            measure_probs: Some(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            ..Default::default()
        },
    )
    .unwrap();
    let table = enumerate_population(&scenario).unwrap();
    let rows = table.rows();
    // One version per stratum, split over two stochastic exposure values.
    assert!(rows.iter().all(|r| r.version == 0));
    assert_eq!(rows.len(), 4);
}

#[test]
fn continuous_scenarios_refuse_enumeration() {
    let err = enumerate_population(&fixtures::standardized_reflective()).unwrap_err();
    assert!(matches!(
        err,
        mvtlab_core::DgpError::ContinuousScenarioNotEnumerable
    ));
}

#[test]
fn sampled_rows_satisfy_consistency_exactly() {
    let scenario = fixtures::social_integration_like();
    let ds = sample_dataset(&scenario, 5_000, 99).unwrap();
    let versions = ds.version.as_ref().unwrap();
    let po = ds.potentials.as_ref().unwrap();
    for row in 0..ds.len() {
        let k = versions[row] as usize;
        assert_eq!(
            ds.outcome[row], po.columns[k][row],
            "consistency must hold bit for bit at row {row}"
        );
    }
    // The exposure is the indicator sum, exactly.
    for row in 0..ds.len() {
        let sum: f64 = ds.indicators.iter().map(|col| col[row]).sum();
        assert_eq!(ds.exposure[row], sum);
    }
}

#[test]
fn same_seed_same_dataset() {
    let scenario = fixtures::social_integration_like();
    let a = sample_dataset(&scenario, 500, 4).unwrap();
    let b = sample_dataset(&scenario, 500, 4).unwrap();
    assert_eq!(a, b);
    let c = sample_dataset(&scenario, 500, 5).unwrap();
    assert_ne!(a, c);
}

#[test]
fn single_row_sample_is_valid() {
    let scenario = fixtures::three_point_versions();
    let ds = sample_dataset(&scenario, 1, 0).unwrap();
    assert_eq!(ds.len(), 1);
    let po = ds.potentials.as_ref().unwrap();
    let k = ds.version.as_ref().unwrap()[0] as usize;
    assert_eq!(ds.outcome[0], po.columns[k][0]);
}

#[test]
fn observed_sampling_drops_potentials_but_matches_otherwise() {
    let scenario = fixtures::social_integration_like();
    let full = sample_dataset(&scenario, 2_000, 31).unwrap();
    let lean = sample_observed(&scenario, 2_000, 31).unwrap();
    assert!(lean.potentials.is_none());
    assert_eq!(full.outcome, lean.outcome);
    assert_eq!(full.exposure, lean.exposure);
    assert_eq!(full.indicators, lean.indicators);
    assert_eq!(full.stratum, lean.stratum);
}

#[test]
fn sampling_frequencies_match_enumeration() {
    // Every (stratum, version, exposure) cell within four binomial standard
    // errors of its exact probability at n = 100k.
    let scenario = fixtures::empirical_convergence();
    let table = enumerate_population(&scenario).unwrap();
    let n = 100_000usize;
    let ds = sample_dataset(&scenario, n, 12345).unwrap();
    let versions = ds.version.as_ref().unwrap();

    let mut counts: BTreeMap<(u32, u32, u64), f64> = BTreeMap::new();
    for row in 0..n {
        *counts
            .entry((
                ds.stratum[row],
                versions[row],
                ds.exposure[row].to_bits(),
            ))
            .or_default() += 1.0;
    }
    for row in table.rows() {
        let key = (
            row.stratum as u32,
            row.version as u32,
            row.exposure.to_bits(),
        );
        let observed = counts.get(&key).copied().unwrap_or(0.0) / n as f64;
        let p = row.probability;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (observed - p).abs() <= 4.0 * se,
            "cell {key:?}: observed {observed} vs exact {p} (se {se})"
        );
    }
}

#[test]
fn reflective_sampling_reproduces_implied_correlations() {
    // Under the standardized reflective equations the indicator
    // correlations are the loading products.
    let scenario = fixtures::standardized_reflective();
    let loadings = [0.9f64, 0.8, 0.7, 0.6];
    let n = 100_000usize;
    let ds = sample_dataset(&scenario, n, 777).unwrap();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let xi = &ds.indicators[i];
            let xj = &ds.indicators[j];
            let mi = xi.iter().sum::<f64>() / n as f64;
            let mj = xj.iter().sum::<f64>() / n as f64;
            let mut sij = 0.0;
            let mut sii = 0.0;
            let mut sjj = 0.0;
            for r in 0..n {
                sij += (xi[r] - mi) * (xj[r] - mj);
                sii += (xi[r] - mi) * (xi[r] - mi);
                sjj += (xj[r] - mj) * (xj[r] - mj);
            }
            let corr = sij / (sii * sjj).sqrt();
            let want = loadings[i] * loadings[j];
            assert!(
                (corr - want).abs() < 0.01,
                "corr({i},{j}) = {corr}, implied {want}"
            );
        }
    }
}

#[test]
fn standardized_reflective_indicators_have_unit_variance() {
    let scenario = fixtures::standardized_reflective();
    let n = 100_000usize;
    let ds = sample_dataset(&scenario, n, 321).unwrap();
    for col in &ds.indicators {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "indicator variance {var}");
    }
}

#[test]
fn zero_loading_rejected_for_structural_reflective() {
    let err = build_scenario(
        ScenarioKind::StructuralReflective,
        ScenarioParams {
            loadings: Some(vec![0.9, 0.0, 0.7, 0.6]),
            error_sds: Some(vec![1.0; 4]),
            outcome_slope: Some(0.4),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert_eq!(
        err,
        ScenarioError::ZeroLoadingInStructuralReflective { index: 1 }
    );
}

#[test]
fn scenario_construction_is_pure() {
    let a = fixtures::social_integration_like();
    let b = fixtures::social_integration_like();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(a.fingerprint(), b.fingerprint());
}

#[test]
fn social_integration_exposure_spans_the_index_range() {
    let scenario = fixtures::social_integration_like();
    let table = enumerate_population(&scenario).unwrap();
    let want: Vec<f64> = (0..=12).map(f64::from).collect();
    assert_eq!(table.exposure_values(), want.as_slice());
}

#[test]
fn invalid_probability_vectors_are_rejected() {
    let err = build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            version_values: Some(vec![1.0, 2.0]),
            version_probs: Some(vec![vec![0.7, 0.7]]),
            outcome_version_means: Some(vec![vec![0.0], vec![1.0]]),
            measure_form: Some("custom_table".into()),
            measure_custom_map: Some(vec![0.0, 1.0]),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, ScenarioError::InvalidProbability(_)));
}

#[test]
fn scenario_without_common_exposure_support_is_rejected() {
    // Stratum 1 never reaches exposure 1, so no contrast is verifiable.
    let err = build_scenario(
        ScenarioKind::CoarsenedVersions,
        ScenarioParams {
            stratum_probs: Some(vec![0.5, 0.5]),
            version_values: Some(vec![0.0, 1.0]),
            version_probs: Some(vec![vec![0.5, 0.5], vec![1.0, 0.0]]),
            outcome_version_means: Some(vec![vec![0.0, 0.0], vec![1.0, 1.0]]),
            measure_form: Some("custom_table".into()),
            measure_custom_map: Some(vec![0.0, 1.0]),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(
        err,
        ScenarioError::InsufficientExposureSupport { stratum: 1 }
    ));
}
