//! Reproducible dataset sampling.
//!
//! Each row draws from its own random stream, so generation is
//! order-independent and could be partitioned across workers. Discrete
//! scenarios sample the enumerated joint law directly (one categorical draw
//! over the population atoms plus the outcome noise), which makes the
//! sampled process agree with the enumeration oracle by construction; the
//! realized outcome is copied from the row's potential-outcome vector, so
//! consistency is exact rather than approximate.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::enumerate::{compose_latent, reflective_indicator, ViolationPlan};
use super::{coarsen_value, measure_row, Dataset, DgpError, Potentials, Provenance};
use crate::rng;
use crate::scenario::{
    ErrorLaw, IndicatorLaw, LatentLaw, OutcomeModel, Scenario, Structure,
};

/// Samples `n` rows; discrete scenarios carry per-unit potential-outcome
/// columns. Reproducible given `(scenario, n, seed)`.
pub fn sample_dataset(scenario: &Scenario, n: usize, seed: u64) -> Result<Dataset, DgpError> {
    sample_impl(scenario, n, seed, true)
}

/// Samples `n` rows without potential-outcome columns. Identical to
/// [`sample_dataset`] in every shared column (same draws, same arithmetic).
pub fn sample_observed(scenario: &Scenario, n: usize, seed: u64) -> Result<Dataset, DgpError> {
    sample_impl(scenario, n, seed, false)
}

fn sample_impl(
    scenario: &Scenario,
    n: usize,
    seed: u64,
    with_potentials: bool,
) -> Result<Dataset, DgpError> {
    if matches!(scenario.structure(), Structure::TwoWave(_)) {
        return Err(DgpError::UnsupportedKind(
            "two-wave designs are sampled by the longitudinal module",
        ));
    }
    if scenario.is_discrete() {
        sample_discrete(scenario, n, seed, with_potentials)
    } else {
        sample_continuous(scenario, n, seed)
    }
}

fn sample_discrete(
    scenario: &Scenario,
    n: usize,
    seed: u64,
    with_potentials: bool,
) -> Result<Dataset, DgpError> {
    let table = super::enumerate_population(scenario)?;
    let atoms = table.atoms();
    let total = table.total_probability();
    let mut cum = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for atom in atoms {
        acc += atom.probability / total;
        cum.push(acc);
    }
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }

    let n_ind = scenario.n_indicators();
    let n_versions = table.n_versions();
    let noise_sd = scenario.outcome().noise_sd();

    let mut stratum = Vec::with_capacity(n);
    let mut version = Vec::with_capacity(n);
    let mut indicators = vec![Vec::with_capacity(n); n_ind];
    let mut exposure = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut po_columns = if with_potentials {
        vec![Vec::with_capacity(n); n_versions]
    } else {
        Vec::new()
    };

    let base = rng::master(seed);
    for row in 0..n {
        let mut r = rng::substream(&base, row as u64);
        let u: f64 = r.gen();
        let idx = cum.partition_point(|&c| c < u).min(atoms.len() - 1);
        let atom = &atoms[idx];
        let z_y: f64 = r.sample(StandardNormal);
        let noise = noise_sd * z_y;

        stratum.push(atom.stratum);
        version.push(atom.version);
        for (i, col) in indicators.iter_mut().enumerate() {
            col.push(atom.indicators[i]);
        }
        exposure.push(table.exposure_values()[atom.a_index as usize]);
        if with_potentials {
            for (k, col) in po_columns.iter_mut().enumerate() {
                col.push(atom.potential_means[k] + noise);
            }
            outcome.push(po_columns[atom.version as usize][row]);
        } else {
            outcome.push(atom.potential_means[atom.version as usize] + noise);
        }
    }

    Ok(Dataset {
        n_strata: scenario.n_strata(),
        stratum,
        version: Some(version),
        latent: None,
        latents: None,
        indicators,
        exposure,
        outcome,
        potentials: with_potentials.then(|| Potentials {
            version_values: table.version_values().to_vec(),
            columns: po_columns,
        }),
        provenance: Provenance {
            seed,
            scenario_fingerprint: scenario.fingerprint(),
        },
    })
}

fn draw_categorical(r: &mut ChaCha8Rng, cum: &[f64]) -> usize {
    let u: f64 = r.gen();
    cum.partition_point(|&c| c < u).min(cum.len() - 1)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        acc += p / total;
        out.push(acc);
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn tilted_cumulative(probs: &[f64], values: &[f64], count: u32) -> Vec<f64> {
    if count == 0 {
        return cumulative(probs);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let tilted: Vec<f64> = probs
        .iter()
        .zip(values)
        .map(|(&p, &v)| p * (f64::from(count) * (v - mean)).exp())
        .collect();
    cumulative(&tilted)
}

fn draw_error(r: &mut ChaCha8Rng, law: &ErrorLaw, cum: &[f64]) -> f64 {
    match law {
        ErrorLaw::Gaussian { sd } => {
            let z: f64 = r.sample(StandardNormal);
            sd * z
        }
        ErrorLaw::Finite(grid) => grid.values[draw_categorical(r, cum)],
    }
}

fn sample_continuous(scenario: &Scenario, n: usize, seed: u64) -> Result<Dataset, DgpError> {
    let plan = ViolationPlan::new(scenario);
    let n_u = plan.n_u();
    let n_ind = scenario.n_indicators();
    let measure = scenario.measure();
    let outcome = scenario.outcome();
    let noise_sd = outcome.noise_sd();
    let stratum_cum = cumulative(scenario.stratum_probs());

    // Pre-extract structure pieces and per-distribution cumulative tables.
    enum Gen<'a> {
        Reflective {
            latent: &'a LatentLaw,
            latent_cums: Option<Vec<Vec<f64>>>,
            loadings: &'a [f64],
            errors: &'a [ErrorLaw],
            error_cums: Vec<Vec<f64>>,
            chol: Option<(Cholesky<f64, nalgebra::Dyn>, Vec<f64>)>,
        },
        Formative {
            laws: &'a [IndicatorLaw],
            grid_cums: Vec<Vec<Vec<f64>>>,
            composition: Option<(&'a [f64], &'a ErrorLaw, Vec<f64>)>,
        },
        Multidim {
            n_latents: usize,
            effects: &'a [Vec<f64>],
            errors: &'a [ErrorLaw],
            error_cums: Vec<Vec<f64>>,
        },
    }

    let finite_cum = |law: &ErrorLaw| match law {
        ErrorLaw::Finite(g) => cumulative(&g.probs),
        ErrorLaw::Gaussian { .. } => Vec::new(),
    };

    let gen = match scenario.structure() {
        Structure::Reflective {
            latent,
            loadings,
            errors,
            error_correlation,
        } => {
            let latent_cums = match latent {
                LatentLaw::Finite { probs, .. } => {
                    Some(probs.iter().map(|row| cumulative(row)).collect())
                }
                LatentLaw::Gaussian { .. } => None,
            };
            let chol = error_correlation.as_ref().map(|corr| {
                let dim = corr.len();
                let m = DMatrix::from_fn(dim, dim, |i, j| corr[i][j]);
                let sds: Vec<f64> = errors
                    .iter()
                    .map(|e| match e {
                        ErrorLaw::Gaussian { sd } => *sd,
                        ErrorLaw::Finite(_) => unreachable!("validated"),
                    })
                    .collect();
                (
                    Cholesky::new(m).expect("error correlation must be positive definite"),
                    sds,
                )
            });
            Gen::Reflective {
                latent,
                latent_cums,
                loadings,
                errors,
                error_cums: errors.iter().map(finite_cum).collect(),
                chol,
            }
        }
        Structure::Formative {
            indicators,
            composition,
        } => {
            let grid_cums = indicators
                .iter()
                .map(|law| match law {
                    IndicatorLaw::Finite { grids } => {
                        grids.iter().map(|g| cumulative(&g.probs)).collect()
                    }
                    IndicatorLaw::Gaussian { .. } => Vec::new(),
                })
                .collect();
            let composition = composition
                .as_ref()
                .map(|c| (c.loadings.as_slice(), &c.error, finite_cum(&c.error)));
            Gen::Formative {
                laws: indicators,
                grid_cums,
                composition,
            }
        }
        Structure::MultidimLatent {
            n_latents,
            effects,
            errors,
        } => Gen::Multidim {
            n_latents: *n_latents,
            effects,
            errors,
            error_cums: errors.iter().map(finite_cum).collect(),
        },
        Structure::ScalarVersions { .. } => {
            unreachable!("scalar scenarios are discrete")
        }
        Structure::TwoWave(_) => unreachable!("checked by caller"),
    };

    let indicator_causal_formative = matches!(
        (scenario.kind(), scenario.structure()),
        (
            crate::scenario::ScenarioKind::IndicatorCausalFormative,
            Structure::Formative { .. }
        )
    );

    let mut stratum = Vec::with_capacity(n);
    let mut latent_col = Vec::with_capacity(n);
    let mut latents_cols: Vec<Vec<f64>> = Vec::new();
    if let Gen::Multidim { n_latents, .. } = &gen {
        latents_cols = vec![Vec::with_capacity(n); *n_latents];
    }
    let mut indicators_cols = vec![Vec::with_capacity(n); n_ind];
    let mut exposure = Vec::with_capacity(n);
    let mut outcome_col = Vec::with_capacity(n);

    let base = rng::master(seed);
    let mut x = vec![0.0f64; n_ind];
    for row in 0..n {
        let mut r = rng::substream(&base, row as u64);
        let c = draw_categorical(&mut r, &stratum_cum);
        let mut u_mask = 0u32;
        for d in 0..n_u {
            let coin: f64 = r.gen();
            if coin < 0.5 {
                u_mask |= 1 << d;
            }
        }
        let ucount = plan.unmeasured_count(u_mask);

        let mut row_latent = f64::NAN;
        match &gen {
            Gen::Reflective {
                latent,
                latent_cums,
                loadings,
                errors,
                error_cums,
                chol,
            } => {
                let eta = match latent {
                    LatentLaw::Finite { values, probs } => {
                        let cum = match (latent_cums, ucount) {
                            (Some(cums), 0) => cums[c].clone(),
                            _ => tilted_cumulative(&probs[c], values, ucount),
                        };
                        values[draw_categorical(&mut r, &cum)]
                    }
                    LatentLaw::Gaussian { stratum_means } => {
                        let z: f64 = r.sample(StandardNormal);
                        stratum_means[c] + f64::from(ucount) + z
                    }
                };
                row_latent = eta;
                match chol {
                    Some((chol, sds)) => {
                        let z = DVector::from_fn(n_ind, |_, _| r.sample::<f64, _>(StandardNormal));
                        let correlated = chol.l() * z;
                        for i in 0..n_ind {
                            let e = sds[i] * correlated[i];
                            x[i] = reflective_indicator(
                                loadings[i],
                                eta,
                                e,
                                plan.common_shift(u_mask, i),
                            );
                        }
                    }
                    None => {
                        for i in 0..n_ind {
                            let e = draw_error(&mut r, &errors[i], &error_cums[i]);
                            x[i] = reflective_indicator(
                                loadings[i],
                                eta,
                                e,
                                plan.common_shift(u_mask, i),
                            );
                        }
                    }
                }
            }
            Gen::Formative {
                laws,
                grid_cums,
                composition,
            } => {
                for i in 0..n_ind {
                    let mut v = match &laws[i] {
                        IndicatorLaw::Finite { grids } => {
                            let gi = if grids.len() == 1 { 0 } else { c };
                            grids[gi].values[draw_categorical(&mut r, &grid_cums[i][gi])]
                        }
                        IndicatorLaw::Gaussian { means, sd } => {
                            let mi = if means.len() == 1 { 0 } else { c };
                            let z: f64 = r.sample(StandardNormal);
                            means[mi] + sd * z
                        }
                    };
                    v += plan.common_shift(u_mask, i);
                    if indicator_causal_formative {
                        v += f64::from(ucount);
                    }
                    x[i] = v;
                }
                if let Some((loadings, error, cum)) = composition {
                    let e = draw_error(&mut r, error, cum);
                    row_latent = compose_latent(loadings, &x, e, ucount);
                }
            }
            Gen::Multidim {
                n_latents,
                effects,
                errors,
                error_cums,
            } => {
                let mut etas = Vec::with_capacity(*n_latents);
                for _ in 0..*n_latents {
                    let z: f64 = r.sample(StandardNormal);
                    etas.push(f64::from(ucount) + z);
                }
                for i in 0..n_ind {
                    let mut v = 0.0;
                    for (m, &eta) in etas.iter().enumerate() {
                        v += effects[i][m] * eta;
                    }
                    v += draw_error(&mut r, &errors[i], &error_cums[i]);
                    v += plan.common_shift(u_mask, i);
                    x[i] = v;
                }
                for (m, col) in latents_cols.iter_mut().enumerate() {
                    col.push(etas[m]);
                }
                row_latent = etas[0];
            }
        }

        let raw = measure_row(&measure.form, &x);
        let a = match &measure.coarsening {
            Some(cuts) => coarsen_value(raw, cuts) as f64,
            None => raw,
        };

        let mean = match outcome {
            OutcomeModel::Latent {
                intercept,
                slope,
                stratum_effects,
                ..
            } => intercept + slope * row_latent + stratum_effects[c],
            OutcomeModel::Indicators {
                intercept,
                coefs,
                stratum_effects,
                ..
            } => {
                let mut acc = *intercept;
                for (co, xi) in coefs.iter().zip(&x) {
                    acc += co * xi;
                }
                acc + stratum_effects[c]
            }
            OutcomeModel::Latents {
                intercept,
                coefs,
                stratum_effects,
                ..
            } => {
                let mut acc = *intercept;
                for (co, col) in coefs.iter().zip(&latents_cols) {
                    acc += co * col[row];
                }
                acc + stratum_effects[c]
            }
            OutcomeModel::VersionTable { .. } => {
                unreachable!("version tables are discrete")
            }
        };
        let z_y: f64 = r.sample(StandardNormal);
        let y = mean + plan.direct_shift(&x) + plan.u_outcome_shift(u_mask, None) + noise_sd * z_y;

        stratum.push(c as u32);
        latent_col.push(row_latent);
        for (i, col) in indicators_cols.iter_mut().enumerate() {
            col.push(x[i]);
        }
        exposure.push(a);
        outcome_col.push(y);
    }

    let has_scalar_latent = latent_col.iter().any(|v| !v.is_nan());
    Ok(Dataset {
        n_strata: scenario.n_strata(),
        stratum,
        version: None,
        latent: has_scalar_latent.then_some(latent_col),
        latents: (!latents_cols.is_empty()).then_some(latents_cols),
        indicators: indicators_cols,
        exposure,
        outcome: outcome_col,
        potentials: None,
        provenance: Provenance {
            seed,
            scenario_fingerprint: scenario.fingerprint(),
        },
    })
}
