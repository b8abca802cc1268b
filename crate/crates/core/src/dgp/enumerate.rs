//! Exact enumeration of discrete scenarios.
//!
//! The walker visits every reachable joint state of stratum, violation
//! variables, version, indicator values, and exposure, and records for each
//! state the outcome mean and the full potential-outcome vector. Setting the
//! version variable of a state to `k'` follows the diagram:
//!
//! - scalar versions: the outcome table row of `k'` applies;
//! - structural reflective: the latent becomes `k'`, the indicators are
//!   rebuilt from the state's own error draws (and common-cause shifts);
//! - structural formative: the composed latent becomes `k'`, the exogenous
//!   indicators stay at their realized values;
//! - indicator-causal designs: the indicator vector itself becomes the
//!   version state.
//!
//! An augmented version space (joint with the indicator vector or with the
//! common-cause variables) re-indexes the potential outcomes accordingly.

use std::collections::HashMap;

use super::{coarsen_value, f64_key, measure_row, Atom, DgpError, PopulationTable, SupportTable};
use crate::scenario::{
    Augmentation, ErrorLaw, Grid, IndicatorLaw, LatentLaw, MeasureForm, OutcomeModel, Scenario,
    ScenarioKind, Structure, Violation, ViolationKind,
};

const MAX_MICROS: usize = 500_000;
const MAX_FINAL_VERSIONS: usize = 65_536;

/// Bookkeeping for injected violations.
pub(crate) struct ViolationPlan<'a> {
    pub u_violations: Vec<&'a Violation>,
    pub direct: Vec<&'a Violation>,
}

impl<'a> ViolationPlan<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let u_violations = scenario
            .violations()
            .iter()
            .filter(|v| v.has_u())
            .collect::<Vec<_>>();
        let direct = scenario
            .violations()
            .iter()
            .filter(|v| v.kind == ViolationKind::DirectIndicatorEffect)
            .collect::<Vec<_>>();
        ViolationPlan {
            u_violations,
            direct,
        }
    }

    pub fn n_u(&self) -> usize {
        self.u_violations.len()
    }

    /// Active unmeasured-confounder digits in the mask.
    pub fn unmeasured_count(&self, mask: u32) -> u32 {
        self.u_violations
            .iter()
            .enumerate()
            .filter(|(d, v)| {
                v.kind == ViolationKind::UnmeasuredConfounder && (mask >> d) & 1 == 1
            })
            .count() as u32
    }

    /// Additive shift to indicator `i` from active common-cause digits.
    pub fn common_shift(&self, mask: u32, indicator: usize) -> f64 {
        let mut shift = 0.0;
        for (d, v) in self.u_violations.iter().enumerate() {
            if v.kind == ViolationKind::CommonCauseU
                && (mask >> d) & 1 == 1
                && v.targets.contains(&indicator)
            {
                shift += 1.0;
            }
        }
        shift
    }

    /// Same shift with the common-cause digits overridden (compacted bits in
    /// canonical order), as needed when the version space includes `U`.
    pub fn common_shift_override(&self, override_digits: u32, indicator: usize) -> f64 {
        let mut shift = 0.0;
        let mut pos = 0u32;
        for v in &self.u_violations {
            if v.kind == ViolationKind::CommonCauseU {
                if (override_digits >> pos) & 1 == 1 && v.targets.contains(&indicator) {
                    shift += 1.0;
                }
                pos += 1;
            }
        }
        shift
    }

    /// Compacted common-cause digits of a full mask.
    pub fn common_digits(&self, mask: u32) -> u32 {
        let mut out = 0u32;
        let mut pos = 0u32;
        for (d, v) in self.u_violations.iter().enumerate() {
            if v.kind == ViolationKind::CommonCauseU {
                out |= ((mask >> d) & 1) << pos;
                pos += 1;
            }
        }
        out
    }

    /// Outcome shift from the violation-owned variables. Common-cause digits
    /// can be overridden by an augmented version state; unmeasured-confounder
    /// digits always come from the realized state.
    pub fn u_outcome_shift(&self, mask: u32, common_override: Option<u32>) -> f64 {
        let mut shift = 0.0;
        let mut pos = 0u32;
        for (d, v) in self.u_violations.iter().enumerate() {
            let digit = match (v.kind, common_override) {
                (ViolationKind::CommonCauseU, Some(ov)) => (ov >> pos) & 1,
                _ => (mask >> d) & 1,
            };
            if v.kind == ViolationKind::CommonCauseU {
                pos += 1;
            }
            shift += v.magnitude * f64::from(digit);
        }
        shift
    }

    /// Direct indicator-to-outcome shift evaluated on an indicator vector.
    pub fn direct_shift(&self, x: &[f64]) -> f64 {
        let mut shift = 0.0;
        for v in &self.direct {
            for &t in &v.targets {
                shift += v.magnitude * x[t];
            }
        }
        shift
    }
}

/// Tilts a finite law toward larger values, once per active confounder unit.
fn tilt(probs: &[f64], values: &[f64], count: u32) -> Vec<f64> {
    if count == 0 {
        return probs.to_vec();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut out: Vec<f64> = probs
        .iter()
        .zip(values)
        .map(|(&p, &v)| p * (f64::from(count) * (v - mean)).exp())
        .collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// `loading * latent + error + shift`, the reflective measurement equation.
/// Kept as one function so realized and counterfactual indicators share the
/// exact arithmetic.
pub(crate) fn reflective_indicator(loading: f64, latent: f64, error: f64, shift: f64) -> f64 {
    loading * latent + error + shift
}

/// `sum_i loadings[i] * x[i] + error + confounder_units`, the formative
/// composition equation.
pub(crate) fn compose_latent(loadings: &[f64], x: &[f64], error: f64, confounder_units: u32) -> f64 {
    let mut acc = 0.0;
    for (l, xi) in loadings.iter().zip(x) {
        acc += l * xi;
    }
    acc + error + f64::from(confounder_units)
}

fn error_support(law: &ErrorLaw) -> Result<&Grid, DgpError> {
    match law {
        ErrorLaw::Finite(g) => Ok(g),
        ErrorLaw::Gaussian { .. } => Err(DgpError::ContinuousScenarioNotEnumerable),
    }
}

fn indicator_grid<'a>(law: &'a IndicatorLaw, stratum: usize) -> Result<&'a Grid, DgpError> {
    match law {
        IndicatorLaw::Finite { grids } => {
            let idx = if grids.len() == 1 { 0 } else { stratum };
            Ok(&grids[idx])
        }
        IndicatorLaw::Gaussian { .. } => Err(DgpError::ContinuousScenarioNotEnumerable),
    }
}

fn product_count(lens: &[usize]) -> usize {
    lens.iter().product::<usize>().max(1)
}

/// Iterates the mixed-radix product of `lens`, calling `f` with each index
/// tuple in lexicographic order.
fn for_each_combo(lens: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; lens.len()];
    loop {
        f(&idx);
        let mut pos = lens.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < lens[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

struct Micro {
    stratum: usize,
    u_mask: u32,
    p: f64,
    /// Base-version index.
    base: usize,
    x: Vec<f64>,
    /// Reflective measurement errors, kept for counterfactual rebuilds.
    errors: Vec<f64>,
    a_raw: f64,
}

enum BaseStates {
    /// Fixed labels known up front (scalar versions, finite latent levels).
    Values(Vec<f64>),
    /// Interned composed-latent values, first-encounter order.
    Composed(Vec<f64>),
    /// Interned joint indicator states, first-encounter order.
    XStates(Vec<Vec<f64>>),
}

struct Walk {
    micros: Vec<Micro>,
    base: BaseStates,
}

fn collect_micros(s: &Scenario) -> Result<Walk, DgpError> {
    if !s.is_discrete() {
        return Err(DgpError::ContinuousScenarioNotEnumerable);
    }
    let plan = ViolationPlan::new(s);
    let n_u = plan.n_u();
    let stratum_probs = s.stratum_probs();
    let mut micros: Vec<Micro> = Vec::new();
    let mut composed_intern: HashMap<u64, usize> = HashMap::new();
    let mut composed_values: Vec<f64> = Vec::new();
    let mut x_intern: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut x_states: Vec<Vec<f64>> = Vec::new();

    let push = |m: Micro, micros: &mut Vec<Micro>| -> Result<(), DgpError> {
        if micros.len() >= MAX_MICROS {
            return Err(DgpError::StateSpaceTooLarge(format!(
                "more than {MAX_MICROS} joint states"
            )));
        }
        micros.push(m);
        Ok(())
    };

    for (c, &pc) in stratum_probs.iter().enumerate() {
        if pc <= 0.0 {
            continue;
        }
        for u_mask in 0..(1u32 << n_u) {
            let pu = pc * 0.5f64.powi(n_u as i32);
            let ucount = plan.unmeasured_count(u_mask);
            match s.structure() {
                Structure::ScalarVersions { values, probs } => {
                    let row = tilt(&probs[c], values, ucount);
                    for (k, &pk) in row.iter().enumerate() {
                        if pk <= 0.0 {
                            continue;
                        }
                        let p = pu * pk;
                        match &s.measure().form {
                            MeasureForm::CustomTable { map } => {
                                push(
                                    Micro {
                                        stratum: c,
                                        u_mask,
                                        p,
                                        base: k,
                                        x: Vec::new(),
                                        errors: Vec::new(),
                                        a_raw: map[k],
                                    },
                                    &mut micros,
                                )?;
                            }
                            MeasureForm::Stochastic { a_values, probs } => {
                                for (j, &pa) in probs[k].iter().enumerate() {
                                    if pa <= 0.0 {
                                        continue;
                                    }
                                    push(
                                        Micro {
                                            stratum: c,
                                            u_mask,
                                            p: p * pa,
                                            base: k,
                                            x: Vec::new(),
                                            errors: Vec::new(),
                                            a_raw: a_values[j],
                                        },
                                        &mut micros,
                                    )?;
                                }
                            }
                            _ => {
                                return Err(DgpError::MeasureNotApplicable(
                                    "scalar versions need custom_table or stochastic measures",
                                ))
                            }
                        }
                    }
                }
                Structure::Reflective {
                    latent,
                    loadings,
                    errors,
                    ..
                } => {
                    let (lat_values, lat_probs) = match latent {
                        LatentLaw::Finite { values, probs } => (values, &probs[c]),
                        LatentLaw::Gaussian { .. } => {
                            return Err(DgpError::ContinuousScenarioNotEnumerable)
                        }
                    };
                    let row = tilt(lat_probs, lat_values, ucount);
                    let grids: Vec<&Grid> = errors
                        .iter()
                        .map(error_support)
                        .collect::<Result<_, _>>()?;
                    let lens: Vec<usize> = grids.iter().map(|g| g.values.len()).collect();
                    if product_count(&lens) > MAX_MICROS {
                        return Err(DgpError::StateSpaceTooLarge(
                            "indicator error grids".into(),
                        ));
                    }
                    let indicator_causal = s.kind() == ScenarioKind::IndicatorCausalReflective;
                    for (j, &pj) in row.iter().enumerate() {
                        if pj <= 0.0 {
                            continue;
                        }
                        let latent_value = lat_values[j];
                        let mut err_out = Ok(());
                        for_each_combo(&lens, |combo| {
                            if err_out.is_err() {
                                return;
                            }
                            let mut pe = pu * pj;
                            let mut e = Vec::with_capacity(lens.len());
                            let mut x = Vec::with_capacity(lens.len());
                            for (i, &gi) in combo.iter().enumerate() {
                                pe *= grids[i].probs[gi];
                                let err = grids[i].values[gi];
                                e.push(err);
                                x.push(reflective_indicator(
                                    loadings[i],
                                    latent_value,
                                    err,
                                    plan.common_shift(u_mask, i),
                                ));
                            }
                            if pe <= 0.0 {
                                return;
                            }
                            let a_raw = measure_row(&s.measure().form, &x);
                            let base = if indicator_causal {
                                intern_x(&mut x_intern, &mut x_states, &x)
                            } else {
                                j
                            };
                            err_out = push(
                                Micro {
                                    stratum: c,
                                    u_mask,
                                    p: pe,
                                    base,
                                    x,
                                    errors: e,
                                    a_raw,
                                },
                                &mut micros,
                            );
                        });
                        err_out?;
                    }
                }
                Structure::Formative {
                    indicators,
                    composition,
                } => {
                    let grids: Vec<&Grid> = indicators
                        .iter()
                        .map(|law| indicator_grid(law, c))
                        .collect::<Result<_, _>>()?;
                    let mut lens: Vec<usize> = grids.iter().map(|g| g.values.len()).collect();
                    let comp_grid = match composition {
                        Some(comp) => Some(error_support(&comp.error)?),
                        None => None,
                    };
                    if let Some(g) = comp_grid {
                        lens.push(g.values.len());
                    }
                    if product_count(&lens) > MAX_MICROS {
                        return Err(DgpError::StateSpaceTooLarge("indicator grids".into()));
                    }
                    let n_ind = grids.len();
                    let mut err_out = Ok(());
                    for_each_combo(&lens, |combo| {
                        if err_out.is_err() {
                            return;
                        }
                        let mut p = pu;
                        let mut x = Vec::with_capacity(n_ind);
                        for i in 0..n_ind {
                            p *= grids[i].probs[combo[i]];
                            let mut v = grids[i].values[combo[i]]
                                + plan.common_shift(u_mask, i);
                            if composition.is_none() {
                                // Indicator-causal: a version-level confounder
                                // acts on the indicator set itself.
                                v += f64::from(ucount);
                            }
                            x.push(v);
                        }
                        let comp_err = comp_grid.map(|g| {
                            p *= g.probs[combo[n_ind]];
                            g.values[combo[n_ind]]
                        });
                        if p <= 0.0 {
                            return;
                        }
                        let base = match composition {
                            Some(comp) => {
                                let eta = compose_latent(
                                    &comp.loadings,
                                    &x,
                                    comp_err.unwrap_or(0.0),
                                    ucount,
                                );
                                intern_value(&mut composed_intern, &mut composed_values, eta)
                            }
                            None => intern_x(&mut x_intern, &mut x_states, &x),
                        };
                        let a_raw = measure_row(&s.measure().form, &x);
                        err_out = push(
                            Micro {
                                stratum: c,
                                u_mask,
                                p,
                                base,
                                x,
                                errors: Vec::new(),
                                a_raw,
                            },
                            &mut micros,
                        );
                    });
                    err_out?;
                }
                Structure::MultidimLatent { .. } | Structure::TwoWave(_) => {
                    return Err(DgpError::ContinuousScenarioNotEnumerable)
                }
            }
        }
    }

    let base = match s.structure() {
        Structure::ScalarVersions { values, .. } => BaseStates::Values(values.clone()),
        Structure::Reflective { latent, .. } => {
            if s.kind() == ScenarioKind::IndicatorCausalReflective {
                BaseStates::XStates(x_states)
            } else {
                match latent {
                    LatentLaw::Finite { values, .. } => BaseStates::Values(values.clone()),
                    LatentLaw::Gaussian { .. } => unreachable!("checked discrete"),
                }
            }
        }
        Structure::Formative { composition, .. } => {
            if composition.is_some() {
                BaseStates::Composed(composed_values)
            } else {
                BaseStates::XStates(x_states)
            }
        }
        _ => unreachable!("checked discrete"),
    };

    Ok(Walk { micros, base })
}

fn intern_value(map: &mut HashMap<u64, usize>, values: &mut Vec<f64>, v: f64) -> usize {
    let key = f64_key(v);
    if let Some(&idx) = map.get(&key) {
        return idx;
    }
    let idx = values.len();
    values.push(v + 0.0);
    map.insert(key, idx);
    idx
}

fn intern_x(map: &mut HashMap<Vec<u64>, usize>, states: &mut Vec<Vec<f64>>, x: &[f64]) -> usize {
    let key: Vec<u64> = x.iter().map(|&v| f64_key(v)).collect();
    if let Some(&idx) = map.get(&key) {
        return idx;
    }
    let idx = states.len();
    states.push(x.to_vec());
    map.insert(key, idx);
    idx
}

/// One version of the (possibly augmented) version space, with everything a
/// counterfactual evaluation needs.
struct VersionState {
    base: usize,
    /// Value the causal latent is set to (scalar value, latent level, or
    /// composed latent).
    latent_value: f64,
    /// Indicator vector the version fixes, when the version space includes
    /// the indicators.
    x: Option<Vec<f64>>,
    /// Common-cause digits the version fixes, when the version space
    /// includes `U`.
    common_override: Option<u32>,
    label: f64,
}

/// Exact joint law of a discrete scenario.
pub fn enumerate_population(scenario: &Scenario) -> Result<PopulationTable, DgpError> {
    if matches!(scenario.structure(), Structure::TwoWave(_)) {
        return Err(DgpError::UnsupportedKind(
            "two-wave designs are sampled by the longitudinal module",
        ));
    }
    let walk = collect_micros(scenario)?;
    let plan = ViolationPlan::new(scenario);
    let measure = scenario.measure();

    // Assemble the (possibly augmented) version space in first-encounter
    // order over the canonical walk.
    let base_label = |b: usize| -> f64 {
        match &walk.base {
            BaseStates::Values(v) | BaseStates::Composed(v) => v[b],
            BaseStates::XStates(xs) => measure_row(&measure.form, &xs[b]),
        }
    };
    let base_latent = |b: usize| -> f64 {
        match &walk.base {
            BaseStates::Values(v) | BaseStates::Composed(v) => v[b],
            BaseStates::XStates(_) => 0.0,
        }
    };
    let base_x = |b: usize| -> Option<Vec<f64>> {
        match &walk.base {
            BaseStates::XStates(xs) => Some(xs[b].clone()),
            _ => None,
        }
    };

    let mut states: Vec<VersionState> = Vec::new();
    let mut final_of: Vec<usize> = Vec::with_capacity(walk.micros.len());
    match scenario.augmentation() {
        Augmentation::None => {
            let n_base = match &walk.base {
                BaseStates::Values(v) | BaseStates::Composed(v) => v.len(),
                BaseStates::XStates(xs) => xs.len(),
            };
            for b in 0..n_base {
                states.push(VersionState {
                    base: b,
                    latent_value: base_latent(b),
                    x: base_x(b),
                    common_override: None,
                    label: base_label(b),
                });
            }
            for m in &walk.micros {
                final_of.push(m.base);
            }
        }
        Augmentation::IncludeIndicators => {
            let mut intern: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
            for m in &walk.micros {
                let key = (m.base, m.x.iter().map(|&v| f64_key(v)).collect::<Vec<_>>());
                let idx = *intern.entry(key).or_insert_with(|| {
                    states.push(VersionState {
                        base: m.base,
                        latent_value: base_latent(m.base),
                        x: Some(m.x.clone()),
                        common_override: None,
                        label: base_label(m.base),
                    });
                    states.len() - 1
                });
                final_of.push(idx);
            }
        }
        Augmentation::IncludeCommonCause => {
            let mut intern: HashMap<(usize, u32), usize> = HashMap::new();
            for m in &walk.micros {
                let digits = plan.common_digits(m.u_mask);
                let idx = *intern.entry((m.base, digits)).or_insert_with(|| {
                    states.push(VersionState {
                        base: m.base,
                        latent_value: base_latent(m.base),
                        x: base_x(m.base),
                        common_override: Some(digits),
                        label: base_label(m.base),
                    });
                    states.len() - 1
                });
                final_of.push(idx);
            }
        }
    }
    if states.len() > MAX_FINAL_VERSIONS {
        return Err(DgpError::StateSpaceTooLarge(format!(
            "{} versions after augmentation",
            states.len()
        )));
    }

    // Exposure values: coarsen, then dedup and sort.
    let finalize_a = |raw: f64| -> f64 {
        match &measure.coarsening {
            Some(cuts) => coarsen_value(raw, cuts) as f64,
            None => raw + 0.0,
        }
    };
    let mut a_keys: Vec<(u64, f64)> = walk
        .micros
        .iter()
        .map(|m| {
            let v = finalize_a(m.a_raw);
            (f64_key(v), v)
        })
        .collect();
    a_keys.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite exposures"));
    a_keys.dedup_by_key(|e| e.0);
    let a_values: Vec<f64> = a_keys.iter().map(|&(_, v)| v).collect();
    let a_index_of: HashMap<u64, usize> = a_keys
        .iter()
        .enumerate()
        .map(|(i, &(k, _))| (k, i))
        .collect();

    // Potential-outcome evaluation.
    let outcome = scenario.outcome();
    let kind = scenario.kind();
    let potential = |m: &Micro, st: &VersionState| -> f64 {
        // Effective indicator vector when the version is set to `st`.
        let rebuilt: Option<Vec<f64>>;
        let x_eff: Option<&[f64]> = if let Some(x) = &st.x {
            Some(x.as_slice())
        } else {
            match kind {
                ScenarioKind::StructuralReflective => {
                    let loadings = match scenario.structure() {
                        Structure::Reflective { loadings, .. } => loadings,
                        _ => unreachable!(),
                    };
                    let mut x = Vec::with_capacity(loadings.len());
                    for i in 0..loadings.len() {
                        let shift = match st.common_override {
                            Some(ov) => plan.common_shift_override(ov, i),
                            None => plan.common_shift(m.u_mask, i),
                        };
                        x.push(reflective_indicator(
                            loadings[i],
                            st.latent_value,
                            m.errors[i],
                            shift,
                        ));
                    }
                    rebuilt = Some(x);
                    rebuilt.as_deref()
                }
                ScenarioKind::StructuralFormative => Some(m.x.as_slice()),
                _ => None,
            }
        };
        let base = match outcome {
            OutcomeModel::VersionTable { means, .. } => means[st.base][m.stratum],
            OutcomeModel::Latent {
                intercept,
                slope,
                stratum_effects,
                ..
            } => intercept + slope * st.latent_value + stratum_effects[m.stratum],
            OutcomeModel::Indicators {
                intercept,
                coefs,
                stratum_effects,
                ..
            } => {
                let x = x_eff.expect("indicator outcome model requires indicators");
                let mut acc = *intercept;
                for (co, xi) in coefs.iter().zip(x) {
                    acc += co * xi;
                }
                acc + stratum_effects[m.stratum]
            }
            OutcomeModel::Latents { .. } => {
                unreachable!("multidimensional designs are continuous")
            }
        };
        let direct = match x_eff {
            Some(x) => plan.direct_shift(x),
            None => 0.0,
        };
        base + direct + plan.u_outcome_shift(m.u_mask, st.common_override)
    };

    let mut atoms = Vec::with_capacity(walk.micros.len());
    for (mi, m) in walk.micros.iter().enumerate() {
        let po: Vec<f64> = states.iter().map(|st| potential(m, st)).collect();
        let own = final_of[mi];
        let a_val = finalize_a(m.a_raw);
        atoms.push(Atom {
            stratum: m.stratum as u32,
            version: own as u32,
            a_index: a_index_of[&f64_key(a_val)] as u32,
            u_mask: m.u_mask,
            probability: m.p,
            indicators: m.x.clone(),
            outcome_mean: po[own],
            potential_means: po,
        });
    }

    Ok(PopulationTable::new(
        scenario.n_strata(),
        scenario.stratum_probs().to_vec(),
        a_values,
        states.iter().map(|st| st.label).collect(),
        atoms,
    ))
}

/// Light enumeration returning only per-stratum exposure mass; used by
/// scenario validation.
pub(crate) fn enumerate_support(scenario: &Scenario) -> Result<SupportTable, DgpError> {
    let walk = collect_micros(scenario)?;
    let measure = scenario.measure();
    let finalize_a = |raw: f64| -> f64 {
        match &measure.coarsening {
            Some(cuts) => coarsen_value(raw, cuts) as f64,
            None => raw + 0.0,
        }
    };
    let mut a_keys: Vec<(u64, f64)> = walk
        .micros
        .iter()
        .map(|m| {
            let v = finalize_a(m.a_raw);
            (f64_key(v), v)
        })
        .collect();
    a_keys.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite exposures"));
    a_keys.dedup_by_key(|e| e.0);
    let index_of: HashMap<u64, usize> = a_keys
        .iter()
        .enumerate()
        .map(|(i, &(k, _))| (k, i))
        .collect();

    let n_strata = scenario.n_strata();
    let mut mass = vec![vec![0.0f64; a_keys.len()]; n_strata];
    let mut stratum_mass = vec![0.0f64; n_strata];
    for m in &walk.micros {
        let ai = index_of[&f64_key(finalize_a(m.a_raw))];
        mass[m.stratum][ai] += m.p;
        stratum_mass[m.stratum] += m.p;
    }
    Ok(SupportTable {
        n_strata,
        a_values: a_keys.into_iter().map(|(_, v)| v).collect(),
        mass,
        stratum_mass,
    })
}
