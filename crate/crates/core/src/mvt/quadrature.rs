//! Quadrature evaluation of the hypothetical-trial contrast for continuous
//! latents.
//!
//! With a Gaussian latent and linear Gaussian indicators the measure is
//! conditionally Gaussian given the latent, so the trial contrast becomes an
//! integral over the latent. The latent is discretized onto an equally
//! spaced grid over plus/minus four standard deviations (41 nodes by
//! default); discretization error is bounded by re-running on a refined
//! grid.

use super::MvtError;
use crate::scenario::{ErrorLaw, LatentLaw, MeasureForm, OutcomeModel, Scenario, Structure};

/// Default node count of the latent grid.
pub const DEFAULT_QUADRATURE_NODES: usize = 41;

const GRID_HALF_WIDTH: f64 = 4.0;

/// Hypothetical-trial contrast of a violation-free continuous structural
/// reflective scenario, by latent-grid quadrature.
pub fn trial_contrast_quadrature(
    scenario: &Scenario,
    a: f64,
    a_star: f64,
    nodes: usize,
) -> Result<f64, MvtError> {
    if !scenario.violations().is_empty() {
        return Err(MvtError::QuadratureUnsupported(
            "quadrature covers violation-free scenarios",
        ));
    }
    let (latent, loadings, errors, correlation) = match scenario.structure() {
        Structure::Reflective {
            latent,
            loadings,
            errors,
            error_correlation,
        } => (latent, loadings, errors, error_correlation),
        _ => {
            return Err(MvtError::QuadratureUnsupported(
                "quadrature covers reflective designs with a continuous latent",
            ))
        }
    };
    let stratum_means = match latent {
        LatentLaw::Gaussian { stratum_means } => stratum_means,
        LatentLaw::Finite { .. } => {
            return Err(MvtError::QuadratureUnsupported(
                "finite latents enumerate exactly; quadrature is unnecessary",
            ))
        }
    };
    let (intercept, slope, stratum_effects) = match scenario.outcome() {
        OutcomeModel::Latent {
            intercept,
            slope,
            stratum_effects,
            ..
        } => (*intercept, *slope, stratum_effects),
        _ => {
            return Err(MvtError::QuadratureUnsupported(
                "quadrature needs a latent outcome model",
            ))
        }
    };
    if scenario.measure().coarsening.is_some() {
        return Err(MvtError::QuadratureUnsupported(
            "coarsened measures are not covered",
        ));
    }

    let n = loadings.len();
    let weights: Vec<f64> = match &scenario.measure().form {
        MeasureForm::Mean => vec![1.0 / n as f64; n],
        MeasureForm::Sum => vec![1.0; n],
        MeasureForm::WeightedSum { weights } => weights.clone(),
        _ => {
            return Err(MvtError::QuadratureUnsupported(
                "the measure must be linear in the indicators",
            ))
        }
    };
    let sds: Vec<f64> = errors
        .iter()
        .map(|e| match e {
            ErrorLaw::Gaussian { sd } => Ok(*sd),
            ErrorLaw::Finite(_) => Err(MvtError::QuadratureUnsupported(
                "indicator errors must be Gaussian",
            )),
        })
        .collect::<Result<_, _>>()?;

    // A | latent ~ Normal(slope_a * latent, sd_a).
    let slope_a: f64 = weights.iter().zip(loadings).map(|(w, l)| w * l).sum();
    let var_a: f64 = match correlation {
        None => weights.iter().zip(&sds).map(|(w, s)| w * w * s * s).sum(),
        Some(corr) => {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += weights[i] * weights[j] * sds[i] * sds[j] * corr[i][j];
                }
            }
            acc
        }
    };
    if var_a <= 0.0 {
        return Err(MvtError::QuadratureUnsupported(
            "the measure is deterministic given the latent",
        ));
    }
    let sd_a = var_a.sqrt();

    let nodes = nodes.max(3);
    let mut value = 0.0;
    for (c, &pc) in scenario.stratum_probs().iter().enumerate() {
        if pc <= 0.0 {
            continue;
        }
        let mu = stratum_means[c];
        let step = 2.0 * GRID_HALF_WIDTH / (nodes - 1) as f64;
        let mut w_a = Vec::with_capacity(nodes);
        let mut w_s = Vec::with_capacity(nodes);
        let mut outcome = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let eta = mu - GRID_HALF_WIDTH + step * j as f64;
            let prior = (-0.5 * (eta - mu) * (eta - mu)).exp();
            let lik = |av: f64| {
                let z = (av - slope_a * eta) / sd_a;
                (-0.5 * z * z).exp()
            };
            w_a.push(prior * lik(a));
            w_s.push(prior * lik(a_star));
            outcome.push(intercept + slope * eta + stratum_effects[c]);
        }
        let norm_a: f64 = w_a.iter().sum();
        let norm_s: f64 = w_s.iter().sum();
        if norm_a <= 0.0 || norm_s <= 0.0 {
            return Err(MvtError::PositivityViolation { stratum: c });
        }
        let mut contrast = 0.0;
        for j in 0..nodes {
            contrast += outcome[j] * (w_a[j] / norm_a - w_s[j] / norm_s);
        }
        value += pc * contrast;
    }
    Ok(value)
}
