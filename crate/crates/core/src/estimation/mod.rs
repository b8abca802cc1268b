//! Observational-side estimators: least squares, nonparametric
//! standardization over covariate strata, per-indicator association tables,
//! and bootstrap uncertainty.

mod bootstrap;
mod contrast;
mod items;
mod ols;

pub use bootstrap::{bootstrap_ci, bootstrap_replicates, MIN_BOOTSTRAP_REPLICATES};
pub use contrast::{standardized_contrast, ContrastEstimate, StratumContrast};
pub use items::{item_by_item, AssociationMode, ItemAssociation};
pub use ols::{fit_ols, fit_population_regression, fit_wls, RegressionFit};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("{n} rows cannot identify {p} regression parameters")]
    InsufficientRows { n: usize, p: usize },
    #[error("stratum {stratum} lacks rows at one of the contrast exposures")]
    PositivityViolation { stratum: usize },
    #[error("{b} bootstrap replicates requested; at least {min} required")]
    TooFewReplicates { b: usize, min: usize },
    #[error("confidence level must lie strictly between 0 and 1")]
    InvalidLevel,
    #[error("dataset has no rows")]
    EmptyData,
}
