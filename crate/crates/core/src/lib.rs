//! Simulation and verification laboratory for causal inference with
//! constructed measures.
//!
//! The crate instantiates data-generating processes in which a coarse
//! exposure measure `A = f(X_1, ..., X_n)` stands in for finer-grained
//! "versions of treatment" `K` -- a scalar version variable, a reflective or
//! formative latent, or the indicator vector itself -- with fully tracked
//! potential outcomes. On top of the generators sit:
//!
//! - exact and sampled verification of the identity equating the
//!   standardized observational contrast with a hypothetical trial that
//!   randomizes versions within exposure levels ([`mvt`]);
//! - the five-step derivation chain attributing identity failures to the
//!   assumption each injected violation breaks ([`mvt::verify_derivation_chain`]);
//! - observational estimators: least squares, standardization,
//!   item-by-item associations, bootstrap intervals ([`estimation`]);
//! - one-factor fitting and the structural-proportionality test
//!   ([`psychometrics`]);
//! - two-wave indicator dynamics with exact path-traced strategy biases
//!   ([`longitudinal`]).

pub mod dgp;
pub mod estimation;
pub mod longitudinal;
pub mod mvt;
pub mod psychometrics;
pub mod rng;
pub mod scenario;

pub use dgp::{
    apply_measure, coarsen_exposure, enumerate_population, sample_dataset, sample_observed,
    Dataset, DgpError, PopulationTable,
};
pub use estimation::{
    bootstrap_ci, fit_ols, fit_wls, item_by_item, standardized_contrast, AssociationMode,
    EstimationError, RegressionFit,
};
pub use longitudinal::{
    analytic_bias, analyze_strategies, simulate_two_wave, LongitudinalError, Strategy,
    StrategyReport, SummaryMeasure, TwoWaveDataset, TwoWaveParams,
};
pub use mvt::{
    observed_contrast, redefine_versions, trial_contrast, verify_derivation_chain,
    verify_identity, Assumption, DerivationChain, IdentityReport, MvtError, VerifyMode,
};
pub use psychometrics::{
    fit_one_factor, formative_composite, implied_covariance, structural_proportionality_test,
    FactorFit, ProportionalityReport, PsychometricsError,
};
pub use scenario::{
    build_scenario, inject_violation, Augmentation, MeasureForm, MeasureSpec, Scenario,
    ScenarioError, ScenarioKind, ScenarioParams, Violation, ViolationKind,
};
