//! Maximum-entropy estimation of component failure probabilities in a
//! series network, and the reliability curves derived from them.
//!
//! The pipeline: validate a [`Scenario`], estimate the two Lagrange
//! multipliers with [`estimate_multipliers`], expand them into a
//! [`FailureMatrix`] with [`failure_matrix`], then summarize with
//! [`reliability_curve`]. [`validation`] holds an exhaustive grid-search
//! oracle for certifying optimizer output.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charging;
pub mod error;
pub mod io;
pub mod maxent;
pub mod model;
pub mod optimizer;
pub mod reliability;
pub mod validation;

pub use charging::{derive_stress_levels, energy_needed, expected_charging_time, ChargingSession};
pub use error::{Error, Result};
pub use maxent::{
    check_validity, constraint_f1, constraint_f2, failure_matrix, failure_probability,
    shannon_entropy, MultiplierPair, ValidityReport,
};
pub use model::{validate_scenario, Component, FailureMatrix, RawScenario, Scenario, StressMatrix};
pub use optimizer::{
    bfgs_update, estimate_multipliers, gradient_fd, objective, objective_terms, ConvergenceReason,
    Interval, ObjectiveTerms, OptimizerOptions, OptimizerRun,
};
pub use reliability::{
    component_failure_probability, entropy_reliability_report, identify_weakest_component,
    network_failure_exact, network_failure_linear, reliability_curve, reliability_per_stress_level,
    ReliabilityCurve, WeakestComponentReport,
};
pub use validation::{grid_search, refine_search, GridResult, GridSpec};
