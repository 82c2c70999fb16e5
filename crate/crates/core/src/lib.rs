//! Learning real analytic functions from noiseless samples.
//!
//! The learner picks a point where the sampling distribution has mass,
//! estimates derivatives there with scattered-node finite differences, and
//! returns the truncated Taylor polynomial built from them.

#![allow(
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod analytic;
pub mod dist;
pub mod error;
pub mod fdweights;
pub mod harness;
pub mod learner;
mod nonfinite;
pub mod quad;
pub mod risk;

pub use analytic::{truncation_sup_error, FunctionSpec, TaylorPolynomial, Term};
pub use dist::{label, Component, DistributionSpec, LabeledDataset};
pub use error::{Error, Result, ShortfallReport};
pub use fdweights::{fd_weights, StencilSolver, WeightTable};
pub use harness::{
    config_hash, convergence_sweep, estimate_sample_complexity, run_trial, success_frequency,
    ComplexityReport, SweepAxis, SweepTable, TrialConfig, TrialRecord, TrialResult,
};
pub use learner::{
    find_density_point, fit, required_samples, LearnerConfig, NodeStrategy, PolynomialModel,
};
pub use risk::{
    body_risk, empirical_risk, epsilon_tilde, risk_decomposition, tail_bound, tail_risk_bound,
    DecompositionOptions, RiskReport,
};
