//! Full Bayesian Significance Test toolkit.
//!
//! Statistical models expose a log-kernel and a log-reference density whose
//! difference is the log-surprise. Posterior sampling yields an empirical
//! truth function `W`; the constrained supremum `s*` of the surprise over a
//! hypothesis gives the e-value `ev(H) = W(s*)`. On top of that sit the
//! chi-square standardization, Mellin-convolution composition of
//! independent models, the three-valued GFBST and polynomial order
//! selection on the Sakamoto benchmark.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composition;
pub mod config;
pub mod error;
pub mod evalue;
pub mod expr;
pub mod gfbst;
pub mod model;
pub mod modelsel;
mod numeric;
pub mod optimizer;
pub mod sampler;
pub mod special;
pub mod truth;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use composition::{
    conjunctive_evalue, convolve_all, disjunctive_evalue, mellin_convolve, Component, CompositeStructure,
};
pub use config::{HypothesisSpec, ModelSpec, NetworkSpec};
pub use error::{FbstError, Result};
pub use evalue::{evalue, evalue_with_complement, standardize, standardized_evalue, EvidenceReport};
pub use gfbst::{
    check_logical_properties, gfbst_decide, modal_table, region_estimator_decide, CellSet, Decision,
    DecisionValue, GridModel, TestRule, ViolationReport,
};
pub use model::{
    complement, hypothesis_contains, log_surprise, make_gaussian_mean_model, make_polynomial_regression_model,
    Constraint, Dataset, Hypothesis, ParameterSpace, SigmaScale, StatisticalModel,
};
pub use modelsel::{select_order, Criterion, SelectionReport, SelectionRow, Selector};
pub use optimizer::{closed_form_constrained_mode, maximize_surprise, Method, OptimizerConfig, Optimum};
pub use sampler::{sample_posterior, Algorithm, SamplerConfig, SurpriseSample};
pub use special::{chi2_cdf, chi2_quantile};
pub use truth::{condense, estimate_truth_ladder, eval_truth, TruthLadder};
