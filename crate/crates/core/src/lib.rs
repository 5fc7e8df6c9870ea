//! Constrained multi-label classification by plug-in rules.
//!
//! The crate covers three classifier families that minimize false-negative
//! risk under a constraint:
//!
//! - top-`K` prediction (at most `K` labels per instance),
//! - a pointwise false-positive budget `beta`,
//! - both at once,
//!
//! together with exact and Monte Carlo risk functionals, a catalog of
//! synthetic distributions with tunable margin behavior, pointwise
//! diagnostics for the margin/sparsity conditions, and experiment drivers
//! that measure how fast plug-in excess risk decays with sample size.
//!
//! All Monte Carlo work is split into fixed blocks with per-block random
//! streams, so results are bit-reproducible for a given seed whether the
//! `parallel` feature (rayon) is enabled or not.

pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod labels;
pub mod risk;
pub mod rules;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use labels::{rank_descending, LabelVector, ProbVector, Ranking};
pub use risk::{
    conditional_fn_sum, conditional_fp_sum, excess_risk, pairwise_excess_bound, population_fn_risk,
    Classifier, Constant, ExcessRisk, Oracle, PlugIn, RiskEstimate,
};
pub use rules::{
    beta_classify, beta_threshold, brute_force_oracle, mixed_classify, top_k_classify,
    BruteForceTable, OracleSolution, RuleSpec,
};
pub use synth::{
    choose_phi_inv, eval_eta, kl_bernoulli, noisy_eta, sample_xy, Distribution, DistributionSpec,
    EstimatorSpec, MonteCarloSpec, StaircaseCell,
};
