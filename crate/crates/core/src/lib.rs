#![no_std]

//! Truly unordered probabilistic rule sets for multi-class classification.
//!
//! A rule set is a probabilistic model: every rule carries a class
//! distribution estimated on its full training cover, instances covered by
//! several non-nested rules are predicted from the union of those covers,
//! nested rules act as exceptions, and an implicit else rule handles
//! everything left over. Models are selected by an approximate normalized
//! maximum likelihood score and grown by a two-phase diverse beam search
//! steered by a decision-tree surrogate for the not yet covered data.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the cross-validation harness live in the `turs` crate.

extern crate alloc;

pub mod bitset;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod regret;
pub mod search;
pub mod surrogate;

pub use crate::bitset::CoverSet;
pub use crate::data::{
    compute_cut_points, enumerate_refinements, Column, Condition, Constraint, Dataset,
    FeatureKind, FeatureSchema, Literal, LiteralIndex, Value, UNSEEN_LEVEL,
};
pub use crate::error::TursError;
pub use crate::metrics::{overlap_fraction, weighted_ovr_auc};
pub use crate::model::{
    appr_nml_log_score, nml_log_score_bruteforce, Atom, CoverageCase, Group, Nesting,
    PredictionExplanation, Rule, RuleSet,
};
pub use crate::regret::{log_ml_likelihood, log_regret, regret_bruteforce, RegretTable};
pub use crate::search::{
    find_next_rule, find_next_rule_greedy, fit_ruleset, fit_ruleset_traced, CandidateRule, FitTrace, NextRule, ScoreMode,
    SearchConfig,
};
pub use crate::surrogate::{
    fit_tree, surrogate_log_score, tree_leaves_as_rules, Aggregation, TreeNode,
};
