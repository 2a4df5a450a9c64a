//! Multi-objective hyperparameter optimization for regression forests on
//! small monthly time series, built around landscape analysis: cluster the
//! configuration space first, then spend evaluations only where the
//! structure says they pay.
//!
//! The crate provides the tuned learner (a from-scratch regression-forest),
//! the evaluation engine with persistent caching and split E / E+ budget
//! accounting, the landscape optimizer with its four SELECT policies, the
//! greedy halving baseline, four conventional baselines, and the
//! Friedman/Nemenyi ranking used to compare them.

pub mod baselines;
pub mod cluster;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod objectives;
pub mod registry;
pub mod sneak;
pub mod space;
pub mod stats;
pub mod sway;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{DataError, EvalError, LearnError, SpaceError, StatsError};
pub use eval::{Charge, EvalBudget, EvalCache, EvalRecord, EvalSession};
pub use objectives::{GoalSpec, Objectives};
pub use registry::{run_optimizer, OptimizerKind, OPTIMIZER_NAMES};
pub use space::{default_space, Candidate, ConfigSpace};
