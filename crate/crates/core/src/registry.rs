//! Optimizer registry: the names a plan or command line may ask for, and one
//! entry point that dispatches a run.

use crate::baselines::{differential_evolution, flash, grid_search, random_search, BaselineParams};
use crate::error::EvalError;
use crate::eval::EvalSession;
use crate::objectives::GoalSpec;
use crate::sneak::{nisneak, SelectPolicy};
use crate::space::{default_candidate, Candidate, ConfigSpace};
use crate::sway::{sway_best, SwayParams};

/// Every runnable treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    /// Off-the-shelf forest, zero tuning evaluations.
    Default,
    RandomSearch,
    GridSearch,
    DifferentialEvolution,
    Flash,
    Sway,
    Nisneak(SelectPolicy),
}

/// All registry names, for usage messages.
pub const OPTIMIZER_NAMES: [&str; 10] = [
    "default",
    "rs",
    "gs",
    "de",
    "flash",
    "sway",
    "nisneak+any",
    "nisneak+sany",
    "nisneak+all",
    "nisneak+sall",
];

impl OptimizerKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "default" => Some(Self::Default),
            "rs" => Some(Self::RandomSearch),
            "gs" => Some(Self::GridSearch),
            "de" => Some(Self::DifferentialEvolution),
            "flash" => Some(Self::Flash),
            "sway" => Some(Self::Sway),
            other => {
                let policy = other.strip_prefix("nisneak+")?;
                SelectPolicy::parse(policy).map(Self::Nisneak)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Default => "default".into(),
            Self::RandomSearch => "rs".into(),
            Self::GridSearch => "gs".into(),
            Self::DifferentialEvolution => "de".into(),
            Self::Flash => "flash".into(),
            Self::Sway => "sway".into(),
            Self::Nisneak(p) => format!("nisneak+{}", p.name()),
        }
    }
}

/// Run one optimizer over the pool (or the space, for the methods that
/// ignore the pool) and return its chosen candidate.
pub fn run_optimizer(
    kind: OptimizerKind,
    pool: &[Candidate],
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    params: &BaselineParams,
    seed: u64,
) -> Result<Candidate, EvalError> {
    match kind {
        OptimizerKind::Default => Ok(default_candidate(space)),
        OptimizerKind::RandomSearch => {
            random_search(pool, session, goals, params.budget_evals, seed)
        }
        OptimizerKind::GridSearch => grid_search(space, session, goals, &params.gs_strides),
        OptimizerKind::DifferentialEvolution => {
            differential_evolution(space, session, goals, params, seed)
        }
        OptimizerKind::Flash => flash(
            pool,
            session,
            goals,
            params.flash_initial,
            params.budget_evals,
            seed,
        ),
        OptimizerKind::Sway => {
            sway_best(pool, space, session, goals, &SwayParams::default(), seed)
        }
        OptimizerKind::Nisneak(policy) => nisneak(pool, space, session, goals, policy, seed),
    }
}
