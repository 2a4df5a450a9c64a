//! Experiment plans: a plain-text key-value file plus flag overrides.

use std::path::{Path, PathBuf};

use nisneak::baselines::BaselineParams;
use nisneak::data::Target;
use nisneak::registry::{OptimizerKind, OPTIMIZER_NAMES};

use crate::CliError;

/// Everything a bench needs: what to run, how often, and where results go.
#[derive(Debug, Clone)]
pub struct Plan {
    pub datasets: Vec<PathBuf>,
    pub targets: Vec<Target>,
    pub optimizers: Vec<OptimizerKind>,
    pub repeats: usize,
    pub pool_size: usize,
    pub global_seed: u64,
    pub out_dir: PathBuf,
    pub cache_path: Option<PathBuf>,
    pub jobs: usize,
    pub space_file: Option<PathBuf>,
    pub baseline: BaselineParams,
}

impl Default for Plan {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            targets: vec![Target::Commits, Target::ClosedPrs, Target::ClosedIssues],
            optimizers: Vec::new(),
            repeats: 20,
            pool_size: 10_000,
            global_seed: 1,
            out_dir: PathBuf::from("bench-out"),
            cache_path: None,
            jobs: 1,
            space_file: None,
            baseline: BaselineParams::default(),
        }
    }
}

pub fn parse_optimizer(name: &str) -> Result<OptimizerKind, CliError> {
    OptimizerKind::parse(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown optimizer `{name}`; valid names: {}",
            OPTIMIZER_NAMES.join(", ")
        ))
    })
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl Plan {
    /// Parse a `key = value` plan file. Unknown keys are an error so typos
    /// never silently change an experiment.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read plan {}: {e}", path.display()))
        })?;
        let mut plan = Plan::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{} line {}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            plan.apply(key.trim(), value.trim()).map_err(|e| {
                CliError::Usage(format!("{} line {}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(plan)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| format!("bad count `{v}`"));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number `{v}`"));
        match key {
            "datasets" | "data" => {
                self.datasets = split_list(value).into_iter().map(PathBuf::from).collect();
            }
            "targets" | "target" => {
                self.targets = split_list(value)
                    .iter()
                    .map(|t| Target::parse(t).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
            }
            "optimizers" | "optimizer" => {
                self.optimizers = split_list(value)
                    .iter()
                    .map(|o| parse_optimizer(o).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
            }
            "repeats" => self.repeats = parse_usize(value)?,
            "pool" => self.pool_size = parse_usize(value)?,
            "seed" => {
                self.global_seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?
            }
            "out" => self.out_dir = PathBuf::from(value),
            "cache" => self.cache_path = Some(PathBuf::from(value)),
            "jobs" => self.jobs = parse_usize(value)?.max(1),
            "space" => self.space_file = Some(PathBuf::from(value)),
            "budget" => self.baseline.budget_evals = parse_usize(value)?,
            "flash_initial" => self.baseline.flash_initial = parse_usize(value)?,
            "de_pop" => self.baseline.de_population = parse_usize(value)?,
            "de_gens" => self.baseline.de_generations = parse_usize(value)?,
            "de_f" => self.baseline.de_f = parse_f64(value)?,
            "de_cr" => self.baseline.de_cr = parse_f64(value)?,
            "gs_strides" => {
                self.baseline.gs_strides = split_list(value)
                    .iter()
                    .map(|s| s.parse::<usize>().map_err(|_| format!("bad stride `{s}`")))
                    .collect::<Result<_, _>>()?;
            }
            other => return Err(format!("unknown plan key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.datasets.is_empty() {
            return Err(CliError::Usage("plan has no datasets".into()));
        }
        if self.optimizers.is_empty() {
            return Err(CliError::Usage("plan has no optimizers".into()));
        }
        if self.targets.is_empty() {
            return Err(CliError::Usage("plan has no targets".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Usage("repeats must be at least 1".into()));
        }
        Ok(())
    }
}
