//! Reference optimizers: random search, grid search, differential evolution
//! constrained to the grid, and a sequential model-based search with a
//! regression-tree surrogate per goal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EvalError;
use crate::eval::{Charge, EvalSession};
use crate::forest::{fit_single_tree, Criterion, ForestParams};
use crate::objectives::{better, rank_d2h, GoalBounds, GoalSpec};
use crate::space::{Candidate, ConfigSpace};

/// Knobs for the baselines.
#[derive(Debug, Clone)]
pub struct BaselineParams {
    /// Evaluation budget for random search and the surrogate search.
    pub budget_evals: usize,
    pub de_population: usize,
    pub de_generations: usize,
    pub de_f: f64,
    pub de_cr: f64,
    /// Per-parameter strides for grid search.
    pub gs_strides: Vec<usize>,
    /// Random evaluations before the surrogate loop starts.
    pub flash_initial: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            budget_evals: 120,
            de_population: 50, // ten per tunable
            de_generations: 2,
            de_f: 0.5,
            de_cr: 0.9,
            // 7*5*5*5*3 = 2625 points on the default grid
            gs_strides: vec![3, 4, 9, 4, 1],
            flash_initial: 20,
        }
    }
}

/// Evaluate `budget_evals` distinct pool members drawn uniformly without
/// replacement; return the rank-best among them.
pub fn random_search(
    pool: &[Candidate],
    session: &mut EvalSession,
    goals: &GoalSpec,
    budget_evals: usize,
    seed: u64,
) -> Result<Candidate, EvalError> {
    assert!(!pool.is_empty(), "random search over an empty pool");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = budget_evals.min(pool.len());
    let picks = rand::seq::index::sample(&mut rng, pool.len(), take);
    let mut scored = Vec::with_capacity(take);
    for i in picks {
        let c = &pool[i];
        let v = session.eval(c, Charge::Inference)?;
        scored.push((c.clone(), v));
    }
    Ok(rank_d2h(&scored, goals)[0].0.clone())
}

/// Evaluate every candidate of the strided cross product; return the
/// rank-best.
pub fn grid_search(
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    strides: &[usize],
) -> Result<Candidate, EvalError> {
    let mut scored = Vec::new();
    for c in space.enumerate(strides) {
        let v = session.eval(&c, Charge::Inference)?;
        scored.push((c, v));
    }
    assert!(!scored.is_empty(), "strided grid is empty");
    Ok(rank_d2h(&scored, goals)[0].0.clone())
}

/// Mutate-crossover-select generations on the grid. Numeric components are
/// extrapolated as `a + F (b - c)` on the index scale and snapped back to
/// the grid; categorical components copy from `a` with probability CR.
/// A member is replaced only when its trial wins the Zitzler comparison.
pub fn differential_evolution(
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    params: &BaselineParams,
    seed: u64,
) -> Result<Candidate, EvalError> {
    assert!(params.de_population >= 4, "DE needs at least 4 members");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut population = space.sample(params.de_population, rng.random());
    // sampling dedups; top up until the population is full
    while population.len() < params.de_population {
        let extra = space.sample(params.de_population, rng.random());
        for c in extra {
            if population.len() == params.de_population {
                break;
            }
            if !population.iter().any(|p| p.id() == c.id()) {
                population.push(c);
            }
        }
    }
    let mut scores = Vec::with_capacity(population.len());
    for c in &population {
        scores.push(session.eval(c, Charge::Inference)?);
    }

    let np = population.len();
    for _gen in 0..params.de_generations {
        for i in 0..np {
            // three distinct others
            let mut others: Vec<usize> = (0..np).filter(|&j| j != i).collect();
            others.shuffle(&mut rng);
            let (a, b, c) = (others[0], others[1], others[2]);

            let mut trial: Vec<u32> = Vec::with_capacity(space.len());
            for (p, spec) in space.params().iter().enumerate() {
                let (xa, xb, xc) = (
                    population[a].indices()[p] as f64,
                    population[b].indices()[p] as f64,
                    population[c].indices()[p] as f64,
                );
                let mutant = if spec.is_numeric() {
                    let v = xa + params.de_f * (xb - xc);
                    v.round().clamp(0.0, (spec.grid_size() - 1) as f64) as u32
                } else if rng.random::<f64>() < params.de_cr {
                    population[a].indices()[p]
                } else {
                    population[i].indices()[p]
                };
                trial.push(mutant);
            }
            // binomial crossover against the target, one forced dimension
            let jrand = rng.random_range(0..space.len());
            for (p, slot) in trial.iter_mut().enumerate() {
                if p != jrand && rng.random::<f64>() >= params.de_cr {
                    *slot = population[i].indices()[p];
                }
            }
            let trial = space.candidate(trial);
            let trial_score = session.eval(&trial, Charge::Inference)?;
            if session.prefer(&trial_score, &scores[i], goals) {
                population[i] = trial;
                scores[i] = trial_score;
            }
        }
    }

    let scored: Vec<(Candidate, Vec<f64>)> =
        population.into_iter().zip(scores).collect();
    Ok(rank_d2h(&scored, goals)[0].0.clone())
}

/// Sequential model-based search: keep one regression-tree surrogate per
/// goal, guess every unevaluated pool member, evaluate the most promising
/// guess, refit, repeat until the budget is spent. Returns the rank-best
/// among the actually evaluated candidates.
pub fn flash(
    pool: &[Candidate],
    session: &mut EvalSession,
    goals: &GoalSpec,
    flash_initial: usize,
    budget_evals: usize,
    seed: u64,
) -> Result<Candidate, EvalError> {
    assert!(
        pool.len() > flash_initial,
        "pool must be larger than the initial sample"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = |c: &Candidate| -> Vec<f64> {
        c.indices().iter().map(|&i| i as f64).collect()
    };

    let init = rand::seq::index::sample(&mut rng, pool.len(), flash_initial.min(budget_evals));
    let mut evaluated: Vec<(Candidate, Vec<f64>)> = Vec::new();
    let mut in_model: Vec<bool> = vec![false; pool.len()];
    for i in init {
        let v = session.eval(&pool[i], Charge::Inference)?;
        evaluated.push((pool[i].clone(), v));
        in_model[i] = true;
    }

    let surrogate_params = ForestParams {
        n_estimators: 1,
        min_sample_leaves: 1,
        min_impurity_decrease: 0.0,
        max_depth: 8,
        criterion: Criterion::Squared,
    };

    while evaluated.len() < budget_evals {
        // one tree per goal over (candidate indices -> goal)
        let x: Vec<Vec<f64>> = evaluated.iter().map(|(c, _)| features(c)).collect();
        let mut models = Vec::with_capacity(goals.len());
        for g in 0..goals.len() {
            let y: Vec<f64> = evaluated.iter().map(|(_, v)| v[g]).collect();
            models.push(fit_single_tree(&surrogate_params, &x, &y).map_err(EvalError::Learn)?);
        }
        // most interesting = predicted vector that beats the most evaluated
        // vectors, i.e. would rank closest to heaven among them
        let bounds = GoalBounds::from_vectors(evaluated.iter().map(|(_, v)| v.as_slice()));
        let mut best: Option<(usize, usize, u64)> = None; // (losses, pool idx, id)
        for (i, c) in pool.iter().enumerate() {
            if in_model[i] {
                continue;
            }
            let fx = features(c);
            let pred: Vec<f64> = models
                .iter()
                .map(|m| m.predict(std::slice::from_ref(&fx)).expect("arity fixed")[0])
                .collect();
            let pn = bounds.norm(&pred);
            let losses = evaluated
                .iter()
                .filter(|(_, v)| better(&bounds.norm(v), &pn, goals))
                .count();
            let key = (losses, c.id());
            if best.is_none_or(|(l, _, id)| key < (l, id)) {
                best = Some((losses, i, c.id()));
            }
        }
        let Some((_, pick, _)) = best else {
            break; // pool exhausted
        };
        let v = session.eval(&pool[pick], Charge::Inference)?;
        evaluated.push((pool[pick].clone(), v));
        in_model[pick] = true;
    }

    Ok(rank_d2h(&evaluated, goals)[0].0.clone())
}
