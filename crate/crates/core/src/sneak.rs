//! Landscape-first search: build the whole cluster tree, repeatedly probe
//! the sub-tree whose split carries the most information (largest weighted
//! entropy drop), prune the losing side, refine the survivors with paired
//! model runs, and finish with a SELECT operator.
//!
//! Unlike the greedy halving search, which always commits to the topmost
//! split, this looks over every sub-tree before spending an evaluation.

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::{default_stop, dist, fastmap_x, tree, TreeNode, DEFAULT_FURTHEST};
use crate::error::EvalError;
use crate::eval::{mix_seed, Charge, EvalSession};
use crate::objectives::{rank_d2h, GoalSpec};
use crate::space::{Candidate, ConfigSpace};
use crate::sway::{sway_traced, SwayParams};

/// Per-column symbol counts over a set of rows; numerics count their grid
/// indices as symbols.
#[derive(Debug, Clone)]
pub struct EntropyStats {
    pub counts: Vec<Vec<u32>>,
    pub n: usize,
    pub total_entropy: f64,
}

impl EntropyStats {
    pub fn of(rows: &[Candidate], space: &ConfigSpace) -> Self {
        let mut counts: Vec<Vec<u32>> = space
            .params()
            .iter()
            .map(|p| vec![0; p.grid_size()])
            .collect();
        for row in rows {
            for (col, &idx) in row.indices().iter().enumerate() {
                counts[col][idx as usize] += 1;
            }
        }
        let n = rows.len();
        let total_entropy = counts.iter().map(|c| column_entropy(c, n)).sum();
        Self {
            counts,
            n,
            total_entropy,
        }
    }
}

fn column_entropy(counts: &[u32], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.log2()
        })
        .sum()
}

/// Sum of per-column entropies over a node's rows.
pub fn node_entropy(node: &TreeNode, space: &ConfigSpace) -> f64 {
    EntropyStats::of(&node.rows, space).total_entropy
}

/// Where the most informative un-probed split sits.
#[derive(Debug, Clone)]
pub struct BestSplit {
    /// Directions from the root (false = left, true = right).
    pub path: Vec<bool>,
    /// `n_i * H_i - (n_j * H_j + n_k * H_k)`.
    pub score: f64,
    pub depth: usize,
}

/// Follow a path from the root.
pub fn node_at<'t>(root: &'t TreeNode, path: &[bool]) -> &'t TreeNode {
    let mut cur = root;
    for &go_right in path {
        cur = if go_right {
            cur.right.as_deref().expect("path beyond tree")
        } else {
            cur.left.as_deref().expect("path beyond tree")
        };
    }
    cur
}

fn node_at_mut<'t>(root: &'t mut TreeNode, path: &[bool]) -> &'t mut TreeNode {
    let mut cur = root;
    for &go_right in path {
        cur = if go_right {
            cur.right.as_deref_mut().expect("path beyond tree")
        } else {
            cur.left.as_deref_mut().expect("path beyond tree")
        };
    }
    cur
}

/// Do the two children disagree on any column's value set?
fn children_differ(left: &TreeNode, right: &TreeNode, space: &ConfigSpace) -> bool {
    for col in 0..space.len() {
        let lvals: BTreeSet<u32> = left.rows.iter().map(|c| c.indices()[col]).collect();
        let rvals: BTreeSet<u32> = right.rows.iter().map(|c| c.indices()[col]).collect();
        if lvals != rvals {
            return true;
        }
    }
    false
}

fn min_pole_id(node: &TreeNode) -> u64 {
    let l = node.left_pole.as_ref().map_or(u64::MAX, |p| p.id());
    let r = node.right_pole.as_ref().map_or(u64::MAX, |p| p.id());
    l.min(r)
}

/// The un-probed sub-tree maximizing the weighted entropy drop of its split.
/// Eligible nodes have both children, positive entropy, and children that
/// actually differ; ties go to the shallower node, then the lowest pole id.
pub fn best_subtree(root: &TreeNode, space: &ConfigSpace) -> Option<BestSplit> {
    let mut best: Option<(f64, usize, u64, Vec<bool>)> = None;
    let mut stack: Vec<(&TreeNode, Vec<bool>)> = vec![(root, Vec::new())];
    while let Some((node, path)) = stack.pop() {
        if let (Some(left), Some(right)) = (&node.left, &node.right) {
            if !node.queried {
                let h_i = node_entropy(node, space);
                if h_i > 0.0 && children_differ(left, right, space) {
                    let w1 = node.rows.len() as f64 * h_i;
                    let w2 = left.rows.len() as f64 * node_entropy(left, space)
                        + right.rows.len() as f64 * node_entropy(right, space);
                    let score = w1 - w2;
                    let key = (score, path.len(), min_pole_id(node));
                    let take = match &best {
                        None => true,
                        Some((s, d, p, _)) => match score.total_cmp(s) {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => {
                                (key.1, key.2) < (*d, *p)
                            }
                        },
                    };
                    if take {
                        best = Some((score, path.len(), min_pole_id(node), path.clone()));
                    }
                }
            }
        }
        if let Some(left) = &node.left {
            let mut p = path.clone();
            p.push(false);
            stack.push((left, p));
        }
        if let Some(right) = &node.right {
            let mut p = path.clone();
            p.push(true);
            stack.push((right, p));
        }
    }
    best.map(|(score, depth, _, path)| BestSplit { path, score, depth })
}

/// One probe-and-prune iteration, for instrumentation.
#[derive(Debug, Clone)]
pub struct XpassStep {
    pub depth: usize,
    pub node_rows: usize,
    pub pruned_rows: usize,
    pub charged: u64,
}

fn remove_on_path(node: &mut TreeNode, path: &[bool], ids: &HashSet<u64>) {
    node.rows.retain(|c| !ids.contains(&c.id()));
    if let Some((&first, rest)) = path.split_first() {
        let child = if first {
            node.right.as_deref_mut()
        } else {
            node.left.as_deref_mut()
        };
        if let Some(child) = child {
            remove_on_path(child, rest, ids);
        }
    }
}

/// Probe the entropy-best sub-tree, evaluate its two poles, delete the rows
/// under the worse pole, and repeat until fewer than `stop` rows survive or
/// nothing is left to probe. Returns the surviving rows.
pub fn xpass(
    root: &mut TreeNode,
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    stop: usize,
) -> Result<(Vec<Candidate>, Vec<XpassStep>), EvalError> {
    let mut steps = Vec::new();
    while root.rows.len() >= stop {
        let Some(split) = best_subtree(root, space) else {
            break;
        };
        let before = session.budget().e;
        let (left_score, right_score, node_rows) = {
            let node = node_at(root, &split.path);
            let lp = node.left_pole.clone().expect("internal node has poles");
            let rp = node.right_pole.clone().expect("internal node has poles");
            let ls = session.eval(&lp, Charge::Inference)?;
            let rs = session.eval(&rp, Charge::Inference)?;
            (ls, rs, node.rows.len())
        };
        let charged = session.budget().e - before;
        // the sub-tree under the worse pole goes; ties prune the right
        let prune_left = session.prefer(&right_score, &left_score, goals);
        let node = node_at_mut(root, &split.path);
        node.queried = true;
        let pruned = if prune_left {
            node.left.take().expect("checked above")
        } else {
            node.right.take().expect("checked above")
        };
        let ids: HashSet<u64> = pruned.rows.iter().map(|c| c.id()).collect();
        remove_on_path(root, &split.path, &ids);
        steps.push(XpassStep {
            depth: split.depth,
            node_rows,
            pruned_rows: ids.len(),
            charged,
        });
    }
    Ok((root.rows.clone(), steps))
}

/// Order survivors by their pole-axis projection, pair neighbours, evaluate
/// both members of each pair, and keep the winners. An odd leftover survives
/// unevaluated. Returns roughly half of the input.
pub fn ypass(
    survivors: &[Candidate],
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    seed: u64,
) -> Result<(Vec<Candidate>, usize), EvalError> {
    assert!(!survivors.is_empty(), "ypass needs at least one survivor");
    if survivors.len() == 1 {
        return Ok((survivors.to_vec(), 0));
    }
    let ordered = projection_order(survivors, space, seed);
    let mut kept = Vec::with_capacity(ordered.len() / 2 + 1);
    let mut pairs = 0;
    let mut chunks = ordered.chunks_exact(2);
    for pair in &mut chunks {
        let a = session.eval(&pair[0], Charge::Inference)?;
        let b = session.eval(&pair[1], Charge::Inference)?;
        pairs += 1;
        // ties keep the first in projection order
        if session.prefer(&b, &a, goals) {
            kept.push(pair[1].clone());
        } else {
            kept.push(pair[0].clone());
        }
    }
    kept.extend(chunks.remainder().iter().cloned());
    Ok((kept, pairs))
}

fn projection_order(rows: &[Candidate], space: &ConfigSpace, seed: u64) -> Vec<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tmp = &rows[rng.random_range(0..rows.len())];
    let quantile = |from: &Candidate| -> Candidate {
        let mut by: Vec<(f64, &Candidate)> = rows.iter().map(|r| (dist(r, from, space), r)).collect();
        by.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.id().cmp(&y.1.id())));
        let idx = ((rows.len() - 1) as f64 * DEFAULT_FURTHEST).ceil() as usize;
        by[idx].1.clone()
    };
    let left = quantile(tmp);
    let right = quantile(&left);
    let c = dist(&left, &right, space);
    if c == 0.0 {
        return rows.to_vec();
    }
    let mut projected: Vec<(f64, &Candidate)> = rows
        .iter()
        .map(|row| {
            let a = dist(row, &left, space);
            let b = dist(row, &right, space);
            (fastmap_x(a, b, c).clamp(0.0, c), row)
        })
        .collect();
    projected.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.id().cmp(&q.1.id())));
    projected.into_iter().map(|(_, r)| r.clone()).collect()
}

/// How the final shortlist becomes one answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectPolicy {
    /// Evaluate one random finalist and return it.
    Any,
    /// Second-round halving search, then a random survivor.
    SAny,
    /// Evaluate every finalist, return the rank-best.
    All,
    /// Second-round halving search, then evaluate those and return the best.
    SAll,
}

impl SelectPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectPolicy::Any => "any",
            SelectPolicy::SAny => "sany",
            SelectPolicy::All => "all",
            SelectPolicy::SAll => "sall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "any" => Some(SelectPolicy::Any),
            "sany" => Some(SelectPolicy::SAny),
            "all" => Some(SelectPolicy::All),
            "sall" => Some(SelectPolicy::SAll),
            _ => None,
        }
    }
}

/// Instrumentation of one SELECT phase.
#[derive(Debug, Clone, Default)]
pub struct SelectTrace {
    /// eval() calls issued by the phase (cache-independent).
    pub requests: u64,
    /// Evaluations actually charged to `e`.
    pub charged: u64,
    /// Levels the inner halving search took (second-round policies).
    pub sway_levels: usize,
    /// Survivors of the second round (second-round policies).
    pub sway_survivors: usize,
}

/// Fourth root of the original pool size, the second-round stop.
pub fn fourth_root_stop(n0: usize) -> usize {
    ((n0 as f64).sqrt().sqrt().ceil() as usize).max(2)
}

/// Reduce the finalists to one candidate under the given policy. `n0` is the
/// original pool size, which fixes the second-round stop at its fourth root.
pub fn select(
    finalists: &[Candidate],
    policy: SelectPolicy,
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    n0: usize,
    seed: u64,
) -> Result<(Candidate, SelectTrace), EvalError> {
    assert!(!finalists.is_empty(), "select needs at least one finalist");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = SelectTrace::default();
    let req0 = session.requests();
    let e0 = session.budget().e;

    let second_round = |session: &mut EvalSession,
                        trace: &mut SelectTrace,
                        rng: &mut ChaCha8Rng|
     -> Result<Vec<Candidate>, EvalError> {
        let stop = fourth_root_stop(n0);
        if finalists.len() <= stop.max(2) || finalists.len() < 2 {
            return Ok(finalists.to_vec());
        }
        let params = SwayParams {
            stop: Some(stop),
            ..Default::default()
        };
        let (survivors, steps) =
            sway_traced(finalists, space, session, goals, &params, rng.random())?;
        trace.sway_levels = steps.len();
        trace.sway_survivors = survivors.len();
        Ok(survivors)
    };

    let winner = match policy {
        SelectPolicy::Any => {
            let pick = finalists[rng.random_range(0..finalists.len())].clone();
            session.eval(&pick, Charge::Inference)?;
            pick
        }
        SelectPolicy::SAny => {
            let survivors = second_round(session, &mut trace, &mut rng)?;
            survivors[rng.random_range(0..survivors.len())].clone()
        }
        SelectPolicy::All => best_of(finalists, session, goals)?,
        SelectPolicy::SAll => {
            let survivors = second_round(session, &mut trace, &mut rng)?;
            best_of(&survivors, session, goals)?
        }
    };
    trace.requests = session.requests() - req0;
    trace.charged = session.budget().e - e0;
    Ok((winner, trace))
}

fn best_of(
    pool: &[Candidate],
    session: &mut EvalSession,
    goals: &GoalSpec,
) -> Result<Candidate, EvalError> {
    let mut scored = Vec::with_capacity(pool.len());
    for c in pool {
        let v = session.eval(c, Charge::Inference)?;
        scored.push((c.clone(), v));
    }
    Ok(rank_d2h(&scored, goals)[0].0.clone())
}

/// Full run report: phase order, per-phase charges, and shrinkage.
#[derive(Debug, Clone)]
pub struct SneakTrace {
    pub phases: Vec<&'static str>,
    pub pool: usize,
    pub xpass_steps: Vec<XpassStep>,
    pub xpass_out: usize,
    pub ypass_pairs: usize,
    pub ypass_out: usize,
    pub select: SelectTrace,
    /// Charged evaluations per phase: tree, xpass, ypass, select.
    pub e_by_phase: [u64; 4],
}

/// The composed optimizer: cluster everything, prune by entropy probes,
/// refine in pairs, then select.
pub fn nisneak(
    rows: &[Candidate],
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    policy: SelectPolicy,
    seed: u64,
) -> Result<Candidate, EvalError> {
    Ok(nisneak_traced(rows, space, session, goals, policy, seed)?.0)
}

pub fn nisneak_traced(
    rows: &[Candidate],
    space: &ConfigSpace,
    session: &mut EvalSession,
    goals: &GoalSpec,
    policy: SelectPolicy,
    seed: u64,
) -> Result<(Candidate, SneakTrace), EvalError> {
    assert!(rows.len() >= 4, "pool too small to be worth clustering");
    let n0 = rows.len();
    let stop = default_stop(n0);
    let mut phases = Vec::with_capacity(4);
    let mut e_by_phase = [0u64; 4];

    let e0 = session.budget().e;
    let mut root = tree(rows, space, stop, mix_seed(&[seed, 1]));
    phases.push("tree");
    e_by_phase[0] = session.budget().e - e0;

    let e0 = session.budget().e;
    let (survivors, xpass_steps) = xpass(&mut root, space, session, goals, stop)?;
    phases.push("xpass");
    e_by_phase[1] = session.budget().e - e0;
    let xpass_out = survivors.len();

    let e0 = session.budget().e;
    let (finalists, ypass_pairs) = ypass(&survivors, space, session, goals, mix_seed(&[seed, 2]))?;
    phases.push("ypass");
    e_by_phase[2] = session.budget().e - e0;
    let ypass_out = finalists.len();

    let e0 = session.budget().e;
    let (winner, select_trace) = select(
        &finalists,
        policy,
        space,
        session,
        goals,
        n0,
        mix_seed(&[seed, 3]),
    )?;
    phases.push("select");
    e_by_phase[3] = session.budget().e - e0;

    Ok((
        winner,
        SneakTrace {
            phases,
            pool: n0,
            xpass_steps,
            xpass_out,
            ypass_pairs,
            ypass_out,
            select: select_trace,
            e_by_phase,
        },
    ))
}
