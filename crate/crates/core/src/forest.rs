//! A self-contained regression-tree ensemble exposing exactly the five
//! tunable knobs: forest size, minimum leaf size, split admission threshold,
//! depth cap, and split criterion.
//!
//! Trees are grown by exact greedy search: every midpoint between consecutive
//! distinct feature values is tried, all features are considered at every
//! split (the data sets here have ~14 columns and under 70 rows), and a split
//! is admitted only when its weighted impurity decrease clears the threshold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::LearnError;
use crate::space::{Candidate, ConfigSpace, ParamValue};

/// Split quality measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Variance; leaves predict the mean.
    Squared,
    /// Mean absolute deviation from the median; leaves predict the median.
    Absolute,
    /// Half mean Poisson deviance; leaves predict the mean. Targets must be
    /// non-negative.
    Poisson,
}

impl Criterion {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "squared" => Some(Self::Squared),
            "absolute" => Some(Self::Absolute),
            "poisson" => Some(Self::Poisson),
            _ => None,
        }
    }
}

/// The five hyperparameters of one forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub min_sample_leaves: usize,
    pub min_impurity_decrease: f64,
    pub max_depth: usize,
    pub criterion: Criterion,
}

impl ForestParams {
    /// Decode a candidate of the default tuning space.
    pub fn from_candidate(c: &Candidate, space: &ConfigSpace) -> Self {
        let vals = space.decode(c);
        let int = |v: &ParamValue| -> i64 {
            match v {
                ParamValue::Int(x) => *x,
                _ => panic!("expected integer parameter"),
            }
        };
        let real = |v: &ParamValue| -> f64 {
            match v {
                ParamValue::Real(x) => *x,
                _ => panic!("expected real parameter"),
            }
        };
        let cat = |v: &ParamValue| -> String {
            match v {
                ParamValue::Cat(x) => x.clone(),
                _ => panic!("expected categorical parameter"),
            }
        };
        ForestParams {
            n_estimators: int(&vals[0]) as usize,
            min_sample_leaves: int(&vals[1]) as usize,
            min_impurity_decrease: real(&vals[2]),
            max_depth: int(&vals[3]) as usize,
            criterion: Criterion::parse(&cat(&vals[4])).expect("unknown criterion symbol"),
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// One fitted regression tree (nodes stored flat, root at 0).
#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A fitted ensemble; predictions are per-row averages over the trees.
#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    in_bag: Vec<Vec<usize>>,
    n_features: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    /// Bootstrap row indices each tree was grown on.
    pub fn in_bag(&self) -> &[Vec<usize>] {
        &self.in_bag
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, LearnError> {
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != self.n_features {
                return Err(LearnError::ArityMismatch {
                    got: row.len(),
                    expected: self.n_features,
                });
            }
            let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
            out.push(sum / self.trees.len() as f64);
        }
        Ok(out)
    }
}

fn mean(ys: &[f64]) -> f64 {
    ys.iter().sum::<f64>() / ys.len() as f64
}

fn median_of(ys: &[f64]) -> f64 {
    crate::objectives::median(ys)
}

fn impurity(ys: &[f64], criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Squared => {
            let m = mean(ys);
            ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / ys.len() as f64
        }
        Criterion::Absolute => {
            let m = median_of(ys);
            ys.iter().map(|y| (y - m).abs()).sum::<f64>() / ys.len() as f64
        }
        Criterion::Poisson => {
            // half mean Poisson deviance, with y*ln(y/y_hat) = 0 at y = 0
            let y_hat = mean(ys).max(1e-9);
            ys.iter()
                .map(|&y| {
                    let t = if y > 0.0 { y * (y / y_hat).ln() } else { 0.0 };
                    0.5 * (t - y + y_hat)
                })
                .sum::<f64>()
                / ys.len() as f64
        }
    }
}

fn leaf_value(ys: &[f64], criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Absolute => median_of(ys),
        _ => mean(ys),
    }
}

/// Incremental split-side statistics: O(1) impurity updates for squared and
/// poisson; a sorted buffer for the median-based absolute criterion.
struct SideStats {
    k: usize,
    sum: f64,
    sum_sq: f64,
    sum_ylny: f64,
    sorted: Vec<f64>,
    absolute: bool,
}

impl SideStats {
    fn new(absolute: bool, capacity: usize) -> Self {
        Self {
            k: 0,
            sum: 0.0,
            sum_sq: 0.0,
            sum_ylny: 0.0,
            sorted: if absolute {
                Vec::with_capacity(capacity)
            } else {
                Vec::new()
            },
            absolute,
        }
    }

    fn add(&mut self, y: f64) {
        self.k += 1;
        self.sum += y;
        self.sum_sq += y * y;
        if y > 0.0 {
            self.sum_ylny += y * y.ln();
        }
        if self.absolute {
            let pos = self.sorted.partition_point(|&v| v < y);
            self.sorted.insert(pos, y);
        }
    }

    fn remove(&mut self, y: f64) {
        self.k -= 1;
        self.sum -= y;
        self.sum_sq -= y * y;
        if y > 0.0 {
            self.sum_ylny -= y * y.ln();
        }
        if self.absolute {
            let pos = self.sorted.partition_point(|&v| v < y);
            self.sorted.remove(pos);
        }
    }

    fn impurity(&self, criterion: Criterion) -> f64 {
        let k = self.k as f64;
        match criterion {
            Criterion::Squared => {
                let mean = self.sum / k;
                (self.sum_sq / k - mean * mean).max(0.0)
            }
            Criterion::Poisson => {
                if self.sum <= 0.0 {
                    0.0
                } else {
                    // 0.5 * mean(y ln(y/m) - y + m) with m the mean collapses
                    // to this closed form
                    0.5 * (self.sum_ylny - self.sum * (self.sum / k).ln()) / k
                }
            }
            Criterion::Absolute => {
                let v = &self.sorted;
                let j = v.len() / 2;
                let m = if v.len() % 2 == 1 {
                    v[j]
                } else {
                    (v[j - 1] + v[j]) / 2.0
                };
                let mut dev = 0.0;
                for &y in v {
                    dev += (y - m).abs();
                }
                dev / k
            }
        }
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    n_total: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    /// Best (feature, threshold) by exhaustive sweep over every midpoint
    /// between consecutive distinct feature values, or None when no split
    /// clears the leaf-size and impurity-decrease constraints.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, Vec<usize>, Vec<usize>)> {
        let n = rows.len();
        let crit = self.params.criterion;
        let absolute = crit == Criterion::Absolute;
        let min_leaf = self.params.min_sample_leaves.max(1);
        let ys: Vec<f64> = rows.iter().map(|&r| self.y[r]).collect();
        let node_imp = impurity(&ys, crit);
        let node_frac = n as f64 / self.n_total as f64;

        let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
        let n_features = self.x[rows[0]].len();
        let mut order: Vec<usize> = (0..n).collect();
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.x[rows[a]][f].total_cmp(&self.x[rows[b]][f]));
            let mut left = SideStats::new(absolute, n);
            let mut right = SideStats::new(absolute, n);
            for &i in order.iter() {
                right.add(ys[i]);
            }
            for k in 1..n {
                let moved = order[k - 1];
                left.add(ys[moved]);
                right.remove(ys[moved]);
                let x_prev = self.x[rows[moved]][f];
                let x_next = self.x[rows[order[k]]][f];
                if x_prev >= x_next || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let threshold = (x_prev + x_next) / 2.0;
                let wl = k as f64 / n as f64;
                let decrease = node_frac
                    * (node_imp - wl * left.impurity(crit) - (1.0 - wl) * right.impurity(crit));
                if decrease < self.params.min_impurity_decrease {
                    continue;
                }
                let take = match best {
                    None => true,
                    Some((d, _, _)) => decrease > d + 1e-15,
                };
                if take {
                    best = Some((decrease, f, threshold));
                }
            }
        }
        best.map(|(_, f, threshold)| {
            let (mut l, mut r) = (Vec::new(), Vec::new());
            for &row in rows {
                if self.x[row][f] <= threshold {
                    l.push(row);
                } else {
                    r.push(row);
                }
            }
            (f, threshold, l, r)
        })
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let ys: Vec<f64> = rows.iter().map(|&r| self.y[r]).collect();
        let make_leaf = rows.len() < 2 * self.params.min_sample_leaves
            || depth >= self.params.max_depth
            || impurity(&ys, self.params.criterion) == 0.0;
        let split = if make_leaf { None } else { self.best_split(&rows) };
        match split {
            None => {
                let id = self.nodes.len();
                self.nodes.push(Node::Leaf {
                    value: leaf_value(&ys, self.params.criterion),
                });
                id
            }
            Some((feature, threshold, l, r)) => {
                let id = self.nodes.len();
                self.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                id
            }
        }
    }
}

/// Grow one tree on `rows` (indices into `x`/`y`, repeats allowed).
fn grow_tree(
    x: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    params: &ForestParams,
) -> RegressionTree {
    let n_total = rows.len();
    let mut g = Grower {
        x,
        y,
        params,
        n_total,
        nodes: Vec::new(),
    };
    let root = g.grow(rows, 0);
    debug_assert_eq!(root, 0);
    RegressionTree { nodes: g.nodes }
}

fn validate(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<(), LearnError> {
    if x.is_empty() || y.is_empty() || x.len() != y.len() {
        return Err(LearnError::EmptyData);
    }
    if params.criterion == Criterion::Poisson {
        if let Some(bad) = y.iter().find(|&&v| v < 0.0) {
            return Err(LearnError::NegativeTarget(*bad));
        }
    }
    Ok(())
}

/// Train `n_estimators` trees on bootstrap resamples (with replacement, size
/// `|x|`). Deterministic for a fixed seed: the bootstrap draws are the only
/// source of randomness and do not depend on the other hyperparameters.
pub fn fit(
    params: &ForestParams,
    x: &[Vec<f64>],
    y: &[f64],
    seed: u64,
) -> Result<ForestModel, LearnError> {
    validate(x, y, params)?;
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut in_bag = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators.max(1) {
        let draw: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        trees.push(grow_tree(x, y, draw.clone(), params));
        in_bag.push(draw);
    }
    Ok(ForestModel {
        trees,
        in_bag,
        n_features: x[0].len(),
    })
}

/// Train one tree on the data as given (no bootstrap); used for surrogate
/// models and split-choice oracles.
pub fn fit_single_tree(
    params: &ForestParams,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<ForestModel, LearnError> {
    validate(x, y, params)?;
    let tree = grow_tree(x, y, (0..x.len()).collect(), params);
    Ok(ForestModel {
        trees: vec![tree],
        in_bag: vec![(0..x.len()).collect()],
        n_features: x[0].len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(criterion: Criterion) -> ForestParams {
        ForestParams {
            n_estimators: 1,
            min_sample_leaves: 1,
            min_impurity_decrease: 0.0,
            max_depth: 20,
            criterion,
        }
    }

    #[test]
    fn two_row_single_split() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![0.0, 10.0];
        let mut p = params(Criterion::Squared);
        p.max_depth = 1;
        let m = fit_single_tree(&p, &x, &y).unwrap();
        let got = m.predict(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(got, vec![0.0, 10.0]);

        // bootstrap variant: find a seed whose draw includes both rows
        let seed = (0..100)
            .find(|&s| {
                let m = fit(&p, &x, &y, s).unwrap();
                let bag = &m.in_bag()[0];
                bag.contains(&0) && bag.contains(&1)
            })
            .expect("some draw contains both rows");
        let m = fit(&p, &x, &y, seed).unwrap();
        assert_eq!(m.predict(&[vec![0.0], vec![1.0]]).unwrap(), vec![0.0, 10.0]);
    }

    #[test]
    fn constant_targets_yield_constant_leaf() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * 7 % 3) as f64]).collect();
        let y = vec![4.0; 10];
        for crit in [Criterion::Squared, Criterion::Absolute, Criterion::Poisson] {
            let mut p = params(crit);
            p.n_estimators = 5;
            let m = fit(&p, &x, &y, 1).unwrap();
            for v in m.predict(&x).unwrap() {
                assert_eq!(v, 4.0);
            }
        }
    }

    #[test]
    fn impurity_threshold_forces_stump() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mut p = params(Criterion::Squared);
        // root variance is 0.25; demand more than that
        p.min_impurity_decrease = 0.5;
        let m = fit_single_tree(&p, &x, &y).unwrap();
        let preds = m.predict(&x).unwrap();
        for v in preds {
            assert_eq!(v, 0.5); // training mean
        }
    }

    #[test]
    fn predict_averages_trees() {
        // two stump trees predicting 4 and 6 average to 5
        let forest = ForestModel {
            trees: vec![
                RegressionTree {
                    nodes: vec![Node::Leaf { value: 4.0 }],
                },
                RegressionTree {
                    nodes: vec![Node::Leaf { value: 6.0 }],
                },
            ],
            in_bag: vec![vec![], vec![]],
            n_features: 1,
        };
        assert_eq!(forest.predict(&[vec![0.0]]).unwrap(), vec![5.0]);
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let p = params(Criterion::Squared);
        let m = fit_single_tree(&p, &[vec![0.0, 1.0]], &[1.0]).unwrap();
        assert!(matches!(
            m.predict(&[vec![0.0]]),
            Err(LearnError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn poisson_rejects_negative_targets() {
        let p = params(Criterion::Poisson);
        assert!(matches!(
            fit(&p, &[vec![0.0], vec![1.0]], &[1.0, -2.0], 0),
            Err(LearnError::NegativeTarget(_))
        ));
    }

    #[test]
    fn empty_data_is_an_error() {
        let p = params(Criterion::Squared);
        assert!(matches!(fit(&p, &[], &[], 0), Err(LearnError::EmptyData)));
    }

    /// Exhaustively score every (feature, threshold) cut the way the grower
    /// would, independently of the grower's code path.
    fn oracle_best_cut(x: &[Vec<f64>], y: &[f64], crit: Criterion) -> (usize, f64) {
        let mut best = (f64::NEG_INFINITY, 0usize, 0.0f64);
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (mut l, mut r) = (Vec::new(), Vec::new());
                for (row, yi) in x.iter().zip(y) {
                    if row[f] <= t {
                        l.push(*yi);
                    } else {
                        r.push(*yi);
                    }
                }
                if l.is_empty() || r.is_empty() {
                    continue;
                }
                let wl = l.len() as f64 / y.len() as f64;
                let score = impurity(y, crit)
                    - wl * impurity(&l, crit)
                    - (1.0 - wl) * impurity(&r, crit);
                if score > best.0 + 1e-15 {
                    best = (score, f, t);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn criterion_choice_matches_exhaustive_scan() {
        // 4-row fixtures where the best first cut differs by criterion
        let fixtures: Vec<(Vec<Vec<f64>>, Vec<f64>)> = vec![
            (
                vec![vec![0.0, 5.0], vec![1.0, 4.0], vec![2.0, 1.0], vec![3.0, 0.0]],
                vec![1.0, 2.0, 8.0, 9.0],
            ),
            (
                vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 9.0], vec![3.0, 9.0]],
                vec![0.0, 10.0, 10.0, 0.0],
            ),
            (
                vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 1.0], vec![4.0, 1.0]],
                vec![0.0, 0.0, 3.0, 30.0],
            ),
        ];
        for crit in [Criterion::Squared, Criterion::Absolute, Criterion::Poisson] {
            for (x, y) in &fixtures {
                let mut p = params(crit);
                p.max_depth = 1;
                let m = fit_single_tree(&p, x, y).unwrap();
                match &m.trees()[0].nodes[0] {
                    Node::Split { feature, threshold, .. } => {
                        let (of, ot) = oracle_best_cut(x, y, crit);
                        assert_eq!(*feature, of, "criterion {crit:?}");
                        assert!((threshold - ot).abs() < 1e-12, "criterion {crit:?}");
                    }
                    Node::Leaf { .. } => panic!("expected a split"),
                }
            }
        }
    }

    #[test]
    fn predictions_stay_in_training_hull() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for seed in 0..20 {
            let n = 30;
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.random::<f64>() * 10.0).collect())
                .collect();
            let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 + r[1] + rng.random::<f64>()).collect();
            let (lo, hi) = (
                y.iter().cloned().fold(f64::INFINITY, f64::min),
                y.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            let p = ForestParams {
                n_estimators: 10,
                min_sample_leaves: 1,
                min_impurity_decrease: 0.0,
                max_depth: 20,
                criterion: Criterion::Squared,
            };
            let m = fit(&p, &x, &y, seed).unwrap();
            let probe: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..4).map(|_| rng.random::<f64>() * 20.0 - 5.0).collect())
                .collect();
            for v in m.predict(&probe).unwrap() {
                assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn deeper_trees_never_hurt_in_bag_error() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for seed in 0..50 {
            let n = 24;
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random::<f64>() * 4.0).collect())
                .collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| (r[0] * 3.0).sin() * 5.0 + r[1] + rng.random::<f64>() * 0.5)
                .collect();
            let mut prev = f64::INFINITY;
            for depth in 1..=6 {
                let p = ForestParams {
                    n_estimators: 3,
                    min_sample_leaves: 1,
                    min_impurity_decrease: 0.0,
                    max_depth: depth,
                    criterion: Criterion::Squared,
                };
                let m = fit(&p, &x, &y, seed).unwrap();
                // error on each tree's own bootstrap sample, averaged
                let mut err = 0.0;
                for (tree, bag) in m.trees().iter().zip(m.in_bag()) {
                    for &i in bag {
                        let d = tree.predict_row(&x[i]) - y[i];
                        err += d * d;
                    }
                }
                assert!(
                    err <= prev + 1e-9,
                    "seed {seed} depth {depth}: {err} > {prev}"
                );
                prev = err;
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 5) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i * i % 13) as f64).collect();
        let p = ForestParams {
            n_estimators: 8,
            min_sample_leaves: 2,
            min_impurity_decrease: 0.1,
            max_depth: 6,
            criterion: Criterion::Absolute,
        };
        let a = fit(&p, &x, &y, 9).unwrap().predict(&x).unwrap();
        let b = fit(&p, &x, &y, 9).unwrap().predict(&x).unwrap();
        assert_eq!(a, b);
    }
}
