//! Heterogeneous candidate distance, pole projection with median split, and
//! recursive binary cluster trees.
//!
//! Splitting is evaluation-free: poles are found by distance quantiles, every
//! row is projected onto the pole-to-pole line with the cosine rule
//! `x = (a^2 + c^2 - b^2) / (2c)`, and the pool is cut at the median `x`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::space::{Candidate, ConfigSpace};

/// Fraction of the distance distribution used when picking poles; stops just
/// short of the true extreme to avoid outliers.
pub const DEFAULT_FURTHEST: f64 = 0.95;

/// Normalized distance in `[0, 1]` between two candidates of the same space.
///
/// Per numeric parameter: `|a_i - b_i| / (max_i - min_i)`; per categorical:
/// 0 if equal else 1; combined as `sqrt(sum d_i^2) / sqrt(#params)`.
///
/// Panics if the candidates do not come from `space` (caller bug).
pub fn dist(a: &Candidate, b: &Candidate, space: &ConfigSpace) -> f64 {
    assert_eq!(a.indices().len(), space.len(), "candidate not from this space");
    assert_eq!(b.indices().len(), space.len(), "candidate not from this space");
    let mut sum = 0.0;
    for (i, p) in space.params().iter().enumerate() {
        let (ai, bi) = (a.indices()[i], b.indices()[i]);
        let d = if p.is_numeric() {
            // Grids are uniform, so the index gap over the index span equals
            // the value gap over the value span.
            let span = (p.grid_size() - 1).max(1) as f64;
            (ai as f64 - bi as f64).abs() / span
        } else if ai == bi {
            0.0
        } else {
            1.0
        };
        sum += d * d;
    }
    sum.sqrt() / (space.len() as f64).sqrt()
}

/// Cosine-rule projection of a row onto the pole axis: `a` and `b` are its
/// distances to the left and right pole, `c` the pole-to-pole distance.
pub fn fastmap_x(a: f64, b: f64, c: f64) -> f64 {
    (a * a + c * c - b * b) / (2.0 * c)
}

/// Outcome of one median split.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub left_pole: Candidate,
    pub right_pole: Candidate,
    pub lefts: Vec<Candidate>,
    pub rights: Vec<Candidate>,
}

/// The row at the `furthest` quantile of distance from `from`, ties broken by
/// lowest candidate id.
fn pole_at_quantile(
    rows: &[Candidate],
    from: &Candidate,
    furthest: f64,
    space: &ConfigSpace,
) -> Candidate {
    let mut by_dist: Vec<(f64, &Candidate)> =
        rows.iter().map(|r| (dist(r, from, space), r)).collect();
    by_dist.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.id().cmp(&y.1.id())));
    let idx = ((rows.len() - 1) as f64 * furthest).ceil() as usize;
    by_dist[idx].1.clone()
}

/// Split `rows` in half around two distant poles.
///
/// Picks a random row, walks to the `furthest`-quantile row twice to find the
/// poles, projects everything onto the pole axis, and cuts at the median.
/// When all rows coincide (pole distance 0) the split degenerates to first
/// half / second half in input order.
///
/// Panics if `rows.len() < 2`.
pub fn half(rows: &[Candidate], space: &ConfigSpace, rng: &mut ChaCha8Rng, furthest: f64) -> SplitResult {
    assert!(rows.len() >= 2, "half() needs at least 2 rows");
    let tmp = &rows[rng.random_range(0..rows.len())];
    let left = pole_at_quantile(rows, tmp, furthest, space);
    let right = pole_at_quantile(rows, &left, furthest, space);
    let c = dist(&left, &right, space);

    let mid = rows.len().div_ceil(2);
    if c == 0.0 {
        return SplitResult {
            left_pole: rows[0].clone(),
            right_pole: rows[rows.len() - 1].clone(),
            lefts: rows[..mid].to_vec(),
            rights: rows[mid..].to_vec(),
        };
    }

    let mut projected: Vec<(f64, &Candidate)> = rows
        .iter()
        .map(|row| {
            let a = dist(row, &left, space);
            let b = dist(row, &right, space);
            // clamp against floating-point noise on near-collinear points
            let x = fastmap_x(a, b, c).clamp(0.0, c);
            (x, row)
        })
        .collect();
    projected.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.id().cmp(&q.1.id())));

    let lefts = projected[..mid].iter().map(|(_, r)| (*r).clone()).collect();
    let rights = projected[mid..].iter().map(|(_, r)| (*r).clone()).collect();
    SplitResult {
        left_pole: left,
        right_pole: right,
        lefts,
        rights,
    }
}

/// Same as [`half`] but seeded directly; used where no rng is threaded through.
pub fn half_seeded(rows: &[Candidate], space: &ConfigSpace, seed: u64, furthest: f64) -> SplitResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    half(rows, space, &mut rng, furthest)
}

/// A node of the recursive cluster tree. Leaves hold fewer than `stop` rows.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub rows: Vec<Candidate>,
    pub left_pole: Option<Candidate>,
    pub right_pole: Option<Candidate>,
    pub left: Option<Box<TreeNode>>,
    pub right: Option<Box<TreeNode>>,
    /// Set once a probe pass has evaluated this node's poles.
    pub queried: bool,
}

impl TreeNode {
    fn leaf(rows: Vec<Candidate>) -> Self {
        Self {
            rows,
            left_pole: None,
            right_pole: None,
            left: None,
            right: None,
            queried: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left.is_none()
    }

    /// Number of rows currently under this node.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Depth of the deepest node below (a single node has depth 0).
    pub fn depth(&self) -> usize {
        match (&self.left, &self.right) {
            (Some(l), Some(r)) => 1 + l.depth().max(r.depth()),
            _ => 0,
        }
    }
}

/// Default stopping size: `sqrt(N)` rounded up, at least 2.
pub fn default_stop(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

/// Recursively split `rows` into a balanced binary tree until pools drop
/// below `stop`. Builds geometry only; nothing is evaluated.
pub fn tree(rows: &[Candidate], space: &ConfigSpace, stop: usize, seed: u64) -> TreeNode {
    assert!(!rows.is_empty(), "tree() needs at least one row");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow(rows.to_vec(), space, stop.max(2), &mut rng)
}

fn grow(rows: Vec<Candidate>, space: &ConfigSpace, stop: usize, rng: &mut ChaCha8Rng) -> TreeNode {
    if rows.len() < stop {
        return TreeNode::leaf(rows);
    }
    let split = half(&rows, space, rng, DEFAULT_FURTHEST);
    let left = grow(split.lefts, space, stop, rng);
    let right = grow(split.rights, space, stop, rng);
    TreeNode {
        rows,
        left_pole: Some(split.left_pole),
        right_pole: Some(split.right_pole),
        left: Some(Box::new(left)),
        right: Some(Box::new(right)),
        queried: false,
    }
}
