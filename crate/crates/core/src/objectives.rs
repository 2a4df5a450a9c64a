//! Performance measures and multi-goal preference.
//!
//! A model evaluation yields three raw measures over a test window:
//!
//! * MRE, the magnitude of relative error `abs(actual - predicted) / actual`,
//!   aggregated as the median of per-month values (minimize);
//! * Pred40, the fraction of per-month MREs at or below 0.40 (maximize);
//! * SA, standardized accuracy `(1 - MAE/MAE_guess) * 100`, which baselines
//!   the error against a naive median-of-past-months predictor and can
//!   legitimately go negative (maximize).
//!
//! D2H (distance to heaven) is assigned after the fact: a pool of evaluated
//! candidates is ranked best-to-worst with the Zitzler continuous-domination
//! indicator and each entry gets `i / |pool|`, so the best scores exactly 0.

use crate::error::StatsError;
use crate::space::Candidate;

/// SA floor used when the naive guess is perfect but the model is not, so
/// rankings stay total without infinities.
pub const SA_FLOOR: f64 = -1000.0;

/// Pred40 acceptability threshold on the MRE ratio.
pub const PRED40_THRESHOLD: f64 = 0.40;

/// A four-goal score record. `d2h` stays `None` until a pool ranking
/// assigns it.
#[derive(Debug, Clone, PartialEq)]
pub struct Objectives {
    pub mre: f64,
    pub pred40: f64,
    pub sa: f64,
    pub d2h: Option<f64>,
}

impl Objectives {
    /// The goal vector used while tuning, ordered as [`GoalSpec::tuning`].
    pub fn tuning_vector(&self) -> Vec<f64> {
        vec![self.mre, self.pred40, self.sa]
    }
}

/// Named goals with per-goal direction weights: +1 maximize, -1 minimize.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSpec {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
}

impl GoalSpec {
    pub fn new(names: &[&str], weights: &[f64]) -> Self {
        assert_eq!(names.len(), weights.len());
        assert!(weights.iter().all(|w| *w == 1.0 || *w == -1.0));
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            weights: weights.to_vec(),
        }
    }

    /// The three goals available at tuning time: minimize mre, maximize
    /// pred40 and sa.
    pub fn tuning() -> Self {
        Self::new(&["mre", "pred40", "sa"], &[-1.0, 1.0, 1.0])
    }

    /// All four goals including post-hoc d2h (minimized); used when ranking
    /// finished treatments.
    pub fn full() -> Self {
        Self::new(&["mre", "pred40", "sa", "d2h"], &[-1.0, 1.0, 1.0, -1.0])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Magnitude of relative error for one month. A zero actual falls back to
/// `abs(predicted)` (a pseudo-relative error) so months with zero counts
/// stay comparable.
pub fn mre(actual: f64, predicted: f64) -> f64 {
    if actual == 0.0 {
        predicted.abs()
    } else {
        (actual - predicted).abs() / actual.abs()
    }
}

/// Median of a non-empty slice, interpolating between the two central ranks.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Window MRE: the median of per-month MREs.
pub fn mre_window(mres: &[f64]) -> Result<f64, StatsError> {
    if mres.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(median(mres))
}

/// Fraction of per-month MREs at or below the 0.40 acceptability band.
pub fn pred40(mres: &[f64]) -> Result<f64, StatsError> {
    if mres.is_empty() {
        return Err(StatsError::Empty);
    }
    let hits = mres.iter().filter(|&&m| m <= PRED40_THRESHOLD).count();
    Ok(hits as f64 / mres.len() as f64)
}

fn mae(xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / xs.len() as f64
}

/// Standardized accuracy `(1 - MAE/MAE_guess) * 100`, where the guesses are
/// the naive baseline predictions for the same months. 100 means a perfect
/// model, 0 means no better than guessing, negative means worse than
/// guessing.
pub fn sa(predictions: &[f64], actuals: &[f64], guesses: &[f64]) -> f64 {
    assert!(!actuals.is_empty());
    assert_eq!(predictions.len(), actuals.len());
    assert_eq!(guesses.len(), actuals.len());
    let mae_model = mae(predictions, actuals);
    let mae_guess = mae(guesses, actuals);
    if mae_guess == 0.0 {
        return if mae_model == 0.0 { 100.0 } else { SA_FLOOR };
    }
    (1.0 - mae_model / mae_guess) * 100.0
}

/// Zitzler loss `sum_j -e^(w_j (a_j - b_j) / n) / n`: what is lost by
/// jumping from `a` to `b`. Inputs are assumed to be on a shared scale
/// (see [`GoalBounds`]).
pub fn zitzler_loss(a: &[f64], b: &[f64], goals: &GoalSpec) -> f64 {
    assert_eq!(a.len(), goals.len(), "goal vector length mismatch");
    assert_eq!(b.len(), goals.len(), "goal vector length mismatch");
    let n = goals.len() as f64;
    let mut loss = 0.0;
    for j in 0..goals.len() {
        let delta = goals.weights[j] * (a[j] - b[j]) / n;
        loss += -delta.exp() / n;
    }
    loss
}

/// Continuous domination: `a` beats `b` when abandoning `a` loses more,
/// i.e. `loss(b, a) > loss(a, b)`.
pub fn better(a: &[f64], b: &[f64], goals: &GoalSpec) -> bool {
    zitzler_loss(b, a, goals) > zitzler_loss(a, b, goals)
}

/// Classic boolean Pareto domination: no worse on any goal, better on at
/// least one. Kept as a comparison oracle; the search itself uses [`better`].
pub fn boolean_dominates(a: &[f64], b: &[f64], goals: &GoalSpec) -> bool {
    assert_eq!(a.len(), goals.len());
    assert_eq!(b.len(), goals.len());
    let mut strict = false;
    for j in 0..goals.len() {
        let (wa, wb) = (goals.weights[j] * a[j], goals.weights[j] * b[j]);
        if wa < wb {
            return false;
        }
        if wa > wb {
            strict = true;
        }
    }
    strict
}

/// Per-goal min-max bounds over a comparison pool, used to put raw goals on
/// a shared `[0, 1]` scale before the exponential-sum loss (otherwise a goal
/// with a wide range would dominate the sum).
#[derive(Debug, Clone)]
pub struct GoalBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl GoalBounds {
    pub fn from_vectors<'a, I: IntoIterator<Item = &'a [f64]>>(pool: I) -> Self {
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        for v in pool {
            if lo.is_empty() {
                lo = v.to_vec();
                hi = v.to_vec();
            } else {
                for j in 0..v.len() {
                    lo[j] = lo[j].min(v[j]);
                    hi[j] = hi[j].max(v[j]);
                }
            }
        }
        assert!(!lo.is_empty(), "empty comparison pool");
        Self { lo, hi }
    }

    /// Scale a raw vector into `[0, 1]` per goal; constant goals map to 0.
    pub fn norm(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(j, &x)| {
                let span = self.hi[j] - self.lo[j];
                if span > 0.0 {
                    (x - self.lo[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Preference between two raw goal vectors, normalized over `bounds`.
pub fn better_within(a: &[f64], b: &[f64], goals: &GoalSpec, bounds: &GoalBounds) -> bool {
    better(&bounds.norm(a), &bounds.norm(b), goals)
}

/// Stable merge sort of indices under an arbitrary pairwise comparator.
///
/// The Zitzler preference is not guaranteed transitive, and the standard
/// library sort may reject comparators that break strict total order, so the
/// ranking uses its own merge (deterministic for any comparator).
fn merge_sort_by<F: FnMut(usize, usize) -> std::cmp::Ordering>(
    n: usize,
    mut le: F,
) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut buf = idx.clone();
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if le(idx[i], idx[j]) != std::cmp::Ordering::Greater {
                    buf[k] = idx[i];
                    i += 1;
                } else {
                    buf[k] = idx[j];
                    j += 1;
                }
                k += 1;
            }
            let left_tail = mid - i;
            buf[k..k + left_tail].copy_from_slice(&idx[i..mid]);
            buf[k + left_tail..end].copy_from_slice(&idx[j..end]);
            start = end;
        }
        std::mem::swap(&mut idx, &mut buf);
        width *= 2;
    }
    idx
}

/// Rank an evaluated pool best-to-worst by repeated [`better`] comparisons
/// (goals normalized over the pool, ties broken by candidate id) and assign
/// each entry `d2h = i / |pool|` with a 0-based index: heaven is exactly 0.
pub fn rank_d2h(
    evaluated: &[(Candidate, Vec<f64>)],
    goals: &GoalSpec,
) -> Vec<(Candidate, f64)> {
    assert!(!evaluated.is_empty(), "rank_d2h of empty pool");
    let bounds = GoalBounds::from_vectors(evaluated.iter().map(|(_, v)| v.as_slice()));
    let normed: Vec<Vec<f64>> = evaluated.iter().map(|(_, v)| bounds.norm(v)).collect();
    let order = merge_sort_by(evaluated.len(), |i, j| {
        if better(&normed[i], &normed[j], goals) {
            std::cmp::Ordering::Less
        } else if better(&normed[j], &normed[i], goals) {
            std::cmp::Ordering::Greater
        } else {
            evaluated[i].0.id().cmp(&evaluated[j].0.id())
        }
    });
    let n = evaluated.len() as f64;
    order
        .into_iter()
        .enumerate()
        .map(|(rank, i)| (evaluated[i].0.clone(), rank as f64 / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::default_space;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-9;

    #[test]
    fn mre_examples() {
        assert_eq!(mre(100.0, 100.0), 0.0);
        assert!((mre(100.0, 150.0) - 0.5).abs() < EPS);
        // convention-dependent: zero actual falls back to |predicted|
        assert!((mre(0.0, 3.0) - 3.0).abs() < EPS);
    }

    #[test]
    fn pred40_examples() {
        assert_eq!(pred40(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!((pred40(&[0.1, 0.5, 0.3]).unwrap() - 2.0 / 3.0).abs() < EPS);
        assert_eq!(pred40(&[0.41]).unwrap(), 0.0);
        assert!(pred40(&[]).is_err());
    }

    #[test]
    fn sa_examples() {
        // perfect model
        assert!((sa(&[5.0, 7.0], &[5.0, 7.0], &[4.0, 9.0]) - 100.0).abs() < EPS);
        // exactly as good as the guess
        assert!(sa(&[6.0, 8.0], &[5.0, 7.0], &[6.0, 8.0]).abs() < EPS);
        // twice the guess error
        assert!((sa(&[9.0], &[5.0], &[7.0]) - (-100.0)).abs() < EPS);
        // degenerate guesses
        assert_eq!(sa(&[5.0], &[5.0], &[5.0]), 100.0);
        assert_eq!(sa(&[6.0], &[5.0], &[5.0]), SA_FLOOR);
    }

    #[test]
    fn zitzler_hand_example() {
        let min1 = GoalSpec::new(&["g"], &[-1.0]);
        let a = [0.0];
        let b = [1.0];
        assert!((zitzler_loss(&a, &b, &min1) - (-std::f64::consts::E)).abs() < EPS);
        assert!((zitzler_loss(&b, &a, &min1) - (-(-1.0f64).exp())).abs() < EPS);
        assert!(better(&a, &b, &min1));
        assert!(!better(&b, &a, &min1));
    }

    #[test]
    fn zitzler_equal_vectors() {
        let goals = GoalSpec::tuning();
        let v = [0.3, 0.5, 0.9];
        assert!((zitzler_loss(&v, &v, &goals) - (-1.0)).abs() < EPS);
        assert!(!better(&v, &v, &goals));
    }

    #[test]
    fn zitzler_single_goal_gap_breaks_symmetry() {
        let goals = GoalSpec::full();
        let a = [0.2, 0.5, 0.5, 0.1];
        let b = [0.2, 0.5, 0.5, 0.4];
        assert!(
            (zitzler_loss(&a, &b, &goals) - zitzler_loss(&b, &a, &goals)).abs() > 0.0
        );
        assert!(better(&a, &b, &goals));
    }

    #[test]
    fn preference_antisymmetry_and_pareto_consistency() {
        let goals = GoalSpec::tuning();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut dominated_pairs = 0;
        for _ in 0..10_000 {
            let a: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            assert!(!(better(&a, &b, &goals) && better(&b, &a, &goals)));
            if boolean_dominates(&a, &b, &goals) {
                dominated_pairs += 1;
                assert!(!better(&b, &a, &goals));
                assert!(better(&a, &b, &goals));
            }
        }
        assert!(dominated_pairs > 100, "fixture produced too few dominated pairs");
    }

    #[test]
    fn boolean_domination_examples() {
        let goals = GoalSpec::tuning();
        let a = [0.5, 0.5, 0.5];
        assert!(!boolean_dominates(&a, &a, &goals));
        let b = [0.5, 0.6, 0.5]; // better pred40, equal elsewhere
        assert!(boolean_dominates(&b, &a, &goals));
        let c = [0.4, 0.4, 0.5]; // better mre, worse pred40
        assert!(!boolean_dominates(&c, &a, &goals));
    }

    fn fake_pool(vectors: &[Vec<f64>]) -> Vec<(Candidate, Vec<f64>)> {
        let s = default_space();
        vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (s.candidate_from_id(i as u64), v.clone()))
            .collect()
    }

    #[test]
    fn d2h_singleton_and_strict_order() {
        let goals = GoalSpec::tuning();
        let one = fake_pool(&[vec![0.1, 0.9, 50.0]]);
        assert_eq!(rank_d2h(&one, &goals)[0].1, 0.0);

        // strictly ordered on every goal: ranking is forced
        let four = fake_pool(&[
            vec![0.4, 0.2, 10.0],
            vec![0.1, 0.9, 90.0],
            vec![0.3, 0.5, 40.0],
            vec![0.2, 0.7, 70.0],
        ]);
        let ranked = rank_d2h(&four, &goals);
        let d2hs: Vec<f64> = ranked.iter().map(|(_, d)| *d).collect();
        assert_eq!(d2hs, vec![0.0, 0.25, 0.5, 0.75]);
        // best is the Pareto-dominant vector (pool id 1)
        assert_eq!(ranked[0].0.id(), 1);
    }

    #[test]
    fn d2h_tie_is_deterministic_by_id() {
        let goals = GoalSpec::tuning();
        let two = fake_pool(&[vec![0.2, 0.5, 30.0], vec![0.2, 0.5, 30.0]]);
        let ranked = rank_d2h(&two, &goals);
        assert_eq!(ranked[0].0.id(), 0);
        assert_eq!(ranked[0].1, 0.0);
        assert_eq!(ranked[1].1, 0.5);
    }

    #[test]
    fn d2h_range_and_unique_zero() {
        let goals = GoalSpec::tuning();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vecs: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let ranked = rank_d2h(&fake_pool(&vecs), &goals);
        let zeros = ranked.iter().filter(|(_, d)| *d == 0.0).count();
        assert_eq!(zeros, 1);
        for (_, d) in &ranked {
            assert!(*d >= 0.0 && *d <= 39.0 / 40.0);
        }
    }

    #[test]
    fn rank_order_invariant_to_affine_goal_rescaling() {
        let goals = GoalSpec::tuning();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let vecs: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let base: Vec<u64> = rank_d2h(&fake_pool(&vecs), &goals)
            .iter()
            .map(|(c, _)| c.id())
            .collect();
        // rescale the sa goal by 1000x and shift it
        let scaled: Vec<Vec<f64>> = vecs
            .iter()
            .map(|v| vec![v[0], v[1], v[2] * 1000.0 - 77.0])
            .collect();
        let after: Vec<u64> = rank_d2h(&fake_pool(&scaled), &goals)
            .iter()
            .map(|(c, _)| c.id())
            .collect();
        assert_eq!(base, after);
    }
}
