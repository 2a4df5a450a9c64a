//! Turning candidates into scores: train/test the forest over a series'
//! rolling splits, cache results persistently, and keep the two evaluation
//! counters apart (`e` for optimizer-requested inference, `e_plus` for
//! post-hoc certification).
//!
//! Budget charging is run-local: the first time a run requests a candidate it
//! is charged, repeats within the run are free, and the shared cache only
//! saves compute. This keeps reported budgets a property of the algorithm
//! rather than of cache warmth or scheduling.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use crate::data::{naive_guesses, ProjectSeries, Target, TrainTestSplit};
use crate::error::EvalError;
use crate::forest::{fit, ForestParams};
use crate::objectives::{
    better, mre, mre_window, pred40, sa, GoalBounds, GoalSpec, Objectives,
};
use crate::space::{Candidate, ConfigSpace};

/// Which counter an evaluation request is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    /// Requested by the optimizer while searching.
    Inference,
    /// Requested afterwards, only to score or compare finished runs.
    Certification,
}

/// Snapshot of the two evaluation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalBudget {
    pub e: u64,
    pub e_plus: u64,
}

/// One scored candidate, as stored by certification.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub candidate_id: u64,
    pub dataset_id: String,
    pub target_id: String,
    pub objectives: Objectives,
    pub wall_time: f64,
}

/// Anything that can score a candidate with the three tuning goals
/// (mre, pred40, sa).
pub trait Objective: Sync {
    fn dataset_id(&self) -> &str;
    fn target_id(&self) -> &str;
    fn compute(&self, c: &Candidate) -> Result<Vec<f64>, EvalError>;
}

/// The real thing: fit the forest on every rolling training prefix, predict
/// the held-out months, and aggregate the window metrics.
pub struct HealthObjective<'a> {
    space: &'a ConfigSpace,
    dataset_id: String,
    target: Target,
    splits: Vec<TrainTestSplit>,
    eval_seed: u64,
    // per-month covariates and target values, extracted once
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl<'a> HealthObjective<'a> {
    /// `eval_seed` is part of the cache key; learner randomness derives from
    /// it and the candidate id only, so results are shared across repeats.
    pub fn new(
        space: &'a ConfigSpace,
        series: &ProjectSeries,
        target: Target,
        splits: Vec<TrainTestSplit>,
        eval_seed: u64,
    ) -> Self {
        assert!(!splits.is_empty(), "objective needs at least one split");
        let features = (0..series.len()).map(|r| series.features(r, target)).collect();
        Self {
            space,
            dataset_id: series.project_id.clone(),
            target,
            splits,
            eval_seed,
            features,
            targets: series.target_values(target),
        }
    }
}

impl Objective for HealthObjective<'_> {
    fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    fn target_id(&self) -> &str {
        self.target.name()
    }

    fn compute(&self, c: &Candidate) -> Result<Vec<f64>, EvalError> {
        let params = ForestParams::from_candidate(c, self.space);
        let mut mres = Vec::with_capacity(self.splits.len());
        let mut preds = Vec::with_capacity(self.splits.len());
        let mut actuals = Vec::with_capacity(self.splits.len());
        let mut guesses = Vec::with_capacity(self.splits.len());
        for (i, split) in self.splits.iter().enumerate() {
            let x = &self.features[..split.train_len];
            let y = &self.targets[..split.train_len];
            let seed = mix_seed(&[self.eval_seed, c.id(), i as u64]);
            let model = fit(&params, x, y, seed).map_err(|e| EvalError::Failed {
                candidate: c.id(),
                reason: e.to_string(),
            })?;
            let pred = model
                .predict(std::slice::from_ref(&self.features[split.test_row]))
                .map_err(|e| EvalError::Failed {
                    candidate: c.id(),
                    reason: e.to_string(),
                })?[0];
            let actual = self.targets[split.test_row];
            mres.push(mre(actual, pred));
            preds.push(pred);
            actuals.push(actual);
            guesses.push(naive_guesses(y, 1)[0]);
        }
        let m = mre_window(&mres).expect("splits are non-empty");
        let p = pred40(&mres).expect("splits are non-empty");
        let s = sa(&preds, &actuals, &guesses);
        Ok(vec![m, p, s])
    }
}

#[derive(Debug, Clone, Copy)]
struct CacheEntry {
    goals: [f64; 3],
    wall: f64,
}

/// Append-only persistent cache of evaluation results, shared between runs.
/// One tab-delimited record per line; a corrupt tail is truncated on load.
pub struct EvalCache {
    map: Mutex<HashMap<u64, CacheEntry>>,
    file: Mutex<Option<File>>,
    path: Option<PathBuf>,
}

impl EvalCache {
    /// Cache with no backing file.
    pub fn in_memory() -> Self {
        Self {
            map: Mutex::new(HashMap::new()),
            file: Mutex::new(None),
            path: None,
        }
    }

    /// Open (or create) a cache file, loading every intact record.
    pub fn open(path: &Path) -> Result<Self, EvalError> {
        let cache_err = |reason: String| EvalError::Cache {
            path: path.display().to_string(),
            reason,
        };
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| cache_err(e.to_string()))?;
            }
        }
        let mut map = HashMap::new();
        let mut valid_bytes: u64 = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| cache_err(e.to_string()))?);
            for line in reader.lines() {
                let line = line.map_err(|e| cache_err(e.to_string()))?;
                match parse_cache_line(&line) {
                    Some((key, entry)) => {
                        map.insert(key, entry);
                        valid_bytes += line.len() as u64 + 1;
                    }
                    None => break, // corrupt tail: keep the valid prefix only
                }
            }
            let actual = std::fs::metadata(path).map_err(|e| cache_err(e.to_string()))?.len();
            if valid_bytes < actual {
                let f = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(|e| cache_err(e.to_string()))?;
                f.set_len(valid_bytes).map_err(|e| cache_err(e.to_string()))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| cache_err(e.to_string()))?;
        Ok(Self {
            map: Mutex::new(map),
            file: Mutex::new(Some(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn get(&self, key: u64) -> Option<CacheEntry> {
        self.map.lock().unwrap().get(&key).copied()
    }

    fn put(&self, key: u64, entry: CacheEntry, line: &str) {
        self.map.lock().unwrap().insert(key, entry);
        let mut file = self.file.lock().unwrap();
        if let Some(f) = file.as_mut() {
            // a failed write only loses persistence, never correctness
            let _ = writeln!(f, "{line}");
            let _ = f.flush();
        }
    }
}

fn parse_cache_line(line: &str) -> Option<(u64, CacheEntry)> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != 9 {
        return None;
    }
    let stored_key = u64::from_str_radix(parts[0], 16).ok()?;
    let expect = cache_key(parts[2], parts[3], parts[4].parse().ok()?, parts[1]);
    if expect != stored_key {
        return None; // integrity check failed
    }
    let goals = [
        parts[5].parse().ok()?,
        parts[6].parse().ok()?,
        parts[7].parse().ok()?,
    ];
    let wall = parts[8].parse().ok()?;
    Some((stored_key, CacheEntry { goals, wall }))
}

fn format_cache_line(
    key: u64,
    values: &str,
    ds: &str,
    target: &str,
    seed: u64,
    entry: &CacheEntry,
) -> String {
    format!(
        "{key:016x}\t{values}\t{ds}\t{target}\t{seed}\t{}\t{}\t{}\t{}",
        entry.goals[0], entry.goals[1], entry.goals[2], entry.wall
    )
}

/// FNV-1a over the identifying fields of one evaluation.
fn cache_key(ds: &str, target: &str, seed: u64, values: &str) -> u64 {
    let mut h = fnv1a(ds.as_bytes());
    h = fnv1a_continue(h, &[0x1f]);
    h = fnv1a_continue(h, target.as_bytes());
    h = fnv1a_continue(h, &[0x1f]);
    h = fnv1a_continue(h, &seed.to_le_bytes());
    h = fnv1a_continue(h, &[0x1f]);
    fnv1a_continue(h, values.as_bytes())
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_continue(0xcbf2_9ce4_8422_2325, bytes)
}

fn fnv1a_continue(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically fold several seed parts into one.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// One optimizer run's view of the evaluation machinery: the objective, the
/// shared cache, and this run's own budget and evaluated pool.
pub struct EvalSession<'a> {
    objective: &'a dyn Objective,
    cache: &'a EvalCache,
    eval_seed: u64,
    budget: EvalBudget,
    seen: HashMap<u64, usize>,
    evaluated: Vec<(Candidate, Vec<f64>)>,
    wall_times: Vec<f64>,
    requests: u64,
}

impl<'a> EvalSession<'a> {
    pub fn new(objective: &'a dyn Objective, cache: &'a EvalCache, eval_seed: u64) -> Self {
        Self {
            objective,
            cache,
            eval_seed,
            budget: EvalBudget::default(),
            seen: HashMap::new(),
            evaluated: Vec::new(),
            wall_times: Vec::new(),
            requests: 0,
        }
    }

    /// Score a candidate. The first request in this run is charged to the
    /// given counter; later requests are free. Results come from the shared
    /// cache when available, otherwise they are computed and cached.
    pub fn eval(&mut self, c: &Candidate, charge: Charge) -> Result<Vec<f64>, EvalError> {
        self.requests += 1;
        if let Some(&i) = self.seen.get(&c.id()) {
            return Ok(self.evaluated[i].1.clone());
        }
        match charge {
            Charge::Inference => self.budget.e += 1,
            Charge::Certification => self.budget.e_plus += 1,
        }
        let values = c.index_key();
        let key = cache_key(
            self.objective.dataset_id(),
            self.objective.target_id(),
            self.eval_seed,
            &values,
        );
        let entry = match self.cache.get(key) {
            Some(entry) => entry,
            None => {
                let start = Instant::now();
                let goals = self.objective.compute(c)?;
                assert_eq!(goals.len(), 3, "objective must produce [mre, pred40, sa]");
                let entry = CacheEntry {
                    goals: [goals[0], goals[1], goals[2]],
                    wall: start.elapsed().as_secs_f64(),
                };
                let line = format_cache_line(
                    key,
                    &values,
                    self.objective.dataset_id(),
                    self.objective.target_id(),
                    self.eval_seed,
                    &entry,
                );
                self.cache.put(key, entry, &line);
                entry
            }
        };
        self.seen.insert(c.id(), self.evaluated.len());
        self.evaluated.push((c.clone(), entry.goals.to_vec()));
        self.wall_times.push(entry.wall);
        Ok(entry.goals.to_vec())
    }

    /// Score every candidate on the certification counter and return records.
    pub fn certify(&mut self, candidates: &[Candidate]) -> Result<Vec<EvalRecord>, EvalError> {
        let mut out = Vec::with_capacity(candidates.len());
        for c in candidates {
            let goals = self.eval(c, Charge::Certification)?;
            let idx = self.seen[&c.id()];
            out.push(EvalRecord {
                candidate_id: c.id(),
                dataset_id: self.objective.dataset_id().to_string(),
                target_id: self.objective.target_id().to_string(),
                objectives: Objectives {
                    mre: goals[0],
                    pred40: goals[1],
                    sa: goals[2],
                    d2h: None,
                },
                wall_time: self.wall_times[idx],
            });
        }
        Ok(out)
    }

    /// Has this run already requested (and paid for) this candidate?
    pub fn is_seen(&self, c: &Candidate) -> bool {
        self.seen.contains_key(&c.id())
    }

    pub fn budget(&self) -> EvalBudget {
        self.budget
    }

    /// Total eval() calls, including free repeats (instrumentation).
    pub fn requests(&self) -> u64 {
        self.requests
    }

    /// Everything this run evaluated, in first-request order. This is the
    /// comparison pool that preference queries normalize over.
    pub fn evaluated(&self) -> &[(Candidate, Vec<f64>)] {
        &self.evaluated
    }

    /// Zitzler preference between two raw goal vectors, normalized over this
    /// run's evaluated pool.
    pub fn prefer(&self, a: &[f64], b: &[f64], goals: &GoalSpec) -> bool {
        let bounds = GoalBounds::from_vectors(self.evaluated.iter().map(|(_, v)| v.as_slice()));
        better(&bounds.norm(a), &bounds.norm(b), goals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_splits, generate_fixture, HORIZON};
    use crate::space::default_space;

    struct Synthetic {
        ds: String,
    }

    impl Objective for Synthetic {
        fn dataset_id(&self) -> &str {
            &self.ds
        }
        fn target_id(&self) -> &str {
            "commits"
        }
        fn compute(&self, c: &Candidate) -> Result<Vec<f64>, EvalError> {
            let x = c.id() as f64;
            Ok(vec![x % 7.0, (x % 3.0) / 3.0, 50.0 - x % 11.0])
        }
    }

    #[test]
    fn repeat_requests_charge_once() {
        let cache = EvalCache::in_memory();
        let obj = Synthetic { ds: "d".into() };
        let mut s = EvalSession::new(&obj, &cache, 1);
        let space = default_space();
        let c = space.candidate(vec![1, 2, 3, 4, 0]);
        let a = s.eval(&c, Charge::Inference).unwrap();
        let b = s.eval(&c, Charge::Inference).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.budget(), EvalBudget { e: 1, e_plus: 0 });
        assert_eq!(s.requests(), 2);
    }

    #[test]
    fn certification_routes_to_e_plus() {
        let cache = EvalCache::in_memory();
        let obj = Synthetic { ds: "d".into() };
        let mut s = EvalSession::new(&obj, &cache, 1);
        let space = default_space();
        let pool = space.sample(100, 3);
        let recs = s.certify(&pool).unwrap();
        assert_eq!(recs.len(), 100);
        assert_eq!(s.budget(), EvalBudget { e: 0, e_plus: 100 });
        // certifying the run's own evaluations is free
        s.certify(&pool).unwrap();
        assert_eq!(s.budget(), EvalBudget { e: 0, e_plus: 100 });
    }

    #[test]
    fn budgets_are_run_local_even_with_a_warm_cache() {
        let cache = EvalCache::in_memory();
        let obj = Synthetic { ds: "d".into() };
        let space = default_space();
        let c = space.candidate(vec![0, 0, 0, 0, 0]);
        let mut first = EvalSession::new(&obj, &cache, 1);
        first.eval(&c, Charge::Inference).unwrap();
        // a second run pays its own budget even though the cache is warm
        let mut second = EvalSession::new(&obj, &cache, 1);
        second.eval(&c, Charge::Inference).unwrap();
        assert_eq!(second.budget().e, 1);
    }

    #[test]
    fn distinct_eval_seeds_have_distinct_keys() {
        let space = default_space();
        let fixture = generate_fixture(36, 1);
        let splits = build_splits(&fixture, Target::Commits, HORIZON).unwrap();
        let cache = EvalCache::in_memory();
        let c = space.candidate(vec![0, 0, 0, 0, 0]);
        for seed in [1u64, 2] {
            let obj = HealthObjective::new(&space, &fixture, Target::Commits, splits.clone(), seed);
            let mut s = EvalSession::new(&obj, &cache, seed);
            s.eval(&c, Charge::Inference).unwrap();
            assert_eq!(s.budget().e, 1);
        }
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn health_objective_is_deterministic() {
        let space = default_space();
        let fixture = generate_fixture(40, 7);
        let splits = build_splits(&fixture, Target::ClosedIssues, HORIZON).unwrap();
        let obj = HealthObjective::new(&space, &fixture, Target::ClosedIssues, splits, 5);
        let c = space.candidate(vec![3, 4, 2, 6, 1]);
        let a = obj.compute(&c).unwrap();
        let b = obj.compute(&c).unwrap();
        assert_eq!(a, b);
        assert!(a[0] >= 0.0);
        assert!((0.0..=1.0).contains(&a[1]));
        assert!(a[2] <= 100.0);
    }

    #[test]
    fn constant_training_targets_score_sa_zero() {
        // While the training region is constant the forest and the naive
        // guess predict the same value, so their errors cancel exactly.
        let mut fixture = generate_fixture(36, 2);
        for row in fixture.counts.iter_mut().take(24) {
            row[0] = 9; // commits constant over every training prefix
        }
        for (i, row) in fixture.counts.iter_mut().enumerate().skip(24) {
            row[0] = 9 + i as u32 % 5;
        }
        let space = default_space();
        let splits = build_splits(&fixture, Target::Commits, HORIZON).unwrap();
        assert!(splits.iter().all(|s| s.train_len <= 24));
        let obj = HealthObjective::new(&space, &fixture, Target::Commits, splits, 3);
        let goals = obj.compute(&space.candidate(vec![0, 0, 0, 0, 0])).unwrap();
        assert!(goals[2].abs() < 1e-9, "sa = {}", goals[2]);
    }

    #[test]
    fn cache_persists_and_truncates_corrupt_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let obj = Synthetic { ds: "d".into() };
        let space = default_space();
        let pool = space.sample(10, 9);
        {
            let cache = EvalCache::open(&path).unwrap();
            let mut s = EvalSession::new(&obj, &cache, 1);
            for c in &pool {
                s.eval(c, Charge::Inference).unwrap();
            }
            assert_eq!(cache.len(), 10);
        }
        // append garbage, then reload
        {
            use std::io::Write as _;
            let mut f = OpenOptions::new().append(true).open(&path).unwrap();
            writeln!(f, "not a record at all").unwrap();
        }
        let cache = EvalCache::open(&path).unwrap();
        assert_eq!(cache.len(), 10);
        // the corrupt tail is gone from disk too
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 10);
        // warm cache serves without recompute but still charges this run
        let mut s = EvalSession::new(&obj, &cache, 1);
        for c in &pool {
            s.eval(c, Charge::Inference).unwrap();
        }
        assert_eq!(s.budget().e, 10);
        assert_eq!(cache.len(), 10);
    }
}
