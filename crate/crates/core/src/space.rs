//! Hyperparameter search-space definition: gridded numeric ranges and
//! categorical choices, with uniform sampling and strided enumeration.
//!
//! Every candidate lives *on* the grid: values are stored as one grid index
//! per parameter, so distance and entropy computations elsewhere operate on a
//! finite symbol alphabet per column.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::SpaceError;

/// The kind of one tunable parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    /// Integer range `min..=max` stepped by `step`.
    IntRange { min: i64, max: i64, step: i64 },
    /// Real range `min..=max` stepped by `step`.
    RealRange { min: f64, max: f64, step: f64 },
    /// Ordered set of symbols.
    Categorical { choices: Vec<String> },
}

/// One tunable parameter: a name plus its gridded domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

/// A concrete value decoded from a grid index.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Cat(v) => write!(f, "{v}"),
        }
    }
}

impl ParamSpec {
    pub fn int_range(name: &str, min: i64, max: i64, step: i64) -> Result<Self, SpaceError> {
        if min > max || step <= 0 {
            return Err(SpaceError::BadParam {
                name: name.to_string(),
                reason: format!("invalid range [{min}, {max}] step {step}"),
            });
        }
        Ok(Self {
            name: name.to_string(),
            kind: ParamKind::IntRange { min, max, step },
        })
    }

    pub fn real_range(name: &str, min: f64, max: f64, step: f64) -> Result<Self, SpaceError> {
        if !min.is_finite() || !max.is_finite() || !step.is_finite() || min > max || step <= 0.0 {
            return Err(SpaceError::BadParam {
                name: name.to_string(),
                reason: format!("invalid range [{min}, {max}] step {step}"),
            });
        }
        Ok(Self {
            name: name.to_string(),
            kind: ParamKind::RealRange { min, max, step },
        })
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Result<Self, SpaceError> {
        if choices.is_empty() {
            return Err(SpaceError::BadParam {
                name: name.to_string(),
                reason: "empty choice list".to_string(),
            });
        }
        for (i, a) in choices.iter().enumerate() {
            if choices[..i].contains(a) {
                return Err(SpaceError::BadParam {
                    name: name.to_string(),
                    reason: format!("duplicate choice `{a}`"),
                });
            }
        }
        Ok(Self {
            name: name.to_string(),
            kind: ParamKind::Categorical {
                choices: choices.iter().map(|s| s.to_string()).collect(),
            },
        })
    }

    /// Number of grid points: `floor((max - min) / step) + 1` for ranges,
    /// `|choices|` for categoricals.
    pub fn grid_size(&self) -> usize {
        match &self.kind {
            ParamKind::IntRange { min, max, step } => ((max - min) / step) as usize + 1,
            ParamKind::RealRange { min, max, step } => ((max - min) / step).floor() as usize + 1,
            ParamKind::Categorical { choices } => choices.len(),
        }
    }

    /// Decode a grid index to its concrete value.
    pub fn value_at(&self, index: usize) -> ParamValue {
        debug_assert!(index < self.grid_size());
        match &self.kind {
            ParamKind::IntRange { min, step, .. } => ParamValue::Int(min + step * index as i64),
            ParamKind::RealRange { min, step, .. } => ParamValue::Real(min + step * index as f64),
            ParamKind::Categorical { choices } => ParamValue::Cat(choices[index].clone()),
        }
    }

    /// True for numeric (gridded range) parameters.
    pub fn is_numeric(&self) -> bool {
        !matches!(self.kind, ParamKind::Categorical { .. })
    }
}

/// An ordered collection of parameters; the full grid is their cross product.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    params: Vec<ParamSpec>,
}

/// One configuration: a grid index per parameter plus a stable id.
///
/// The id is the candidate's mixed-radix rank in the grid's lexicographic
/// enumeration, which makes it a perfect (collision-free) hash of the values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Candidate {
    indices: Vec<u32>,
    id: u64,
}

impl Candidate {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Grid indices as a compact comma-separated string (cache/file format).
    pub fn index_key(&self) -> String {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        parts.join(",")
    }
}

impl ConfigSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        if params.is_empty() {
            return Err(SpaceError::Empty);
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of grid points (product of per-parameter grid sizes).
    pub fn cardinality(&self) -> u64 {
        self.params.iter().map(|p| p.grid_size() as u64).product()
    }

    /// Build a candidate from per-parameter grid indices.
    ///
    /// Panics if the index vector does not match this space; candidates are
    /// only ever constructed through the space that owns them.
    pub fn candidate(&self, indices: Vec<u32>) -> Candidate {
        assert_eq!(indices.len(), self.params.len(), "index arity mismatch");
        for (i, p) in self.params.iter().enumerate() {
            assert!(
                (indices[i] as usize) < p.grid_size(),
                "index {} out of range for `{}`",
                indices[i],
                p.name
            );
        }
        let id = self.rank(&indices);
        Candidate { indices, id }
    }

    /// Mixed-radix rank of an index vector (first parameter most significant).
    fn rank(&self, indices: &[u32]) -> u64 {
        let mut r: u64 = 0;
        for (i, p) in self.params.iter().enumerate() {
            r = r * p.grid_size() as u64 + indices[i] as u64;
        }
        r
    }

    /// Inverse of [`Candidate::id`]: rebuild the candidate from its rank.
    pub fn candidate_from_id(&self, id: u64) -> Candidate {
        let mut rem = id;
        let mut indices = vec![0u32; self.params.len()];
        for (i, p) in self.params.iter().enumerate().rev() {
            let g = p.grid_size() as u64;
            indices[i] = (rem % g) as u32;
            rem /= g;
        }
        debug_assert_eq!(rem, 0, "id {id} out of range");
        Candidate { indices, id }
    }

    /// Decode a candidate to concrete values, one per parameter.
    pub fn decode(&self, c: &Candidate) -> Vec<ParamValue> {
        self.params
            .iter()
            .zip(&c.indices)
            .map(|(p, &i)| p.value_at(i as usize))
            .collect()
    }

    /// `n` uniform draws from the grid (with replacement), deduplicated by id
    /// in draw order. Deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Candidate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let indices: Vec<u32> = self
                .params
                .iter()
                .map(|p| rng.random_range(0..p.grid_size() as u32))
                .collect();
            let c = self.candidate(indices);
            if seen.insert(c.id) {
                out.push(c);
            }
        }
        out
    }

    /// Lazily enumerate the cross product of every `stride`-th grid point per
    /// parameter, in lexicographic order.
    pub fn enumerate(&self, strides: &[usize]) -> GridIter<'_> {
        assert_eq!(strides.len(), self.params.len(), "stride arity mismatch");
        assert!(strides.iter().all(|&s| s >= 1), "strides must be >= 1");
        GridIter {
            space: self,
            strides: strides.to_vec(),
            cursor: vec![0; self.params.len()],
            done: false,
        }
    }

    /// Number of candidates [`ConfigSpace::enumerate`] will yield:
    /// the product of `ceil(grid_size / stride)` over parameters.
    pub fn enumerate_len(&self, strides: &[usize]) -> u64 {
        self.params
            .iter()
            .zip(strides)
            .map(|(p, &s)| p.grid_size().div_ceil(s) as u64)
            .product()
    }

    /// Load a space from a plain-text key-value file: one `[section]` per
    /// parameter with `kind`, then `min`/`max`/`step` or `choices`.
    pub fn from_file(path: &Path) -> Result<Self, SpaceError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpaceError::BadFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_str_pretty(&text).map_err(|reason| SpaceError::BadFile {
            path: path.display().to_string(),
            reason,
        })
    }

    fn from_str_pretty(text: &str) -> Result<Self, String> {
        struct Section {
            name: String,
            kv: Vec<(String, String)>,
        }
        let mut sections: Vec<Section> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                sections.push(Section {
                    name: name.trim().to_string(),
                    kv: Vec::new(),
                });
            } else if let Some((k, v)) = line.split_once('=') {
                let sec = sections
                    .last_mut()
                    .ok_or_else(|| format!("line {}: key before any [section]", lineno + 1))?;
                sec.kv.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(format!("line {}: expected `key = value`", lineno + 1));
            }
        }
        let mut params = Vec::new();
        for sec in sections {
            let get = |k: &str| -> Option<&str> {
                sec.kv.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str())
            };
            let kind = get("kind").ok_or(format!("[{}]: missing `kind`", sec.name))?;
            let spec = match kind {
                "int" => {
                    let min = parse_num::<i64>(&sec.name, get("min"))?;
                    let max = parse_num::<i64>(&sec.name, get("max"))?;
                    let step = parse_num::<i64>(&sec.name, get("step"))?;
                    ParamSpec::int_range(&sec.name, min, max, step).map_err(|e| e.to_string())?
                }
                "real" => {
                    let min = parse_num::<f64>(&sec.name, get("min"))?;
                    let max = parse_num::<f64>(&sec.name, get("max"))?;
                    let step = parse_num::<f64>(&sec.name, get("step"))?;
                    ParamSpec::real_range(&sec.name, min, max, step).map_err(|e| e.to_string())?
                }
                "categorical" => {
                    let raw = get("choices").ok_or(format!("[{}]: missing `choices`", sec.name))?;
                    let choices: Vec<&str> = raw.split(',').map(|c| c.trim()).collect();
                    ParamSpec::categorical(&sec.name, &choices).map_err(|e| e.to_string())?
                }
                other => return Err(format!("[{}]: unknown kind `{other}`", sec.name)),
            };
            params.push(spec);
        }
        Self::new(params).map_err(|e| e.to_string())
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, v: Option<&str>) -> Result<T, String> {
    let v = v.ok_or(format!("[{section}]: missing numeric field"))?;
    v.parse()
        .map_err(|_| format!("[{section}]: bad number `{v}`"))
}

/// Lazy lexicographic iterator over a strided grid.
pub struct GridIter<'a> {
    space: &'a ConfigSpace,
    strides: Vec<usize>,
    cursor: Vec<u32>,
    done: bool,
}

impl Iterator for GridIter<'_> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if self.done {
            return None;
        }
        let item = self.space.candidate(self.cursor.clone());
        // Advance the rightmost digit, carrying left.
        for i in (0..self.cursor.len()).rev() {
            let g = self.space.params[i].grid_size();
            let next = self.cursor[i] as usize + self.strides[i];
            if next < g {
                self.cursor[i] = next as u32;
                return Some(item);
            }
            self.cursor[i] = 0;
        }
        self.done = true;
        Some(item)
    }
}

/// Index of the criterion parameter in [`default_space`].
pub const CRITERION_PARAM: usize = 4;

/// The tuning grid for ensembles of regression trees: forest size, leaf size,
/// split admission threshold, depth cap, and split criterion.
pub fn default_space() -> ConfigSpace {
    ConfigSpace::new(vec![
        ParamSpec::int_range("n_estimators", 10, 200, 10).unwrap(),
        ParamSpec::int_range("min_sample_leaves", 1, 20, 1).unwrap(),
        ParamSpec::real_range("min_impurity_decrease", 0.0, 10.0, 0.25).unwrap(),
        ParamSpec::int_range("max_depth", 1, 20, 1).unwrap(),
        ParamSpec::categorical("criterion", &["squared", "absolute", "poisson"]).unwrap(),
    ])
    .unwrap()
}

/// Off-the-shelf forest configuration (no tuning): 100 trees, leaves of 1,
/// no split threshold, full depth, squared error.
pub fn default_candidate(space: &ConfigSpace) -> Candidate {
    assert_eq!(space.len(), 5, "default candidate is for the built-in space");
    space.candidate(vec![9, 0, 0, 19, 0])
}
