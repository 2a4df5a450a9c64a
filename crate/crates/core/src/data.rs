//! Monthly project-health series: CSV ingestion, rolling train/test splits
//! for 12-month-ahead prediction, and the naive median-of-past guesses that
//! anchor standardized accuracy.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::objectives::median;

/// Indicator column names, in canonical order (the date column comes first
/// in files but is not an indicator).
pub const INDICATORS: [&str; 14] = [
    "commits",
    "commit_comments",
    "contributors",
    "open_prs",
    "closed_prs",
    "merged_prs",
    "pr_mergers",
    "pr_comments",
    "open_issues",
    "closed_issues",
    "issue_comments",
    "stargazers",
    "forks",
    "watchers",
];

/// Prediction horizon in months.
pub const HORIZON: usize = 12;

/// Shortest training prefix a split may use.
pub const MIN_TRAIN: usize = 12;

/// The three health indicators used as prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Commits,
    ClosedPrs,
    ClosedIssues,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Commits, Target::ClosedPrs, Target::ClosedIssues];

    pub fn name(&self) -> &'static str {
        match self {
            Target::Commits => "commits",
            Target::ClosedPrs => "closed_prs",
            Target::ClosedIssues => "closed_issues",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DataError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "commits" => Ok(Target::Commits),
            "closed_prs" => Ok(Target::ClosedPrs),
            "closed_issues" => Ok(Target::ClosedIssues),
            other => Err(DataError::UnknownTarget(other.to_string())),
        }
    }

    /// Index of this target within [`INDICATORS`].
    pub fn column(&self) -> usize {
        match self {
            Target::Commits => 0,
            Target::ClosedPrs => 4,
            Target::ClosedIssues => 9,
        }
    }
}

/// A calendar month, for gap and duplicate checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Month {
    pub year: i32,
    pub month: u8,
}

impl Month {
    fn parse(s: &str) -> Option<Month> {
        // ISO year-month, with or without a day part
        let mut it = s.trim().splitn(3, '-');
        let year: i32 = it.next()?.parse().ok()?;
        let month: u8 = it.next()?.parse().ok()?;
        if (1..=12).contains(&month) {
            Some(Month { year, month })
        } else {
            None
        }
    }

    fn next(&self) -> Month {
        if self.month == 12 {
            Month {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Month {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    fn format(&self) -> String {
        format!("{:04}-{:02}", self.year, self.month)
    }
}

/// One project's monthly history: strictly consecutive months, each with the
/// fourteen activity counts.
#[derive(Debug, Clone)]
pub struct ProjectSeries {
    pub project_id: String,
    pub months: Vec<Month>,
    /// `counts[row][indicator]`, indexed per [`INDICATORS`].
    pub counts: Vec<[u32; 14]>,
}

impl ProjectSeries {
    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    /// Target values of every month, as reals.
    pub fn target_values(&self, target: Target) -> Vec<f64> {
        let col = target.column();
        self.counts.iter().map(|row| row[col] as f64).collect()
    }

    /// Feature vector of one month: the 13 non-target indicators.
    pub fn features(&self, row: usize, target: Target) -> Vec<f64> {
        let skip = target.column();
        self.counts[row]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, &v)| v as f64)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for name in INDICATORS {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (m, row) in self.months.iter().zip(&self.counts) {
            out.push_str(&m.format());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// One rolling split: train on the first `train_len` rows, test on the
/// single month at `test_row` (12 months past the end of the prefix).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainTestSplit {
    pub train_len: usize,
    /// 0-based row index of the predicted month.
    pub test_row: usize,
    pub target: Target,
    pub horizon: usize,
}

/// Load and validate a series from a CSV file with the 15 schema columns
/// (case-insensitive header names, any column order).
pub fn load_series(path: &Path) -> Result<ProjectSeries, DataError> {
    let pathstr = path.display().to_string();
    let io_err = |e: csv::Error| DataError::Io {
        path: pathstr.clone(),
        reason: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io_err)?;

    let headers = reader.headers().map_err(io_err)?.clone();
    let find = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| DataError::MissingColumn {
                path: pathstr.clone(),
                column: name.to_string(),
            })
    };
    let date_col = find("date")?;
    let mut cols = [0usize; 14];
    for (i, name) in INDICATORS.iter().enumerate() {
        cols[i] = find(name)?;
    }

    let mut months = Vec::new();
    let mut counts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let rownum = i + 2; // header is row 1
        let record = record.map_err(io_err)?;
        let raw_date = record.get(date_col).unwrap_or("");
        let month = Month::parse(raw_date).ok_or_else(|| DataError::BadRow {
            path: pathstr.clone(),
            row: rownum,
            reason: format!("unparseable date `{raw_date}`"),
        })?;
        if let Some(prev) = months.last() {
            if month == *prev {
                return Err(DataError::BadRow {
                    path: pathstr.clone(),
                    row: rownum,
                    reason: format!("duplicate month {}", month.format()),
                });
            }
            if month != prev.next() {
                return Err(DataError::BadRow {
                    path: pathstr.clone(),
                    row: rownum,
                    reason: format!(
                        "months must be consecutive: {} after {}",
                        month.format(),
                        prev.format()
                    ),
                });
            }
        }
        let mut row = [0u32; 14];
        for (k, &col) in cols.iter().enumerate() {
            let raw = record.get(col).unwrap_or("");
            row[k] = raw.parse::<i64>().ok().and_then(|v| {
                if v >= 0 {
                    u32::try_from(v).ok()
                } else {
                    None
                }
            })
            .ok_or_else(|| DataError::BadRow {
                path: pathstr.clone(),
                row: rownum,
                reason: format!("column `{}`: bad count `{raw}`", INDICATORS[k]),
            })?;
        }
        months.push(month);
        counts.push(row);
    }
    if months.is_empty() {
        return Err(DataError::TooShort {
            series: pathstr,
            reason: "no data rows".to_string(),
        });
    }
    let project_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    Ok(ProjectSeries {
        project_id,
        months,
        counts,
    })
}

/// Rolling 12-month-ahead splits: the last `horizon` months are predicted,
/// month `m` (1-based) from the first `m - horizon` rows, keeping only
/// splits with at least [`MIN_TRAIN`] training rows.
///
/// A 40-month series yields 12 splits: prefixes of length 17..=28 predicting
/// months 29..=40.
pub fn build_splits(
    series: &ProjectSeries,
    target: Target,
    horizon: usize,
) -> Result<Vec<TrainTestSplit>, DataError> {
    let l = series.len();
    if l < horizon + 2 {
        return Err(DataError::TooShort {
            series: series.project_id.clone(),
            reason: format!("{l} months < horizon {horizon} + 2"),
        });
    }
    let mut splits = Vec::new();
    for m in (l - horizon + 1)..=l {
        let train_len = m - horizon;
        if train_len < MIN_TRAIN {
            continue;
        }
        splits.push(TrainTestSplit {
            train_len,
            test_row: m - 1,
            target,
            horizon,
        });
    }
    if splits.is_empty() {
        return Err(DataError::TooShort {
            series: series.project_id.clone(),
            reason: format!("no split leaves a training prefix of {MIN_TRAIN} months"),
        });
    }
    Ok(splits)
}

/// Naive baseline: every test month is guessed as the median of the target
/// values visible at training time. Test-period actuals are never read.
pub fn naive_guesses(train_targets: &[f64], n_test: usize) -> Vec<f64> {
    assert!(!train_targets.is_empty(), "empty training window");
    vec![median(train_targets); n_test]
}

/// Generate a deterministic synthetic series: a smooth latent activity level
/// drives all indicators, targets are cross-sectional functions of the other
/// columns, and occasional bursts inject the heavy tails seen in real
/// project data.
pub fn generate_fixture(n_months: usize, seed: u64) -> ProjectSeries {
    assert!(n_months >= 24, "fixture needs at least 24 months");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut months = Vec::with_capacity(n_months);
    let mut counts = Vec::with_capacity(n_months);
    let mut m = Month {
        year: 2015 + (seed % 5) as i32,
        month: 1,
    };
    // latent activity follows a slow random walk
    let mut level: f64 = 8.0 + rng.random::<f64>() * 10.0;
    let drift: f64 = rng.random::<f64>() * 0.6 - 0.2;
    for t in 0..n_months {
        level = (level + drift + rng.random::<f64>() * 4.0 - 2.0).clamp(2.0, 60.0);
        let season = 1.0 + 0.3 * ((t as f64) * std::f64::consts::TAU / 12.0).sin();
        let act = level * season;
        let burst = if rng.random::<f64>() < 0.12 {
            2.5 + rng.random::<f64>() * 2.0
        } else {
            1.0
        };

        let noisy = |rng: &mut ChaCha8Rng, base: f64| -> u32 {
            let v = base * (0.7 + rng.random::<f64>() * 0.6);
            v.round().max(0.0) as u32
        };
        let contributors = noisy(&mut rng, act * 0.2);
        let open_prs = noisy(&mut rng, act * 0.35);
        let merged_prs = noisy(&mut rng, open_prs as f64 * 0.6);
        let pr_mergers = noisy(&mut rng, (contributors as f64 * 0.5).max(1.0));
        let pr_comments = noisy(&mut rng, open_prs as f64 * 2.0);
        let open_issues = noisy(&mut rng, act * 0.5);
        let issue_comments = noisy(&mut rng, open_issues as f64 * 3.0);
        let commit_comments = noisy(&mut rng, act * 0.4);
        let stargazers = noisy(&mut rng, act * 0.8);
        let forks = noisy(&mut rng, act * 0.3);
        let watchers = noisy(&mut rng, act * 0.1);

        // targets depend on the same-month covariates, plus bursty noise
        let commits =
            ((contributors as f64 * 3.0 + commit_comments as f64 * 0.5) * burst).round() as u32;
        let closed_prs = ((open_prs as f64 * 0.5 + merged_prs as f64 * 0.4)
            * (0.9 + rng.random::<f64>() * 0.2))
            .round() as u32;
        let closed_issues = ((open_issues as f64 * 0.7 + issue_comments as f64 * 0.1) * burst)
            .round() as u32;

        let mut row = [0u32; 14];
        row[0] = commits;
        row[1] = commit_comments;
        row[2] = contributors;
        row[3] = open_prs;
        row[4] = closed_prs;
        row[5] = merged_prs;
        row[6] = pr_mergers;
        row[7] = pr_comments;
        row[8] = open_issues;
        row[9] = closed_issues;
        row[10] = issue_comments;
        row[11] = stargazers;
        row[12] = forks;
        row[13] = watchers;
        months.push(m);
        counts.push(row);
        m = m.next();
    }
    ProjectSeries {
        project_id: format!("fixture-{seed}-{n_months}"),
        months,
        counts,
    }
}
