//! Run execution and report aggregation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nisneak::baselines::BaselineParams;
use nisneak::data::{build_splits, load_series, ProjectSeries, Target, HORIZON};
use nisneak::eval::{fnv1a, mix_seed, EvalCache, EvalSession, HealthObjective};
use nisneak::objectives::{rank_d2h, GoalSpec};
use nisneak::registry::{run_optimizer, OptimizerKind};
use nisneak::space::{default_space, Candidate, ConfigSpace};
use nisneak::stats::{flat_report, friedman, nemenyi, render_markdown, render_tsv, TreatmentTable};

use crate::plan::Plan;
use crate::CliError;

/// One completed run, as written to `runs.ndjson`. Wall times are kept out
/// so reports are byte-reproducible; timing lives in the cache file and on
/// stderr.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub target: String,
    pub optimizer: String,
    pub repeat: usize,
    pub seed: u64,
    pub candidate_id: u64,
    pub candidate: BTreeMap<String, serde_json::Value>,
    pub mre: f64,
    pub pred40: f64,
    pub sa: f64,
    pub d2h: f64,
    pub e: u64,
    pub e_plus: u64,
}

/// A run that did not complete.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailure {
    pub dataset: String,
    pub target: String,
    pub optimizer: String,
    pub repeat: usize,
    pub error: String,
}

fn candidate_json(c: &Candidate, space: &ConfigSpace) -> BTreeMap<String, serde_json::Value> {
    use nisneak::space::ParamValue;
    space
        .params()
        .iter()
        .zip(space.decode(c))
        .map(|(p, v)| {
            let jv = match v {
                ParamValue::Int(x) => serde_json::json!(x),
                ParamValue::Real(x) => serde_json::json!(x),
                ParamValue::Cat(x) => serde_json::json!(x),
            };
            (p.name.clone(), jv)
        })
        .collect()
}

/// Seed for one run's stochastic search choices. Evaluation seeds stay tied
/// to the global seed alone so results are shared across repeats.
fn run_seed(global_seed: u64, repeat: usize, opt: &str, dataset: &str, target: &str) -> u64 {
    mix_seed(&[
        global_seed,
        repeat as u64,
        fnv1a(opt.as_bytes()),
        fnv1a(dataset.as_bytes()),
        fnv1a(target.as_bytes()),
    ])
}

/// Execute one (dataset, target, optimizer, repeat) cell.
#[allow(clippy::too_many_arguments)]
pub fn run_one(
    space: &ConfigSpace,
    pool: &[Candidate],
    series: &ProjectSeries,
    target: Target,
    kind: OptimizerKind,
    baseline: &BaselineParams,
    global_seed: u64,
    repeat: usize,
    cache: &EvalCache,
) -> Result<RunRecord, String> {
    let goals = GoalSpec::tuning();
    let splits = build_splits(series, target, HORIZON).map_err(|e| e.to_string())?;
    let objective = HealthObjective::new(space, series, target, splits, global_seed);
    let mut session = EvalSession::new(&objective, cache, global_seed);
    let seed = run_seed(
        global_seed,
        repeat,
        &kind.name(),
        &series.project_id,
        target.name(),
    );
    let winner = run_optimizer(kind, pool, space, &mut session, &goals, baseline, seed)
        .map_err(|e| e.to_string())?;
    // score the winner (certification) and rank it against everything this
    // run evaluated
    let rec = session
        .certify(std::slice::from_ref(&winner))
        .map_err(|e| e.to_string())?
        .remove(0);
    let ranked = rank_d2h(session.evaluated(), &goals);
    let d2h = ranked
        .iter()
        .find(|(c, _)| c.id() == winner.id())
        .map(|(_, d)| *d)
        .unwrap_or(0.0);
    let budget = session.budget();
    Ok(RunRecord {
        dataset: series.project_id.clone(),
        target: target.name().to_string(),
        optimizer: kind.name(),
        repeat,
        seed,
        candidate_id: winner.id(),
        candidate: candidate_json(&winner, space),
        mre: rec.objectives.mre,
        pred40: rec.objectives.pred40,
        sa: rec.objectives.sa,
        d2h,
        e: budget.e,
        e_plus: budget.e_plus,
    })
}

pub struct BenchOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

/// The full cross product repeats x targets x datasets x optimizers, fanned
/// out over a bounded worker pool. Partial failures are recorded and do not
/// stop the bench.
pub fn bench(plan: &Plan) -> Result<BenchOutcome, CliError> {
    plan.validate()?;
    let space = match &plan.space_file {
        Some(p) => ConfigSpace::from_file(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => default_space(),
    };
    let mut datasets = Vec::new();
    for path in &plan.datasets {
        let series =
            load_series(path).map_err(|e| CliError::Usage(format!("dataset: {e}")))?;
        datasets.push(series);
    }
    let pool = space.sample(plan.pool_size, mix_seed(&[plan.global_seed, 0x706f_6f6c]));

    std::fs::create_dir_all(&plan.out_dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", plan.out_dir.display())))?;
    let cache = match &plan.cache_path {
        Some(p) => EvalCache::open(p).map_err(|e| CliError::Io(e.to_string()))?,
        None => {
            let p = plan.out_dir.join("cache.tsv");
            EvalCache::open(&p).map_err(|e| CliError::Io(e.to_string()))?
        }
    };

    // deterministic run order: dataset, target, optimizer, repeat
    let mut cells = Vec::new();
    for (di, _) in datasets.iter().enumerate() {
        for &target in &plan.targets {
            for &opt in &plan.optimizers {
                for repeat in 0..plan.repeats {
                    cells.push((di, target, opt, repeat));
                }
            }
        }
    }

    let pool_ref = &pool;
    let space_ref = &space;
    let cache_ref = &cache;
    let datasets_ref = &datasets;
    let worker = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<Result<RunRecord, RunFailure>> = worker.install(|| {
        cells
            .par_iter()
            .map(|&(di, target, opt, repeat)| {
                let series = &datasets_ref[di];
                run_one(
                    space_ref,
                    pool_ref,
                    series,
                    target,
                    opt,
                    &plan.baseline,
                    plan.global_seed,
                    repeat,
                    cache_ref,
                )
                .map_err(|error| RunFailure {
                    dataset: series.project_id.clone(),
                    target: target.name().to_string(),
                    optimizer: opt.name(),
                    repeat,
                    error,
                })
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    Ok(BenchOutcome { records, failures })
}

const METRICS: [(&str, bool); 4] = [
    ("mre", false),
    ("pred40", true),
    ("sa", true),
    ("d2h", false),
];

fn metric_of(rec: &RunRecord, name: &str) -> f64 {
    match name {
        "mre" => rec.mre,
        "pred40" => rec.pred40,
        "sa" => rec.sa,
        "d2h" => rec.d2h,
        _ => unreachable!("unknown metric"),
    }
}

/// Write runs.ndjson, one ranked table per metric (Markdown and TSV), and a
/// machine-readable summary. Returns the number of failures.
pub fn write_reports(
    out_dir: &Path,
    records: &[RunRecord],
    failures: &[RunFailure],
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", out_dir.display())))?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());

    // per-run records
    let mut runs = std::fs::File::create(out_dir.join("runs.ndjson")).map_err(io)?;
    for rec in records {
        let line = serde_json::to_string(rec).expect("record serializes");
        writeln!(runs, "{line}").map_err(io)?;
    }

    // dimension values in first-appearance order
    let mut optimizers: Vec<String> = Vec::new();
    let mut targets: Vec<String> = Vec::new();
    let mut blocks: Vec<(String, usize)> = Vec::new(); // (dataset, repeat)
    for r in records {
        if !optimizers.contains(&r.optimizer) {
            optimizers.push(r.optimizer.clone());
        }
        if !targets.contains(&r.target) {
            targets.push(r.target.clone());
        }
        let b = (r.dataset.clone(), r.repeat);
        if !blocks.contains(&b) {
            blocks.push(b);
        }
    }

    let mut incomplete_blocks = 0usize;
    let mut table_notes: Vec<String> = Vec::new();
    for (metric, higher_better) in METRICS {
        let mut md = String::new();
        let mut tsv = String::new();
        for target in &targets {
            // treatments x blocks, skipping blocks with any missing cell
            let mut used_blocks = Vec::new();
            for b in &blocks {
                let complete = optimizers.iter().all(|o| {
                    records.iter().any(|r| {
                        &r.optimizer == o
                            && &r.target == target
                            && r.dataset == b.0
                            && r.repeat == b.1
                    })
                });
                if complete {
                    used_blocks.push(b.clone());
                } else {
                    incomplete_blocks += 1;
                }
            }
            let values: Vec<Vec<f64>> = optimizers
                .iter()
                .map(|o| {
                    used_blocks
                        .iter()
                        .map(|b| {
                            let rec = records
                                .iter()
                                .find(|r| {
                                    &r.optimizer == o
                                        && &r.target == target
                                        && r.dataset == b.0
                                        && r.repeat == b.1
                                })
                                .expect("block checked complete");
                            metric_of(rec, metric)
                        })
                        .collect()
                })
                .collect();

            let title = format!("{metric} / {target}");
            match TreatmentTable::new(optimizers.clone(), values) {
                Ok(table) => {
                    let (stat, p) = friedman(&table).map_err(|e| CliError::Io(e.to_string()))?;
                    let reports = if p < 0.05 {
                        nemenyi(&table, higher_better)
                    } else {
                        flat_report(&table, higher_better)
                    }
                    .map_err(|e| CliError::Io(e.to_string()))?;
                    md.push_str(&render_markdown(&title, &reports));
                    md.push_str(&format!(
                        "\nFriedman chi2 = {stat:.4}, p = {p:.4} ({} at 0.05)\n\n",
                        if p < 0.05 { "significant" } else { "not significant" }
                    ));
                    tsv.push_str(&format!("# {title}\n"));
                    tsv.push_str(&render_tsv(&reports));
                }
                Err(e) => {
                    table_notes.push(format!("{title}: {e}"));
                    md.push_str(&format!("## {title}\n\nnot enough complete runs: {e}\n\n"));
                }
            }
        }
        std::fs::write(out_dir.join(format!("metric_{metric}.md")), md).map_err(io)?;
        std::fs::write(out_dir.join(format!("metric_{metric}.tsv")), tsv).map_err(io)?;
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        runs_total: usize,
        runs_completed: usize,
        runs_failed: usize,
        incomplete_blocks: usize,
        optimizers: &'a [String],
        targets: &'a [String],
        table_notes: &'a [String],
        failures: &'a [RunFailure],
    }
    let summary = Summary {
        runs_total: records.len() + failures.len(),
        runs_completed: records.len(),
        runs_failed: failures.len(),
        incomplete_blocks,
        optimizers: &optimizers,
        targets: &targets,
        table_notes: &table_notes,
        failures,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(out_dir.join("summary.json"), text + "\n").map_err(io)?;
    Ok(())
}

/// Re-aggregate existing run records into fresh tables.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(line).map_err(|e| {
            CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}
