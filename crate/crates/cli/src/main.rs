use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nisneak::data::{generate_fixture, load_series, Target};
use nisneak::eval::{mix_seed, EvalCache};
use nisneak::space::{default_space, ConfigSpace};

use nisneak_cli::plan::{parse_optimizer, Plan};
use nisneak_cli::runner::{bench, load_records, run_one, write_reports};
use nisneak_cli::{env_cache_path, CliError};

#[derive(Parser)]
#[command(
    name = "nisneak",
    about = "Landscape-analysis hyperparameter optimization for small-data forecasting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune one optimizer on one dataset/target and print a JSON record.
    Tune(TuneArgs),
    /// Run the full comparison grid and write ranked reports.
    Bench(BenchArgs),
    /// Write a synthetic monthly series CSV.
    Fixture(FixtureArgs),
    /// Re-aggregate existing run records into fresh tables.
    Report(ReportArgs),
    /// Inspect or clear the evaluation cache.
    Cache(CacheArgs),
}

#[derive(Args)]
struct TuneArgs {
    /// Dataset CSV path.
    #[arg(long)]
    data: PathBuf,
    /// Prediction target: commits, closed_prs, or closed_issues.
    #[arg(long, default_value = "commits")]
    target: String,
    /// Optimizer registry name.
    #[arg(long)]
    optimizer: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Candidate pool size sampled from the space.
    #[arg(long, default_value_t = 10_000)]
    pool: usize,
    /// Evaluation cache file (defaults to $NISNEAK_CACHE_DIR/evals.tsv, or
    /// in-memory).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Space definition file (defaults to the built-in grid).
    #[arg(long)]
    space: Option<PathBuf>,
    /// Evaluation budget for rs / flash.
    #[arg(long, default_value_t = 120)]
    budget: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Plan file (key = value lines). Flags below override it.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Comma-separated dataset CSVs.
    #[arg(long)]
    data: Option<String>,
    /// Comma-separated targets.
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated optimizer names.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Worker pool size.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    months: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// runs.ndjson from an earlier bench.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CacheArgs {
    /// Cache file (defaults to $NISNEAK_CACHE_DIR/evals.tsv).
    #[arg(long)]
    path: Option<PathBuf>,
    /// Print the number of cached evaluations.
    #[arg(long)]
    stats: bool,
    /// Delete the cache file.
    #[arg(long)]
    clear: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tune(args) => cmd_tune(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Fixture(args) => cmd_fixture(args),
        Command::Report(args) => cmd_report(args),
        Command::Cache(args) => cmd_cache(args),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn cmd_tune(args: TuneArgs) -> Result<ExitCode, CliError> {
    let kind = parse_optimizer(&args.optimizer)?;
    let target = Target::parse(&args.target).map_err(|e| CliError::Usage(e.to_string()))?;
    let series = load_series(&args.data).map_err(|e| CliError::Usage(e.to_string()))?;
    let space = match &args.space {
        Some(p) => ConfigSpace::from_file(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => default_space(),
    };
    let cache = match args.cache.or_else(env_cache_path) {
        Some(p) => EvalCache::open(&p).map_err(|e| CliError::Io(e.to_string()))?,
        None => EvalCache::in_memory(),
    };
    let pool = space.sample(args.pool, mix_seed(&[args.seed, 0x706f_6f6c]));
    let baseline = nisneak::baselines::BaselineParams {
        budget_evals: args.budget,
        ..Default::default()
    };
    let record = run_one(
        &space, &pool, &series, target, kind, &baseline, args.seed, 0, &cache,
    )
    .map_err(CliError::Io)?;
    println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    let mut plan = match &args.plan {
        Some(p) => Plan::from_file(p)?,
        None => Plan::default(),
    };
    let apply = |plan: &mut Plan, key: &str, value: String| -> Result<(), CliError> {
        plan.apply(key, &value).map_err(CliError::Usage)
    };
    if let Some(v) = args.data {
        apply(&mut plan, "datasets", v)?;
    }
    if let Some(v) = args.target {
        apply(&mut plan, "targets", v)?;
    }
    if let Some(v) = args.optimizer {
        apply(&mut plan, "optimizers", v)?;
    }
    if let Some(v) = args.repeats {
        plan.repeats = v;
    }
    if let Some(v) = args.seed {
        plan.global_seed = v;
    }
    if let Some(v) = args.pool {
        plan.pool_size = v;
    }
    if let Some(v) = args.out {
        plan.out_dir = v;
    }
    if let Some(v) = args.cache {
        plan.cache_path = Some(v);
    } else if plan.cache_path.is_none() {
        plan.cache_path = env_cache_path();
    }
    if let Some(v) = args.jobs {
        plan.jobs = v.max(1);
    }

    let outcome = bench(&plan)?;
    write_reports(&plan.out_dir, &outcome.records, &outcome.failures)?;
    eprintln!(
        "bench: {} runs completed, {} failed; reports in {}",
        outcome.records.len(),
        outcome.failures.len(),
        plan.out_dir.display()
    );
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_fixture(args: FixtureArgs) -> Result<ExitCode, CliError> {
    if args.months < 24 {
        return Err(CliError::Usage(format!(
            "fixture needs at least 24 months (got {})",
            args.months
        )));
    }
    let series = generate_fixture(args.months, args.seed);
    std::fs::write(&args.out, series.to_csv())
        .map_err(|e| CliError::Io(format!("write {}: {e}", args.out.display())))?;
    eprintln!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, CliError> {
    let records = load_records(&args.runs)?;
    write_reports(&args.out, &records, &[])?;
    eprintln!("reports in {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_cache(args: CacheArgs) -> Result<ExitCode, CliError> {
    let path = args
        .path
        .or_else(env_cache_path)
        .ok_or_else(|| CliError::Usage("no cache path given and NISNEAK_CACHE_DIR unset".into()))?;
    if args.clear {
        if path.exists() {
            std::fs::remove_file(&path)
                .map_err(|e| CliError::Io(format!("remove {}: {e}", path.display())))?;
            eprintln!("cleared {}", path.display());
        } else {
            eprintln!("nothing to clear at {}", path.display());
        }
        return Ok(ExitCode::SUCCESS);
    }
    // default action (and --stats): report size
    let cache = EvalCache::open(&path).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{} cached evaluations in {}", cache.len(), path.display());
    Ok(ExitCode::SUCCESS)
}
