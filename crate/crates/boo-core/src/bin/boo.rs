//! Command-line driver: seeded experiment runs, algorithm comparisons,
//! partitioning ablations, the runtime invariant suite, and the benchmark
//! registry listing. Thin shell over the library; the only parallelism is
//! the harness worker pool, capped here via `--workers`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use boo_core::benchmarks;
use boo_core::harness::{
    self, AggregateResult, ExperimentConfig, HyperChoice, SchemeChoice,
};
use boo_core::optimizers::Algorithm;
use boo_core::validate;

const DEFAULTS_HELP: &str = "Defaults:
  --eta 0.05        confidence width at expansion p: beta_p = 2*ln(pi^2*p^3 / (3*eta))
  --scheme auto     b = D and a = max(2, floor((sqrt(N)/2)^(1/D))), giving m = a^D children
  --hyper mle       Matern nu = 4+(D+1)/2, lengthscale/variance refit by likelihood grid search
                    (fixed: lengthscale 0.25*sqrt(D), variance 1, never refit)
  --repeats 1       seed for repetition r is --seed + r (default --seed 0)
  --n-init 0        budget-exempt random initial design points for the GP-based methods
  --budget 100      true objective evaluations per run; depth cap is floor(sqrt(p))
  --out out         trace CSVs and the aggregate JSON are written here
  --workers 0       0 means one worker per core";

#[derive(Parser)]
#[command(
    name = "boo",
    version,
    about = "Global optimisation via GP-guided hierarchical partitioning, with baselines",
    after_help = DEFAULTS_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on a registry function; write trace CSVs and an aggregate JSON.
    Run(RunArgs),
    /// Run several algorithms with matched seeds and print their final regrets side by side.
    Compare(CompareArgs),
    /// Partitioning ablation at fixed m: BOO under (a=m, b=1) and (a=m^(1/D), b=D), plus BaMSOO.
    Ablate(AblateArgs),
    /// Execute the runtime invariant suite and print pass/fail per property.
    Validate(ValidateArgs),
    /// List the benchmark registry.
    ListFunctions,
}

/// Flags shared by every experiment-shaped subcommand. All optional: a
/// value comes from the flag, else the `--config` file, else the default.
#[derive(Args)]
struct CommonArgs {
    /// JSON file supplying any subset of the experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Registry function name (see list-functions).
    #[arg(long)]
    func: Option<String>,
    /// True-evaluation budget N per run.
    #[arg(long)]
    budget: Option<usize>,
    /// Seeded repetitions per algorithm.
    #[arg(long)]
    repeats: Option<usize>,
    /// Confidence failure probability in (0, 1).
    #[arg(long)]
    eta: Option<f64>,
    /// Partitioning: 'auto' or 'AxB' (split each of b dimensions into a parts).
    #[arg(long, conflicts_with = "m")]
    scheme: Option<SchemeChoice>,
    /// Children per expansion via single-dimension splits; shorthand for --scheme Mx1.
    #[arg(long)]
    m: Option<usize>,
    /// Base seed; repetition r runs with seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Kernel hyperparameter policy: 'mle' or 'fixed'.
    #[arg(long)]
    hyper: Option<HyperChoice>,
    /// Budget-exempt random initial design points for GP-based methods.
    #[arg(long)]
    n_init: Option<usize>,
    /// Output directory for trace and aggregate files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on parallel run workers; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Algorithm: boo, soo, bamsoo, or gp_ucb.
    #[arg(long)]
    algo: Option<Algorithm>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated algorithms; default all four.
    #[arg(long, value_delimiter = ',')]
    algos: Vec<Algorithm>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ValidateArgs {
    /// Negate the tree optimizer's expansion gate so the legality check
    /// demonstrably fails.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

/// Config-file overlay: any subset of the experiment fields.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    function: Option<String>,
    algorithms: Option<Vec<Algorithm>>,
    budget: Option<usize>,
    repeats: Option<usize>,
    base_seed: Option<u64>,
    eta: Option<f64>,
    scheme: Option<SchemeChoice>,
    hyper: Option<HyperChoice>,
    n_init: Option<usize>,
    out_dir: Option<PathBuf>,
}

enum CliError {
    /// Bad flags or config: exit 2.
    Usage(String),
    /// Valid request that failed while executing: exit 1.
    Runtime(String),
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let flagged = args.algo.map(|a| vec![a]).unwrap_or_default();
            let cfg = build_config(&args.common, flagged, vec![Algorithm::Boo])?;
            let result = run_in_pool(args.common.workers, &cfg)?;
            print_aggregate(&result);
            Ok(())
        }
        Command::Compare(args) => {
            let cfg = build_config(&args.common, args.algos.clone(), Algorithm::all().to_vec())?;
            let result = run_in_pool(args.common.workers, &cfg)?;
            print_aggregate(&result);
            Ok(())
        }
        Command::Ablate(args) => ablate(&args),
        Command::Validate(args) => run_validation(args.inject_fault),
        Command::ListFunctions => {
            list_functions();
            Ok(())
        }
    }
}

/// Merges flag > file > default into a validated experiment config.
fn build_config(
    common: &CommonArgs,
    flagged_algorithms: Vec<Algorithm>,
    default_algorithms: Vec<Algorithm>,
) -> Result<ExperimentConfig, CliError> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let function = common
        .func
        .clone()
        .or(file.function)
        .ok_or_else(|| CliError::Usage("missing --func (or 'function' in --config)".into()))?;
    let scheme = match (common.scheme, common.m) {
        (Some(s), _) => s,
        (None, Some(m)) => SchemeChoice::Fixed { a: m, b: 1 },
        (None, None) => file.scheme.unwrap_or(SchemeChoice::Auto),
    };

    let cfg = ExperimentConfig {
        function,
        algorithms: if flagged_algorithms.is_empty() {
            file.algorithms.unwrap_or(default_algorithms)
        } else {
            flagged_algorithms
        },
        budget: common.budget.or(file.budget).unwrap_or(100),
        repeats: common.repeats.or(file.repeats).unwrap_or(1),
        base_seed: common.seed.or(file.base_seed).unwrap_or(0),
        eta: common.eta.or(file.eta).unwrap_or(0.05),
        scheme,
        hyper: common.hyper.or(file.hyper).unwrap_or(HyperChoice::Mle),
        n_init: common.n_init.or(file.n_init).unwrap_or(0),
        out_dir: common
            .out
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
    };
    cfg.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Runs the experiment inside a worker-capped rayon pool.
fn run_in_pool(workers: usize, cfg: &ExperimentConfig) -> Result<AggregateResult, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    pool.install(|| harness::run_experiment(cfg))
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn print_aggregate(result: &AggregateResult) {
    let cfg = &result.config;
    let (a, b) = result.resolved_scheme;
    println!(
        "function {}, budget {}, scheme {a}x{b} (m = {}), eta {}, repeats {}, base seed {}",
        cfg.function,
        cfg.budget,
        a.pow(b as u32),
        cfg.eta,
        cfg.repeats,
        cfg.base_seed,
    );
    println!(
        "{:<10} {:>5} {:>22} {:>22} {:>10}",
        "algorithm", "runs", "final log10 median", "final mean +- std", "seconds"
    );
    for agg in &result.algorithms {
        let f = &agg.final_summary;
        println!(
            "{:<10} {:>5} {:>22} {:>22} {:>10.2}",
            agg.algorithm.name(),
            format!("{}/{}", agg.completed, agg.completed + agg.failures.len()),
            format_log(f.median.0),
            format!("{} +- {}", format_log(f.mean.0), format_log(f.std.0)),
            agg.run_seconds_total,
        );
    }
    let written: usize = result.algorithms.iter().map(|a| a.completed).sum();
    println!(
        "wrote {written} trace file(s) and {} in {}",
        harness::aggregate_file_name(&cfg.function),
        cfg.out_dir.display()
    );
}

fn format_log(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Fixed-m ablation: partitioning shape (b=1 vs b=D) for the parent-only
/// optimizer, plus the children-evaluating baseline on the b=D shape.
fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let m = args
        .common
        .m
        .ok_or_else(|| CliError::Usage("ablate needs --m (children per expansion)".into()))?;
    let base = build_config(&args.common, vec![Algorithm::Boo], vec![Algorithm::Boo])?;
    let spec = benchmarks::lookup(&base.function).map_err(|e| CliError::Usage(e.to_string()))?;
    let dim = spec.dim();
    let root = integer_root(m, dim).ok_or_else(|| {
        let lo = (m as f64).powf(1.0 / dim as f64).floor().max(2.0) as usize;
        CliError::Usage(format!(
            "m = {m} has no integer {dim}-th root for {} (D = {dim}); \
             nearest valid m: {} (a = {lo}) or {} (a = {})",
            base.function,
            lo.pow(dim as u32),
            (lo + 1).pow(dim as u32),
            lo + 1
        ))
    })?;

    let variants = [
        ("boo_b1", Algorithm::Boo, SchemeChoice::Fixed { a: m, b: 1 }),
        ("boo_bd", Algorithm::Boo, SchemeChoice::Fixed { a: root, b: dim }),
        ("bamsoo_bd", Algorithm::Bamsoo, SchemeChoice::Fixed { a: root, b: dim }),
    ];
    for (label, algorithm, scheme) in variants {
        let mut cfg = base.clone();
        cfg.algorithms = vec![algorithm];
        cfg.scheme = scheme;
        cfg.out_dir = base.out_dir.join(format!("m{m}_{label}"));
        println!("== variant {label} ==");
        let result = run_in_pool(args.common.workers, &cfg)?;
        print_aggregate(&result);
    }
    Ok(())
}

/// Largest-base exact root: `a` with `a^dim == m`, if one exists.
fn integer_root(m: usize, dim: usize) -> Option<usize> {
    let approx = (m as f64).powf(1.0 / dim as f64).round() as usize;
    for a in approx.saturating_sub(1)..=approx + 1 {
        if a >= 2 && a.pow(dim as u32) == m {
            return Some(a);
        }
    }
    None
}

fn run_validation(inject_fault: bool) -> Result<(), CliError> {
    let report = validate::run_suite(inject_fault);
    for check in &report.checks {
        println!(
            "{} {:<28} {:>7.2}s  {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.seconds,
            check.detail
        );
    }
    if report.passed() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} of {} checks failed",
            report.checks.iter().filter(|c| !c.passed).count(),
            report.checks.len()
        )))
    }
}

fn list_functions() {
    println!(
        "{:<12} {:>3}  {:<22} {:>14}  reference",
        "name", "dim", "domain", "maximum"
    );
    for name in benchmarks::names() {
        let spec = benchmarks::lookup(name).expect("registry name");
        let domain = spec.domain();
        let range = format!(
            "[{}, {}]^{}",
            domain.lower()[0],
            domain.upper()[0],
            spec.dim()
        );
        println!(
            "{:<12} {:>3}  {:<22} {:>14.6}  {}",
            spec.name(),
            spec.dim(),
            range,
            spec.f_star(),
            spec.reference()
        );
    }
}
