//! Multi-seed experiment runner.
//!
//! One experiment executes `repeats` independently seeded runs per
//! algorithm, writes one trace CSV per run plus one aggregate JSON, and
//! returns per-evaluation log₁₀-regret statistics. Runs share nothing
//! mutable, so they execute on a rayon pool; callers cap parallelism by
//! installing the experiment inside their own sized pool. Aggregation is
//! single-threaded after the join.
//!
//! Regret statistics are indexed by true-evaluation count rather than by
//! expansion, so methods that pay different evaluation prices per expansion
//! (one for the parent-only optimizer, `m` for its children-evaluating
//! baseline) are compared on the axis the budget actually meters.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::benchmarks;
use crate::error::{Error, Result};
use crate::optimizers::{
    log10_regret, run, simple_regret, Algorithm, HyperPolicy, Objective, OptimizerConfig,
    RegretTrace,
};
use crate::partition::PartitionScheme;

/// Partitioning choice: an explicit `(a, b)` pair or the budget-derived
/// rule of [`resolve_auto_scheme`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    Auto,
    Fixed { a: usize, b: usize },
}

impl FromStr for SchemeChoice {
    type Err = Error;

    /// Accepts `auto` or an `AxB` / `A,B` pair such as `2x3`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SchemeChoice::Auto);
        }
        let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
        let parse = |t: &str| t.trim().parse::<usize>().ok();
        if let [a, b] = parts.as_slice() {
            if let (Some(a), Some(b)) = (parse(a), parse(b)) {
                return Ok(SchemeChoice::Fixed { a, b });
            }
        }
        Err(Error::InvalidConfig(format!(
            "scheme must be 'auto' or 'AxB' (for example '2x3'), got '{s}'"
        )))
    }
}

/// Hyperparameter handling for the GP-backed algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperChoice {
    /// Dimension-scaled fixed kernel, never refit.
    Fixed,
    /// Periodic maximum-likelihood refits.
    Mle,
}

impl HyperChoice {
    pub fn to_policy(self, dim: usize) -> HyperPolicy {
        match self {
            HyperChoice::Fixed => HyperPolicy::default_fixed(dim),
            HyperChoice::Mle => HyperPolicy::default_mle(),
        }
    }
}

impl FromStr for HyperChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(HyperChoice::Fixed),
            "mle" => Ok(HyperChoice::Mle),
            _ => Err(Error::InvalidConfig(format!(
                "hyperparameter policy must be 'fixed' or 'mle', got '{s}'"
            ))),
        }
    }
}

/// Full description of one experiment; serializable so a run can be
/// reproduced from its aggregate file alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Registry name of the objective.
    pub function: String,
    /// Algorithms to run; each gets the same seeds.
    pub algorithms: Vec<Algorithm>,
    /// True-evaluation budget per run.
    pub budget: usize,
    /// Number of seeded repetitions per algorithm.
    pub repeats: usize,
    /// Seed for repetition r is `base_seed + r`.
    pub base_seed: u64,
    /// Confidence-schedule failure probability.
    pub eta: f64,
    /// Partitioning scheme, explicit or budget-derived.
    pub scheme: SchemeChoice,
    /// Kernel hyperparameter policy.
    pub hyper: HyperChoice,
    /// Budget-exempt random initial design points for the GP methods.
    #[serde(default)]
    pub n_init: usize,
    /// Directory for trace and aggregate files.
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Baseline configuration: one algorithm, MLE hyperparameters, auto
    /// scheme, η = 0.05, single repeat with seed 0.
    pub fn new(function: &str, algorithm: Algorithm, budget: usize, out_dir: &Path) -> Self {
        ExperimentConfig {
            function: function.to_string(),
            algorithms: vec![algorithm],
            budget,
            repeats: 1,
            base_seed: 0,
            eta: 0.05,
            scheme: SchemeChoice::Auto,
            hyper: HyperChoice::Mle,
            n_init: 0,
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("algorithm list is empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if let SchemeChoice::Fixed { a, b } = self.scheme {
            PartitionScheme::new(a, b)?;
        }
        benchmarks::lookup(&self.function)?;
        Ok(())
    }
}

/// Budget-derived partitioning: `b = D` and `a = max(2, ⌊(√N/2)^{1/D}⌋)`,
/// the setting under which the expected number of expansions per depth
/// level stays balanced against the √p depth schedule.
pub fn resolve_auto_scheme(budget: usize, dim: usize) -> Result<PartitionScheme> {
    if budget == 0 || dim == 0 {
        return Err(Error::InvalidConfig(
            "auto scheme needs budget >= 1 and dimension >= 1".into(),
        ));
    }
    let x = ((budget as f64).sqrt() / 2.0).powf(1.0 / dim as f64);
    // Nudge before flooring so exact integer powers are not lost to
    // representation error.
    let a = ((x + 1e-9).floor() as usize).max(2);
    PartitionScheme::new(a, dim)
}

/// log₁₀-regret sample that survives JSON round trips: the standard float
/// path nulls non-finite values, so `-inf` (regret exactly zero), `inf`,
/// and `nan` are written as explicit strings instead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue(pub f64);

impl Serialize for LogValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for LogValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct LogValueVisitor;

        impl Visitor<'_> for LogValueVisitor {
            type Value = LogValue;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a float or one of \"-inf\", \"inf\", \"nan\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<LogValue, E> {
                Ok(LogValue(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<LogValue, E> {
                Ok(LogValue(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<LogValue, E> {
                Ok(LogValue(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<LogValue, E> {
                match v {
                    "-inf" => Ok(LogValue(f64::NEG_INFINITY)),
                    "inf" => Ok(LogValue(f64::INFINITY)),
                    "nan" => Ok(LogValue(f64::NAN)),
                    _ => Err(E::custom(format!("unrecognized float sentinel '{v}'"))),
                }
            }
        }

        d.deserialize_any(LogValueVisitor)
    }
}

/// Median, mean, and sample standard deviation of final log₁₀ regret
/// across the completed repetitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub median: LogValue,
    pub mean: LogValue,
    pub std: LogValue,
}

/// One repetition that returned an error instead of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub message: String,
}

/// Per-algorithm aggregate over the completed repetitions. Array index i
/// is the state after i+1 true evaluations; runs shorter than the longest
/// one are padded with their final value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmAggregate {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub completed: usize,
    pub failures: Vec<RunFailure>,
    pub mean_log10_regret: Vec<LogValue>,
    pub std_log10_regret: Vec<LogValue>,
    pub final_summary: FinalSummary,
    /// Sum of per-run wall-clock times (runs overlap in real time).
    pub run_seconds_total: f64,
}

/// Everything `run_experiment` computed, as persisted to the aggregate
/// JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    /// The scheme the runs actually used (auto resolved against budget
    /// and dimension).
    pub resolved_scheme: (usize, usize),
    pub algorithms: Vec<AlgorithmAggregate>,
    pub wall_clock_seconds: f64,
}

impl AggregateResult {
    pub fn algorithm(&self, algorithm: Algorithm) -> Option<&AlgorithmAggregate> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

/// Trace file name for one run: `trace_{algorithm}_{function}_seed{seed}.csv`.
pub fn trace_file_name(algorithm: Algorithm, function: &str, seed: u64) -> String {
    format!("trace_{}_{function}_seed{seed}.csv", algorithm.name())
}

/// Aggregate file name for one experiment.
pub fn aggregate_file_name(function: &str) -> String {
    format!("aggregate_{function}.json")
}

struct RunOutcome {
    algorithm: Algorithm,
    seed: u64,
    /// log₁₀ regret after each true evaluation.
    series: std::result::Result<Vec<f64>, String>,
    seconds: f64,
}

/// Runs the experiment, writes one trace CSV per completed run plus one
/// aggregate JSON, and returns the aggregate.
///
/// Failures of individual runs are recorded in the aggregate and reported
/// on standard error; an algorithm whose runs all fail is a hard error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    cfg.validate()?;
    let spec = benchmarks::lookup(&cfg.function)?;
    let objective = Objective::from_benchmark(&spec);
    let f_star = spec.f_star();
    let scheme = match cfg.scheme {
        SchemeChoice::Auto => resolve_auto_scheme(cfg.budget, spec.dim())?,
        SchemeChoice::Fixed { a, b } => PartitionScheme::new(a, b)?,
    };
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))?;

    let started = Instant::now();
    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&algorithm| (0..cfg.repeats).map(move |r| (algorithm, cfg.base_seed + r as u64)))
        .collect();
    let outcomes: Vec<RunOutcome> = jobs
        .into_par_iter()
        .map(|(algorithm, seed)| execute_run(cfg, &objective, f_star, scheme, algorithm, seed))
        .collect();

    let mut algorithms = Vec::with_capacity(cfg.algorithms.len());
    for &algorithm in &cfg.algorithms {
        let runs: Vec<&RunOutcome> = outcomes
            .iter()
            .filter(|o| o.algorithm == algorithm)
            .collect();
        algorithms.push(aggregate_algorithm(algorithm, cfg.repeats, &runs)?);
    }

    let result = AggregateResult {
        config: cfg.clone(),
        resolved_scheme: (scheme.a(), scheme.b()),
        algorithms,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let path = cfg.out_dir.join(aggregate_file_name(&cfg.function));
    let json = serde_json::to_string_pretty(&result)
        .map_err(|e| Error::InvalidConfig(format!("aggregate serialization failed: {e}")))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(result)
}

fn execute_run(
    cfg: &ExperimentConfig,
    objective: &Objective,
    f_star: f64,
    scheme: PartitionScheme,
    algorithm: Algorithm,
    seed: u64,
) -> RunOutcome {
    let started = Instant::now();
    let mut opt = OptimizerConfig::new(cfg.budget, scheme);
    opt.eta = cfg.eta;
    opt.n_init = cfg.n_init;
    opt.seed = seed;
    opt.hyper = cfg.hyper.to_policy(objective.dim());

    let series = run(algorithm, objective, &opt)
        .and_then(|trace| {
            let path = cfg
                .out_dir
                .join(trace_file_name(algorithm, &cfg.function, seed));
            write_trace_csv(&path, &trace, f_star)?;
            Ok(simple_regret(&trace, f_star)?
                .into_iter()
                .map(log10_regret)
                .collect())
        })
        .map_err(|e| e.to_string());

    RunOutcome {
        algorithm,
        seed,
        series,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn aggregate_algorithm(
    algorithm: Algorithm,
    repeats: usize,
    runs: &[&RunOutcome],
) -> Result<AlgorithmAggregate> {
    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    let mut series = Vec::new();
    let mut seconds = 0.0;
    for outcome in runs {
        seconds += outcome.seconds;
        match &outcome.series {
            Ok(s) => {
                seeds.push(outcome.seed);
                series.push(s.as_slice());
            }
            Err(message) => failures.push(RunFailure {
                seed: outcome.seed,
                message: message.clone(),
            }),
        }
    }
    if series.is_empty() {
        return Err(Error::AllRunsFailed {
            algorithm: algorithm.name().to_string(),
            repeats,
            first: failures
                .first()
                .map(|f| f.message.clone())
                .unwrap_or_default(),
        });
    }
    for failure in &failures {
        eprintln!(
            "warning: {} run with seed {} failed: {}",
            algorithm.name(),
            failure.seed,
            failure.message
        );
    }

    let longest = series.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut mean_series = Vec::with_capacity(longest);
    let mut std_series = Vec::with_capacity(longest);
    for i in 0..longest {
        // A finished run keeps its final regret for the remaining axis.
        let samples: Vec<f64> = series
            .iter()
            .map(|s| s[i.min(s.len() - 1)])
            .collect();
        let (mean, std) = mean_std(&samples);
        mean_series.push(LogValue(mean));
        std_series.push(LogValue(std));
    }

    let finals: Vec<f64> = series.iter().map(|s| *s.last().unwrap()).collect();
    let (final_mean, final_std) = mean_std(&finals);
    let final_summary = FinalSummary {
        median: LogValue(median(&finals)),
        mean: LogValue(final_mean),
        std: LogValue(final_std),
    };

    Ok(AlgorithmAggregate {
        algorithm,
        seeds,
        completed: series.len(),
        failures,
        mean_log10_regret: mean_series,
        std_log10_regret: std_series,
        final_summary,
        run_seconds_total: seconds,
    })
}

/// Mean and sample standard deviation (n − 1 denominator; 0 when n = 1).
/// Non-finite samples propagate honestly: a `-inf` sample drives the mean
/// to `-inf` and the deviation to `nan`.
fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    debug_assert!(n > 0);
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Median by total order; an even count averages the two central values.
pub fn median(samples: &[f64]) -> f64 {
    debug_assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "-inf" => Some(f64::NEG_INFINITY),
        "inf" => Some(f64::INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

/// Writes one run's full acquisition trace:
/// `eval,x_0..x_{D-1},value,best,regret,log10_regret,expansion,depth,memo_hit`.
///
/// Points are raw domain coordinates; memo rows repeat the previous `eval`
/// count. Identical runs produce byte-identical files.
pub fn write_trace_csv(path: &Path, trace: &RegretTrace, f_star: f64) -> Result<()> {
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path.display().to_string(), source),
        other => Error::InvalidConfig(format!("csv write failed: {other:?}")),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    let dim = trace.records().first().map_or(0, |r| r.point_raw.len());
    let mut header = vec!["eval".to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    header.extend(
        ["value", "best", "regret", "log10_regret", "expansion", "depth", "memo_hit"]
            .map(str::to_string),
    );
    writer.write_record(&header).map_err(io_err)?;
    for record in trace.records() {
        let regret = f_star - record.best;
        let mut row = vec![record.eval.to_string()];
        row.extend(record.point_raw.iter().copied().map(fmt_float));
        row.push(fmt_float(record.value));
        row.push(fmt_float(record.best));
        row.push(fmt_float(regret));
        row.push(fmt_float(log10_regret(regret)));
        row.push(record.expansion.to_string());
        row.push(record.depth.to_string());
        row.push(record.memo_hit.to_string());
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// One parsed trace CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub eval: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub best: f64,
    pub regret: f64,
    pub log10_regret: f64,
    pub expansion: usize,
    pub depth: i64,
    pub memo_hit: bool,
}

/// Reads a trace CSV written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let bad = |message: String| Error::InvalidConfig(format!("{}: {message}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let dim = headers.iter().filter(|h| h.starts_with("x_")).count();
    let expected = dim + 8;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != expected {
            return Err(bad(format!(
                "row has {} fields, expected {expected}",
                record.len()
            )));
        }
        let float = |i: usize| {
            parse_float(&record[i]).ok_or_else(|| bad(format!("bad float '{}'", &record[i])))
        };
        let point = (1..=dim).map(float).collect::<Result<Vec<f64>>>()?;
        rows.push(TraceRow {
            eval: record[0].parse().map_err(|_| bad("bad eval".into()))?,
            point,
            value: float(dim + 1)?,
            best: float(dim + 2)?,
            regret: float(dim + 3)?,
            log10_regret: float(dim + 4)?,
            expansion: record[dim + 5]
                .parse()
                .map_err(|_| bad("bad expansion".into()))?,
            depth: record[dim + 6].parse().map_err(|_| bad("bad depth".into()))?,
            memo_hit: record[dim + 7]
                .parse()
                .map_err(|_| bad("bad memo_hit".into()))?,
        });
    }
    Ok(rows)
}
