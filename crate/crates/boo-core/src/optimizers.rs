//! Optimisation loops behind a common ask/tell contract.
//!
//! Four maximisers share the same plumbing: `boo` (GP-UCB-guided tree
//! search that evaluates only the parent of each expansion), `soo`
//! (model-free tree search evaluating all children), `bamsoo` (tree search
//! with a GP gate deciding per child between a true evaluation and a lower
//! confidence bound), and `gp_ucb` (classic Bayesian optimisation with a
//! multi-start coordinate-descent acquisition maximiser).
//!
//! Every optimiser is a resumable state machine: [`AskTell::ask`] yields
//! the next raw-domain point whose objective value is needed, and
//! [`AskTell::tell`] reports it back; [`run`] drives a state against an
//! [`Objective`] to exhaustion, so closed-loop runs and externally driven
//! loops produce identical traces by construction. Budgets count true
//! objective evaluations; values for points already seen are replayed from
//! a memo table without consuming budget (and without duplicating GP rows,
//! which would make the noiseless Gram matrix singular).

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkSpec, Domain};
use crate::error::{Error, Result};
use crate::gp::{
    self, default_hyperparameter_grid, fit_hyperparameters, GpModel, ObservationSet,
};
use crate::kernel::MaternParams;
use crate::partition::PartitionScheme;

mod bamsoo;
mod boo;
mod gp_ucb;
mod soo;

pub use bamsoo::BamsooState;
pub use boo::BooState;
pub use gp_ucb::GpUcbState;
pub use soo::SooState;

/// Expansions a tree optimiser may perform without a single true objective
/// evaluation before the run is declared finished. Guards against runs
/// whose gates reject every candidate long after progress has stopped
/// (possible for `bamsoo`, and for `boo` under odd division counts where
/// every new parent center is memoised).
pub(crate) const MAX_STALLED_EXPANSIONS: usize = 256;

/// Depth cap after `p` expansions: `floor(sqrt(p))`.
pub fn h_max(p: usize) -> usize {
    p.isqrt()
}

/// A noiseless black-box maximisation problem.
#[derive(Clone)]
pub struct Objective {
    name: String,
    domain: Domain,
    evaluate: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    f_star: Option<f64>,
    x_star: Option<Vec<f64>>,
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        evaluate: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            evaluate,
            f_star: None,
            x_star: None,
        }
    }

    pub fn from_benchmark(spec: &BenchmarkSpec) -> Self {
        Self {
            name: spec.name().to_string(),
            domain: spec.domain().clone(),
            evaluate: spec.evaluator(),
            f_star: Some(spec.f_star()),
            x_star: Some(spec.x_star().to_vec()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Reference maximum value, when known.
    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    /// Reference maximiser, when known.
    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }

    /// Evaluates the objective at a raw-domain point.
    pub fn evaluate_raw(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("f_star", &self.f_star)
            .finish_non_exhaustive()
    }
}

/// Kernel hyperparameter handling during a run.
#[derive(Clone, Debug, PartialEq)]
pub enum HyperPolicy {
    /// Fixed kernel, never refit.
    Fixed(MaternParams),
    /// Grid maximum-likelihood selection every `refit_every` new
    /// observations; smoothness stays at `nu` (`None` uses the dimension
    /// default `4 + (D+1)/2`).
    Mle { nu: Option<f64>, refit_every: usize },
}

impl HyperPolicy {
    /// Default fixed kernel for a `dim`-dimensional unit cube: dimension
    /// default smoothness, lengthscale a quarter of the cube diameter,
    /// unit signal variance.
    pub fn default_fixed(dim: usize) -> Self {
        HyperPolicy::Fixed(default_fixed_params(dim))
    }

    /// Default MLE policy: dimension-default smoothness, refit every 10
    /// observations.
    pub fn default_mle() -> Self {
        HyperPolicy::Mle {
            nu: None,
            refit_every: 10,
        }
    }
}

/// Default fixed kernel parameters used before any maximum-likelihood
/// refit and by [`HyperPolicy::default_fixed`].
pub fn default_fixed_params(dim: usize) -> MaternParams {
    let lengthscale = 0.25 * (dim as f64).sqrt();
    MaternParams::new(MaternParams::default_nu(dim), lengthscale, 1.0)
        .expect("default parameters are valid")
}

/// Deliberate decision-rule corruption, exposed so the validation suite
/// can prove its invariant checks have teeth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultInjection {
    /// `boo` gates expansions on the negated UCB while recording the true
    /// UCB, so gate-passing expansions violate the recorded legality
    /// condition `score >= v_max`.
    FlipUcbGate,
}

/// Shared optimiser configuration. Tree-free algorithms ignore `scheme`;
/// model-free algorithms ignore `eta`, `n_init`, and `hyper`.
#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// Evaluation budget N: maximum number of true objective evaluations,
    /// excluding the `n_init` initial-design points.
    pub budget: usize,
    /// Subdivision rule for tree algorithms.
    pub scheme: PartitionScheme,
    /// Confidence parameter in (0,1) for the beta_p schedule
    /// `2 ln(pi^2 p^3 / (3 eta))`.
    pub eta: f64,
    /// Seeded uniform initial-design points for GP-backed algorithms
    /// (default 0; the tree algorithms start from the domain center).
    pub n_init: usize,
    /// Kernel hyperparameter policy for GP-backed algorithms.
    pub hyper: HyperPolicy,
    /// Seed for every random choice the optimiser makes.
    pub seed: u64,
    /// Test hook; leave `None` outside the validation suite.
    pub fault: Option<FaultInjection>,
}

impl OptimizerConfig {
    /// Budget plus scheme with defaults elsewhere: eta 0.05, no initial
    /// design, MLE hyperparameters, seed 0.
    pub fn new(budget: usize, scheme: PartitionScheme) -> Self {
        Self {
            budget,
            scheme,
            eta: 0.05,
            n_init: 0,
            hyper: HyperPolicy::default_mle(),
            seed: 0,
            fault: None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidParameter {
                name: "budget",
                message: "budget must be at least 1".to_string(),
            });
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                message: format!("eta must lie in (0,1), got {}", self.eta),
            });
        }
        if let HyperPolicy::Mle { refit_every, .. } = self.hyper {
            if refit_every < 1 {
                return Err(Error::InvalidParameter {
                    name: "refit_every",
                    message: "refit interval must be at least 1".to_string(),
                });
            }
        }
        Ok(())
    }
}

/// The four implemented optimisers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Boo,
    Soo,
    Bamsoo,
    GpUcb,
}

impl Algorithm {
    pub fn all() -> &'static [Algorithm] {
        &[
            Algorithm::Boo,
            Algorithm::Soo,
            Algorithm::Bamsoo,
            Algorithm::GpUcb,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Boo => "boo",
            Algorithm::Soo => "soo",
            Algorithm::Bamsoo => "bamsoo",
            Algorithm::GpUcb => "gp_ucb",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boo" => Ok(Algorithm::Boo),
            "soo" => Ok(Algorithm::Soo),
            "bamsoo" => Ok(Algorithm::Bamsoo),
            "gp_ucb" | "gp-ucb" | "gpucb" => Ok(Algorithm::GpUcb),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm '{other}'; known: boo, soo, bamsoo, gp_ucb"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One objective-value acquisition event. True evaluations advance `eval`;
/// memo replays repeat the previous ordinal with `memo_hit` set.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Cumulative count of true objective evaluations after this record.
    pub eval: usize,
    /// Point in unit-cube coordinates.
    pub point_unit: Vec<f64>,
    /// Point in raw domain coordinates.
    pub point_raw: Vec<f64>,
    /// Objective value at the point.
    pub value: f64,
    /// Running maximum of observed values.
    pub best: f64,
    /// Expansion ordinal that produced this record; 0 for initial-design
    /// and root evaluations. `gp_ucb` stores the acquisition ordinal.
    pub expansion: usize,
    /// Depth of the cell whose center was evaluated; -1 when the point is
    /// not a cell center (initial design, `gp_ucb` acquisitions).
    pub depth: i64,
    /// Value replayed from the memo table instead of a fresh evaluation.
    pub memo_hit: bool,
}

/// One tree expansion: the depth expanded, the selection score that won
/// the gate, and the gate threshold at decision time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionRecord {
    /// Expansion ordinal (1-based).
    pub p: usize,
    /// Depth-cap argument in force when the node was selected, so the
    /// invariant `depth <= h_max(cap_p)` can be audited from the trace
    /// alone. Parent-sampled search (`boo`) caps by the expansion ordinal;
    /// the child-sampling family (`soo`, `bamsoo`) caps by the number of
    /// node values known so far (the source pseudocode advances its
    /// counter once per child, and an expansion-count cap would wedge
    /// binary splits on a perfect depth-3 tree).
    pub cap_p: usize,
    /// Depth of the expanded node.
    pub depth: usize,
    /// Selection score: UCB for `boo`, center value for `soo`, g for
    /// `bamsoo`.
    pub score: f64,
    /// Gate threshold `v_max` immediately before the expansion.
    pub v_max_before: f64,
}

/// One `bamsoo` child gate decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateRecord {
    /// Expansion ordinal during which the child was gated.
    pub p: usize,
    /// Depth of the gated child.
    pub child_depth: usize,
    /// UCB of the child center at gate time.
    pub ucb: f64,
    /// Best-known value f+ at gate time.
    pub f_plus_before: f64,
    /// Whether the gate passed and the child was truly evaluated.
    pub evaluated: bool,
    /// Whether the child's value came from the memo table (no gate
    /// consequence: the value was already known).
    pub memo: bool,
}

/// Full record of one optimiser run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretTrace {
    records: Vec<TraceRecord>,
    expansions: Vec<ExpansionRecord>,
    gates: Vec<GateRecord>,
}

impl RegretTrace {
    /// All acquisition events in order.
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// All tree expansions in order (empty for `gp_ucb`).
    pub fn expansions(&self) -> &[ExpansionRecord] {
        &self.expansions
    }

    /// All `bamsoo` gate decisions in order (empty elsewhere).
    pub fn gates(&self) -> &[GateRecord] {
        &self.gates
    }

    /// Number of true objective evaluations.
    pub fn true_eval_count(&self) -> usize {
        self.records.iter().filter(|r| !r.memo_hit).count()
    }

    /// Best observed value, when any evaluation happened.
    pub fn best_value(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }

    /// The evaluated point attaining the best observed value (earliest on
    /// ties): the run's recommendation.
    pub fn recommendation(&self) -> Option<&TraceRecord> {
        let best = self.best_value()?;
        self.records
            .iter()
            .find(|r| !r.memo_hit && r.value == best)
            // The maximum can enter through a memo replay only if it was
            // already observed, so a non-memo witness always exists.
            .or_else(|| self.records.iter().find(|r| r.value == best))
    }

    pub(crate) fn push_record(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub(crate) fn push_expansion(&mut self, record: ExpansionRecord) {
        self.expansions.push(record);
    }

    pub(crate) fn push_gate(&mut self, record: GateRecord) {
        self.gates.push(record);
    }
}

/// Per-evaluation simple regret `r_i = f_star - best_i` over the true
/// evaluations of a trace. Negative regrets (a wrong reference optimum)
/// are returned as-is; `log10_regret` maps them to the sentinel.
pub fn simple_regret(trace: &RegretTrace, f_star: f64) -> Result<Vec<f64>> {
    let series: Vec<f64> = trace
        .records()
        .iter()
        .filter(|r| !r.memo_hit)
        .map(|r| f_star - r.best)
        .collect();
    if series.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(series)
}

/// `log10` of a regret value with nonpositive regret mapped to negative
/// infinity (serialised downstream as an explicit sentinel).
pub fn log10_regret(regret: f64) -> f64 {
    if regret > 0.0 {
        regret.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Sequential evaluation protocol. `ask` yields the next raw-domain point
/// (repeated asks return the same point until it is answered); `tell`
/// reports its objective value and must echo the asked point bit-exactly.
pub trait AskTell {
    /// Next point to evaluate, in raw domain coordinates. Fails with
    /// `BudgetExhausted` once the run is done.
    fn ask(&mut self) -> Result<Vec<f64>>;

    /// Reports the value of the point returned by the last `ask`.
    fn tell(&mut self, point: &[f64], value: f64) -> Result<()>;

    /// True once no further evaluation is needed.
    fn is_done(&self) -> bool;

    /// Trace recorded so far.
    fn trace(&self) -> &RegretTrace;

    /// Consumes the state and returns the final trace.
    fn into_trace(self: Box<Self>) -> RegretTrace;
}

/// Creates a fresh optimiser state over `domain`.
pub fn new_state(
    algorithm: Algorithm,
    domain: Domain,
    config: &OptimizerConfig,
) -> Result<Box<dyn AskTell + Send>> {
    Ok(match algorithm {
        Algorithm::Boo => Box::new(BooState::new(domain, config)?),
        Algorithm::Soo => Box::new(SooState::new(domain, config)?),
        Algorithm::Bamsoo => Box::new(BamsooState::new(domain, config)?),
        Algorithm::GpUcb => Box::new(GpUcbState::new(domain, config)?),
    })
}

/// Runs `algorithm` against `objective` to completion by driving the
/// ask/tell loop, so external driving reproduces these traces exactly.
pub fn run(
    algorithm: Algorithm,
    objective: &Objective,
    config: &OptimizerConfig,
) -> Result<RegretTrace> {
    let mut state = new_state(algorithm, objective.domain().clone(), config)?;
    while !state.is_done() {
        let point = state.ask()?;
        let value = objective.evaluate_raw(&point);
        state.tell(&point, value)?;
    }
    Ok(state.into_trace())
}

pub fn run_boo(objective: &Objective, config: &OptimizerConfig) -> Result<RegretTrace> {
    run(Algorithm::Boo, objective, config)
}

pub fn run_soo(objective: &Objective, config: &OptimizerConfig) -> Result<RegretTrace> {
    run(Algorithm::Soo, objective, config)
}

pub fn run_bamsoo(objective: &Objective, config: &OptimizerConfig) -> Result<RegretTrace> {
    run(Algorithm::Bamsoo, objective, config)
}

pub fn run_gp_ucb(objective: &Objective, config: &OptimizerConfig) -> Result<RegretTrace> {
    run(Algorithm::GpUcb, objective, config)
}

/// A point handed out by `ask` and awaiting its `tell`, plus the
/// algorithm-specific context needed to resume.
pub(crate) struct Pending<C> {
    pub unit: Vec<f64>,
    pub raw: Vec<f64>,
    pub ctx: C,
}

/// `tell` must echo the asked point bit-exactly.
pub(crate) fn check_echo(asked_raw: &[f64], told: &[f64]) -> Result<()> {
    let matches = asked_raw.len() == told.len()
        && asked_raw
            .iter()
            .zip(told)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    if matches {
        Ok(())
    } else {
        Err(Error::TellMismatch {
            asked: asked_raw.to_vec(),
            told: told.to_vec(),
        })
    }
}

/// Shared bookkeeping: the trace, the memo table keyed by exact unit
/// coordinates, and the running best.
pub(crate) struct Book {
    trace: RegretTrace,
    memo: HashMap<Vec<u64>, f64>,
    true_evals: usize,
    best: f64,
}

fn memo_key(unit: &[f64]) -> Vec<u64> {
    unit.iter().map(|v| v.to_bits()).collect()
}

impl Book {
    pub fn new() -> Self {
        Self {
            trace: RegretTrace::default(),
            memo: HashMap::new(),
            true_evals: 0,
            best: f64::NEG_INFINITY,
        }
    }

    pub fn true_evals(&self) -> usize {
        self.true_evals
    }

    pub fn memo_get(&self, unit: &[f64]) -> Option<f64> {
        self.memo.get(&memo_key(unit)).copied()
    }

    /// Records a fresh objective evaluation.
    pub fn record_eval(
        &mut self,
        unit: Vec<f64>,
        raw: Vec<f64>,
        value: f64,
        expansion: usize,
        depth: i64,
    ) {
        self.true_evals += 1;
        self.best = self.best.max(value);
        self.memo.insert(memo_key(&unit), value);
        self.trace.push_record(TraceRecord {
            eval: self.true_evals,
            point_unit: unit,
            point_raw: raw,
            value,
            best: self.best,
            expansion,
            depth,
            memo_hit: false,
        });
    }

    /// Records a memo replay: no budget, `eval` does not advance.
    pub fn record_memo(
        &mut self,
        unit: Vec<f64>,
        raw: Vec<f64>,
        value: f64,
        expansion: usize,
        depth: i64,
    ) {
        debug_assert!(value <= self.best, "memo value was observed before");
        self.trace.push_record(TraceRecord {
            eval: self.true_evals,
            point_unit: unit,
            point_raw: raw,
            value,
            best: self.best,
            expansion,
            depth,
            memo_hit: true,
        });
    }

    pub fn trace(&self) -> &RegretTrace {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut RegretTrace {
        &mut self.trace
    }

    pub fn into_trace(self) -> RegretTrace {
        self.trace
    }
}

/// GP surrogate with the hyperparameter policy folded in: pushing an
/// observation refits the factorisation and, under the MLE policy, refits
/// the hyperparameters every `refit_every` observations.
pub(crate) struct Surrogate {
    dim: usize,
    nu: f64,
    refit_every: Option<usize>,
    params: MaternParams,
    data: ObservationSet,
    model: Option<GpModel>,
    since_refit: usize,
}

impl Surrogate {
    pub fn new(dim: usize, policy: &HyperPolicy) -> Result<Self> {
        let (params, refit_every) = match policy {
            HyperPolicy::Fixed(params) => (*params, None),
            HyperPolicy::Mle { nu, refit_every } => {
                let nu = nu.unwrap_or_else(|| MaternParams::default_nu(dim));
                let initial = MaternParams::new(nu, 0.25 * (dim as f64).sqrt(), 1.0)?;
                (initial, Some(*refit_every))
            }
        };
        Ok(Self {
            dim,
            nu: params.nu(),
            refit_every,
            params,
            data: ObservationSet::new(dim),
            model: None,
            since_refit: 0,
        })
    }

    /// Appends an observation and refits. Hyperparameter refits that fail
    /// on every grid candidate keep the previous parameters; a failed
    /// factorisation propagates.
    pub fn push(&mut self, unit: Vec<f64>, value: f64) -> Result<()> {
        self.data.push(unit, value)?;
        if let Some(every) = self.refit_every {
            self.since_refit += 1;
            if self.model.is_none() || self.since_refit >= every {
                let grid = default_hyperparameter_grid(self.dim, &self.data);
                if let Ok(params) = fit_hyperparameters(&self.data, self.nu, &grid) {
                    self.params = params;
                }
                self.since_refit = 0;
            }
        }
        self.model = Some(gp::fit(self.params, self.data.clone())?);
        Ok(())
    }

    /// Posterior mean and standard deviation; the prior before any data.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        match &self.model {
            Some(model) => model.predict(x),
            None => Ok((0.0, self.params.variance().sqrt())),
        }
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        match &self.model {
            Some(model) => model.predict_batch(xs),
            None => Ok(vec![(0.0, self.params.variance().sqrt()); xs.len()]),
        }
    }

    pub fn ucb(&self, x: &[f64], sqrt_beta: f64) -> Result<f64> {
        let (mean, sd) = self.predict(x)?;
        Ok(mean + sqrt_beta * sd)
    }

    pub fn lcb(&self, x: &[f64], sqrt_beta: f64) -> Result<f64> {
        let (mean, sd) = self.predict(x)?;
        Ok(mean - sqrt_beta * sd)
    }

    pub fn ucb_batch(&self, xs: &[Vec<f64>], sqrt_beta: f64) -> Result<Vec<f64>> {
        Ok(self
            .predict_batch(xs)?
            .into_iter()
            .map(|(mean, sd)| mean + sqrt_beta * sd)
            .collect())
    }
}

/// Index of the maximum with ties broken toward the lowest index.
pub(crate) fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}
