//! Optimistic tree search with a GP gate deciding, child by child,
//! between a true evaluation and a surrogate lower bound.
//!
//! The sweep skeleton matches `soo`, selecting leaves by their g-value:
//! the objective value where one was paid for, otherwise the GP lower
//! confidence bound. When a node is expanded, each child center is gated
//! on its UCB against the best value seen so far, f+: children that look
//! able to beat f+ are truly evaluated (and join the GP data); the rest
//! receive their LCB as g. An expansion may therefore cost anywhere from
//! 0 to m evaluations. The root center is evaluated at initialisation and
//! counts against the budget; optional seeded initial-design points train
//! the GP beforehand without touching the budget or the gate threshold.
//!
//! As in `soo`, the depth cap argument is the count of known g-values
//! (the source pseudocode steps its counter once per gated child), not
//! the expansion ordinal, which would wedge binary splits. The
//! confidence-interval schedule beta_p stays on the expansion ordinal.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::Domain;
use crate::error::{Error, Result};
use crate::gp::ConfidenceParams;
use crate::partition::Tree;

use super::{
    argmax_first, check_echo, h_max, AskTell, Book, ExpansionRecord, GateRecord,
    OptimizerConfig, Pending, RegretTrace, Surrogate, MAX_STALLED_EXPANSIONS,
};

enum Ctx {
    /// Seeded initial-design point; not charged against the budget. It
    /// trains the GP but assigns no g-value, so f+ still starts at the
    /// root value.
    Init,
    /// Root center: the run's one budgeted initialisation evaluation.
    Root,
    /// Gate-passing child awaiting its true evaluation; the gate inputs
    /// are stashed so the decision is recorded with its own thresholds.
    Child {
        node: usize,
        depth: usize,
        ucb: f64,
        f_plus_before: f64,
    },
}

/// Children of the expansion currently being gated.
struct Progress {
    parent_g: f64,
    parent_depth: usize,
    children: Vec<usize>,
    next: usize,
    true_evals_here: usize,
}

/// Resumable state of one run.
pub struct BamsooState {
    domain: Domain,
    budget: usize,
    eta: f64,
    tree: Tree,
    surrogate: Surrogate,
    book: Book,
    /// g-value of every node: true value or LCB at assignment time.
    g: HashMap<usize, f64>,
    /// Best value assigned to g so far (gate threshold).
    f_plus: f64,
    /// Expansion ordinal: 1 + completed expansions. Argument of beta_p;
    /// constant across one expansion's child gates. The depth cap takes
    /// `g.len()` instead.
    p: usize,
    sweep_h: usize,
    v_max: f64,
    /// Whether the current sweep has expanded anything (see `boo`).
    progressed: bool,
    init_points: Vec<Vec<f64>>,
    init_done: usize,
    root_done: bool,
    /// True evaluations charged against `budget` (initial design excluded).
    budget_spent: usize,
    expansion: Option<Progress>,
    /// Consecutive expansions without a true evaluation.
    stalled: usize,
    pending: Option<Pending<Ctx>>,
    done: bool,
}

impl BamsooState {
    pub fn new(domain: Domain, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let dim = domain.dim();
        let tree = Tree::new(dim, config.scheme)?;
        let surrogate = Surrogate::new(dim, &config.hyper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init_points: Vec<Vec<f64>> = (0..config.n_init)
            .map(|_| (0..dim).map(|_| rng.random()).collect())
            .collect();
        let mut state = Self {
            domain,
            budget: config.budget,
            eta: config.eta,
            tree,
            surrogate,
            book: Book::new(),
            g: HashMap::new(),
            f_plus: f64::NEG_INFINITY,
            p: 1,
            sweep_h: 0,
            v_max: f64::NEG_INFINITY,
            progressed: true,
            init_points,
            init_done: 0,
            root_done: false,
            budget_spent: 0,
            expansion: None,
            stalled: 0,
            pending: None,
            done: false,
        };
        state.advance()?;
        Ok(state)
    }

    fn advance(&mut self) -> Result<()> {
        debug_assert!(self.pending.is_none());
        if self.done {
            return Ok(());
        }
        if self.init_done < self.init_points.len() {
            let unit = self.init_points[self.init_done].clone();
            let raw = self.domain.from_unit(&unit);
            self.pending = Some(Pending {
                unit,
                raw,
                ctx: Ctx::Init,
            });
            return Ok(());
        }
        if !self.root_done {
            let unit = self.tree.cell(0).center().to_vec();
            let raw = self.domain.from_unit(&unit);
            self.pending = Some(Pending {
                unit,
                raw,
                ctx: Ctx::Root,
            });
            return Ok(());
        }
        loop {
            // Gate the in-flight expansion's remaining children first.
            if let Some(progress) = &mut self.expansion {
                while progress.next < progress.children.len() {
                    let node = progress.children[progress.next];
                    let cell = self.tree.cell(node);
                    let depth = cell.depth();
                    let unit = cell.center().to_vec();
                    let raw = self.domain.from_unit(&unit);
                    let conf = ConfidenceParams::new(self.eta, self.p)?;
                    let sqrt_beta = conf.sqrt_beta();
                    let ucb = self.surrogate.ucb(&unit, sqrt_beta)?;
                    if let Some(value) = self.book.memo_get(&unit) {
                        // The value is already known, so the gate has
                        // nothing to decide; recorded for the trace only.
                        self.g.insert(node, value);
                        self.book.trace_mut().push_gate(GateRecord {
                            p: self.p,
                            child_depth: depth,
                            ucb,
                            f_plus_before: self.f_plus,
                            evaluated: false,
                            memo: true,
                        });
                        self.book.record_memo(unit, raw, value, self.p, depth as i64);
                        if value > self.f_plus {
                            self.f_plus = value;
                        }
                        progress.next += 1;
                        continue;
                    }
                    if ucb >= self.f_plus {
                        if self.budget_spent >= self.budget {
                            self.done = true;
                            return Ok(());
                        }
                        self.pending = Some(Pending {
                            unit,
                            raw,
                            ctx: Ctx::Child {
                                node,
                                depth,
                                ucb,
                                f_plus_before: self.f_plus,
                            },
                        });
                        return Ok(());
                    }
                    let lcb = self.surrogate.lcb(&unit, sqrt_beta)?;
                    self.g.insert(node, lcb);
                    self.book.trace_mut().push_gate(GateRecord {
                        p: self.p,
                        child_depth: depth,
                        ucb,
                        f_plus_before: self.f_plus,
                        evaluated: false,
                        memo: false,
                    });
                    // In this branch lcb <= ucb < f_plus, so the threshold
                    // cannot move; kept for symmetry with the source rule.
                    if lcb > self.f_plus {
                        self.f_plus = lcb;
                    }
                    progress.next += 1;
                }
                self.v_max = progress.parent_g;
                self.sweep_h = progress.parent_depth + 1;
                self.p += 1;
                if progress.true_evals_here == 0 {
                    self.stalled += 1;
                } else {
                    self.stalled = 0;
                }
                self.expansion = None;
            }
            if self.budget_spent >= self.budget || self.stalled >= MAX_STALLED_EXPANSIONS {
                self.done = true;
                return Ok(());
            }
            let cap = self.tree.depth().min(h_max(self.g.len()));
            if self.sweep_h > cap {
                if !self.progressed {
                    self.done = true;
                    return Ok(());
                }
                self.progressed = false;
                self.sweep_h = 0;
                self.v_max = f64::NEG_INFINITY;
                continue;
            }
            let leaves: Vec<usize> = self.tree.leaves_at_depth(self.sweep_h).to_vec();
            if leaves.is_empty() {
                self.sweep_h += 1;
                continue;
            }
            let scores: Vec<f64> = leaves.iter().map(|id| self.g[id]).collect();
            let best = argmax_first(&scores).expect("depth is nonempty");
            let g_best = scores[best];
            if g_best >= self.v_max {
                self.book.trace_mut().push_expansion(ExpansionRecord {
                    p: self.p,
                    cap_p: self.g.len(),
                    depth: self.sweep_h,
                    score: g_best,
                    v_max_before: self.v_max,
                });
                let children = self.tree.expand(leaves[best]).to_vec();
                self.progressed = true;
                self.expansion = Some(Progress {
                    parent_g: g_best,
                    parent_depth: self.sweep_h,
                    children,
                    next: 0,
                    true_evals_here: 0,
                });
                continue;
            }
            self.sweep_h += 1;
        }
    }
}

impl AskTell for BamsooState {
    fn ask(&mut self) -> Result<Vec<f64>> {
        match &self.pending {
            Some(pending) => Ok(pending.raw.clone()),
            None => Err(Error::BudgetExhausted {
                evaluations: self.book.true_evals(),
            }),
        }
    }

    fn tell(&mut self, point: &[f64], value: f64) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("tell without a pending ask".to_string()))?;
        if let Err(e) = check_echo(&pending.raw, point) {
            self.pending = Some(pending);
            return Err(e);
        }
        let Pending { unit, raw, ctx } = pending;
        match ctx {
            Ctx::Init => {
                self.book.record_eval(unit.clone(), raw, value, 0, -1);
                self.surrogate.push(unit, value)?;
                self.init_done += 1;
            }
            Ctx::Root => {
                self.book.record_eval(unit.clone(), raw, value, 0, 0);
                self.budget_spent += 1;
                self.surrogate.push(unit, value)?;
                self.g.insert(0, value);
                self.f_plus = value;
                self.root_done = true;
            }
            Ctx::Child {
                node,
                depth,
                ucb,
                f_plus_before,
            } => {
                self.book.trace_mut().push_gate(GateRecord {
                    p: self.p,
                    child_depth: depth,
                    ucb,
                    f_plus_before,
                    evaluated: true,
                    memo: false,
                });
                self.book
                    .record_eval(unit.clone(), raw, value, self.p, depth as i64);
                self.budget_spent += 1;
                self.surrogate.push(unit, value)?;
                self.g.insert(node, value);
                if value > self.f_plus {
                    self.f_plus = value;
                }
                let progress = self
                    .expansion
                    .as_mut()
                    .expect("a child tell belongs to an in-flight expansion");
                progress.true_evals_here += 1;
                progress.next += 1;
            }
        }
        self.advance()
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn trace(&self) -> &RegretTrace {
        self.book.trace()
    }

    fn into_trace(self: Box<Self>) -> RegretTrace {
        self.book.into_trace()
    }
}
