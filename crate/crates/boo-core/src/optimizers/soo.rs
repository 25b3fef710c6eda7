//! Model-free optimistic tree search: expand the best-valued leaf per
//! depth, evaluating all children centers.
//!
//! Each sweep walks depths `0..=min(tree depth, h_max(t))`, selects the
//! depth's leaf with the highest center value, and expands it when that
//! value reaches the sweep threshold `v_max`, which is then set to the
//! parent's value (assignment, not running max: deeper expansions must
//! beat the shallower parent just expanded). Every expansion evaluates
//! all m children centers, so a run with budget N performs at most
//! floor(N/m)+1 expansions; an expansion that no longer fits in the
//! remaining budget ends the run instead of being evaluated partially.
//!
//! The depth-cap argument t counts node values known so far (the root
//! plus every resolved child), the evaluation-count convention of the
//! source method. Capping by the expansion ordinal instead wedges m = 2:
//! a perfect depth-3 binary tree takes 7 expansions, and
//! floor(sqrt(8)) = 2 would leave every leaf out of reach forever.

use std::collections::HashMap;

use crate::benchmarks::Domain;
use crate::error::{Error, Result};
use crate::partition::{self, Tree};

use super::{
    argmax_first, check_echo, h_max, AskTell, Book, ExpansionRecord, OptimizerConfig, Pending,
    RegretTrace,
};

enum Ctx {
    /// Root center: the run's one initialisation evaluation.
    Root,
    /// Child `node` of the in-flight expansion.
    Child { node: usize, depth: usize },
}

/// Children of the expansion currently being evaluated.
struct Progress {
    parent_value: f64,
    parent_depth: usize,
    children: Vec<usize>,
    next: usize,
}

/// Resumable state of one run.
pub struct SooState {
    domain: Domain,
    budget: usize,
    tree: Tree,
    book: Book,
    /// Center value of every evaluated node, by node id.
    values: HashMap<usize, f64>,
    /// Expansion ordinal: 1 + completed expansions.
    p: usize,
    sweep_h: usize,
    v_max: f64,
    /// Whether the current sweep has expanded anything (see `boo`).
    progressed: bool,
    root_done: bool,
    expansion: Option<Progress>,
    pending: Option<Pending<Ctx>>,
    done: bool,
}

impl SooState {
    pub fn new(domain: Domain, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let tree = Tree::new(domain.dim(), config.scheme)?;
        let mut state = Self {
            domain,
            budget: config.budget,
            tree,
            book: Book::new(),
            values: HashMap::new(),
            p: 1,
            sweep_h: 0,
            v_max: f64::NEG_INFINITY,
            progressed: true,
            root_done: false,
            expansion: None,
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
            // Finish the in-flight expansion before sweeping on.
            if let Some(progress) = &mut self.expansion {
                while progress.next < progress.children.len() {
                    let node = progress.children[progress.next];
                    let cell = self.tree.cell(node);
                    let depth = cell.depth();
                    let unit = cell.center().to_vec();
                    let raw = self.domain.from_unit(&unit);
                    if let Some(value) = self.book.memo_get(&unit) {
                        self.values.insert(node, value);
                        self.book.record_memo(unit, raw, value, self.p, depth as i64);
                        progress.next += 1;
                        continue;
                    }
                    // Affordability is checked before expanding, so this
                    // cannot trip; kept as a defensive stop.
                    if self.book.true_evals() >= self.budget {
                        self.done = true;
                        return Ok(());
                    }
                    self.pending = Some(Pending {
                        unit,
                        raw,
                        ctx: Ctx::Child { node, depth },
                    });
                    return Ok(());
                }
                self.v_max = progress.parent_value;
                self.sweep_h = progress.parent_depth + 1;
                self.p += 1;
                self.expansion = None;
            }
            if self.book.true_evals() >= self.budget {
                self.done = true;
                return Ok(());
            }
            let cap = self.tree.depth().min(h_max(self.values.len()));
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
            let scores: Vec<f64> = leaves.iter().map(|id| self.values[id]).collect();
            let best = argmax_first(&scores).expect("depth is nonempty");
            let value = scores[best];
            if value >= self.v_max {
                let node = leaves[best];
                // Preview the children: only non-memoized centers cost
                // budget. A partial expansion would break the exactly-m
                // contract, so an unaffordable one ends the run.
                let scheme = self.tree.scheme();
                let required = partition::split(self.tree.cell(node), &scheme)
                    .iter()
                    .filter(|c| self.book.memo_get(c.center()).is_none())
                    .count();
                if self.budget - self.book.true_evals() < required {
                    self.done = true;
                    return Ok(());
                }
                self.book.trace_mut().push_expansion(ExpansionRecord {
                    p: self.p,
                    cap_p: self.values.len(),
                    depth: self.sweep_h,
                    score: value,
                    v_max_before: self.v_max,
                });
                let children = self.tree.expand(node).to_vec();
                self.progressed = true;
                self.expansion = Some(Progress {
                    parent_value: value,
                    parent_depth: self.sweep_h,
                    children,
                    next: 0,
                });
                continue;
            }
            self.sweep_h += 1;
        }
    }
}

impl AskTell for SooState {
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
            Ctx::Root => {
                self.book.record_eval(unit, raw, value, 0, 0);
                self.values.insert(0, value);
                self.root_done = true;
            }
            Ctx::Child { node, depth } => {
                self.book.record_eval(unit, raw, value, self.p, depth as i64);
                self.values.insert(node, value);
                let progress = self
                    .expansion
                    .as_mut()
                    .expect("a child tell belongs to an in-flight expansion");
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::optimizers::tests::{base_config, quadratic2d_objective};
    use crate::optimizers::{run_soo, Objective};

    fn quadratic1d_objective() -> Objective {
        Objective::from_benchmark(&benchmarks::lookup("quadratic1d").unwrap())
    }

    #[test]
    fn root_then_children_on_the_unit_interval() {
        let objective = quadratic1d_objective();
        let trace = run_soo(&objective, &base_config(3, 2, 1)).unwrap();
        let points: Vec<f64> = trace.records().iter().map(|r| r.point_raw[0]).collect();
        assert_eq!(points, vec![0.5, 0.25, 0.75]);
        assert_eq!(trace.records()[0].expansion, 0);
        assert_eq!(trace.records()[1].expansion, 1);
    }

    #[test]
    fn every_expansion_costs_exactly_m_evaluations() {
        let objective = quadratic2d_objective();
        let budget = 21;
        let trace = run_soo(&objective, &base_config(budget, 2, 2)).unwrap();
        let m = 4;
        assert_eq!(trace.true_eval_count(), 21);
        assert_eq!(trace.expansions().len(), 5);
        assert!(trace.expansions().len() <= budget / m + 1);
        for exp in trace.expansions() {
            let evals = trace
                .records()
                .iter()
                .filter(|r| r.expansion == exp.p && !r.memo_hit)
                .count();
            assert_eq!(evals, m);
        }
    }

    #[test]
    fn unaffordable_expansion_ends_the_run() {
        let objective = quadratic2d_objective();
        // Root + 4 full expansions = 17 evaluations; 3 remaining cannot
        // pay for a fifth.
        let trace = run_soo(&objective, &base_config(20, 2, 2)).unwrap();
        assert_eq!(trace.true_eval_count(), 17);
        assert_eq!(trace.expansions().len(), 4);
    }

    #[test]
    fn odd_division_counts_replay_the_parent_center() {
        let objective = quadratic1d_objective();
        let trace = run_soo(&objective, &base_config(9, 3, 1)).unwrap();
        // First expansion: middle child center equals the root center.
        let first: Vec<_> = trace
            .records()
            .iter()
            .filter(|r| r.expansion == 1)
            .collect();
        assert_eq!(first.len(), 3);
        assert_eq!(first.iter().filter(|r| r.memo_hit).count(), 1);
        let memo = first.iter().find(|r| r.memo_hit).unwrap();
        assert_eq!(memo.point_raw, vec![0.5]);
        // Children arrive in rank order (1/6, then the replayed 1/2, then
        // 5/6), so the replay sits between the two fresh evaluations.
        assert_eq!(memo.eval, 2);
    }

    #[test]
    fn expansions_respect_depth_cap_and_gate_legality() {
        let objective = quadratic2d_objective();
        let trace = run_soo(&objective, &base_config(60, 2, 2)).unwrap();
        for (i, exp) in trace.expansions().iter().enumerate() {
            assert_eq!(exp.p, i + 1);
            assert!(exp.depth <= crate::optimizers::h_max(exp.cap_p));
            assert!(exp.score >= exp.v_max_before);
        }
    }

    #[test]
    fn binary_splits_outrun_the_depth_cap() {
        // A perfect depth-3 binary tree stands after 7 expansions; an
        // expansion-count cap (floor(sqrt(8)) = 2) would strand every
        // leaf there. The value-count cap has 15 values known, allows
        // depth 3, and the run continues to the affordability stop.
        let objective = quadratic1d_objective();
        let trace = run_soo(&objective, &base_config(100, 2, 1)).unwrap();
        assert_eq!(trace.true_eval_count(), 99);
        assert!(trace.expansions().len() == 49);
        let deepest = trace.expansions().iter().map(|e| e.depth).max().unwrap();
        assert!(deepest > 3, "cap never wedges, got max depth {deepest}");
    }

    #[test]
    fn runs_are_deterministic() {
        let objective = quadratic2d_objective();
        let config = base_config(33, 2, 2);
        assert_eq!(
            run_soo(&objective, &config).unwrap(),
            run_soo(&objective, &config).unwrap()
        );
    }

    #[test]
    fn manual_ask_tell_reproduces_the_closed_loop_trace() {
        let objective = quadratic2d_objective();
        let config = base_config(25, 2, 2);
        let reference = run_soo(&objective, &config).unwrap();
        let mut state = SooState::new(objective.domain().clone(), &config).unwrap();
        while !state.is_done() {
            let point = state.ask().unwrap();
            let value = objective.evaluate_raw(&point);
            state.tell(&point, value).unwrap();
        }
        assert_eq!(Box::new(state).into_trace(), reference);
    }
}
