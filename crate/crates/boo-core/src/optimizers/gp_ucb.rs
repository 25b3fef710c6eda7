//! Classic Bayesian optimisation: maximise the GP-UCB acquisition over
//! the whole domain, evaluate there, refit, repeat.
//!
//! The inner maximiser is deterministic multi-start coordinate descent:
//! 16 seeded uniform starts, each refined by per-coordinate line searches
//! (a 33-point grid plus two zoomed passes, resolving to about 1e-4 of
//! the domain side) until a full sweep stops improving. Ties prefer the
//! lowest grid index and the earliest start, so runs are reproducible
//! bit-for-bit. Candidates that collide with an already-evaluated point
//! are dropped; if every start collides, the search has collapsed onto
//! the data and the run ends.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::Domain;
use crate::error::{Error, Result};
use crate::gp::ConfidenceParams;

use super::{
    argmax_first, check_echo, AskTell, Book, OptimizerConfig, Pending, RegretTrace, Surrogate,
};

/// Seeded uniform starts per acquisition.
const STARTS: usize = 16;
/// Grid points per line-search pass.
const GRID: usize = 33;
/// Zoomed line-search passes after the full-range pass.
const REFINES: usize = 2;
/// Coordinate-descent sweep cap per start (early exit on no improvement).
const MAX_SWEEPS: usize = 200;

enum Ctx {
    /// Seeded initial-design point; not charged against the budget.
    Init,
    /// Acquisition argmax awaiting its evaluation.
    Acquisition,
}

/// Resumable state of one run.
pub struct GpUcbState {
    domain: Domain,
    budget: usize,
    eta: f64,
    seed: u64,
    surrogate: Surrogate,
    book: Book,
    /// Completed acquisitions; the ordinal drives the beta_p schedule.
    iteration: usize,
    init_points: Vec<Vec<f64>>,
    init_done: usize,
    pending: Option<Pending<Ctx>>,
    done: bool,
}

impl GpUcbState {
    pub fn new(domain: Domain, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let dim = domain.dim();
        let surrogate = Surrogate::new(dim, &config.hyper)?;
        // Stream 0 is reserved for the initial design; acquisition
        // ordinals use their own streams below.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init_points: Vec<Vec<f64>> = (0..config.n_init)
            .map(|_| (0..dim).map(|_| rng.random()).collect())
            .collect();
        let mut state = Self {
            domain,
            budget: config.budget,
            eta: config.eta,
            seed: config.seed,
            surrogate,
            book: Book::new(),
            iteration: 0,
            init_points,
            init_done: 0,
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
        if self.iteration >= self.budget {
            self.done = true;
            return Ok(());
        }
        match self.maximize_acquisition()? {
            Some(unit) => {
                let raw = self.domain.from_unit(&unit);
                self.pending = Some(Pending {
                    unit,
                    raw,
                    ctx: Ctx::Acquisition,
                });
            }
            None => self.done = true,
        }
        Ok(())
    }

    /// UCB argmax over the unit cube for the next acquisition ordinal.
    /// Returns `None` when every start collapsed onto an evaluated point.
    fn maximize_acquisition(&self) -> Result<Option<Vec<f64>>> {
        let dim = self.domain.dim();
        let ordinal = self.iteration + 1;
        let conf = ConfidenceParams::new(self.eta, ordinal)?;
        let sqrt_beta = conf.sqrt_beta();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(ordinal as u64);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..STARTS {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let mut acq = self.surrogate.ucb(&x, sqrt_beta)?;
            for _ in 0..MAX_SWEEPS {
                let mut improved = false;
                for d in 0..dim {
                    let (coord, value) = self.line_search(&x, d, sqrt_beta)?;
                    if value > acq {
                        x[d] = coord;
                        acq = value;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            if self.book.memo_get(&x).is_none()
                && best.as_ref().is_none_or(|(_, b)| acq > *b)
            {
                best = Some((x, acq));
            }
        }
        Ok(best.map(|(x, _)| x))
    }

    /// Best UCB along coordinate `d` through `x`: full-range grid pass,
    /// then `REFINES` zooms of one grid step around the running best.
    fn line_search(&self, x: &[f64], d: usize, sqrt_beta: f64) -> Result<(f64, f64)> {
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut best_coord = x[d];
        let mut best_value = f64::NEG_INFINITY;
        for _ in 0..=REFINES {
            let step = (hi - lo) / (GRID - 1) as f64;
            let candidates: Vec<Vec<f64>> = (0..GRID)
                .map(|j| {
                    let mut point = x.to_vec();
                    point[d] = lo + step * j as f64;
                    point
                })
                .collect();
            let scores = self.surrogate.ucb_batch(&candidates, sqrt_beta)?;
            let bi = argmax_first(&scores).expect("grid is nonempty");
            best_coord = candidates[bi][d];
            best_value = scores[bi];
            lo = (best_coord - step).max(0.0);
            hi = (best_coord + step).min(1.0);
        }
        Ok((best_coord, best_value))
    }
}

impl AskTell for GpUcbState {
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
            Ctx::Acquisition => {
                self.iteration += 1;
                self.book
                    .record_eval(unit.clone(), raw, value, self.iteration, -1);
                self.surrogate.push(unit, value)?;
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
