//! Noiseless Gaussian-process posterior over an incrementally growing
//! observation set: mean, variance, confidence bounds, log marginal
//! likelihood, and grid-search hyperparameter selection.
//!
//! The prior mean is zero. With exact observations the Gram matrix is only
//! regularised by a small diagonal jitter (starting at 1e-12·σ², escalating
//! ×10 on Cholesky failure up to 1e-6·σ²); a fit that still fails reports the
//! nearest pair of training points, since near-duplicates are the usual
//! culprit.

use crate::error::{Error, Result};
use crate::kernel::{self, MaternParams};
use nalgebra::{DMatrix, DVector};

/// Relative jitter ladder: multiples of σ² tried in order.
const JITTER_LADDER_START: f64 = 1e-12;
const JITTER_LADDER_END: f64 = 1e-6;

/// Training inputs in `[0,1]^D` with their (noiseless) objective values.
/// Points are kept pairwise distinct: a duplicate row would make the
/// unjittered Gram matrix exactly singular.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(dim: usize) -> Self {
        ObservationSet {
            dim,
            points: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends an observation. Rejects dimension mismatches and bit-exact
    /// duplicates of an existing point.
    pub fn push(&mut self, point: Vec<f64>, value: f64) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        if let Some(i) = self.points.iter().position(|p| p == &point) {
            return Err(Error::InvalidParameter {
                name: "point",
                message: format!("bit-exact duplicate of observation #{i}"),
            });
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample variance of the values (0 for fewer than two observations).
    pub fn value_variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.values.iter().sum::<f64>() / n as f64;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    }

    /// Closest pair of training points (used in ill-conditioning reports).
    pub fn nearest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let d = kernel::distance(&self.points[i], &self.points[j]);
                if best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }
}

/// Confidence-bound schedule: β_p = 2·log(π²p³/(3η)), so that all upper
/// bounds assessed during the run hold simultaneously with probability 1−η.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceParams {
    eta: f64,
    p: usize,
}

impl ConfidenceParams {
    pub fn new(eta: f64, p: usize) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                message: format!("must be in (0,1), got {eta}"),
            });
        }
        if p == 0 {
            return Err(Error::InvalidParameter {
                name: "p",
                message: "expansion count must be ≥ 1".to_string(),
            });
        }
        Ok(ConfidenceParams { eta, p })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn beta(&self) -> f64 {
        let p = self.p as f64;
        2.0 * (std::f64::consts::PI.powi(2) * p.powi(3) / (3.0 * self.eta)).ln()
    }

    pub fn sqrt_beta(&self) -> f64 {
        self.beta().sqrt()
    }
}

/// Fitted posterior state. Immutable after `fit`; `predict`/`ucb`/`lcb` are
/// read-only and safe to call concurrently.
#[derive(Clone, Debug)]
pub struct GpModel {
    params: MaternParams,
    data: ObservationSet,
    /// Lower-triangular Cholesky factor of the jittered Gram matrix
    /// (empty 0×0 for a prior model).
    chol_l: DMatrix<f64>,
    /// L⁻¹·y, cached for O(n) posterior means.
    white_values: DVector<f64>,
    jitter: f64,
}

/// Fits the noiseless posterior, escalating jitter until the Cholesky
/// factorisation succeeds. Empty data yields the prior model.
pub fn fit(params: MaternParams, data: ObservationSet) -> Result<GpModel> {
    let n = data.len();
    if n == 0 {
        return Ok(GpModel {
            params,
            data,
            chol_l: DMatrix::zeros(0, 0),
            white_values: DVector::zeros(0),
            jitter: 0.0,
        });
    }
    let gram = kernel::gram(&params, data.points())?;
    let mut rel_jitter = JITTER_LADDER_START;
    loop {
        let jitter = rel_jitter * params.variance();
        let mut k = gram.clone();
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = k.cholesky() {
            let chol_l = chol.unpack();
            let mut white = DVector::from_column_slice(data.values());
            chol_l.solve_lower_triangular_mut(&mut white);
            return Ok(GpModel {
                params,
                data,
                chol_l,
                white_values: white,
                jitter,
            });
        }
        if rel_jitter >= JITTER_LADDER_END {
            let (i, j, distance) = data.nearest_pair().unwrap_or((0, 0, f64::NAN));
            return Err(Error::IllConditionedGram {
                max_jitter: JITTER_LADDER_END * params.variance(),
                i,
                j,
                distance,
            });
        }
        rel_jitter *= 10.0;
    }
}

impl GpModel {
    pub fn params(&self) -> &MaternParams {
        &self.params
    }

    pub fn data(&self) -> &ObservationSet {
        &self.data
    }

    /// Diagonal regularisation actually applied (absolute, not relative).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean and standard deviation at `x`.
    ///
    /// Variance is clamped at zero; in exact arithmetic
    /// k(x,x) − kᵀK⁻¹k ≥ 0, and floating point can only undershoot by a few
    /// ulps of σ².
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let n = self.data.len();
        if n == 0 {
            return Ok((0.0, self.params.variance().sqrt()));
        }
        let mut kx = DVector::from_iterator(
            n,
            self.data
                .points()
                .iter()
                .map(|p| self.params.kernel_of_distance(kernel::distance(p, x))),
        );
        self.chol_l.solve_lower_triangular_mut(&mut kx);
        let mean = kx.dot(&self.white_values);
        let var = self.params.variance() - kx.norm_squared();
        Ok((mean, var.max(0.0).sqrt()))
    }

    /// Batch prediction: one triangular solve with a matrix right-hand side
    /// instead of per-point solves. Same results as repeated `predict`.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let n = self.data.len();
        if n == 0 {
            let sd = self.params.variance().sqrt();
            for x in xs {
                self.check_dim(x)?;
            }
            return Ok(vec![(0.0, sd); xs.len()]);
        }
        let m = xs.len();
        let mut kmat = DMatrix::zeros(n, m);
        for (c, x) in xs.iter().enumerate() {
            self.check_dim(x)?;
            for (r, p) in self.data.points().iter().enumerate() {
                kmat[(r, c)] = self.params.kernel_of_distance(kernel::distance(p, x));
            }
        }
        self.chol_l.solve_lower_triangular_mut(&mut kmat);
        let out = (0..m)
            .map(|c| {
                let col = kmat.column(c);
                let mean = col.dot(&self.white_values);
                let var = self.params.variance() - col.norm_squared();
                (mean, var.max(0.0).sqrt())
            })
            .collect();
        Ok(out)
    }

    /// Upper confidence bound μ(x) + √β_p·σ(x).
    pub fn ucb(&self, x: &[f64], conf: &ConfidenceParams) -> Result<f64> {
        let (mean, sd) = self.predict(x)?;
        Ok(mean + conf.sqrt_beta() * sd)
    }

    /// Lower confidence bound μ(x) − √β_p·σ(x).
    pub fn lcb(&self, x: &[f64], conf: &ConfidenceParams) -> Result<f64> {
        let (mean, sd) = self.predict(x)?;
        Ok(mean - conf.sqrt_beta() * sd)
    }
}

/// Log marginal likelihood −½yᵀK⁻¹y − ½log|K| − (n/2)·log 2π over the
/// jittered Gram matrix.
pub fn log_marginal_likelihood(params: MaternParams, data: &ObservationSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let model = fit(params, data.clone())?;
    let n = data.len() as f64;
    let quad = model.white_values.norm_squared();
    let log_det = model.chol_l.diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * quad - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Selects the (λ, σ²) grid element maximising the log marginal likelihood
/// at fixed ν. Ties break to the lowest grid index; candidates whose fit
/// fails are skipped.
pub fn fit_hyperparameters(
    data: &ObservationSet,
    nu: f64,
    grid: &[(f64, f64)],
) -> Result<MaternParams> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            message: "hyperparameter grid is empty".to_string(),
        });
    }
    let mut best: Option<(f64, MaternParams)> = None;
    for &(lengthscale, variance) in grid {
        let params = MaternParams::new(nu, lengthscale, variance)?;
        let Ok(lml) = log_marginal_likelihood(params, data) else {
            continue;
        };
        if best.as_ref().map_or(true, |(b, _)| lml > *b) {
            best = Some((lml, params));
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| Error::InvalidParameter {
        name: "grid",
        message: "every grid candidate failed to fit".to_string(),
    })
}

/// Default MLE grid: λ logarithmic over 10^[-2, 0.5]·√D (13 points, √D being
/// the unit-cube diameter) crossed with σ² ∈ {0.25, 1, 4}·max(var(y), 1e-12).
pub fn default_hyperparameter_grid(dim: usize, data: &ObservationSet) -> Vec<(f64, f64)> {
    let diameter = (dim as f64).sqrt();
    // An empty or constant observation set estimates zero variance; anchoring
    // the scan there collapses every confidence interval to a point and
    // starves UCB-gated sampling, so fall back to unit signal variance until
    // the observed values actually spread.
    let y_var = data.value_variance();
    let y_var = if y_var > 1e-8 { y_var } else { 1.0 };
    let mut grid = Vec::with_capacity(13 * 3);
    for i in 0..13 {
        let exponent = -2.0 + 2.5 * i as f64 / 12.0;
        let lengthscale = 10f64.powf(exponent) * diameter;
        for scale in [0.25, 1.0, 4.0] {
            grid.push((lengthscale, scale * y_var));
        }
    }
    grid
}
