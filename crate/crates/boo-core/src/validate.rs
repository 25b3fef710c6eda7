//! Runtime invariant suite behind `boo validate`, plus the independent
//! dense-solve reference implementations the suite (and the test corpus)
//! checks the fast paths against.
//!
//! The reference posterior here deliberately avoids the production linear
//! algebra: it inverts the jittered Gram matrix by Gauss-Jordan elimination
//! with partial pivoting instead of going through a Cholesky factor, so the
//! two paths share no solver code.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::{self, Domain};
use crate::gp::{self, ObservationSet};
use crate::kernel::{self, MaternParams};
use crate::optimizers::{
    h_max, run, Algorithm, FaultInjection, HyperPolicy, Objective, OptimizerConfig, RegretTrace,
};
use crate::partition::{self, PartitionScheme, Tree};

/// Posterior mean and (unclamped) variance at `x` via explicit K⁻¹.
///
/// `jitter` must be the value actually applied by the model under test so
/// both paths solve the same linear system.
pub fn dense_posterior(
    params: &MaternParams,
    data: &ObservationSet,
    jitter: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = data.len();
    if n == 0 {
        return (0.0, params.variance());
    }
    let points = data.points();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = params.kernel_of_distance(kernel::distance(&points[i], &points[j]));
        }
        k[i][i] += jitter;
    }
    let inv = invert_gauss_jordan(&k).expect("reference inversion failed on jittered Gram");

    let kx: Vec<f64> = points
        .iter()
        .map(|p| params.kernel_of_distance(kernel::distance(p, x)))
        .collect();
    let values = data.values();
    let mut mean = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += inv[i][j] * kx[j];
        }
        mean += row * values[i];
        quad += row * kx[i];
    }
    (mean, params.variance() - quad)
}

/// Dense matrix inverse by Gauss-Jordan elimination with partial pivoting.
/// Returns `None` when a pivot collapses below 1e-300 (numerically singular).
pub fn invert_gauss_jordan(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            debug_assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        if aug[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[row][col];
            if factor == 0.0 {
                continue;
            }
            let (pivot_slice, work_row) = if row < col {
                let (head, tail) = aug.split_at_mut(col);
                (&tail[0], &mut head[row])
            } else {
                let (head, tail) = aug.split_at_mut(row);
                (&head[col], &mut tail[0])
            };
            for j in 0..2 * n {
                work_row[j] -= factor * pivot_slice[j];
            }
        }
    }

    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Outcome of one validation property.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// One-line summary of the measured extremes.
    pub detail: String,
    pub seconds: f64,
}

/// Results of the full invariant suite, in execution order.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the fast invariant suite: kernel path agreement and positive
/// semidefiniteness, GP posterior equivalence against the dense reference,
/// noiseless interpolation, partition geometry bounds, budget accounting,
/// run determinism, and expansion legality.
///
/// `inject_fault` additionally runs the tree optimizer with its UCB gate
/// negated; the legality check must then fail, demonstrating that the
/// check actually discriminates.
pub fn run_suite(inject_fault: bool) -> ValidationReport {
    ValidationReport {
        checks: vec![
            check_kernel_path_agreement(),
            check_kernel_gram_psd(),
            check_gp_oracle_equivalence(),
            check_noiseless_interpolation(),
            check_partition_geometry(),
            check_budget_accounting(),
            check_run_determinism(),
            check_expansion_legality(inject_fault),
        ],
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> (bool, String)) -> CheckResult {
    let started = Instant::now();
    let (passed, detail) = body();
    CheckResult {
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Half-integer closed forms against the Bessel-series path, to 1e-8
/// relative over `r` from 1e-6 to ten lengthscales.
fn check_kernel_path_agreement() -> CheckResult {
    timed("kernel-path-agreement", || {
        let lengthscale = 0.37;
        let mut worst = 0.0f64;
        for half_n in 0..=5u32 {
            let nu = half_n as f64 + 0.5;
            let params = MaternParams::new(nu, lengthscale, 1.7).expect("static params");
            for i in 0..200 {
                let r = 1e-6 + (10.0 * lengthscale - 1e-6) * i as f64 / 199.0;
                let closed = params.kernel_of_distance(r);
                let bessel = params.kernel_of_distance_bessel(r);
                worst = worst.max((closed - bessel).abs() / closed.abs().max(1e-300));
            }
        }
        (worst < 1e-8, format!("worst relative gap {worst:.3e}"))
    })
}

/// Gram matrices of 50 random points stay positive semidefinite up to
/// `-1e-8·σ²` eigenvalue tolerance.
fn check_kernel_gram_psd() -> CheckResult {
    timed("kernel-gram-psd", || {
        let mut worst = f64::INFINITY;
        for (seed, dim, nu) in [(1u64, 2usize, 2.5), (2, 3, 6.0), (3, 4, 2.5), (4, 1, 6.0)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..dim).map(|_| rng.random()).collect())
                .collect();
            let params = MaternParams::new(nu, 0.3 * (dim as f64).sqrt(), 1.3).expect("static");
            let gram = kernel::gram(&params, &points).expect("gram");
            let min_eig = gram
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            worst = worst.min(min_eig / params.variance());
        }
        (worst >= -1e-8, format!("min eigenvalue {worst:.3e}·σ²"))
    })
}

/// Uniform points with pairwise distance at least `min_gap`, by rejection.
fn separated_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, min_gap: f64) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while points.len() < n {
        attempts += 1;
        assert!(attempts < 10_000 * n, "separation {min_gap} infeasible");
        let candidate: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
        if points
            .iter()
            .all(|p| kernel::distance(p, &candidate) >= min_gap)
        {
            points.push(candidate);
        }
    }
    points
}

/// Deterministic random regression sets covering n ≤ 50, D ≤ 4,
/// ν ∈ {5/2, 6}. Interpolating a noiseless GP to tight tolerance is only
/// well posed when the Gram matrix is far from singular, so the points
/// keep a dimension-scaled minimum separation and the per-dimension sizes
/// stay below the density at which the smooth kernels degenerate.
pub fn oracle_datasets() -> Vec<(MaternParams, ObservationSet)> {
    (0..20u64)
        .map(|k| {
            let dim = 1 + (k as usize % 4);
            let n_max = match dim {
                1 => 16,
                2 => 32,
                _ => 50,
            };
            let n = 10 + (k as usize * 7) % (n_max - 9);
            let nu = if dim <= 2 { 2.5 } else { 6.0 };
            let params =
                MaternParams::new(nu, 0.2 * (dim as f64).sqrt(), 1.0).expect("static params");
            let min_gap = if dim == 1 {
                0.4 / n as f64
            } else {
                0.3 * (n as f64).powf(-1.0 / dim as f64)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k);
            let mut data = ObservationSet::new(dim);
            for point in separated_points(&mut rng, n, dim, min_gap) {
                let value = 2.0 * rng.random::<f64>() - 1.0;
                data.push(point, value).expect("fresh random point");
            }
            (params, data)
        })
        .collect()
}

/// Cholesky-path posterior equals the dense Gauss-Jordan reference to
/// 1e-8 relative, at 20 off-sample queries per dataset.
fn check_gp_oracle_equivalence() -> CheckResult {
    timed("gp-oracle-equivalence", || {
        let mut worst = 0.0f64;
        for (i, (params, data)) in oracle_datasets().into_iter().enumerate() {
            let dim = data.dim();
            let model = match gp::fit(params, data.clone()) {
                Ok(m) => m,
                Err(e) => return (false, format!("fit failed on dataset {i}: {e}")),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + i as u64);
            for _ in 0..20 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
                let (mean, sd) = model.predict(&x).expect("predict");
                let (mean_ref, var_ref) = dense_posterior(&params, &data, model.jitter(), &x);
                worst = worst.max((mean - mean_ref).abs() / (1.0 + mean_ref.abs()));
                worst = worst.max((sd * sd - var_ref).abs() / (1.0 + var_ref.abs()));
            }
        }
        (worst <= 1e-8, format!("worst relative gap {worst:.3e}"))
    })
}

/// Posterior mean reproduces every training value to
/// 1e-6·(1 + max|y|) and posterior deviation collapses below 1e-4 there.
fn check_noiseless_interpolation() -> CheckResult {
    timed("gp-noiseless-interpolation", || {
        let mut worst_mean = 0.0f64;
        let mut worst_sd = 0.0f64;
        for (i, (params, data)) in oracle_datasets().into_iter().enumerate() {
            let model = match gp::fit(params, data.clone()) {
                Ok(m) => m,
                Err(e) => return (false, format!("fit failed on dataset {i}: {e}")),
            };
            let scale = 1.0 + data.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, &y) in data.points().iter().zip(data.values()) {
                let (mean, sd) = model.predict(x).expect("predict");
                worst_mean = worst_mean.max((mean - y).abs() / scale);
                worst_sd = worst_sd.max(sd);
            }
        }
        (
            worst_mean <= 1e-6 && worst_sd <= 1e-4,
            format!("worst scaled mean gap {worst_mean:.3e}, worst sd {worst_sd:.3e}"),
        )
    })
}

/// Every node of randomly grown trees obeys the side-length and
/// half-diagonal bounds, children tile their parent exactly, and depth
/// bookkeeping matches the cells.
fn check_partition_geometry() -> CheckResult {
    timed("partition-geometry-bounds", || {
        let cases = [
            (1usize, 2usize, 1usize),
            (2, 2, 2),
            (3, 2, 3),
            (3, 3, 2),
            (2, 4, 1),
        ];
        for (case, &(dim, a, b)) in cases.iter().enumerate() {
            let scheme = PartitionScheme::new(a, b).expect("static scheme");
            let mut tree = Tree::new(dim, scheme).expect("static tree");
            let mut rng = ChaCha8Rng::seed_from_u64(3000 + case as u64);
            let mut leaves = vec![0usize];
            for _ in 0..60 {
                let pick = rng.random_range(0..leaves.len());
                let id = leaves.swap_remove(pick);
                leaves.extend_from_slice(tree.expand(id));
            }
            for id in 0..tree.len() {
                let cell = tree.cell(id);
                let h = cell.depth();
                let (longest, shortest) = partition::side_length_bounds(&scheme, h, dim);
                let mut volume = 1.0;
                for d in 0..dim {
                    let side = cell.side(d);
                    volume *= side;
                    if side > longest * (1.0 + 1e-12) || side < shortest * (1.0 - 1e-12) {
                        return (
                            false,
                            format!("case {case}: node {id} side {side} outside bounds"),
                        );
                    }
                }
                if cell.half_diagonal() > partition::half_diagonal_bound(&scheme, h, dim) * (1.0 + 1e-12)
                {
                    return (false, format!("case {case}: node {id} diagonal bound"));
                }
                let children = tree.children(id);
                if children.is_empty() {
                    continue;
                }
                let mut child_volume = 0.0;
                for &c in children {
                    let child = tree.cell(c);
                    child_volume += (0..dim).map(|d| child.side(d)).product::<f64>();
                    for d in 0..dim {
                        if child.lower()[d] < cell.lower()[d] - 1e-12
                            || child.upper()[d] > cell.upper()[d] + 1e-12
                        {
                            return (false, format!("case {case}: child {c} escapes parent {id}"));
                        }
                    }
                    if child.depth() != h + 1 {
                        return (false, format!("case {case}: child {c} depth"));
                    }
                }
                if (child_volume - volume).abs() > 1e-12 * volume.max(1e-300) {
                    return (
                        false,
                        format!("case {case}: children of {id} do not tile it"),
                    );
                }
            }
        }
        (true, "5 schemes, 60 random expansions each".to_string())
    })
}

fn quick_config(budget: usize, a: usize, b: usize, dim: usize) -> OptimizerConfig {
    let mut config = OptimizerConfig::new(budget, PartitionScheme::new(a, b).expect("static"));
    config.hyper = HyperPolicy::default_fixed(dim);
    config
}

/// True evaluations never exceed budget plus the declared free initial
/// design, and the trace eval column counts exactly the non-memo rows.
fn check_budget_accounting() -> CheckResult {
    timed("budget-accounting", || {
        let objective = benchmarks::lookup("quadratic2d")
            .map(|spec| Objective::from_benchmark(&spec))
            .expect("registry function");
        for &algorithm in Algorithm::all() {
            let mut config = quick_config(24, 2, 2, 2);
            if matches!(algorithm, Algorithm::Boo | Algorithm::GpUcb) {
                config.n_init = 2;
            }
            let trace = match run(algorithm, &objective, &config) {
                Ok(t) => t,
                Err(e) => return (false, format!("{} failed: {e}", algorithm.name())),
            };
            let allowed = config.budget + config.n_init;
            let evals = trace.true_eval_count();
            if evals > allowed {
                return (
                    false,
                    format!("{}: {evals} evaluations > {allowed}", algorithm.name()),
                );
            }
            let mut count = 0;
            for record in trace.records() {
                if !record.memo_hit {
                    count += 1;
                }
                if record.eval != count {
                    return (false, format!("{}: eval column drift", algorithm.name()));
                }
            }
            if count != evals {
                return (false, format!("{}: eval total drift", algorithm.name()));
            }
        }
        (true, "4 algorithms within budget, eval column exact".to_string())
    })
}

/// Identical configurations reproduce identical traces, including the
/// maximum-likelihood refit path.
fn check_run_determinism() -> CheckResult {
    timed("run-determinism", || {
        let objective = benchmarks::lookup("quadratic2d")
            .map(|spec| Objective::from_benchmark(&spec))
            .expect("registry function");
        for &algorithm in Algorithm::all() {
            let mut config = quick_config(18, 2, 2, 2);
            config.hyper = HyperPolicy::default_mle();
            config.seed = 7;
            let first = run(algorithm, &objective, &config);
            let second = run(algorithm, &objective, &config);
            match (first, second) {
                (Ok(a), Ok(b)) if a == b => {}
                (Ok(_), Ok(_)) => {
                    return (false, format!("{} traces diverged", algorithm.name()))
                }
                (Err(e), _) | (_, Err(e)) => {
                    return (false, format!("{} failed: {e}", algorithm.name()))
                }
            }
        }
        (true, "4 algorithms bit-stable across reruns".to_string())
    })
}

/// Sharp local peak at a coarse cell center over a linear slope toward a
/// distant optimum. Every descendant of the peak cell is confidently worse
/// than its parent, the shape under which a corrupted expansion gate
/// produces recorded legality violations fastest.
pub fn fault_demo_objective() -> Objective {
    Objective::new(
        "ridge",
        Domain::unit(2).expect("static domain"),
        Arc::new(|x: &[f64]| {
            let peak = (x[0] - 0.25).powi(2) + (x[1] - 0.25).powi(2);
            let opt = (x[0] - 0.765).powi(2) + (x[1] - 0.735).powi(2);
            4.0 * (-peak / 0.005).exp() - 8.0 * opt.sqrt()
        }),
    )
}

fn legality_violations(trace: &RegretTrace) -> usize {
    trace
        .expansions()
        .iter()
        .filter(|e| e.score < e.v_max_before || e.depth > h_max(e.cap_p))
        .count()
}

/// Every recorded expansion won its gate (score ≥ v_max at decision time)
/// and stayed under the √p depth cap. With the fault injected the same
/// check must fail, proving it can discriminate.
fn check_expansion_legality(inject_fault: bool) -> CheckResult {
    timed("expansion-legality", || {
        let tree_algorithms = [Algorithm::Boo, Algorithm::Soo, Algorithm::Bamsoo];
        let runs = [("quadratic2d", 40usize, 2usize, 2usize), ("hartmann3", 50, 2, 3)];
        for (function, budget, a, b) in runs {
            let spec = benchmarks::lookup(function).expect("registry function");
            let objective = Objective::from_benchmark(&spec);
            for &algorithm in &tree_algorithms {
                let config = quick_config(budget, a, b, spec.dim());
                let trace = match run(algorithm, &objective, &config) {
                    Ok(t) => t,
                    Err(e) => return (false, format!("{} failed: {e}", algorithm.name())),
                };
                let violations = legality_violations(&trace);
                if violations > 0 {
                    return (
                        false,
                        format!("{} on {function}: {violations} violations", algorithm.name()),
                    );
                }
            }
        }
        if inject_fault {
            let mut config = quick_config(150, 2, 2, 2);
            config.fault = Some(FaultInjection::FlipUcbGate);
            let trace = match run(Algorithm::Boo, &fault_demo_objective(), &config) {
                Ok(t) => t,
                Err(e) => return (false, format!("faulted run failed: {e}")),
            };
            let violations = legality_violations(&trace);
            return (
                violations == 0,
                format!("injected gate fault: {violations} recorded violations"),
            );
        }
        (true, "clean gates on 2 functions x 3 tree algorithms".to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_known_matrix() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let inv = invert_gauss_jordan(&a).unwrap();
        // A⁻¹ = 1/11·[[3,−1],[−1,4]]
        assert!((inv[0][0] - 3.0 / 11.0).abs() < 1e-15);
        assert!((inv[0][1] + 1.0 / 11.0).abs() < 1e-15);
        assert!((inv[1][1] - 4.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_singular_matrix() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(invert_gauss_jordan(&a).is_none());
    }

    #[test]
    fn clean_suite_passes() {
        let report = run_suite(false);
        let failed: Vec<&CheckResult> = report.checks.iter().filter(|c| !c.passed).collect();
        assert!(report.passed(), "failed checks: {failed:#?}");
        assert_eq!(report.checks.len(), 8);
    }

    #[test]
    fn injected_fault_fails_only_the_legality_check() {
        let report = run_suite(true);
        assert!(!report.passed());
        for check in &report.checks {
            if check.name == "expansion-legality" {
                assert!(!check.passed, "legality must fail under the fault");
            } else {
                assert!(check.passed, "{} must not be affected", check.name);
            }
        }
    }

    #[test]
    fn identity_round_trip() {
        let a = vec![
            vec![2.0, -1.0, 0.5],
            vec![-1.0, 3.0, 0.25],
            vec![0.5, 0.25, 1.5],
        ];
        let inv = invert_gauss_jordan(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i][k] * inv[k][j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-14, "({i},{j}) = {s}");
            }
        }
    }
}
