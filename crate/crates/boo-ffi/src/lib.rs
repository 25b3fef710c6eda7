//! C ABI over the `boo-core` optimisers.
//!
//! The interface mirrors the Rust ask/tell protocol: construct an optimiser
//! over an axis-aligned box, repeatedly fetch a point with [`boo_ask`],
//! evaluate it, and report the value with [`boo_tell`] passing back the
//! asked coordinates unchanged. Every fallible call returns a [`BooStatus`];
//! on failure [`boo_last_error`] describes the most recent error on the
//! calling thread.
//!
//! Handles are opaque, single-owner, and not thread-safe: drive one
//! [`BooOptimizer`] from one thread at a time and release it with
//! [`boo_free`]. Panics never unwind across the boundary; they are caught
//! and surfaced as [`BooStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use boo_core::benchmarks::{self, Domain};
use boo_core::harness::resolve_auto_scheme;
use boo_core::optimizers::{new_state, Algorithm, AskTell, HyperPolicy, OptimizerConfig};
use boo_core::partition::PartitionScheme;
use boo_core::Error;

/// Outcome of a C-interface call. Anything other than `Ok` leaves an
/// explanation in [`boo_last_error`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BooStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A configuration or argument value was rejected.
    InvalidArgument = 3,
    /// The benchmark name is not in the registry.
    UnknownFunction = 4,
    /// `ask` was called after the evaluation budget was consumed.
    BudgetExhausted = 5,
    /// The call violated the ask/tell protocol (wrong point echoed,
    /// tell without a pending ask, or tell after completion).
    Protocol = 6,
    /// An internal numerical failure, e.g. an ill-conditioned Gram matrix.
    Runtime = 7,
    /// An internal panic was caught at the boundary.
    Panic = 8,
}

/// Kernel hyperparameter policy selector for [`BooConfig`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BooHyper {
    /// Periodic maximum-likelihood refits (the default).
    Mle = 0,
    /// Dimension-scaled fixed kernel, never refit.
    Fixed = 1,
}

/// Run configuration. Obtain defaults from [`boo_config_default`] and
/// override fields as needed.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BooConfig {
    /// Maximum number of true objective evaluations (excluding `n_init`).
    pub budget: u64,
    /// Per-dimension split count; 0 selects the budget-derived scheme.
    pub scheme_a: u32,
    /// Number of dimensions split per expansion; 0 selects the
    /// budget-derived scheme.
    pub scheme_b: u32,
    /// Confidence-schedule failure probability in (0, 1).
    pub eta: f64,
    /// Budget-exempt random initial design points for the GP methods.
    pub n_init: u64,
    /// Seed for every random choice the optimiser makes.
    pub seed: u64,
    /// Kernel hyperparameter policy.
    pub hyper: BooHyper,
}

/// Opaque optimiser handle; create with [`boo_new`], release with
/// [`boo_free`].
pub struct BooOptimizer {
    state: Box<dyn AskTell + Send>,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("interior NULs were replaced");
    });
}

fn status_of(error: &Error) -> BooStatus {
    match error {
        Error::UnknownFunction { .. } => BooStatus::UnknownFunction,
        Error::BudgetExhausted { .. } => BooStatus::BudgetExhausted,
        Error::TellMismatch { .. } | Error::Protocol(_) => BooStatus::Protocol,
        Error::DimensionMismatch { .. }
        | Error::UnsupportedSmoothness { .. }
        | Error::InvalidParameter { .. }
        | Error::InvalidConfig(_) => BooStatus::InvalidArgument,
        _ => BooStatus::Runtime,
    }
}

fn fail(status: BooStatus, message: impl std::fmt::Display) -> BooStatus {
    set_error(message);
    status
}

fn fail_with(error: Error) -> BooStatus {
    let status = status_of(&error);
    set_error(error);
    status
}

/// Runs `body` with panics converted to `BooStatus::Panic`.
fn guarded(body: impl FnOnce() -> BooStatus) -> BooStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(BooStatus::Panic, format_args!("internal panic: {message}"))
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for reads.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, BooStatus> {
    if ptr.is_null() {
        return Err(fail(
            BooStatus::NullPointer,
            format_args!("{what} pointer is null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail(
            BooStatus::InvalidUtf8,
            format_args!("{what} is not valid UTF-8"),
        )
    })
}

/// # Safety
/// `ptr` must be null or valid for `len` reads of `f64`.
unsafe fn read_slice<'a>(
    ptr: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], BooStatus> {
    if ptr.is_null() {
        return Err(fail(
            BooStatus::NullPointer,
            format_args!("{what} pointer is null"),
        ));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// Message describing the most recent error on the calling thread, as a
/// NUL-terminated string. Empty before any failure. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn boo_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn boo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Default configuration for `budget` evaluations: budget-derived
/// partitioning, eta 0.05, no initial design, MLE hyperparameters, seed 0.
#[no_mangle]
pub extern "C" fn boo_config_default(budget: u64) -> BooConfig {
    BooConfig {
        budget,
        scheme_a: 0,
        scheme_b: 0,
        eta: 0.05,
        n_init: 0,
        seed: 0,
        hyper: BooHyper::Mle,
    }
}

/// Creates an optimiser over the box `[lower[d], upper[d]]` for
/// `d < dim`. `algorithm` is one of `"boo"`, `"soo"`, `"bamsoo"`,
/// `"gp_ucb"`. On success writes the handle to `out` and returns `Ok`;
/// on failure `*out` is untouched.
///
/// # Safety
/// `algorithm` must be a readable NUL-terminated string, `lower` and
/// `upper` readable arrays of length `dim`, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn boo_new(
    algorithm: *const c_char,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    config: *const BooConfig,
    out: *mut *mut BooOptimizer,
) -> BooStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BooStatus::NullPointer, "out pointer is null");
        }
        if config.is_null() {
            return fail(BooStatus::NullPointer, "config pointer is null");
        }
        let algorithm = match read_str(algorithm, "algorithm") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let algorithm: Algorithm = match algorithm.parse() {
            Ok(a) => a,
            Err(e) => return fail_with(e),
        };
        let (lower, upper) = match (read_slice(lower, dim, "lower"), read_slice(upper, dim, "upper"))
        {
            (Ok(lo), Ok(hi)) => (lo.to_vec(), hi.to_vec()),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        let domain = match Domain::new(lower, upper) {
            Ok(d) => d,
            Err(e) => return fail_with(e),
        };
        let config = &*config;
        let scheme = if config.scheme_a == 0 && config.scheme_b == 0 {
            match resolve_auto_scheme(config.budget as usize, dim) {
                Ok(s) => s,
                Err(e) => return fail_with(e),
            }
        } else {
            match PartitionScheme::new(config.scheme_a as usize, config.scheme_b as usize) {
                Ok(s) => s,
                Err(e) => return fail_with(e),
            }
        };
        let mut full = OptimizerConfig::new(config.budget as usize, scheme);
        full.eta = config.eta;
        full.n_init = config.n_init as usize;
        full.seed = config.seed;
        full.hyper = match config.hyper {
            BooHyper::Mle => HyperPolicy::default_mle(),
            BooHyper::Fixed => HyperPolicy::default_fixed(dim),
        };
        match new_state(algorithm, domain, &full) {
            Ok(state) => {
                out.write(Box::into_raw(Box::new(BooOptimizer { state, dim })));
                BooStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Releases a handle. Null is accepted and ignored.
///
/// # Safety
/// `handle` must be null or a pointer from [`boo_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn boo_free(handle: *mut BooOptimizer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Writes the next point to evaluate into `point` (length `dim`). Asking
/// again before telling returns the same point. Fails with
/// `BudgetExhausted` once [`boo_is_done`] is true.
///
/// # Safety
/// `handle` must be a live handle from [`boo_new`]; `point` must be
/// writable for `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn boo_ask(
    handle: *mut BooOptimizer,
    point: *mut f64,
    dim: usize,
) -> BooStatus {
    guarded(|| {
        if handle.is_null() {
            return fail(BooStatus::NullPointer, "handle is null");
        }
        if point.is_null() {
            return fail(BooStatus::NullPointer, "point pointer is null");
        }
        let optimizer = &mut *handle;
        if dim != optimizer.dim {
            return fail(
                BooStatus::InvalidArgument,
                format_args!("point has dimension {dim}, optimiser has {}", optimizer.dim),
            );
        }
        match optimizer.state.ask() {
            Ok(next) => {
                slice::from_raw_parts_mut(point, dim).copy_from_slice(&next);
                BooStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Reports the objective value of the last asked point. `point` must echo
/// the asked coordinates bit-exactly.
///
/// # Safety
/// `handle` must be a live handle from [`boo_new`]; `point` must be
/// readable for `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn boo_tell(
    handle: *mut BooOptimizer,
    point: *const f64,
    dim: usize,
    value: f64,
) -> BooStatus {
    guarded(|| {
        if handle.is_null() {
            return fail(BooStatus::NullPointer, "handle is null");
        }
        let optimizer = &mut *handle;
        if dim != optimizer.dim {
            return fail(
                BooStatus::InvalidArgument,
                format_args!("point has dimension {dim}, optimiser has {}", optimizer.dim),
            );
        }
        let point = match read_slice(point, dim, "point") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match optimizer.state.tell(point, value) {
            Ok(()) => BooStatus::Ok,
            Err(e) => fail_with(e),
        }
    })
}

/// True once the run has consumed its budget or converged; `ask` will not
/// produce further points. Null handles read as done.
///
/// # Safety
/// `handle` must be null or a live handle from [`boo_new`].
#[no_mangle]
pub unsafe extern "C" fn boo_is_done(handle: *const BooOptimizer) -> bool {
    if handle.is_null() {
        return true;
    }
    (*handle).state.is_done()
}

/// Number of true objective evaluations recorded so far (initial design
/// included, memoised replays excluded).
///
/// # Safety
/// `handle` must be null (returns 0) or a live handle from [`boo_new`].
#[no_mangle]
pub unsafe extern "C" fn boo_evaluations(handle: *const BooOptimizer) -> u64 {
    if handle.is_null() {
        return 0;
    }
    (*handle).state.trace().true_eval_count() as u64
}

/// Writes the best observed value to `best_value` and, when `best_point`
/// is non-null, the evaluated point attaining it (length `dim`). Fails
/// with `Runtime` before the first evaluation.
///
/// # Safety
/// `handle` must be a live handle from [`boo_new`]; `best_value` must be
/// writable; `best_point` must be null or writable for `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn boo_best(
    handle: *const BooOptimizer,
    best_value: *mut f64,
    best_point: *mut f64,
    dim: usize,
) -> BooStatus {
    guarded(|| {
        if handle.is_null() {
            return fail(BooStatus::NullPointer, "handle is null");
        }
        if best_value.is_null() {
            return fail(BooStatus::NullPointer, "best_value pointer is null");
        }
        let optimizer = &*handle;
        let trace = optimizer.state.trace();
        let record = match trace.recommendation() {
            Some(r) => r,
            None => return fail(BooStatus::Runtime, "no evaluations recorded yet"),
        };
        if !best_point.is_null() {
            if dim != optimizer.dim {
                return fail(
                    BooStatus::InvalidArgument,
                    format_args!("point has dimension {dim}, optimiser has {}", optimizer.dim),
                );
            }
            slice::from_raw_parts_mut(best_point, dim).copy_from_slice(&record.point_raw);
        }
        best_value.write(record.value);
        BooStatus::Ok
    })
}

/// Number of dimensions of registry benchmark `name`, written to `out`.
///
/// # Safety
/// `name` must be a readable NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn boo_benchmark_dim(name: *const c_char, out: *mut usize) -> BooStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BooStatus::NullPointer, "out pointer is null");
        }
        let name = match read_str(name, "function name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match benchmarks::lookup(name) {
            Ok(spec) => {
                out.write(spec.dim());
                BooStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Writes the benchmark's box bounds into `lower` and `upper` (length
/// `dim` each, as reported by [`boo_benchmark_dim`]).
///
/// # Safety
/// `name` must be a readable NUL-terminated string; `lower` and `upper`
/// writable for `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn boo_benchmark_bounds(
    name: *const c_char,
    lower: *mut f64,
    upper: *mut f64,
    dim: usize,
) -> BooStatus {
    guarded(|| {
        if lower.is_null() || upper.is_null() {
            return fail(BooStatus::NullPointer, "bounds pointer is null");
        }
        let name = match read_str(name, "function name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec = match benchmarks::lookup(name) {
            Ok(spec) => spec,
            Err(e) => return fail_with(e),
        };
        if dim != spec.dim() {
            return fail(
                BooStatus::InvalidArgument,
                format_args!("buffers have dimension {dim}, function has {}", spec.dim()),
            );
        }
        slice::from_raw_parts_mut(lower, dim).copy_from_slice(spec.domain().lower());
        slice::from_raw_parts_mut(upper, dim).copy_from_slice(spec.domain().upper());
        BooStatus::Ok
    })
}

/// Evaluates registry benchmark `name` at raw-domain point `x` and writes
/// the value to `out`.
///
/// # Safety
/// `name` must be a readable NUL-terminated string; `x` readable for
/// `dim` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn boo_benchmark_eval(
    name: *const c_char,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> BooStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BooStatus::NullPointer, "out pointer is null");
        }
        let name = match read_str(name, "function name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec = match benchmarks::lookup(name) {
            Ok(spec) => spec,
            Err(e) => return fail_with(e),
        };
        if dim != spec.dim() {
            return fail(
                BooStatus::InvalidArgument,
                format_args!("point has dimension {dim}, function has {}", spec.dim()),
            );
        }
        let x = match read_slice(x, dim, "x") {
            Ok(x) => x,
            Err(status) => return status,
        };
        out.write(spec.evaluate(x));
        BooStatus::Ok
    })
}

/// Writes the benchmark's reference maximum value to `out`.
///
/// # Safety
/// `name` must be a readable NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn boo_benchmark_f_star(name: *const c_char, out: *mut f64) -> BooStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BooStatus::NullPointer, "out pointer is null");
        }
        let name = match read_str(name, "function name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match benchmarks::lookup(name) {
            Ok(spec) => {
                out.write(spec.f_star());
                BooStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}
