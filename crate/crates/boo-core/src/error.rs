//! Error type shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Kernel or GP inputs of unequal dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Smoothness ν outside the supported half-integer/integer families.
    #[error("unsupported smoothness nu = {nu}: only half-integer and integer values are supported")]
    UnsupportedSmoothness { nu: f64 },

    /// Parameter outside its documented range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// Cholesky factorisation failed even at the maximum jitter level.
    /// The nearest pair of training points is reported because duplicated or
    /// near-duplicated rows are the usual cause of a singular noiseless Gram
    /// matrix.
    #[error(
        "ill-conditioned Gram matrix: Cholesky failed at maximum jitter {max_jitter:.3e}; \
         nearest point pair is #{i} and #{j} at distance {distance:.3e}"
    )]
    IllConditionedGram {
        max_jitter: f64,
        i: usize,
        j: usize,
        distance: f64,
    },

    /// Hyperparameter selection over an empty observation set.
    #[error("cannot fit on empty data")]
    EmptyData,

    /// `tell` did not echo the point returned by the last `ask`.
    #[error("protocol error: told point {told:?} does not match asked point {asked:?}")]
    TellMismatch { asked: Vec<f64>, told: Vec<f64> },

    /// `ask` called after the evaluation budget was consumed.
    #[error("budget exhausted after {evaluations} evaluations")]
    BudgetExhausted { evaluations: usize },

    /// `tell` called on a finished optimizer. (`ask` is idempotent, so a
    /// repeated ask is never an error while a point is pending.)
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Every seeded repetition of one algorithm failed, leaving nothing to
    /// aggregate.
    #[error("all {repeats} runs of {algorithm} failed; first error: {first}")]
    AllRunsFailed {
        algorithm: String,
        repeats: usize,
        first: String,
    },

    /// Benchmark name not present in the registry.
    #[error("unknown function '{name}'; known functions: {known}")]
    UnknownFunction { name: String, known: String },

    /// Configuration rejected before any run started.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Failure while writing or reading trace/aggregate files.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A validation property failed.
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
