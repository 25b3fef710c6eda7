//! Global optimisation by optimistic tree search over hierarchical partitions
//! of `[0,1]^D`, with a Gaussian-process surrogate steering which cells to
//! expand.
//!
//! The main entry points are the four optimiser drivers in [`optimizers`]
//! (`run_boo`, `run_soo`, `run_bamsoo`, `run_gp_ucb`), the step-wise
//! [`optimizers::AskTell`] interface for externally evaluated objectives, and
//! [`harness::run_experiment`] for multi-seed benchmark campaigns.
//!
//! All algorithms maximise. Objectives declared on arbitrary axis-aligned
//! boxes are normalised to the unit cube once at the boundary; traces report
//! raw (un-normalised) coordinates.

pub mod benchmarks;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod optimizers;
pub mod partition;
pub mod validate;

pub use error::{Error, Result};
