//! Deterministic derivative-free global optimization over rescaled box
//! domains, built on optimistic hierarchical trisection.
//!
//! The crate bundles:
//!
//! - [`geometry`]: unit-cube cells, longest-side trisection, and the
//!   depth ledger with its superset views;
//! - [`optimizer`]: the width-biased selection loop (width 1 recovers
//!   plain depth-by-depth optimization) with adaptive width schedules;
//! - [`soo`]: an independent depth-by-depth implementation used as the
//!   width-1 reference;
//! - [`objectives`]: the benchmark suite, evaluation counting, and the
//!   error metric;
//! - [`theory`]: closed-form finite-time loss bounds and the width-effect
//!   ratio formulas;
//! - [`planner`]: policy search on deterministic MDPs with
//!   discounted-tail pruning;
//! - [`parallel`]: the master/worker runtime that keeps selection
//!   unblocked with provisional values.

pub mod error;
pub mod geometry;
pub mod objectives;
pub mod optimizer;
pub mod parallel;
pub mod planner;
pub mod soo;
pub mod theory;

pub use error::{Error, Result};
pub use geometry::{Cell, CellRef, DepthLedger, Domain};
pub use objectives::{error_metric, CountingObjective, ObjectiveSpec};
pub use optimizer::{
    HmaxSchedule, OptimizerConfig, RunResult, StopCondition, StopReason, TargetError, WMode,
};
