//! Level schedules, replication plans and the multilevel estimator.
//!
//! Level `k` has grid width `ε_k = M^{-k} T`. The estimator combines a
//! plain Monte Carlo average of `F(X^1)` with corrections
//! `F(X^{k,f}) - F(X^{k-1,c})` for `k = 2..L`, each from coupled pairs.

mod estimator;
mod plan;
mod schedule;
mod stats;

pub use estimator::{
    level_profile, plain_monte_carlo, run_estimator, run_estimator_with_stream, MlmcEstimate,
};
pub use plan::{make_plan, ReplicationPlan};
pub use schedule::{
    bisect_threshold, make_schedule, validate_schedule, DiagnosticRow, HStrategy, LevelSchedule,
    ScheduleDiagnostics, ScheduleSpec, RATIO_NAMES,
};
pub use stats::{Accumulator, LevelStats};
