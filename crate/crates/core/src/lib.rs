//! Multilevel Monte Carlo for one-dimensional SDEs `dX = a(X-) dY` driven
//! by a square-integrable Lévy process `Y`, using jump-adapted Euler
//! schemes.
//!
//! The crate is organised bottom-up:
//!
//! * [`levy`]: Lévy triplets, tail functionals, jump samplers.
//! * [`sde`]: the coefficient registry and [`SdeModel`].
//! * [`schemes`]: jump-adapted timelines and coupled coarse/fine paths for
//!   the idealised, direct-simulation and truncated shot-noise schemes.
//! * [`functionals`]: marginals, integral averages and running suprema.
//! * [`engine`]: level schedules, replication plans and the estimator.
//! * [`limit`]: the limit error process and its variance oracles.
//! * [`tuning`]: the cost model and choice of the refinement factor `M`.
//! * [`harness`]: normality tests and regressions used for verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod levy;
pub mod limit;
pub mod rng;
pub mod schemes;
pub mod sde;
pub mod tolerances;
pub mod tuning;

pub use engine::{
    level_profile, make_plan, make_schedule, run_estimator, validate_schedule, HStrategy,
    LevelSchedule, LevelStats, MlmcEstimate, ReplicationPlan, ScheduleDiagnostics,
};
pub use error::{Error, Result};
pub use functionals::{FunctionalSpec, LinearMap, MapComponent, Payoff, SignedMeasure};
pub use levy::{BigJumpBatch, JumpDistribution, LevyMeasure, LevyTriplet};
pub use limit::{rho_sq_oracle, upsilon_sq, OracleMethod, OracleOptions, VarianceOracleResult};
pub use rng::RandomStream;
pub use schemes::{CoupledPaths, LevelParams, PairParams, PathSkeleton, Scheme, UpdateTimeline};
pub use sde::{Coefficient, SdeModel};
pub use tuning::CostModel;
