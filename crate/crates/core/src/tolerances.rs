//! Every numerical threshold used by verification code, in one place.
//!
//! Bump [`VERSION`] whenever a value changes so reports can be matched to
//! the thresholds they were judged against.

pub const VERSION: u32 = 1;

/// Accepted range of the log-log slope of level-difference variance vs `ε`.
pub const VARIANCE_SLOPE: (f64, f64) = (0.85, 1.15);
/// Minimum coefficient of determination of that regression.
pub const VARIANCE_R2_MIN: f64 = 0.98;

/// `g(M*, β) / min_M g(M, β)` bound for a recommended `M`.
pub const M_NEAR_OPTIMAL_RATIO: f64 = 1.01;

/// Standard errors allowed between a Monte Carlo mark mean and `Υ²`.
pub const MARK_MEAN_SIGMAS: f64 = 4.0;

/// Combined standard errors allowed between two variance-oracle estimates.
pub const ORACLE_SIGMAS: f64 = 3.0;

/// Minimum Lilliefors p-value for a sample to count as normal.
pub const NORMALITY_P_MIN: f64 = 0.01;
/// Relative tolerance of the CLT sample variance against the oracle `ρ²`.
pub const CLT_VARIANCE_REL: f64 = 0.15;
/// Relative drift of `ρ̂²` allowed between the two smallest `δ`.
pub const CLT_DELTA_CONSISTENCY: f64 = 0.15;

/// Standard errors allowed between an estimate and its closed-form value.
pub const BIAS_SIGMAS: f64 = 3.0;
/// Runs out of 100 that must land within [`BIAS_SIGMAS`].
pub const BIAS_MIN_HITS: usize = 95;

/// Bound on `max/min` of `cost · δ² / (ln δ⁻¹)²` over a `δ` grid.
pub const COST_RATIO_MAX: f64 = 2.0;

/// Relative tolerance of analytic gradients against central differences.
pub const GRADIENT_REL: f64 = 1e-5;

/// Relative discrepancy allowed between differently ordered accumulator merges.
pub const MERGE_REL: f64 = 1e-12;

/// `|1 + a'ΔY|` at or below this marks a singular jump.
pub const SINGULAR_JUMP: f64 = 1e-12;
/// Fraction of excluded paths above which an oracle result carries a warning.
pub const EXCLUSION_WARN_FRACTION: f64 = 1e-3;

/// Fraction of the mark-sum variance that the default `h_sim` may drop.
pub const H_SIM_TRUNCATION: f64 = 1e-4;
/// Relative drift of `E[U_T²]` allowed when `ε_sim` is halved.
pub const LIMIT_DISCRETISATION_DRIFT: f64 = 0.01;

/// KS distance between scaled level differences and `U_T`.
pub const LIMIT_KS_DISTANCE: f64 = 0.02;

/// Minimum replications for a CLT experiment to run.
pub const CLT_MIN_REPLICATIONS: usize = 100;
/// Minimum sample size for the normality test.
pub const NORMALITY_MIN_SAMPLES: usize = 100;
