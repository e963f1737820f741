//! Statistical checks: normality tests, rate and bias regressions, and
//! empirical CLT experiments for the multilevel estimator.

mod clt;
pub mod lilliefors;
mod normality;
mod regression;

pub use clt::{reference_value, run_clt_experiment, CltConfig, CltExperiment, CltRow, CltSummary};
pub use normality::{normality_test, NormalityReport, TestReport};
pub use regression::{
    bias_regression, linear_fit, variance_decay_regression, BiasFit, BiasPoint, LinearFit,
    RegressionReport,
};
