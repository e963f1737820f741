use serde::Serialize;

use super::lilliefors::{
    anderson_darling_normal, anderson_darling_p_value, ks_statistic_normal, lilliefors_p_value,
};
use crate::error::{Error, Result};
use crate::tolerances;

/// One structured test outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub value: f64,
    #[serde(rename = "p")]
    pub p_value: Option<f64>,
    pub pass: bool,
    pub tolerance: f64,
    pub sample_size: usize,
    pub seed: Option<u64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    /// KS distance to the fitted normal law.
    pub ks: Option<f64>,
    /// Lilliefors p-value of `ks`.
    pub p_value: Option<f64>,
    pub anderson_darling: Option<f64>,
    pub anderson_darling_p: Option<f64>,
    /// All samples equal; no test was performed.
    pub degenerate: bool,
}

impl NormalityReport {
    pub fn passes(&self, p_min: f64) -> bool {
        self.p_value.is_some_and(|p| p > p_min)
    }

    pub fn to_report(&self, name: &str, seed: Option<u64>) -> TestReport {
        TestReport {
            name: name.to_string(),
            value: self.ks.unwrap_or(f64::NAN),
            p_value: self.p_value,
            pass: self.passes(tolerances::NORMALITY_P_MIN),
            tolerance: tolerances::NORMALITY_P_MIN,
            sample_size: self.n,
            seed,
            note: if self.degenerate {
                Some("degenerate input: all samples equal".into())
            } else {
                self.anderson_darling
                    .map(|a| format!("anderson_darling={a:.6}"))
            },
        }
    }
}

/// Lilliefors-corrected KS test of normality with fitted mean and variance,
/// plus the Anderson-Darling statistic.
pub fn normality_test(samples: &[f64]) -> Result<NormalityReport> {
    let n = samples.len();
    if n < tolerances::NORMALITY_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "normality test needs at least {} samples, got {n}",
            tolerances::NORMALITY_MIN_SAMPLES
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite sample".into()));
    }
    let Some(ks) = ks_statistic_normal(samples) else {
        return Ok(NormalityReport {
            n,
            ks: None,
            p_value: None,
            anderson_darling: None,
            anderson_darling_p: None,
            degenerate: true,
        });
    };
    let ad = anderson_darling_normal(samples);
    Ok(NormalityReport {
        n,
        ks: Some(ks),
        p_value: Some(lilliefors_p_value(ks, n)),
        anderson_darling: ad,
        anderson_darling_p: ad.map(|a| anderson_darling_p_value(a, n)),
        degenerate: false,
    })
}
