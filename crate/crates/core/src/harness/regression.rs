use serde::Serialize;

use crate::engine::LevelStats;
use crate::error::{Error, Result};
use crate::tolerances;

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(
            "a line needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let rss = (syy - slope * sxy).max(0.0);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionReport {
    pub fit: LinearFit,
    pub levels: Vec<usize>,
    pub pass: bool,
}

/// Slope of `ln Var_k` against `ln ε_{k-1}` over the given levels (use
/// `k >= 2`). Passes when the slope and fit quality meet the variance-decay
/// tolerances.
pub fn variance_decay_regression(stats: &[LevelStats], m: u32) -> Result<RegressionReport> {
    if stats.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 levels, got {}",
            stats.len()
        )));
    }
    let mut x = Vec::with_capacity(stats.len());
    let mut y = Vec::with_capacity(stats.len());
    for s in stats {
        let v = s.variance();
        if !(v > 0.0) {
            return Err(Error::Numeric(format!(
                "level {} has zero variance; slope undefined",
                s.k
            )));
        }
        x.push((s.eps * m as f64).ln());
        y.push(v.ln());
    }
    let fit = linear_fit(&x, &y)?;
    let (lo, hi) = tolerances::VARIANCE_SLOPE;
    Ok(RegressionReport {
        fit,
        levels: stats.iter().map(|s| s.k).collect(),
        pass: fit.slope >= lo && fit.slope <= hi && fit.r_squared >= tolerances::VARIANCE_R2_MIN,
    })
}

/// Mean of `F(X^k)` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasPoint {
    pub eps: f64,
    pub mean: f64,
    pub std_error: f64,
}

impl From<&LevelStats> for BiasPoint {
    fn from(s: &LevelStats) -> Self {
        BiasPoint {
            eps: s.eps,
            mean: s.fine.mean,
            std_error: s.fine.std_error(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasFit {
    pub kappa: f64,
    pub std_error: f64,
    pub n_levels: usize,
}

/// Weighted least squares of `mean_k - reference` on `ε_k^α` through the
/// origin. Weights are inverse squared standard errors; if any standard
/// error is zero the fit is unweighted with a residual-based error.
pub fn bias_regression(points: &[BiasPoint], reference: f64, alpha: f64) -> Result<BiasFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 levels, got {}",
            points.len()
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.eps.powf(alpha)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean - reference).collect();
    let weighted = points.iter().all(|p| p.std_error > 0.0);
    let w: Vec<f64> = points
        .iter()
        .map(|p| {
            if weighted {
                1.0 / (p.std_error * p.std_error)
            } else {
                1.0
            }
        })
        .collect();
    let sxx: f64 = x.iter().zip(&w).map(|(a, wi)| wi * a * a).sum();
    let sxy: f64 = x
        .iter()
        .zip(&y)
        .zip(&w)
        .map(|((a, b), wi)| wi * a * b)
        .sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("degenerate bias regressor".into()));
    }
    let kappa = sxy / sxx;
    let std_error = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - kappa * a).powi(2)).sum();
        (rss / (points.len() - 1) as f64 / sxx).sqrt()
    };
    Ok(BiasFit {
        kappa,
        std_error,
        n_levels: points.len(),
    })
}
