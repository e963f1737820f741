use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Depth and replication counts for a target precision `δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationPlan {
    pub delta: f64,
    pub alpha: f64,
    pub m: u32,
    pub depth: usize,
    /// `n[k - 1]` replications at level `k`.
    pub n: Vec<u64>,
}

impl ReplicationPlan {
    pub fn replications(&self, k: usize) -> u64 {
        self.n[k - 1]
    }
}

/// Ceiling that ignores floating-point overshoot of an exact integer.
fn robust_ceil(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

/// `L = ⌈ln δ⁻¹ / (α ln M)⌉` and `n_k = ⌈δ⁻² L ε_{k-1}⌉` with
/// `ε_{k-1} = M^{-(k-1)} T`.
pub fn make_plan(delta: f64, alpha: f64, m: u32, horizon: f64) -> Result<ReplicationPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::PrecisionOutOfRange(delta));
    }
    if !(alpha.is_finite() && alpha >= 0.5) {
        return Err(domain(format!("alpha must be >= 1/2, got {alpha}")));
    }
    if m < 2 {
        return Err(domain(format!("M must be >= 2, got {m}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(domain("horizon must be positive"));
    }
    let mf = m as f64;
    let depth = (robust_ceil((1.0 / delta).ln() / (alpha * mf.ln())) as usize).max(1);
    let n = (1..=depth)
        .map(|k| {
            let eps_prev = horizon / mf.powi(k as i32 - 1);
            (robust_ceil(depth as f64 * eps_prev / (delta * delta)) as u64).max(1)
        })
        .collect();
    Ok(ReplicationPlan {
        delta,
        alpha,
        m,
        depth,
        n,
    })
}
