//! Cost model and choice of the refinement factor `M`.
//!
//! With cost `κ_cost ε_{k-1}^{-1}(M + β)` per pair at level `k`, the
//! leading-order cost of a CLT-calibrated estimator is
//! `(κ_cost κ_err²/α²) g(M, β) δ⁻² (ln δ⁻¹)²` with
//! `g(M, β) = (M-1)(M+β) / (M (ln M)²)`.

use std::hint::black_box;
use std::ops::RangeInclusive;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::RandomStream;

fn default_kappa() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Cost of one coarse concatenation relative to one fine increment.
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_kappa")]
    pub kappa_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            beta: 0.0,
            kappa_cost: 1.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(domain(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.kappa_cost.is_finite() && self.kappa_cost > 0.0) {
            return Err(domain("kappa_cost must be positive"));
        }
        Ok(())
    }

    /// `κ_cost ε_{k-1}^{-1} (M + β)`.
    pub fn level_cost(&self, eps_prev: f64, m: u32) -> f64 {
        self.kappa_cost * (m as f64 + self.beta) / eps_prev
    }
}

/// `g(M, β) = (M-1)(M+β) / (M (ln M)²)`.
pub fn m_curve(m: u32, beta: f64) -> Result<f64> {
    if m < 2 {
        return Err(domain(format!("M must be >= 2, got {m}")));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(domain(format!("beta must be >= 0, got {beta}")));
    }
    let mf = m as f64;
    let l = mf.ln();
    Ok((mf - 1.0) * (mf + beta) / (mf * l * l))
}

/// Integer minimiser of `g(·, β)` over `range` and the tabulated curve.
pub fn optimal_m(beta: f64, range: RangeInclusive<u32>) -> Result<(u32, Vec<(u32, f64)>)> {
    if *range.start() < 2 || *range.end() > 64 || range.is_empty() {
        return Err(domain(format!("M range {range:?} must lie within 2..=64")));
    }
    let curve = range
        .map(|m| Ok((m, m_curve(m, beta)?)))
        .collect::<Result<Vec<_>>>()?;
    let best = curve
        .iter()
        .fold(curve[0], |b, c| if c.1 < b.1 { *c } else { b });
    Ok((best.0, curve))
}

/// `δ̄ = δ / (κ_err √(1 - 1/M))`, required to lie in `(0, 1)`.
pub fn rescaled_delta(delta: f64, kappa_err: f64, m: u32) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::PrecisionOutOfRange(delta));
    }
    if !(kappa_err.is_finite() && kappa_err > 0.0) {
        return Err(domain("kappa_err must be positive"));
    }
    if m < 2 {
        return Err(domain(format!("M must be >= 2, got {m}")));
    }
    let d = delta / (kappa_err * (1.0 - 1.0 / m as f64).sqrt());
    if d >= 1.0 {
        return Err(Error::PrecisionOutOfRange(d));
    }
    Ok(d)
}

/// Leading-order cost `(κ_cost κ_err²/α²) g(M, β) δ⁻² (ln δ⁻¹)²`.
pub fn predicted_cost(
    delta: f64,
    alpha: f64,
    m: u32,
    cost: &CostModel,
    kappa_err: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::PrecisionOutOfRange(delta));
    }
    if !(alpha > 0.0) {
        return Err(domain("alpha must be positive"));
    }
    cost.validate()?;
    let l = (1.0 / delta).ln();
    Ok(
        cost.kappa_cost * kappa_err * kappa_err / (alpha * alpha) * m_curve(m, cost.beta)? * l * l
            / (delta * delta),
    )
}

/// Host estimate of `β`: time of one concatenation of `M` stored increments
/// relative to simulating one Gaussian increment and Euler step.
pub fn measure_beta(m: u32, steps: usize) -> f64 {
    let steps = steps.max(m as usize);
    let mut rng = RandomStream::new(0).rng();
    let mut increments = vec![0.0f64; steps];
    let t0 = Instant::now();
    let mut x = 1.0f64;
    for inc in increments.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *inc = 0.01 * z;
        x += x * *inc;
    }
    black_box(x);
    let fine = t0.elapsed().as_secs_f64() / steps as f64;
    let t1 = Instant::now();
    let mut xc = 1.0f64;
    for block in increments.chunks(m as usize) {
        let dy: f64 = block.iter().sum();
        xc += xc * dy;
    }
    black_box(xc);
    let coarse = t1.elapsed().as_secs_f64() / (steps / m as usize).max(1) as f64;
    if fine > 0.0 {
        coarse / fine
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_examples() {
        assert!((m_curve(2, 0.0).unwrap() - 1.0 / 2f64.ln().powi(2)).abs() < 1e-14);
        assert!((m_curve(6, 0.0).unwrap() - 5.0 / 6f64.ln().powi(2)).abs() < 1e-14);
        assert!((m_curve(6, 1.0).unwrap() - 35.0 / (6.0 * 6f64.ln().powi(2))).abs() < 1e-14);
        assert!(m_curve(1, 0.0).is_err());
    }

    #[test]
    fn optimal_m_examples() {
        let (m0, curve) = optimal_m(0.0, 2..=10).unwrap();
        assert_eq!(m0, 5);
        assert_eq!(curve.len(), 9);
        assert!(m_curve(6, 0.0).unwrap() / m_curve(5, 0.0).unwrap() <= 1.01);
        let (m1, _) = optimal_m(1.0, 2..=10).unwrap();
        assert_eq!(m1, 7);
        let (m64, _) = optimal_m(0.5, 2..=64).unwrap();
        assert!(m64 > 2 && m64 < 64);
        assert!(optimal_m(0.0, 1..=10).is_err());
    }

    #[test]
    fn rescaled_examples() {
        assert!((rescaled_delta(0.1, 1.0, 2).unwrap() - 0.141_421_356_237_309_5).abs() < 1e-12);
        assert!((rescaled_delta(0.1, 2.0, 6).unwrap() - 0.054_772_255_750_516_6).abs() < 1e-12);
        assert!(matches!(
            rescaled_delta(0.5, 0.01, 2),
            Err(Error::PrecisionOutOfRange(_))
        ));
    }

    #[test]
    fn predicted_cost_examples() {
        let c = CostModel::default();
        let v = predicted_cost(0.1, 1.0, 6, &c, 1.0).unwrap();
        assert!((v - m_curve(6, 0.0).unwrap() * 100.0 * 10f64.ln().powi(2)).abs() < 1e-9);
        assert!((v - 825.7).abs() < 0.1);
        let half = predicted_cost(0.1, 0.5, 6, &c, 1.0).unwrap();
        assert!((v / half - 0.25).abs() < 1e-12);
        let d2 = predicted_cost(0.05, 1.0, 6, &c, 1.0).unwrap();
        let expect = 4.0 * (20f64.ln() / 10f64.ln()).powi(2);
        assert!((d2 / v - expect).abs() < 1e-12);
    }

    #[test]
    fn beta_benchmark_is_finite() {
        let b = measure_beta(2, 10_000);
        assert!(b.is_finite() && b >= 0.0);
    }
}
