//! SDE `dX_t = a(X_{t-}) dY_t` with a coefficient from a fixed registry.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Named coefficient families. Each supplies `a` and its derivative `a'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    /// `a(x) = c`
    Constant { c: f64 },
    /// `a(x) = x`
    Linear,
    /// `a(x) = c1 + c2 x`
    Affine { c1: f64, c2: f64 },
    /// `a(x) = c x / (1 + x²)`
    LogisticDamped { c: f64 },
}

impl Coefficient {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { c } => c,
            Coefficient::Linear => x,
            Coefficient::Affine { c1, c2 } => c1 + c2 * x,
            Coefficient::LogisticDamped { c } => c * x / (1.0 + x * x),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { .. } => 0.0,
            Coefficient::Linear => 1.0,
            Coefficient::Affine { c2, .. } => c2,
            Coefficient::LogisticDamped { c } => {
                let d = 1.0 + x * x;
                c * (1.0 - x * x) / (d * d)
            }
        }
    }

    /// Whether `a` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match *self {
            Coefficient::Constant { c } => c == 0.0,
            Coefficient::Affine { c1, c2 } => c1 == 0.0 && c2 == 0.0,
            Coefficient::LogisticDamped { c } => c == 0.0,
            Coefficient::Linear => false,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Coefficient::Constant { c } => c.is_finite(),
            Coefficient::Linear => true,
            Coefficient::Affine { c1, c2 } => c1.is_finite() && c2.is_finite(),
            Coefficient::LogisticDamped { c } => c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(domain("coefficient parameters must be finite"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeModel {
    pub coefficient: Coefficient,
    pub x0: f64,
    pub horizon: f64,
}

impl SdeModel {
    pub fn new(coefficient: Coefficient, x0: f64, horizon: f64) -> Result<Self> {
        let m = Self {
            coefficient,
            x0,
            horizon,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficient.validate()?;
        if !self.x0.is_finite() {
            return Err(domain("x0 must be finite"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(domain("horizon must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn a(&self, x: f64) -> f64 {
        self.coefficient.value(x)
    }

    #[inline]
    pub fn a_prime(&self, x: f64) -> f64 {
        self.coefficient.derivative(x)
    }

    /// Largest finite-difference slope of `a` on an even probe grid over
    /// `[lo, hi]`. Diagnostic only: the Lipschitz property is asserted by
    /// the user.
    pub fn lipschitz_probe(&self, lo: f64, hi: f64, points: usize) -> f64 {
        let points = points.max(2);
        let step = (hi - lo) / (points - 1) as f64;
        (0..points - 1)
            .map(|i| {
                let x = lo + i as f64 * step;
                ((self.a(x + step) - self.a(x)) / step).abs()
            })
            .fold(0.0, f64::max)
    }
}
