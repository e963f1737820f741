//! Path functionals `F(x) = f(Ax)` and `F(x) = f(sup x)` on skeletons.
//!
//! Linear maps are built from marginals and integrals against finite signed
//! measures (atoms plus a piecewise-constant density). Integrals are exact
//! for piecewise-constant paths: the value at an update time is held until
//! the next update time.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::schemes::PathSkeleton;

/// Constant density `value` on `(from, to]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityPiece {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

/// Finite signed measure on `[0, T]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedMeasure {
    /// `(time, mass)` pairs.
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub density: Vec<DensityPiece>,
}

impl SignedMeasure {
    pub fn atom(time: f64, mass: f64) -> Self {
        Self {
            atoms: vec![(time, mass)],
            density: Vec::new(),
        }
    }

    /// Lebesgue measure on `[0, horizon]`.
    pub fn lebesgue(horizon: f64) -> Self {
        Self::uniform(horizon, 1.0)
    }

    /// Normalised Lebesgue measure, `x ↦ (1/T)∫x`.
    pub fn average(horizon: f64) -> Self {
        Self::uniform(horizon, 1.0 / horizon)
    }

    fn uniform(horizon: f64, value: f64) -> Self {
        Self {
            atoms: Vec::new(),
            density: vec![DensityPiece {
                from: 0.0,
                to: horizon,
                value,
            }],
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        for &(t, m) in &self.atoms {
            if !(t >= 0.0 && t <= horizon) || !m.is_finite() {
                return Err(domain(format!(
                    "atom ({t}, {m}) outside [0, {horizon}] or not finite"
                )));
            }
        }
        for p in &self.density {
            if !(p.from >= 0.0 && p.from <= p.to && p.to <= horizon) || !p.value.is_finite() {
                return Err(domain(format!(
                    "density piece ({}, {}] invalid on [0, {horizon}]",
                    p.from, p.to
                )));
            }
        }
        Ok(())
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m.abs()).sum::<f64>()
            + self
                .density
                .iter()
                .map(|p| p.value.abs() * (p.to - p.from))
                .sum::<f64>()
    }

    /// Weights `w` with `∫ x dμ = Σ_j w_j x(T_j)` for every path that is
    /// constant on each `[T_j, T_{j+1})`.
    pub fn skeleton_weights(&self, times: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; times.len()];
        if times.is_empty() {
            return w;
        }
        for &(t, m) in &self.atoms {
            w[last_at_or_before(times, t)] += m;
        }
        for p in &self.density {
            if p.to <= p.from || p.value == 0.0 {
                continue;
            }
            let mut j = last_at_or_before(times, p.from);
            while j + 1 < times.len() && times[j] < p.to {
                let lo = times[j].max(p.from);
                let hi = times[j + 1].min(p.to);
                if hi > lo {
                    w[j] += p.value * (hi - lo);
                }
                j += 1;
            }
        }
        w
    }

    pub fn integrate(&self, times: &[f64], values: &[f64]) -> f64 {
        self.skeleton_weights(times)
            .iter()
            .zip(values)
            .map(|(w, x)| w * x)
            .sum()
    }
}

fn last_at_or_before(times: &[f64], t: f64) -> usize {
    times.partition_point(|s| *s <= t).max(1) - 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapComponent {
    Marginal { time: f64 },
    Integral { measure: SignedMeasure },
}

/// `A x = (A_1 x, …, A_d x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearMap {
    pub components: Vec<MapComponent>,
}

impl LinearMap {
    pub fn terminal(horizon: f64) -> Self {
        Self {
            components: vec![MapComponent::Marginal { time: horizon }],
        }
    }

    pub fn average(horizon: f64) -> Self {
        Self {
            components: vec![MapComponent::Integral {
                measure: SignedMeasure::average(horizon),
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.components.is_empty() {
            return Err(domain("linear map needs at least one component"));
        }
        for c in &self.components {
            match c {
                MapComponent::Marginal { time } if !(*time >= 0.0 && *time <= horizon) => {
                    return Err(domain(format!(
                        "marginal time {time} outside [0, {horizon}]"
                    )));
                }
                MapComponent::Integral { measure } => measure.validate(horizon)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Skeleton weights of every component; marginals are atoms of mass one.
    pub fn weights(&self, times: &[f64]) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| match c {
                MapComponent::Marginal { time } => {
                    SignedMeasure::atom(*time, 1.0).skeleton_weights(times)
                }
                MapComponent::Integral { measure } => measure.skeleton_weights(times),
            })
            .collect()
    }

    /// `A` applied to a path given by its values at `times`.
    pub fn eval_values(&self, times: &[f64], values: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| match c {
                MapComponent::Marginal { time } => values[last_at_or_before(times, *time)],
                MapComponent::Integral { measure } => measure.integrate(times, values),
            })
            .collect()
    }
}

/// The outer function `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// `f(z) = z` (one component).
    Identity,
    /// `f(z) = Σ w_i z_i`.
    WeightedSum { weights: Vec<f64> },
    /// `f(z) = max(z - strike, 0)` (one component).
    Call { strike: f64 },
    /// `f(z) = z²` (one component, not Lipschitz).
    Square,
}

/// Outcome of a gradient query.
#[derive(Clone, Debug, PartialEq)]
pub enum Gradient {
    Value(Vec<f64>),
    /// The point lies on a kink of `f`.
    NonDifferentiable,
}

impl Gradient {
    pub fn value(&self) -> Option<&[f64]> {
        match self {
            Gradient::Value(g) => Some(g),
            Gradient::NonDifferentiable => None,
        }
    }
}

const KINK_TOL: f64 = 1e-12;

impl Payoff {
    /// Required input dimension, `None` if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Payoff::WeightedSum { weights } => Some(weights.len()),
            _ => Some(1),
        }
    }

    pub fn is_lipschitz(&self) -> bool {
        !matches!(self, Payoff::Square)
    }

    /// Lipschitz constant in the sup norm of `z`, if finite.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            Payoff::Identity | Payoff::Call { .. } => Some(1.0),
            Payoff::WeightedSum { weights } => Some(weights.iter().map(|w| w.abs()).sum()),
            Payoff::Square => None,
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != z.len() => Err(domain(format!(
                "payoff expects {d} components, got {}",
                z.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(match self {
            Payoff::Identity => z[0],
            Payoff::WeightedSum { weights } => weights.iter().zip(z).map(|(w, x)| w * x).sum(),
            Payoff::Call { strike } => (z[0] - strike).max(0.0),
            Payoff::Square => z[0] * z[0],
        })
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Gradient> {
        self.check_dim(z)?;
        Ok(match self {
            Payoff::Identity => Gradient::Value(vec![1.0]),
            Payoff::WeightedSum { weights } => Gradient::Value(weights.clone()),
            Payoff::Call { strike } => {
                let d = z[0] - strike;
                if d.abs() <= KINK_TOL * strike.abs().max(1.0) {
                    Gradient::NonDifferentiable
                } else {
                    Gradient::Value(vec![if d > 0.0 { 1.0 } else { 0.0 }])
                }
            }
            Payoff::Square => Gradient::Value(vec![2.0 * z[0]]),
        })
    }

    /// Compare the analytic gradient with central differences. Returns
    /// `None` at nondifferentiable points.
    pub fn check_gradient(&self, z: &[f64], rel_tol: f64) -> Result<Option<bool>> {
        let Gradient::Value(g) = self.gradient(z)? else {
            return Ok(None);
        };
        let mut ok = true;
        for i in 0..z.len() {
            let step = 1e-6 * z[i].abs().max(1.0);
            let mut up = z.to_vec();
            let mut dn = z.to_vec();
            up[i] += step;
            dn[i] -= step;
            let fd = (self.value(&up)? - self.value(&dn)?) / (2.0 * step);
            ok &= (fd - g[i]).abs() <= rel_tol * g[i].abs().max(1.0);
        }
        Ok(Some(ok))
    }
}

/// `F(x) = f(Ax)` or `F(x) = f(sup_t x_t)`, with the asserted bias order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Linear {
        map: LinearMap,
        payoff: Payoff,
        alpha: f64,
    },
    Supremum {
        payoff: Payoff,
        alpha: f64,
    },
}

impl FunctionalSpec {
    /// `X_T`.
    pub fn terminal(horizon: f64, alpha: f64) -> Self {
        FunctionalSpec::Linear {
            map: LinearMap::terminal(horizon),
            payoff: Payoff::Identity,
            alpha,
        }
    }

    /// European call on `X_T`.
    pub fn european_call(horizon: f64, strike: f64, alpha: f64) -> Self {
        FunctionalSpec::Linear {
            map: LinearMap::terminal(horizon),
            payoff: Payoff::Call { strike },
            alpha,
        }
    }

    /// Asian payoff `f((1/T)∫X)`.
    pub fn asian(horizon: f64, payoff: Payoff, alpha: f64) -> Self {
        FunctionalSpec::Linear {
            map: LinearMap::average(horizon),
            payoff,
            alpha,
        }
    }

    /// Lookback payoff `f(sup X)`.
    pub fn lookback(payoff: Payoff, alpha: f64) -> Self {
        FunctionalSpec::Supremum { payoff, alpha }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            FunctionalSpec::Linear { alpha, .. } | FunctionalSpec::Supremum { alpha, .. } => *alpha,
        }
    }

    pub fn payoff(&self) -> &Payoff {
        match self {
            FunctionalSpec::Linear { payoff, .. } | FunctionalSpec::Supremum { payoff, .. } => {
                payoff
            }
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha.is_finite() && alpha >= 0.5) {
            return Err(domain(format!(
                "bias order alpha must be >= 1/2, got {alpha}"
            )));
        }
        match self {
            FunctionalSpec::Linear { map, payoff, .. } => {
                map.validate(horizon)?;
                if let Some(d) = payoff.dim() {
                    if d != map.dim() {
                        return Err(domain(format!(
                            "payoff expects {d} components, map has {}",
                            map.dim()
                        )));
                    }
                }
            }
            FunctionalSpec::Supremum { payoff, .. } => {
                if payoff.dim() != Some(1) {
                    return Err(domain("supremum payoff must be scalar"));
                }
            }
        }
        Ok(())
    }
}

pub fn eval_linear(map: &LinearMap, skeleton: &PathSkeleton) -> Vec<f64> {
    map.eval_values(&skeleton.times, &skeleton.post)
}

/// Maximum of a skeleton over its observation points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupremumPoint {
    pub value: f64,
    pub time: f64,
    pub index: usize,
    /// The maximum is the left limit at `time`.
    pub left_limit: bool,
}

/// Earliest maximum over all left limits and values at update times.
pub fn eval_supremum(skeleton: &PathSkeleton) -> SupremumPoint {
    supremum_of(&skeleton.times, &skeleton.pre, &skeleton.post)
}

pub(crate) fn supremum_of(times: &[f64], pre: &[f64], post: &[f64]) -> SupremumPoint {
    let mut best = SupremumPoint {
        value: post[0],
        time: times[0],
        index: 0,
        left_limit: false,
    };
    for i in 1..times.len() {
        if pre[i] > best.value {
            best = SupremumPoint {
                value: pre[i],
                time: times[i],
                index: i,
                left_limit: true,
            };
        }
        if post[i] > best.value {
            best = SupremumPoint {
                value: post[i],
                time: times[i],
                index: i,
                left_limit: false,
            };
        }
    }
    best
}

pub fn eval_functional(spec: &FunctionalSpec, skeleton: &PathSkeleton) -> Result<f64> {
    match spec {
        FunctionalSpec::Linear { map, payoff, .. } => payoff.value(&eval_linear(map, skeleton)),
        FunctionalSpec::Supremum { payoff, .. } => payoff.value(&[eval_supremum(skeleton).value]),
    }
}

pub fn gradient_at(spec: &FunctionalSpec, point: &[f64]) -> Result<Gradient> {
    spec.payoff().gradient(point)
}
