use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::levy::{LevyMeasure, LevyTriplet};
use crate::schemes::{LevelParams, PairParams};

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

/// Rule for the jump thresholds `h_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HStrategy {
    /// `ν(|x| >= h_k) ε_k = θ`.
    ThetaMatched,
    /// `h_k = scale · ε_k^γ`.
    Power {
        gamma: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// One threshold per level `0..=k_max`.
    Explicit { h: Vec<f64> },
}

/// User inputs of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub m: u32,
    #[serde(default)]
    pub theta: f64,
    pub k_max: usize,
    pub strategy: HStrategy,
    /// `ε'_k = aux_ratio · ε_k`.
    #[serde(default = "one_u32")]
    pub aux_ratio: u32,
}

/// Per-level parameters for `k = 0..=k_max`; entry 0 has `ε_0 = T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSchedule {
    pub m: u32,
    pub horizon: f64,
    pub theta: f64,
    pub strategy: HStrategy,
    pub aux_ratio: u32,
    pub levels: Vec<LevelParams>,
}

impl LevelSchedule {
    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.levels[k].eps
    }

    /// Parameters simulated at level `k >= 1`: a single path for `k = 1`,
    /// the `(k-1, k)` pair otherwise.
    pub fn pair(&self, k: usize) -> PairParams {
        assert!(
            k >= 1 && k <= self.k_max(),
            "level {k} outside 1..={}",
            self.k_max()
        );
        if k == 1 {
            PairParams::single(self.levels[1])
        } else {
            PairParams {
                coarse: self.levels[k - 1],
                fine: self.levels[k],
            }
        }
    }
}

/// `h` with `ν(|x| >= h) = mass` by bisection in `ln h`, to `1e-12` relative.
pub fn bisect_threshold(measure: &LevyMeasure, mass: f64) -> Result<f64> {
    let tail = |h: f64| measure.tail_mass(h);
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while tail(hi)? > mass {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InfeasibleSchedule(format!(
                "no threshold with tail mass {mass}"
            )));
        }
    }
    while tail(lo)? < mass {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::InfeasibleSchedule(format!(
                "tail mass {mass} is never reached"
            )));
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = (lo * hi).sqrt();
        if tail(mid)? > mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn theta_threshold(levy: &LevyTriplet, theta: f64, eps: f64) -> Result<f64> {
    let target = theta / eps;
    if let Some(total) = levy.measure.total_mass() {
        return Err(Error::InfeasibleSchedule(if target > total {
            format!("theta/eps = {target} exceeds the total jump intensity {total}")
        } else {
            "a finite Lévy measure has a step tail; use theta = 0 with a power or explicit rule"
                .into()
        }));
    }
    match levy.measure.inverse_tail(target) {
        Ok(h) => Ok(h),
        Err(Error::Domain(_)) => bisect_threshold(&levy.measure, target),
        Err(e) => Err(e),
    }
}

pub fn make_schedule(
    levy: &LevyTriplet,
    horizon: f64,
    spec: &ScheduleSpec,
) -> Result<LevelSchedule> {
    if spec.m < 2 {
        return Err(config(format!(
            "refinement factor M must be >= 2, got {}",
            spec.m
        )));
    }
    if !(spec.theta.is_finite() && spec.theta >= 0.0) {
        return Err(config(format!("theta must be >= 0, got {}", spec.theta)));
    }
    if spec.k_max < 1 {
        return Err(config("k_max must be >= 1"));
    }
    if spec.aux_ratio < 1 {
        return Err(config("aux_ratio must be >= 1"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(config("horizon must be positive"));
    }
    if spec.theta > 0.0 && spec.strategy != HStrategy::ThetaMatched {
        return Err(config(
            "a positive theta requires the theta_matched strategy",
        ));
    }
    let m = spec.m as f64;
    let mut levels = Vec::with_capacity(spec.k_max + 1);
    for k in 0..=spec.k_max {
        let eps = horizon / m.powi(k as i32);
        let h = match &spec.strategy {
            HStrategy::ThetaMatched if levy.measure.is_zero() => {
                if spec.theta > 0.0 {
                    return Err(Error::InfeasibleSchedule(
                        "theta > 0 needs a nonzero Lévy measure".into(),
                    ));
                }
                eps
            }
            HStrategy::ThetaMatched => {
                if spec.theta == 0.0 {
                    return Err(config(
                        "theta_matched needs theta > 0; use a power or explicit rule for theta = 0",
                    ));
                }
                theta_threshold(levy, spec.theta, eps)?
            }
            HStrategy::Power { gamma, scale } => {
                if !(*gamma > 0.0 && gamma.is_finite() && *scale > 0.0 && scale.is_finite()) {
                    return Err(config("power strategy needs gamma > 0 and scale > 0"));
                }
                scale * eps.powf(*gamma)
            }
            HStrategy::Explicit { h } => {
                if h.len() != spec.k_max + 1 {
                    return Err(config(format!(
                        "explicit strategy needs {} thresholds, got {}",
                        spec.k_max + 1,
                        h.len()
                    )));
                }
                h[k]
            }
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(config(format!("threshold h_{k} = {h} must be positive")));
        }
        levels.push(LevelParams {
            eps,
            h,
            eps_aux: spec.aux_ratio as f64 * eps,
        });
    }
    if levels.windows(2).any(|w| w[1].h > w[0].h) {
        return Err(config("thresholds h_k must be nonincreasing in k"));
    }
    Ok(LevelSchedule {
        m: spec.m,
        horizon,
        theta: spec.theta,
        strategy: spec.strategy.clone(),
        aux_ratio: spec.aux_ratio,
        levels,
    })
}

/// Finite-level ratios whose limits the convergence theory constrains.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub k: usize,
    pub eps: f64,
    pub h: f64,
    pub eps_aux: f64,
    /// `ν(|x| >= h) ε`, should approach `θ`.
    pub r2: f64,
    /// `h / √ε`, should vanish.
    pub r_h: f64,
    /// `ε' m₂(h) log²(1 + 1/ε') / ε`.
    pub r3a: f64,
    /// `h² log²(1 + 1/ε') / ε`.
    pub r3b: f64,
    /// `m₂(h) / ε`.
    pub r4: f64,
    /// `ε (∫_{|x|>=h} x ν)²`.
    pub rdrift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleDiagnostics {
    pub theta: f64,
    pub rows: Vec<DiagnosticRow>,
    /// Names of ratios that failed to decrease over the last three levels.
    pub flagged: Vec<String>,
}

impl ScheduleDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }

    pub fn ratio(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match name {
                "r2" => r.r2,
                "r_h" => r.r_h,
                "r3a" => r.r3a,
                "r3b" => r.r3b,
                "r4" => r.r4,
                "rdrift" => r.rdrift,
                _ => panic!("unknown ratio {name}"),
            })
            .collect()
    }
}

pub const RATIO_NAMES: [&str; 6] = ["r2", "r_h", "r3a", "r3b", "r4", "rdrift"];

fn stalls(values: &[f64]) -> bool {
    if values.len() < 3 || values.iter().all(|v| *v == 0.0) {
        return false;
    }
    let tail = &values[values.len() - 3..];
    tail[0] <= tail[1] && tail[1] <= tail[2]
}

pub fn validate_schedule(
    schedule: &LevelSchedule,
    levy: &LevyTriplet,
) -> Result<ScheduleDiagnostics> {
    let zero = levy.measure.is_zero();
    let mut rows = Vec::with_capacity(schedule.k_max());
    for k in 1..=schedule.k_max() {
        let LevelParams { eps, h, eps_aux } = schedule.levels[k];
        let m2 = levy.measure.truncated_second_moment(h)?;
        let log2 = (1.0 + 1.0 / eps_aux).ln().powi(2);
        let ftm = levy.measure.tail_first_moment(h)?;
        rows.push(DiagnosticRow {
            k,
            eps,
            h,
            eps_aux,
            r2: levy.measure.tail_mass(h)? * eps,
            r_h: if zero { 0.0 } else { h / eps.sqrt() },
            r3a: eps_aux * m2 * log2 / eps,
            r3b: if zero { 0.0 } else { h * h * log2 / eps },
            r4: m2 / eps,
            rdrift: eps * ftm * ftm,
        });
    }
    let mut diag = ScheduleDiagnostics {
        theta: schedule.theta,
        rows,
        flagged: Vec::new(),
    };
    let theta = schedule.theta;
    for name in RATIO_NAMES {
        let mut values = diag.ratio(name);
        if name == "r2" {
            // distance to the target, with rounding noise treated as exact
            for v in &mut values {
                let d = (*v - theta).abs();
                *v = if d <= 1e-12 * theta.max(f64::MIN_POSITIVE) {
                    0.0
                } else {
                    d
                };
            }
        }
        if stalls(&values) {
            diag.flagged.push(name.to_string());
        }
    }
    Ok(diag)
}
