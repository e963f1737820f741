//! Square-integrable Lévy processes described by their triplet `(b, σ², ν)`.
//!
//! Jumps are split at a threshold `h`: sizes with `|x| >= h` are "big" and
//! simulated individually, everything below is the compensated remainder
//! `M^h`. All tail functionals below use this convention, so
//! `tail_mass(h) = ν(|x| >= h)` and `truncated_second_moment(h)` integrates
//! over `|x| < h`. The two conventions only differ on atoms sitting exactly
//! at the threshold.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};

/// Jump-size law of a compound Poisson measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpDistribution {
    Constant { value: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Normal { mean: f64, sd: f64 },
}

/// The Lévy measure `ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasure {
    Zero,
    CompoundPoisson {
        rate: f64,
        jumps: JumpDistribution,
    },
    /// Density `c (1 ± asymmetry) |x|^{-1-α}` on `0 < |x| <= 1` (`+` for
    /// positive jumps). Infinite activity with closed-form functionals.
    StableLike {
        c: f64,
        alpha: f64,
        #[serde(default)]
        asymmetry: f64,
    },
    /// Symmetric measure given by its two-sided tail `ν(|x| >= knot)` at
    /// increasing knots. Interpolation is linear in log-log coordinates,
    /// except on the last segment, which ends at the support bound where
    /// the tail is zero and is interpolated linearly. Below the first knot
    /// the first segment's power law is continued.
    Tabulated {
        knots: Vec<f64>,
        tails: Vec<f64>,
    },
}

/// Lévy triplet. `sigma` is the diffusion coefficient, so `sigma²` is the
/// Gaussian variance rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyTriplet {
    pub drift: f64,
    pub sigma: f64,
    pub measure: LevyMeasure,
}

/// Big jumps of one path, sorted by time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BigJumpBatch {
    pub threshold: f64,
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
}

impl BigJumpBatch {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

#[inline]
fn phi(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// Upper tail `P(Z > z)` of the standard normal.
#[inline]
fn upper(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Mass, first and second moment of `N(mean, sd²)` restricted to `(lo, hi)`.
fn normal_band(mean: f64, sd: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    if hi <= lo {
        return (0.0, 0.0, 0.0);
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let p = if a >= 0.0 {
        upper(a) - upper(b)
    } else {
        upper(-b) - upper(-a)
    };
    let za = if a.is_infinite() { 0.0 } else { a * phi(a) };
    let zb = if b.is_infinite() { 0.0 } else { b * phi(b) };
    let m1 = mean * p + sd * (phi(a) - phi(b));
    let m2 = mean * mean * p + 2.0 * mean * sd * (phi(a) - phi(b)) + sd * sd * (p + za - zb);
    (p.max(0.0), m1, m2.max(0.0))
}

/// Inverse-transform draw from `N(mean, sd²)` conditioned on `(lo, hi)`.
fn sample_normal_band<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let n = std_normal();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let v: f64 = rng.random();
    let z = if a >= 0.0 {
        // upper side: work with survival probabilities to keep tail accuracy
        let (sa, sb) = (upper(a), upper(b));
        -n.inverse_cdf((sb + v * (sa - sb)).clamp(f64::MIN_POSITIVE, 1.0))
    } else {
        let (ca, cb) = (upper(-a), upper(-b));
        n.inverse_cdf((ca + v * (cb - ca)).clamp(f64::MIN_POSITIVE, 1.0))
    };
    (mean + sd * z).clamp(lo, hi)
}

/// Which part of the size distribution a query refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Band {
    /// `|x| >= h`
    Big,
    /// `|x| < h`
    Small,
}

impl JumpDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            JumpDistribution::Constant { value } => {
                if !value.is_finite() || *value == 0.0 {
                    return Err(domain("constant jump size must be finite and nonzero"));
                }
            }
            JumpDistribution::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(domain("discrete jumps need matching nonempty values/probs"));
                }
                if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
                    return Err(domain("discrete jump values must be finite and nonzero"));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(domain("discrete jump probabilities must be nonnegative"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(domain(format!(
                        "discrete jump probabilities sum to {total}"
                    )));
                }
            }
            JumpDistribution::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd.is_finite() && *sd > 0.0) {
                    return Err(domain("normal jumps need finite mean and sd > 0"));
                }
            }
        }
        Ok(())
    }

    /// `(P, E[J; band], E[J²; band])`.
    fn band(&self, h: f64, band: Band) -> (f64, f64, f64) {
        let keep = |x: f64| match band {
            Band::Big => x.abs() >= h,
            Band::Small => x.abs() < h,
        };
        match self {
            JumpDistribution::Constant { value } => {
                if keep(*value) {
                    (1.0, *value, value * value)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            JumpDistribution::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| keep(**v))
                .fold((0.0, 0.0, 0.0), |(p, m1, m2), (v, q)| {
                    (p + q, m1 + q * v, m2 + q * v * v)
                }),
            JumpDistribution::Normal { mean, sd } => match band {
                Band::Small => normal_band(*mean, *sd, -h, h),
                Band::Big => {
                    let lo = normal_band(*mean, *sd, f64::NEG_INFINITY, -h);
                    let hi = normal_band(*mean, *sd, h, f64::INFINITY);
                    (lo.0 + hi.0, lo.1 + hi.1, lo.2 + hi.2)
                }
            },
        }
    }

    fn sample_band<R: Rng + ?Sized>(&self, h: f64, band: Band, rng: &mut R) -> f64 {
        match self {
            JumpDistribution::Constant { value } => *value,
            JumpDistribution::Discrete { values, probs } => {
                let keep = |x: f64| match band {
                    Band::Big => x.abs() >= h,
                    Band::Small => x.abs() < h,
                };
                let total: f64 = values
                    .iter()
                    .zip(probs)
                    .filter(|(v, _)| keep(**v))
                    .map(|(_, p)| p)
                    .sum();
                let mut u = rng.random::<f64>() * total;
                let mut last = values[0];
                for (v, p) in values.iter().zip(probs).filter(|(v, _)| keep(**v)) {
                    last = *v;
                    if u < *p {
                        return *v;
                    }
                    u -= p;
                }
                last
            }
            JumpDistribution::Normal { mean, sd } => match band {
                Band::Small => sample_normal_band(*mean, *sd, -h, h, rng),
                Band::Big => {
                    let lo = normal_band(*mean, *sd, f64::NEG_INFINITY, -h).0;
                    let hi = normal_band(*mean, *sd, h, f64::INFINITY).0;
                    if rng.random::<f64>() * (lo + hi) < lo {
                        sample_normal_band(*mean, *sd, f64::NEG_INFINITY, -h, rng)
                    } else {
                        sample_normal_band(*mean, *sd, h, f64::INFINITY, rng)
                    }
                }
            },
        }
    }
}

/// Position of `h` in a tail table: segment index and whether it is the
/// terminal (linear) segment.
fn table_segment(knots: &[f64], h: f64) -> usize {
    let n = knots.len();
    let i = knots.partition_point(|k| *k <= h);
    i.clamp(1, n - 1) - 1
}

fn table_exponent(knots: &[f64], tails: &[f64], i: usize) -> f64 {
    -(tails[i + 1] / tails[i]).ln() / (knots[i + 1] / knots[i]).ln()
}

/// `∫_a^b 2x T(x) dx` on table segment `i` (with `knots[i] <= a <= b <= knots[i+1]`).
fn table_segment_integral(knots: &[f64], tails: &[f64], i: usize, a: f64, b: f64) -> f64 {
    let last = knots.len() - 2;
    if i == last {
        let slope = tails[i] / (knots[i + 1] - knots[i]);
        let xn = knots[i + 1];
        let prim = |x: f64| slope * (xn * x * x - 2.0 * x * x * x / 3.0);
        prim(b) - prim(a)
    } else {
        let beta = table_exponent(knots, tails, i);
        let scale = 2.0 * tails[i] * knots[i].powf(beta);
        if (beta - 2.0).abs() < 1e-12 {
            scale * (b / a).ln()
        } else {
            scale * (b.powf(2.0 - beta) - a.powf(2.0 - beta)) / (2.0 - beta)
        }
    }
}

impl LevyMeasure {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasure::Zero => Ok(()),
            LevyMeasure::CompoundPoisson { rate, jumps } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(domain("compound Poisson rate must be finite and >= 0"));
                }
                jumps.validate()
            }
            LevyMeasure::StableLike {
                c,
                alpha,
                asymmetry,
            } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(domain("stable_like needs c > 0"));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(domain("stable_like needs 0 < alpha < 2"));
                }
                if !(asymmetry.abs() <= 1.0) {
                    return Err(domain("stable_like asymmetry must lie in [-1, 1]"));
                }
                Ok(())
            }
            LevyMeasure::Tabulated { knots, tails } => {
                if knots.len() < 3 || knots.len() != tails.len() {
                    return Err(domain("tail table needs at least three (knot, tail) pairs"));
                }
                if !(knots[0] > 0.0) || knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(domain(
                        "tail table knots must be positive and strictly increasing",
                    ));
                }
                let n = tails.len();
                if tails[n - 1] != 0.0 {
                    return Err(domain(
                        "tail table must end with a zero tail at the support bound",
                    ));
                }
                if tails[..n - 1].iter().any(|t| !(t.is_finite() && *t > 0.0))
                    || tails[..n - 1].windows(2).any(|w| !(w[1] < w[0]))
                {
                    return Err(domain(
                        "tail table values must be positive and strictly decreasing",
                    ));
                }
                if table_exponent(knots, tails, 0) >= 2.0 {
                    return Err(domain(
                        "tail table's first segment decays too fast: second moment diverges at 0",
                    ));
                }
                Ok(())
            }
        }
    }

    fn check_h(&self, h: f64) -> Result<()> {
        if !(h > 0.0) || h.is_nan() {
            return Err(domain(format!("threshold h must be positive, got {h}")));
        }
        if let LevyMeasure::Tabulated { knots, .. } = self {
            if h < knots[0] || h > knots[knots.len() - 1] {
                return Err(domain(format!(
                    "threshold {h} outside tail table range [{}, {}]",
                    knots[0],
                    knots[knots.len() - 1]
                )));
            }
        }
        Ok(())
    }

    /// `ν(|x| >= h)`.
    pub fn tail_mass(&self, h: f64) -> Result<f64> {
        self.check_h(h)?;
        Ok(match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::CompoundPoisson { rate, jumps } => rate * jumps.band(h, Band::Big).0,
            LevyMeasure::StableLike { c, alpha, .. } => {
                if h >= 1.0 {
                    0.0
                } else {
                    2.0 * c / alpha * (h.powf(-alpha) - 1.0)
                }
            }
            LevyMeasure::Tabulated { knots, tails } => {
                let i = table_segment(knots, h);
                if i == knots.len() - 2 {
                    tails[i] * (knots[i + 1] - h) / (knots[i + 1] - knots[i])
                } else {
                    let beta = table_exponent(knots, tails, i);
                    tails[i] * (h / knots[i]).powf(-beta)
                }
            }
        })
    }

    /// `∫_{|x|<h} x² ν(dx)`.
    pub fn truncated_second_moment(&self, h: f64) -> Result<f64> {
        self.check_h(h)?;
        Ok(match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::CompoundPoisson { rate, jumps } => rate * jumps.band(h, Band::Small).2,
            LevyMeasure::StableLike { c, alpha, .. } => {
                2.0 * c * h.min(1.0).powf(2.0 - alpha) / (2.0 - alpha)
            }
            LevyMeasure::Tabulated { knots, tails } => {
                let tail_h = self.tail_mass(h)?;
                let beta0 = table_exponent(knots, tails, 0);
                let mut acc = 2.0 * tails[0] * knots[0] * knots[0] / (2.0 - beta0);
                let seg = table_segment(knots, h);
                for i in 0..seg {
                    acc += table_segment_integral(knots, tails, i, knots[i], knots[i + 1]);
                }
                acc += table_segment_integral(knots, tails, seg, knots[seg], h);
                (acc - h * h * tail_h).max(0.0)
            }
        })
    }

    /// `∫ x² ν(dx)`.
    pub fn second_moment(&self) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::CompoundPoisson { rate, jumps } => {
                let (_, _, big) = jumps.band(0.0, Band::Big);
                rate * big
            }
            LevyMeasure::StableLike { c, alpha, .. } => 2.0 * c / (2.0 - alpha),
            LevyMeasure::Tabulated { knots, .. } => self
                .truncated_second_moment(knots[knots.len() - 1])
                .unwrap_or(f64::NAN),
        }
    }

    /// `∫_{|x|>=h} x ν(dx)`.
    pub fn tail_first_moment(&self, h: f64) -> Result<f64> {
        self.check_h(h)?;
        Ok(match self {
            LevyMeasure::Zero | LevyMeasure::Tabulated { .. } => 0.0,
            LevyMeasure::CompoundPoisson { rate, jumps } => rate * jumps.band(h, Band::Big).1,
            LevyMeasure::StableLike {
                c,
                alpha,
                asymmetry,
            } => {
                if h >= 1.0 {
                    0.0
                } else {
                    let skew = 2.0 * c * asymmetry;
                    if (alpha - 1.0).abs() < 1e-12 {
                        -skew * h.ln()
                    } else {
                        skew * (1.0 - h.powf(1.0 - alpha)) / (1.0 - alpha)
                    }
                }
            }
        })
    }

    /// Total mass, `None` for infinite-activity measures.
    pub fn total_mass(&self) -> Option<f64> {
        match self {
            LevyMeasure::Zero => Some(0.0),
            LevyMeasure::CompoundPoisson { rate, .. } => Some(*rate),
            LevyMeasure::StableLike { .. } | LevyMeasure::Tabulated { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LevyMeasure::Zero => true,
            LevyMeasure::CompoundPoisson { rate, .. } => *rate == 0.0,
            _ => false,
        }
    }

    /// Whether the restriction of `ν` to `|x| < h` can be simulated exactly
    /// (finite activity, or no mass there at all).
    pub fn remainder_is_exact(&self, h: f64) -> bool {
        match self {
            LevyMeasure::Zero | LevyMeasure::CompoundPoisson { .. } => true,
            LevyMeasure::StableLike { .. } | LevyMeasure::Tabulated { .. } => self
                .truncated_second_moment(h)
                .map(|m| m == 0.0)
                .unwrap_or(false),
        }
    }

    /// Threshold `h` with `tail_mass(h) = mass`, for measures whose tail is
    /// continuous and strictly decreasing on its support.
    pub fn inverse_tail(&self, mass: f64) -> Result<f64> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(domain(format!(
                "tail mass to invert must be positive, got {mass}"
            )));
        }
        match self {
            LevyMeasure::Zero | LevyMeasure::CompoundPoisson { .. } => Err(Error::InfeasibleSchedule(
                "finite Lévy measures have a step tail that cannot be matched to a positive theta".into(),
            )),
            LevyMeasure::StableLike { c, alpha, .. } => Ok((mass * alpha / (2.0 * c) + 1.0).powf(-1.0 / alpha)),
            LevyMeasure::Tabulated { knots, tails } => {
                if mass > tails[0] {
                    return Err(Error::InfeasibleSchedule(format!(
                        "tail mass {mass} exceeds the table's largest tail {}",
                        tails[0]
                    )));
                }
                Ok(table_inverse(knots, tails, mass))
            }
        }
    }

    /// Size of one jump drawn from `ν` restricted to `|x| >= h`.
    pub fn sample_big_size<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::CompoundPoisson { jumps, .. } => jumps.sample_band(h, Band::Big, rng),
            LevyMeasure::StableLike {
                c,
                alpha,
                asymmetry,
            } => {
                let tail = 2.0 * c / alpha * (h.powf(-alpha) - 1.0);
                let v = (1.0 - rng.random::<f64>()) * tail;
                let size = (v * alpha / (2.0 * c) + 1.0).powf(-1.0 / alpha);
                let p_plus = 0.5 * (1.0 + asymmetry);
                if rng.random::<f64>() < p_plus {
                    size
                } else {
                    -size
                }
            }
            LevyMeasure::Tabulated { knots, tails } => {
                let tail = self.tail_mass(h).unwrap_or(0.0);
                let v = (1.0 - rng.random::<f64>()) * tail;
                let size = table_inverse(knots, tails, v).max(h);
                if rng.random::<f64>() < 0.5 {
                    size
                } else {
                    -size
                }
            }
        }
    }
}

fn table_inverse(knots: &[f64], tails: &[f64], mass: f64) -> f64 {
    let n = knots.len();
    if mass >= tails[0] {
        let beta = table_exponent(knots, tails, 0);
        return knots[0] * (mass / tails[0]).powf(-1.0 / beta);
    }
    // tails are decreasing: find the segment with tails[i] >= mass > tails[i+1]
    let i = tails.partition_point(|t| *t >= mass).clamp(1, n - 1) - 1;
    if i == n - 2 {
        let slope = tails[i] / (knots[i + 1] - knots[i]);
        knots[i + 1] - mass / slope
    } else {
        let beta = table_exponent(knots, tails, i);
        knots[i] * (mass / tails[i]).powf(-1.0 / beta)
    }
}

impl LevyTriplet {
    pub fn new(drift: f64, sigma: f64, measure: LevyMeasure) -> Result<Self> {
        let t = Self {
            drift,
            sigma,
            measure,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(domain("drift must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(domain("sigma must be finite and nonnegative"));
        }
        self.measure.validate()
    }

    /// Drift of `Y^h` between big jumps: `b - ∫_{|x|>=h} x ν(dx)`.
    pub fn compensated_drift(&self, h: f64) -> Result<f64> {
        Ok(self.drift - self.measure.tail_first_moment(h)?)
    }
}

pub fn tail_mass(measure: &LevyMeasure, h: f64) -> Result<f64> {
    measure.tail_mass(h)
}

pub fn truncated_second_moment(measure: &LevyMeasure, h: f64) -> Result<f64> {
    measure.truncated_second_moment(h)
}

pub fn compensated_drift(triplet: &LevyTriplet, h: f64) -> Result<f64> {
    triplet.compensated_drift(h)
}

/// Big jumps on `(0, horizon]`: Poisson count, uniform times, sizes from
/// the normalised restriction of `ν` to `|x| >= h`.
pub fn sample_big_jumps<R: Rng + ?Sized>(
    measure: &LevyMeasure,
    h: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<BigJumpBatch> {
    let mass = measure.tail_mass(h)?;
    let mut batch = BigJumpBatch {
        threshold: h,
        ..Default::default()
    };
    let mean = mass * horizon;
    if !(mean > 0.0) {
        return Ok(batch);
    }
    if !mean.is_finite() {
        return Err(Error::Numeric(format!(
            "infinite big-jump intensity at h = {h}"
        )));
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .sample(rng) as usize;
    let mut jumps: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let t = horizon * (1.0 - rng.random::<f64>());
            (t, measure.sample_big_size(h, rng))
        })
        .collect();
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    batch.times = jumps.iter().map(|j| j.0).collect();
    batch.sizes = jumps.iter().map(|j| j.1).collect();
    Ok(batch)
}

/// One increment of the compensated small-jump martingale `M^h` over a
/// window of length `dt`.
///
/// Exact (compound Poisson minus compensator) whenever `ν` restricted to
/// `|x| < h` is finite; otherwise the moment-matched Gaussian
/// `N(0, dt · truncated_second_moment(h))`. Use
/// [`LevyMeasure::remainder_is_exact`] to tell the two apart.
pub fn small_jump_increment<R: Rng + ?Sized>(
    triplet: &LevyTriplet,
    h: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(domain(format!("window length must be positive, got {dt}")));
    }
    match &triplet.measure {
        LevyMeasure::Zero => Ok(0.0),
        LevyMeasure::CompoundPoisson { rate, jumps } => {
            let (p, m1, _) = jumps.band(h, Band::Small);
            let intensity = rate * p * dt;
            if !(intensity > 0.0) {
                return Ok(0.0);
            }
            let count = Poisson::new(intensity)
                .map_err(|e| Error::Numeric(e.to_string()))?
                .sample(rng) as usize;
            let mut sum = 0.0;
            for _ in 0..count {
                sum += jumps.sample_band(h, Band::Small, rng);
            }
            Ok(sum - rate * m1 * dt)
        }
        measure => {
            let var = dt * measure.truncated_second_moment(h)?;
            if var == 0.0 {
                return Ok(0.0);
            }
            let z: f64 = StandardNormal.sample(rng);
            Ok(var.sqrt() * z)
        }
    }
}
