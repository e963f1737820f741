//! The limit error process `U` and variance oracles for `ρ²`.
//!
//! `U` solves
//! `dU = a'(X-) U- dY + σ²Υ (aa')(X-) dB + Σ σ_s ξ_s (aa')(X_{s-}) ΔY_s`
//! with `B` an independent Brownian motion and i.i.d. marks per jump. Three
//! estimators of `ρ² = Var(∇f(AX)·AU)` are provided: direct simulation of
//! `U`, the conditional-variance kernel `φ`, and scaled level differences.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Accumulator, LevelSchedule};
use crate::error::{config, domain, Error, Result};
use crate::functionals::{eval_functional, eval_supremum, FunctionalSpec, Gradient};
use crate::levy::LevyTriplet;
use crate::rng::{tags, RandomStream};
use crate::schemes::{simulate_coupled, simulate_level, LevelParams, PathSkeleton, Scheme};
use crate::sde::SdeModel;
use crate::tolerances;

/// `Υ²(θ, M) = (e^{-θ} - 1 + θ)/θ² · (1 - 1/M)`, and `½(1 - 1/M)` at `θ = 0`.
pub fn upsilon_sq(theta: f64, m: u32) -> Result<f64> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(domain(format!("theta must be >= 0, got {theta}")));
    }
    if m < 2 {
        return Err(domain(format!("M must be >= 2, got {m}")));
    }
    let shape = if theta < 1e-6 {
        0.5 - theta / 6.0 + theta * theta / 24.0 - theta.powi(3) / 120.0
    } else {
        ((-theta).exp_m1() + theta) / (theta * theta)
    };
    Ok(shape * (1.0 - 1.0 / m as f64))
}

/// Auxiliary randomness attached to one jump of the limit process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpMark {
    pub xi: f64,
    pub u: f64,
    /// `Exp(θ)` draw, `+∞` when `θ = 0`.
    pub e_theta: f64,
    /// `Exp((M-1)θ)` draw, `+∞` when `θ = 0`.
    pub e_mtheta: f64,
    pub sigma_sq: f64,
}

/// `σ² [min(ℰ^θ, 𝒰) - min(ℰ^θ, ℰ^{(M-1)θ}, 𝒰 - (m-1)/M)]` on the window
/// `(m-1)/M <= 𝒰 < m/M`.
pub fn mark_variance(sigma: f64, m: u32, u: f64, e_theta: f64, e_mtheta: f64) -> f64 {
    let mf = m as f64;
    let window = ((u * mf).floor()).min(mf - 1.0);
    let offset = window / mf;
    let bracket = e_theta.min(u) - e_theta.min(e_mtheta).min(u - offset);
    sigma * sigma * bracket.max(0.0)
}

fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate == 0.0 {
        f64::INFINITY
    } else {
        -(1.0 - rng.random::<f64>()).ln() / rate
    }
}

pub fn sample_mark<R: Rng + ?Sized>(sigma: f64, theta: f64, m: u32, rng: &mut R) -> JumpMark {
    let xi: f64 = StandardNormal.sample(rng);
    let u: f64 = rng.random();
    let e_theta = exponential(theta, rng);
    let e_mtheta = exponential((m as f64 - 1.0) * theta, rng);
    JumpMark {
        xi,
        u,
        e_theta,
        e_mtheta,
        sigma_sq: mark_variance(sigma, m, u, e_theta, e_mtheta),
    }
}

pub fn sample_marks<R: Rng + ?Sized>(
    sigma: f64,
    theta: f64,
    m: u32,
    n: usize,
    rng: &mut R,
) -> Result<Vec<JumpMark>> {
    upsilon_sq(theta, m)?;
    Ok((0..n).map(|_| sample_mark(sigma, theta, m, rng)).collect())
}

/// Default truncation: the largest `h` whose small-jump second moment is at
/// most a fixed fraction of `∫x²ν`.
pub fn default_h_sim(levy: &LevyTriplet) -> Result<f64> {
    let total = levy.measure.second_moment();
    if levy.measure.is_zero() || total == 0.0 {
        return Ok(1.0);
    }
    let target = tolerances::H_SIM_TRUNCATION * total;
    let m2 = |h: f64| levy.measure.truncated_second_moment(h);
    let mut hi = 1.0;
    while m2(hi)? <= target {
        hi *= 2.0;
        if hi > 1e9 {
            return Ok(hi);
        }
    }
    let mut lo = hi;
    while m2(lo)? > target {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Numeric("no admissible truncation threshold".into()));
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if m2(mid)? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn oracle_scheme(levy: &LevyTriplet, h_sim: f64) -> Scheme {
    if levy.measure.remainder_is_exact(h_sim) {
        Scheme::Idealised
    } else {
        Scheme::DirectContinuous
    }
}

/// Joint skeleton of `X` and `U` on the same update times.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitPath {
    pub x: PathSkeleton,
    pub u_pre: Vec<f64>,
    pub u_post: Vec<f64>,
}

/// Settings of the limit simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitParams {
    pub theta: f64,
    pub m: u32,
    pub eps_sim: f64,
    pub h_sim: f64,
    /// Multiplies the `B` and mark terms; `U` is linear in this factor.
    pub noise_scale: f64,
}

/// Jump-adapted Euler simulation of `(X, U)` with `U_0 = 0`.
pub fn simulate_limit(
    model: &SdeModel,
    levy: &LevyTriplet,
    params: &LimitParams,
    stream: &RandomStream,
) -> Result<LimitPath> {
    let ups = upsilon_sq(params.theta, params.m)?.sqrt();
    let level = LevelParams {
        eps: params.eps_sim,
        h: params.h_sim,
        eps_aux: params.eps_sim,
    };
    let x = simulate_level(
        model,
        levy,
        &level,
        oracle_scheme(levy, params.h_sim),
        stream,
    )?;
    let mut b_rng = stream.child(tags::LIMIT_BROWNIAN).rng();
    let mut mark_rng = stream.child(tags::MARKS).rng();
    let sigma = levy.sigma;
    let brownian_coef = params.noise_scale * sigma * sigma * ups;
    let n = x.len();
    let mut u_pre = Vec::with_capacity(n);
    let mut u_post = Vec::with_capacity(n);
    let mut u = 0.0;
    u_pre.push(0.0);
    u_post.push(0.0);
    for i in 1..n {
        let inc = &x.increments[i];
        let xp = x.post[i - 1];
        let slope = model.a_prime(xp);
        let aa = model.a(xp) * slope;
        let z: f64 = StandardNormal.sample(&mut b_rng);
        let db = inc.dt.sqrt() * z;
        let continuous = inc.between + inc.small_jumps.unwrap_or(0.0);
        let left = u + slope * u * continuous + brownian_coef * aa * db;
        let mut next = left;
        if inc.jump != 0.0 {
            let mark = sample_mark(sigma, params.theta, params.m, &mut mark_rng);
            let x_minus = x.pre[i];
            let aa_minus = model.a(x_minus) * model.a_prime(x_minus);
            next += slope * u * inc.jump
                + params.noise_scale * mark.sigma_sq.sqrt() * mark.xi * aa_minus * inc.jump;
        }
        u_pre.push(if inc.jump != 0.0 { left } else { next });
        u_post.push(next);
        u = next;
    }
    Ok(LimitPath { x, u_pre, u_post })
}

/// Stochastic exponential `ℰ` of `∫a'(X-)dY` and the cumulative kernel
/// `G` with `φ_{s,t} = ℰ_s ℰ_t G(min(s, t))`, at every update time (left
/// limits and values).
#[derive(Clone, Debug, PartialEq)]
pub struct PhiProfile {
    pub e_pre: Vec<f64>,
    pub e_post: Vec<f64>,
    pub g_pre: Vec<f64>,
    pub g_post: Vec<f64>,
}

/// `ℰ` follows the skeleton's own Euler recursion,
/// `ℰ_n = ℰ_{n-1}(1 + a'(X_{n-1}) ΔY_n)` between jumps, with the exact
/// factor `1 + a'(X_{s-})ΔY_s` at jumps. `G` accumulates
/// `σ⁴ (aa')²/ℰ² du` (left points) and `σ² (aa')²(X_{s-}) ΔY_s² / ℰ_s²`.
pub fn phi_profile(model: &SdeModel, levy: &LevyTriplet, x: &PathSkeleton) -> Result<PhiProfile> {
    let n = x.len();
    let s2 = levy.sigma * levy.sigma;
    let mut p = PhiProfile {
        e_pre: Vec::with_capacity(n),
        e_post: Vec::with_capacity(n),
        g_pre: Vec::with_capacity(n),
        g_post: Vec::with_capacity(n),
    };
    let (mut e, mut g) = (1.0f64, 0.0f64);
    p.e_pre.push(e);
    p.e_post.push(e);
    p.g_pre.push(g);
    p.g_post.push(g);
    for i in 1..n {
        let inc = &x.increments[i];
        let xp = x.post[i - 1];
        let slope = model.a_prime(xp);
        let aa = model.a(xp) * slope;
        g += s2 * s2 * aa * aa * inc.dt / (e * e);
        let factor = 1.0 + slope * (inc.between + inc.small_jumps.unwrap_or(0.0));
        if factor.abs() <= tolerances::SINGULAR_JUMP {
            return Err(Error::SingularJump { time: x.times[i] });
        }
        e *= factor;
        p.e_pre.push(e);
        p.g_pre.push(g);
        if inc.jump != 0.0 {
            let x_minus = x.pre[i];
            let jump_factor = 1.0 + model.a_prime(x_minus) * inc.jump;
            if jump_factor.abs() <= tolerances::SINGULAR_JUMP {
                return Err(Error::SingularJump { time: x.times[i] });
            }
            e *= jump_factor;
            let aa_minus = model.a(x_minus) * model.a_prime(x_minus);
            g += s2 * aa_minus * aa_minus * inc.jump * inc.jump / (e * e);
        }
        p.e_post.push(e);
        p.g_post.push(g);
    }
    Ok(p)
}

/// `φ_{s,t}` on a skeleton, evaluated at the last update times `<= s, t`.
pub fn phi_formula(
    model: &SdeModel,
    levy: &LevyTriplet,
    x: &PathSkeleton,
    s: f64,
    t: f64,
) -> Result<f64> {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let p = phi_profile(model, levy, x)?;
    x.value_at(s)?;
    x.value_at(t)?;
    let (i, j) = (x.index_at(s), x.index_at(t));
    Ok(p.e_post[i] * p.e_post[j] * p.g_post[i])
}

/// `Σ_{n,m} a_n a_m G_{min(n,m)}` with `a_n = w_n ℰ_n`, in linear time.
fn phi_quadratic_form(weights: &[f64], p: &PhiProfile) -> f64 {
    let mut suffix = 0.0;
    let mut total = 0.0;
    for k in (0..weights.len()).rev() {
        let a = weights[k] * p.e_post[k];
        total += p.g_post[k] * a * (a + 2.0 * suffix);
        suffix += a;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    LimitSde,
    PhiFormula,
    LevelEmpirical,
}

impl OracleMethod {
    pub fn name(&self) -> &'static str {
        match self {
            OracleMethod::LimitSde => "limit_sde",
            OracleMethod::PhiFormula => "phi_formula",
            OracleMethod::LevelEmpirical => "level_empirical",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    pub theta: f64,
    pub m: u32,
    pub n_paths: u64,
    pub eps_sim: f64,
    /// `None` selects [`default_h_sim`].
    pub h_sim: Option<f64>,
    /// Coarse level `k` of the `(k, k+1)` pair for the level-empirical method.
    pub level: usize,
    pub level_scheme: Scheme,
    /// Required by the level-empirical method.
    pub schedule: Option<LevelSchedule>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            theta: 0.0,
            m: 2,
            n_paths: 100_000,
            eps_sim: 1.0 / 1024.0,
            h_sim: None,
            level: 7,
            level_scheme: Scheme::ShotContinuous,
            schedule: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceOracleResult {
    pub method: OracleMethod,
    pub rho_sq: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub excluded_singular: u64,
    pub excluded_nondifferentiable: u64,
    pub h_sim: f64,
    pub eps_sim: f64,
    pub warnings: Vec<String>,
}

/// Per-path outcome of an oracle sample.
enum Sample {
    Value(f64),
    Singular,
    NonDifferentiable,
}

#[derive(Default)]
struct Tally {
    values: Accumulator,
    squares: Accumulator,
    singular: u64,
    nondiff: u64,
}

impl Tally {
    fn add(&mut self, s: Sample) {
        match s {
            Sample::Value(v) => {
                self.values.push(v);
                self.squares.push(v * v);
            }
            Sample::Singular => self.singular += 1,
            Sample::NonDifferentiable => self.nondiff += 1,
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.values.merge(&o.values);
        self.squares.merge(&o.squares);
        self.singular += o.singular;
        self.nondiff += o.nondiff;
    }
}

/// Gradient of `f` at `AX` (or `f'` at the supremum) with the skeleton
/// weights of the linear map folded in, and the supremum location.
enum Linearisation {
    Weights(Vec<f64>),
    Supremum {
        slope: f64,
        index: usize,
        left_limit: bool,
    },
}

fn linearise(functional: &FunctionalSpec, x: &PathSkeleton) -> Result<Option<Linearisation>> {
    match functional {
        FunctionalSpec::Linear { map, payoff, .. } => {
            let point = map.eval_values(&x.times, &x.post);
            let Gradient::Value(grad) = payoff.gradient(&point)? else {
                return Ok(None);
            };
            let mut w = vec![0.0; x.len()];
            for (g, comp) in grad.iter().zip(map.weights(&x.times)) {
                for (wi, ci) in w.iter_mut().zip(comp) {
                    *wi += g * ci;
                }
            }
            Ok(Some(Linearisation::Weights(w)))
        }
        FunctionalSpec::Supremum { payoff, .. } => {
            let sup = eval_supremum(x);
            let Gradient::Value(grad) = payoff.gradient(&[sup.value])? else {
                return Ok(None);
            };
            Ok(Some(Linearisation::Supremum {
                slope: grad[0],
                index: sup.index,
                left_limit: sup.left_limit,
            }))
        }
    }
}

const CHUNK: u64 = 256;

struct OracleRun<'a> {
    model: &'a SdeModel,
    levy: &'a LevyTriplet,
    functional: &'a FunctionalSpec,
    opts: &'a OracleOptions,
    h_sim: f64,
    upsilon_sq: f64,
}

impl OracleRun<'_> {
    fn limit_params(&self) -> LimitParams {
        LimitParams {
            theta: self.opts.theta,
            m: self.opts.m,
            eps_sim: self.opts.eps_sim,
            h_sim: self.h_sim,
            noise_scale: 1.0,
        }
    }

    fn sample(&self, method: OracleMethod, stream: &RandomStream) -> Result<Sample> {
        match method {
            OracleMethod::LimitSde => {
                let path = simulate_limit(self.model, self.levy, &self.limit_params(), stream)?;
                Ok(match linearise(self.functional, &path.x)? {
                    None => Sample::NonDifferentiable,
                    Some(Linearisation::Weights(w)) => {
                        Sample::Value(w.iter().zip(&path.u_post).map(|(a, b)| a * b).sum())
                    }
                    Some(Linearisation::Supremum {
                        slope,
                        index,
                        left_limit,
                    }) => {
                        let u = if left_limit {
                            path.u_pre[index]
                        } else {
                            path.u_post[index]
                        };
                        Sample::Value(slope * u)
                    }
                })
            }
            OracleMethod::PhiFormula => {
                let level = LevelParams {
                    eps: self.opts.eps_sim,
                    h: self.h_sim,
                    eps_aux: self.opts.eps_sim,
                };
                let x = simulate_level(
                    self.model,
                    self.levy,
                    &level,
                    oracle_scheme(self.levy, self.h_sim),
                    stream,
                )?;
                let profile = match phi_profile(self.model, self.levy, &x) {
                    Ok(p) => p,
                    Err(Error::SingularJump { .. }) => return Ok(Sample::Singular),
                    Err(e) => return Err(e),
                };
                Ok(match linearise(self.functional, &x)? {
                    None => Sample::NonDifferentiable,
                    Some(Linearisation::Weights(w)) => {
                        Sample::Value(self.upsilon_sq * phi_quadratic_form(&w, &profile))
                    }
                    Some(Linearisation::Supremum {
                        slope,
                        index,
                        left_limit,
                    }) => {
                        let (e, g) = if left_limit {
                            (profile.e_pre[index], profile.g_pre[index])
                        } else {
                            (profile.e_post[index], profile.g_post[index])
                        };
                        Sample::Value(self.upsilon_sq * slope * slope * e * e * g)
                    }
                })
            }
            OracleMethod::LevelEmpirical => {
                let schedule = self
                    .opts
                    .schedule
                    .as_ref()
                    .ok_or_else(|| config("level_empirical needs a schedule"))?;
                let k = self.opts.level;
                let pair = crate::schemes::PairParams {
                    coarse: schedule.levels[k],
                    fine: schedule.levels[k + 1],
                };
                let p =
                    simulate_coupled(self.model, self.levy, &pair, self.opts.level_scheme, stream)?;
                let d = eval_functional(self.functional, &p.fine)?
                    - eval_functional(self.functional, &p.coarse)?;
                Ok(Sample::Value(d / schedule.levels[k].eps.sqrt()))
            }
        }
    }
}

/// Per-path values behind an oracle: `∇f·AU` for the limit SDE, `Υ²·φ`
/// quadratic forms for the kernel, scaled level differences otherwise.
/// Excluded paths are dropped.
pub fn oracle_samples(
    model: &SdeModel,
    levy: &LevyTriplet,
    functional: &FunctionalSpec,
    method: OracleMethod,
    opts: &OracleOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    let run = prepare(model, levy, functional, method, opts)?;
    let root = RandomStream::new(seed).child(tags::ORACLE);
    let chunks = opts.n_paths.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(opts.n_paths) {
                if let Sample::Value(v) = run.sample(method, &root.derive(method as u64, i))? {
                    out.push(v);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

fn prepare<'a>(
    model: &'a SdeModel,
    levy: &'a LevyTriplet,
    functional: &'a FunctionalSpec,
    method: OracleMethod,
    opts: &'a OracleOptions,
) -> Result<OracleRun<'a>> {
    model.validate()?;
    levy.validate()?;
    functional.validate(model.horizon)?;
    if opts.n_paths < 2 {
        return Err(Error::InsufficientData(
            "an oracle needs at least two paths".into(),
        ));
    }
    if method == OracleMethod::LevelEmpirical {
        let s = opts
            .schedule
            .as_ref()
            .ok_or_else(|| config("level_empirical needs a schedule"))?;
        if opts.level + 1 > s.k_max() || opts.level == 0 {
            return Err(config(format!(
                "level {} needs a schedule reaching k = {}",
                opts.level,
                opts.level + 1
            )));
        }
    }
    let h_sim = match opts.h_sim {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(config(format!("h_sim must be positive, got {h}"))),
        None => default_h_sim(levy)?,
    };
    Ok(OracleRun {
        model,
        levy,
        functional,
        opts,
        h_sim,
        upsilon_sq: upsilon_sq(opts.theta, opts.m)?,
    })
}

pub fn rho_sq_oracle(
    model: &SdeModel,
    levy: &LevyTriplet,
    functional: &FunctionalSpec,
    method: OracleMethod,
    opts: &OracleOptions,
    seed: u64,
) -> Result<VarianceOracleResult> {
    let run = prepare(model, levy, functional, method, opts)?;
    let root = RandomStream::new(seed).child(tags::ORACLE);
    let chunks = opts.n_paths.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(opts.n_paths) {
                t.add(run.sample(method, &root.derive(method as u64, i))?);
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tally = Tally::default();
    for p in &parts {
        tally.merge(p);
    }
    if tally.values.count < 2 {
        return Err(Error::InsufficientData(
            "fewer than two usable oracle paths".into(),
        ));
    }
    let (rho_sq, std_error) = match method {
        // each sample is an unbiased estimate of ρ² itself
        OracleMethod::PhiFormula => (tally.values.mean, tally.values.std_error()),
        OracleMethod::LimitSde | OracleMethod::LevelEmpirical => {
            (tally.values.variance(), tally.squares.std_error())
        }
    };
    let mut warnings = Vec::new();
    let excluded = tally.singular + tally.nondiff;
    if excluded as f64 > tolerances::EXCLUSION_WARN_FRACTION * opts.n_paths as f64 {
        warnings.push(format!(
            "{excluded} of {} paths excluded ({} singular, {} nondifferentiable)",
            opts.n_paths, tally.singular, tally.nondiff
        ));
    }
    if method != OracleMethod::LevelEmpirical
        && levy.measure.truncated_second_moment(run.h_sim)? > 0.0
    {
        warnings.push(format!("jumps below h_sim = {} are not marked", run.h_sim));
    }
    Ok(VarianceOracleResult {
        method,
        rho_sq,
        std_error,
        n_paths: opts.n_paths,
        excluded_singular: tally.singular,
        excluded_nondifferentiable: tally.nondiff,
        h_sim: run.h_sim,
        eps_sim: opts.eps_sim,
        warnings,
    })
}
