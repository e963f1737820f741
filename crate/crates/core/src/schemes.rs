//! Jump-adapted Euler schemes and coupled coarse/fine path simulation.
//!
//! A level is described by its grid width `eps`, jump threshold `h` and the
//! auxiliary grid width `eps_aux` on which the small-jump remainder is added
//! (direct-simulation schemes only). A coupled pair shares one realisation
//! of the Brownian motion, the big jumps (sampled once at the fine
//! threshold) and the small-jump remainder draws.
//!
//! Randomness is consumed only along the fine level's structure, so
//! simulating a level alone or as the fine member of a pair gives
//! bit-identical skeletons for the same stream.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::levy::{sample_big_jumps, small_jump_increment, LevyTriplet};
use crate::rng::{tags as stream_tags, RandomStream};
use crate::sde::SdeModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact increments of `Y` between update times.
    Idealised,
    /// `Y^h` between update times plus `M^h` on the auxiliary grid.
    DirectContinuous,
    DirectConstant,
    /// `Y^h` only; jumps below `h` are dropped.
    ShotContinuous,
    ShotConstant,
}

/// How a scheme treats jumps below the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmallJumps {
    Exact,
    Direct,
    Dropped,
}

/// Evaluation convention between update times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Continuous,
    PiecewiseConstant,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Idealised,
        Scheme::DirectContinuous,
        Scheme::DirectConstant,
        Scheme::ShotContinuous,
        Scheme::ShotConstant,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Idealised => "idealised",
            Scheme::DirectContinuous => "direct_continuous",
            Scheme::DirectConstant => "direct_constant",
            Scheme::ShotContinuous => "shot_continuous",
            Scheme::ShotConstant => "shot_constant",
        }
    }

    pub fn small_jumps(&self) -> SmallJumps {
        match self {
            Scheme::Idealised => SmallJumps::Exact,
            Scheme::DirectContinuous | Scheme::DirectConstant => SmallJumps::Direct,
            Scheme::ShotContinuous | Scheme::ShotConstant => SmallJumps::Dropped,
        }
    }

    pub fn interpolation(&self) -> Interpolation {
        match self {
            Scheme::DirectConstant | Scheme::ShotConstant => Interpolation::PiecewiseConstant,
            _ => Interpolation::Continuous,
        }
    }

    /// Whether this scheme falls back to Gaussian small-jump increments for
    /// the given driver and fine threshold.
    pub fn uses_gaussian_fallback(&self, levy: &LevyTriplet, h: f64) -> bool {
        self.small_jumps() == SmallJumps::Direct && !levy.measure.remainder_is_exact(h)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub eps: f64,
    pub h: f64,
    pub eps_aux: f64,
}

impl LevelParams {
    pub fn new(eps: f64, h: f64) -> Self {
        Self {
            eps,
            h,
            eps_aux: eps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairParams {
    pub coarse: LevelParams,
    pub fine: LevelParams,
}

impl PairParams {
    /// A degenerate pair whose coarse member equals the fine one.
    pub fn single(level: LevelParams) -> Self {
        Self {
            coarse: level,
            fine: level,
        }
    }
}

/// Tag set of an update time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Tags(u8);

impl Tags {
    pub const COARSE_GRID: Tags = Tags(1);
    pub const FINE_GRID: Tags = Tags(2);
    pub const BIG_JUMP_COARSE: Tags = Tags(4);
    pub const BIG_JUMP_FINE: Tags = Tags(8);
    pub const AUX_COARSE: Tags = Tags(16);
    pub const AUX_FINE: Tags = Tags(32);

    const NAMES: [(Tags, &'static str); 6] = [
        (Tags::FINE_GRID, "fine_grid"),
        (Tags::COARSE_GRID, "coarse_grid"),
        (Tags::BIG_JUMP_FINE, "big_jump_fine"),
        (Tags::BIG_JUMP_COARSE, "big_jump_coarse"),
        (Tags::AUX_FINE, "aux_fine"),
        (Tags::AUX_COARSE, "aux_coarse"),
    ];

    #[inline]
    pub fn contains(self, other: Tags) -> bool {
        self.0 & other.0 == other.0
    }

    #[inline]
    pub fn insert(&mut self, other: Tags) {
        self.0 |= other.0;
    }

    /// Update time of the coarse level.
    #[inline]
    pub fn is_coarse_update(self) -> bool {
        self.0 & (Tags::COARSE_GRID.0 | Tags::BIG_JUMP_COARSE.0) != 0
    }

    pub fn label(self) -> String {
        let parts: Vec<&str> = Self::NAMES
            .iter()
            .filter(|(t, _)| self.contains(*t))
            .map(|(_, n)| *n)
            .collect();
        parts.join("|")
    }
}

/// Merged, sorted update times of a coupled pair, with tags and the size of
/// the big jump (if any) at each time.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateTimeline {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub tags: Vec<Tags>,
    pub jumps: Vec<f64>,
}

impl UpdateTimeline {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integer structure of a pair's grids, in units of fine cells.
#[derive(Clone, Copy, Debug)]
struct GridLayout {
    cells: u64,
    coarse: u64,
    aux_fine: u64,
    aux_coarse: u64,
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<u64> {
    let r = (num / den).round();
    if !(r >= 1.0) || (r * den - num).abs() > 1e-9 * num.abs().max(den.abs()) {
        return Err(config(format!(
            "{what}: {num} is not a positive integer multiple of {den}"
        )));
    }
    Ok(r as u64)
}

fn check_level(level: &LevelParams, which: &str) -> Result<()> {
    for (v, name) in [
        (level.eps, "eps"),
        (level.h, "h"),
        (level.eps_aux, "eps_aux"),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(config(format!(
                "{which} {name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

impl GridLayout {
    fn new(params: &PairParams, horizon: f64) -> Result<Self> {
        check_level(&params.fine, "fine")?;
        check_level(&params.coarse, "coarse")?;
        if params.fine.h > params.coarse.h {
            return Err(config(
                "fine threshold must not exceed the coarse threshold",
            ));
        }
        let cells = integer_ratio(horizon, params.fine.eps, "horizon / fine eps")?;
        let coarse = integer_ratio(params.coarse.eps, params.fine.eps, "coarse eps / fine eps")?;
        let aux_fine = integer_ratio(
            params.fine.eps_aux,
            params.fine.eps,
            "fine eps_aux / fine eps",
        )?;
        let aux_coarse_cells = integer_ratio(
            params.coarse.eps_aux,
            params.coarse.eps,
            "coarse eps_aux / coarse eps",
        )?;
        let aux_coarse = coarse * aux_coarse_cells;
        if aux_coarse % aux_fine != 0 {
            return Err(config(
                "coarse auxiliary grid must be a multiple of the fine auxiliary grid",
            ));
        }
        if cells % coarse != 0 {
            return Err(config("horizon must be a multiple of the coarse eps"));
        }
        Ok(Self {
            cells,
            coarse,
            aux_fine,
            aux_coarse,
        })
    }

    #[inline]
    fn time(&self, j: u64, horizon: f64) -> f64 {
        if j == self.cells {
            horizon
        } else {
            horizon * j as f64 / self.cells as f64
        }
    }

    fn grid_tags(&self, j: u64) -> Tags {
        let mut t = Tags::FINE_GRID;
        if j.is_multiple_of(self.coarse) {
            t.insert(Tags::COARSE_GRID);
        }
        if j > 0 && j.is_multiple_of(self.aux_fine) {
            t.insert(Tags::AUX_FINE);
        }
        if j > 0 && j.is_multiple_of(self.aux_coarse) {
            t.insert(Tags::AUX_COARSE);
        }
        t
    }
}

fn merge_timeline(
    layout: &GridLayout,
    horizon: f64,
    jump_times: &[f64],
    jump_sizes: &[f64],
    h_coarse: f64,
) -> UpdateTimeline {
    let cap = layout.cells as usize + 1 + jump_times.len();
    let mut tl = UpdateTimeline {
        horizon,
        times: Vec::with_capacity(cap),
        tags: Vec::with_capacity(cap),
        jumps: Vec::with_capacity(cap),
    };
    let mut next_jump = 0;
    for j in 0..=layout.cells {
        let t = layout.time(j, horizon);
        // a jump colliding with a grid time is processed after the grid update
        while next_jump < jump_times.len() && jump_times[next_jump] < t {
            push_jump(
                &mut tl,
                jump_times[next_jump],
                jump_sizes[next_jump],
                h_coarse,
            );
            next_jump += 1;
        }
        tl.times.push(t);
        tl.tags.push(layout.grid_tags(j));
        tl.jumps.push(0.0);
    }
    while next_jump < jump_times.len() {
        push_jump(
            &mut tl,
            jump_times[next_jump],
            jump_sizes[next_jump],
            h_coarse,
        );
        next_jump += 1;
    }
    tl
}

fn push_jump(tl: &mut UpdateTimeline, t: f64, size: f64, h_coarse: f64) {
    let mut tags = Tags::BIG_JUMP_FINE;
    if size.abs() >= h_coarse {
        tags.insert(Tags::BIG_JUMP_COARSE);
    }
    tl.times.push(t);
    tl.tags.push(tags);
    tl.jumps.push(size);
}

/// Merged update timeline of a pair: both grids, the auxiliary grids and
/// every jump of size at least the fine threshold.
pub fn build_timeline<R: Rng + ?Sized>(
    levy: &LevyTriplet,
    params: &PairParams,
    horizon: f64,
    rng: &mut R,
) -> Result<UpdateTimeline> {
    let layout = GridLayout::new(params, horizon)?;
    let batch = sample_big_jumps(&levy.measure, params.fine.h, horizon, rng)?;
    Ok(merge_timeline(
        &layout,
        horizon,
        &batch.times,
        &batch.sizes,
        params.coarse.h,
    ))
}

/// Driver components over one update interval `(T_{n-1}, T_n]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Increment {
    pub dt: f64,
    /// Increment of the driving process (`Y` or `Y^h`) excluding the jump
    /// at the right endpoint.
    pub between: f64,
    /// Big jump at the right endpoint, zero if none.
    pub jump: f64,
    /// Remainder increment `M^h` over the auxiliary window ending here.
    pub small_jumps: Option<f64>,
}

/// Path values at the update times of one approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSkeleton {
    pub times: Vec<f64>,
    /// Left limits at the update times.
    pub pre: Vec<f64>,
    /// Values at the update times.
    pub post: Vec<f64>,
    /// `increments[n]` drives the update from `n - 1` to `n`; entry 0 is zero.
    pub increments: Vec<Increment>,
    pub interpolation: Interpolation,
}

impl PathSkeleton {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty skeleton")
    }

    /// Number of update intervals (Euler steps).
    pub fn intervals(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn terminal(&self) -> f64 {
        *self.post.last().expect("nonempty skeleton")
    }

    /// Index of the last update time `<= t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|s| *s <= t).max(1) - 1
    }

    /// Path value at `t`: the value at the last update time `<= t`. Both
    /// interpolation conventions agree on this, since the continuous
    /// variant is only observable at update times.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(domain(format!("time {t} outside [0, {horizon}]")));
        }
        Ok(self.post[self.index_at(t)])
    }

    /// Recompute the values from the stored increments.
    pub fn replay(&self, model: &SdeModel) -> Vec<f64> {
        let (_, post) = run_recursion(model, &self.increments);
        post
    }

    fn from_increments(
        model: &SdeModel,
        times: Vec<f64>,
        increments: Vec<Increment>,
        interpolation: Interpolation,
    ) -> Self {
        let (pre, post) = run_recursion(model, &increments);
        Self {
            times,
            pre,
            post,
            increments,
            interpolation,
        }
    }
}

/// Euler recursion
/// `X_n = X_{n-1} + a(X_{n-1})(ΔY_n) + a(X_{aux-}) ΔM_n`, where the last
/// term is present only at auxiliary times and uses the value at the
/// previous auxiliary time.
fn run_recursion(model: &SdeModel, increments: &[Increment]) -> (Vec<f64>, Vec<f64>) {
    let n = increments.len();
    let mut pre = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n);
    let mut x = model.x0;
    let mut aux_anchor = model.x0;
    pre.push(x);
    post.push(x);
    for inc in &increments[1..] {
        let slope = model.a(x);
        let mut next = x + slope * (inc.between + inc.jump);
        let left = if inc.jump != 0.0 {
            x + slope * inc.between
        } else {
            next
        };
        if let Some(m) = inc.small_jumps {
            next += model.a(aux_anchor) * m;
            aux_anchor = next;
        }
        pre.push(left);
        post.push(next);
        x = next;
    }
    (pre, post)
}

/// Randomness of one pair on the merged timeline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DriverDraws {
    pub dt: Vec<f64>,
    /// `σ ΔW` per interval.
    pub diffusion: Vec<f64>,
    /// Remainder draw: the exact `Y - Y^h` increment per interval for the
    /// idealised scheme, `M^h` per fine auxiliary window for direct schemes.
    pub remainder: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPaths {
    pub timeline: UpdateTimeline,
    pub coarse: PathSkeleton,
    pub fine: PathSkeleton,
    pub scheme: Scheme,
    pub draws: DriverDraws,
    pub gaussian_fallback: bool,
}

impl CoupledPaths {
    /// Cost in Euler-step units: one per fine interval plus `beta` per
    /// coarse interval.
    pub fn cost_units(&self, beta: f64) -> f64 {
        self.fine.intervals() as f64 + beta * self.coarse.intervals() as f64
    }
}

struct FinePass {
    timeline: UpdateTimeline,
    draws: DriverDraws,
    fine: PathSkeleton,
    fallback: bool,
}

fn check_scheme(levy: &LevyTriplet, scheme: Scheme, h_fine: f64) -> Result<()> {
    if scheme == Scheme::Idealised && !levy.measure.remainder_is_exact(h_fine) {
        return Err(Error::SchemeUnsupported {
            scheme: scheme.name(),
            reason: "increments of Y are not exactly simulable for an infinite-activity measure"
                .into(),
        });
    }
    Ok(())
}

fn simulate_fine(
    model: &SdeModel,
    levy: &LevyTriplet,
    params: &PairParams,
    scheme: Scheme,
    stream: &RandomStream,
) -> Result<FinePass> {
    let h = params.fine.h;
    check_scheme(levy, scheme, h)?;
    let mut jump_rng = stream.child(stream_tags::JUMPS).rng();
    let timeline = build_timeline(levy, params, model.horizon, &mut jump_rng)?;
    let mut w_rng = stream.child(stream_tags::BROWNIAN).rng();
    let mut r_rng = stream.child(stream_tags::REMAINDER).rng();

    let mode = scheme.small_jumps();
    let drift = levy.compensated_drift(h)?;
    let n = timeline.len();
    let mut draws = DriverDraws {
        dt: vec![0.0; n],
        diffusion: vec![0.0; n],
        remainder: vec![0.0; n],
    };
    let mut increments = Vec::with_capacity(n);
    increments.push(Increment::default());
    for i in 1..n {
        let dt = timeline.times[i] - timeline.times[i - 1];
        let z: f64 = StandardNormal.sample(&mut w_rng);
        let dw = levy.sigma * dt.sqrt() * z;
        let tags = timeline.tags[i];
        let mut inc = Increment {
            dt,
            between: drift * dt + dw,
            jump: if tags.contains(Tags::BIG_JUMP_FINE) {
                timeline.jumps[i]
            } else {
                0.0
            },
            small_jumps: None,
        };
        let remainder = match mode {
            SmallJumps::Exact if dt > 0.0 => {
                let r = small_jump_increment(levy, h, dt, &mut r_rng)?;
                inc.between += r;
                r
            }
            SmallJumps::Direct if tags.contains(Tags::AUX_FINE) => {
                let r = small_jump_increment(levy, h, params.fine.eps_aux, &mut r_rng)?;
                inc.small_jumps = Some(r);
                r
            }
            _ => 0.0,
        };
        draws.dt[i] = dt;
        draws.diffusion[i] = dw;
        draws.remainder[i] = remainder;
        increments.push(inc);
    }
    let fine = PathSkeleton::from_increments(
        model,
        timeline.times.clone(),
        increments,
        scheme.interpolation(),
    );
    Ok(FinePass {
        timeline,
        draws,
        fine,
        fallback: scheme.uses_gaussian_fallback(levy, h),
    })
}

fn coarse_pass(
    model: &SdeModel,
    levy: &LevyTriplet,
    params: &PairParams,
    scheme: Scheme,
    timeline: &UpdateTimeline,
    draws: &DriverDraws,
    fine: &PathSkeleton,
) -> Result<PathSkeleton> {
    let mode = scheme.small_jumps();
    let drift_coarse = levy.compensated_drift(params.coarse.h)?;
    // ∫_{h_f <= |x| < h_c} x ν(dx)
    let mid_mean = levy.measure.tail_first_moment(params.fine.h)?
        - levy.measure.tail_first_moment(params.coarse.h)?;
    let mid_compensator = params.coarse.eps_aux * mid_mean;

    let mut times = vec![0.0];
    let mut increments = vec![Increment::default()];
    let (mut acc_dt, mut acc_between, mut acc_remainder, mut acc_mid) = (0.0, 0.0, 0.0, 0.0);
    for i in 1..timeline.len() {
        let tags = timeline.tags[i];
        let dt = draws.dt[i];
        acc_dt += dt;
        let mid_jump =
            if tags.contains(Tags::BIG_JUMP_FINE) && !tags.contains(Tags::BIG_JUMP_COARSE) {
                timeline.jumps[i]
            } else {
                0.0
            };
        match mode {
            SmallJumps::Exact => {
                acc_between += fine.increments[i].between + mid_jump;
            }
            SmallJumps::Dropped => {
                acc_between += drift_coarse * dt + draws.diffusion[i];
            }
            SmallJumps::Direct => {
                acc_between += drift_coarse * dt + draws.diffusion[i];
                acc_mid += mid_jump;
                if tags.contains(Tags::AUX_FINE) {
                    acc_remainder += draws.remainder[i];
                }
            }
        }
        if tags.is_coarse_update() {
            let small_jumps = if mode == SmallJumps::Direct && tags.contains(Tags::AUX_COARSE) {
                let m = acc_remainder + acc_mid - mid_compensator;
                acc_remainder = 0.0;
                acc_mid = 0.0;
                Some(m)
            } else {
                None
            };
            increments.push(Increment {
                dt: acc_dt,
                between: acc_between,
                jump: if tags.contains(Tags::BIG_JUMP_COARSE) {
                    timeline.jumps[i]
                } else {
                    0.0
                },
                small_jumps,
            });
            times.push(timeline.times[i]);
            acc_dt = 0.0;
            acc_between = 0.0;
        }
    }
    Ok(PathSkeleton::from_increments(
        model,
        times,
        increments,
        scheme.interpolation(),
    ))
}

/// Coarse and fine approximations driven by one realisation of the noise.
pub fn simulate_coupled(
    model: &SdeModel,
    levy: &LevyTriplet,
    params: &PairParams,
    scheme: Scheme,
    stream: &RandomStream,
) -> Result<CoupledPaths> {
    let pass = simulate_fine(model, levy, params, scheme, stream)?;
    let coarse = coarse_pass(
        model,
        levy,
        params,
        scheme,
        &pass.timeline,
        &pass.draws,
        &pass.fine,
    )?;
    Ok(CoupledPaths {
        timeline: pass.timeline,
        coarse,
        fine: pass.fine,
        scheme,
        draws: pass.draws,
        gaussian_fallback: pass.fallback,
    })
}

/// A single level, identical to the fine member of any pair built on the
/// same stream.
pub fn simulate_level(
    model: &SdeModel,
    levy: &LevyTriplet,
    level: &LevelParams,
    scheme: Scheme,
    stream: &RandomStream,
) -> Result<PathSkeleton> {
    Ok(simulate_fine(model, levy, &PairParams::single(*level), scheme, stream)?.fine)
}

/// `(coarse, fine)` values at time `t`.
pub fn replay_marginal(paths: &CoupledPaths, t: f64) -> Result<(f64, f64)> {
    Ok((paths.coarse.value_at(t)?, paths.fine.value_at(t)?))
}

/// Debug dump of a pair: one row per merged update time.
pub fn write_skeleton_csv<W: Write>(paths: &CoupledPaths, mut out: W) -> io::Result<()> {
    writeln!(out, "time,tag,coarse_pre,coarse_post,fine_pre,fine_post")?;
    let mut c = 0;
    for i in 0..paths.timeline.len() {
        let t = paths.timeline.times[i];
        let (cpre, cpost) = if c + 1 < paths.coarse.len()
            && paths.coarse.times[c + 1] == t
            && paths.timeline.tags[i].is_coarse_update()
        {
            c += 1;
            (paths.coarse.pre[c], paths.coarse.post[c])
        } else {
            (paths.coarse.post[c], paths.coarse.post[c])
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t,
            paths.timeline.tags[i].label(),
            cpre,
            cpost,
            paths.fine.pre[i],
            paths.fine.post[i]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpDistribution, LevyMeasure};
    use crate::sde::Coefficient;

    fn gbm() -> (SdeModel, LevyTriplet) {
        (
            SdeModel::new(Coefficient::Linear, 1.0, 1.0).unwrap(),
            LevyTriplet::new(0.05, 0.2, LevyMeasure::Zero).unwrap(),
        )
    }

    fn cp_driver(rate: f64, value: f64) -> LevyTriplet {
        LevyTriplet::new(
            0.05,
            0.2,
            LevyMeasure::CompoundPoisson {
                rate,
                jumps: JumpDistribution::Constant { value },
            },
        )
        .unwrap()
    }

    #[test]
    fn pure_grid_timeline() {
        let (_, levy) = gbm();
        let params = PairParams {
            coarse: LevelParams::new(0.5, 0.5),
            fine: LevelParams::new(0.25, 0.25),
        };
        let mut rng = RandomStream::new(0).rng();
        let tl = build_timeline(&levy, &params, 1.0, &mut rng).unwrap();
        assert_eq!(tl.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let coarse: Vec<bool> = tl
            .tags
            .iter()
            .map(|t| t.contains(Tags::COARSE_GRID))
            .collect();
        assert_eq!(coarse, vec![true, false, true, false, true]);
    }

    #[test]
    fn jumps_tagged_for_both_levels() {
        let levy = cp_driver(2.0, 1.0);
        let params = PairParams {
            coarse: LevelParams::new(0.5, 0.5),
            fine: LevelParams::new(0.25, 0.5),
        };
        for s in 0..200 {
            let mut rng = RandomStream::new(s).rng();
            let tl = build_timeline(&levy, &params, 1.0, &mut rng).unwrap();
            for (tag, jump) in tl.tags.iter().zip(&tl.jumps) {
                if *jump != 0.0 {
                    assert!(
                        tag.contains(Tags::BIG_JUMP_FINE) && tag.contains(Tags::BIG_JUMP_COARSE)
                    );
                }
            }
        }
    }

    #[test]
    fn grid_incompatibility_is_config_error() {
        let (_, levy) = gbm();
        let mut rng = RandomStream::new(0).rng();
        let bad = PairParams {
            coarse: LevelParams::new(0.3, 0.5),
            fine: LevelParams::new(0.25, 0.5),
        };
        assert!(matches!(
            build_timeline(&levy, &bad, 1.0, &mut rng),
            Err(Error::Config(_))
        ));
        let bad_aux = PairParams {
            coarse: LevelParams::new(0.5, 0.5),
            fine: LevelParams {
                eps: 0.25,
                h: 0.5,
                eps_aux: 0.3,
            },
        };
        assert!(matches!(
            build_timeline(&levy, &bad_aux, 1.0, &mut rng),
            Err(Error::Config(_))
        ));
        let bad_h = PairParams {
            coarse: LevelParams::new(0.5, 0.1),
            fine: LevelParams::new(0.25, 0.5),
        };
        assert!(matches!(
            build_timeline(&levy, &bad_h, 1.0, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn timeline_invariants_with_jumps() {
        let levy = LevyTriplet::new(
            0.0,
            0.3,
            LevyMeasure::StableLike {
                c: 0.5,
                alpha: 0.8,
                asymmetry: 0.2,
            },
        )
        .unwrap();
        let params = PairParams {
            coarse: LevelParams {
                eps: 1.0 / 8.0,
                h: 0.2,
                eps_aux: 1.0 / 4.0,
            },
            fine: LevelParams {
                eps: 1.0 / 16.0,
                h: 0.05,
                eps_aux: 1.0 / 16.0,
            },
        };
        for s in 0..100 {
            let mut rng = RandomStream::new(s).rng();
            let tl = build_timeline(&levy, &params, 1.0, &mut rng).unwrap();
            assert_eq!(tl.times[0], 0.0);
            assert_eq!(*tl.times.last().unwrap(), 1.0);
            assert!(tl.times.windows(2).all(|w| w[0] <= w[1]));
            let grid = tl
                .tags
                .iter()
                .filter(|t| t.contains(Tags::FINE_GRID))
                .count();
            assert_eq!(grid, 17);
            for (i, tag) in tl.tags.iter().enumerate() {
                if tag.contains(Tags::BIG_JUMP_COARSE) {
                    assert!(tl.jumps[i].abs() >= 0.2 && tag.contains(Tags::BIG_JUMP_FINE));
                }
                if tag.contains(Tags::BIG_JUMP_FINE) {
                    assert!(tl.jumps[i].abs() >= 0.05);
                }
                if tag.contains(Tags::AUX_COARSE) {
                    assert!(tag.contains(Tags::COARSE_GRID) && tag.contains(Tags::AUX_FINE));
                }
            }
            let aux_coarse = tl
                .tags
                .iter()
                .filter(|t| t.contains(Tags::AUX_COARSE))
                .count();
            assert_eq!(aux_coarse, 4);
        }
    }

    #[test]
    fn jump_free_gaps_equal_eps() {
        let (_, levy) = gbm();
        let params = PairParams::single(LevelParams::new(1.0 / 64.0, 0.1));
        let mut rng = RandomStream::new(1).rng();
        let tl = build_timeline(&levy, &params, 1.0, &mut rng).unwrap();
        for w in tl.times.windows(2) {
            assert!(((w[1] - w[0]) - 1.0 / 64.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coefficient_keeps_paths_constant() {
        let model = SdeModel::new(Coefficient::Constant { c: 0.0 }, 1.7, 1.0).unwrap();
        let levy = cp_driver(3.0, 0.2);
        let params = PairParams {
            coarse: LevelParams::new(0.25, 0.3),
            fine: LevelParams::new(0.125, 0.1),
        };
        for scheme in Scheme::ALL {
            let p =
                simulate_coupled(&model, &levy, &params, scheme, &RandomStream::new(3)).unwrap();
            assert!(p
                .fine
                .post
                .iter()
                .chain(&p.coarse.post)
                .chain(&p.fine.pre)
                .all(|x| *x == 1.7));
        }
    }

    #[test]
    fn gbm_reduces_to_classical_euler() {
        let (model, levy) = gbm();
        let level = LevelParams::new(0.125, 0.1);
        let p = simulate_coupled(
            &model,
            &levy,
            &PairParams::single(level),
            Scheme::ShotConstant,
            &RandomStream::new(4),
        )
        .unwrap();
        let mut x = 1.0;
        for i in 1..p.fine.len() {
            x *= 1.0 + 0.05 * p.draws.dt[i] + p.draws.diffusion[i];
            assert!((p.fine.post[i] - x).abs() < 1e-14);
        }
        assert_eq!(p.fine.post, p.coarse.post);
    }

    #[test]
    fn recursion_replays_bitwise() {
        let model = SdeModel::new(Coefficient::LogisticDamped { c: 1.3 }, 0.4, 1.0).unwrap();
        let levy = LevyTriplet::new(
            0.1,
            0.3,
            LevyMeasure::StableLike {
                c: 0.3,
                alpha: 1.1,
                asymmetry: -0.4,
            },
        )
        .unwrap();
        let params = PairParams {
            coarse: LevelParams::new(1.0 / 4.0, 0.2),
            fine: LevelParams::new(1.0 / 8.0, 0.1),
        };
        for scheme in [Scheme::DirectContinuous, Scheme::ShotConstant] {
            let p =
                simulate_coupled(&model, &levy, &params, scheme, &RandomStream::new(5)).unwrap();
            assert_eq!(p.fine.replay(&model), p.fine.post);
            assert_eq!(p.coarse.replay(&model), p.coarse.post);
            assert_eq!(p.fine.post[0], model.x0);
        }
    }

    #[test]
    fn fine_level_identical_alone_and_in_pair() {
        let model = SdeModel::new(Coefficient::Affine { c1: 0.2, c2: 0.9 }, 1.0, 1.0).unwrap();
        let drivers = [
            cp_driver(5.0, 0.15),
            LevyTriplet::new(
                0.0,
                0.2,
                LevyMeasure::StableLike {
                    c: 0.2,
                    alpha: 0.7,
                    asymmetry: 0.3,
                },
            )
            .unwrap(),
        ];
        for levy in &drivers {
            let fine = LevelParams::new(1.0 / 16.0, 0.05);
            let coarse = LevelParams::new(1.0 / 8.0, 0.2);
            for scheme in Scheme::ALL {
                if scheme == Scheme::Idealised && !levy.measure.remainder_is_exact(0.05) {
                    continue;
                }
                let stream = RandomStream::new(11).derive(3, 7);
                let alone = simulate_level(&model, levy, &fine, scheme, &stream).unwrap();
                let pair =
                    simulate_coupled(&model, levy, &PairParams { coarse, fine }, scheme, &stream)
                        .unwrap();
                assert_eq!(alone.post, pair.fine.post, "{scheme}");
                assert_eq!(alone.pre, pair.fine.pre, "{scheme}");
            }
        }
    }

    #[test]
    fn idealised_rejects_infinite_activity() {
        let (model, _) = gbm();
        let levy = LevyTriplet::new(
            0.0,
            0.2,
            LevyMeasure::StableLike {
                c: 0.1,
                alpha: 0.5,
                asymmetry: 0.0,
            },
        )
        .unwrap();
        let r = simulate_level(
            &model,
            &levy,
            &LevelParams::new(0.25, 0.1),
            Scheme::Idealised,
            &RandomStream::new(0),
        );
        assert!(matches!(r, Err(Error::SchemeUnsupported { .. })));
    }

    #[test]
    fn idealised_coarse_sees_the_same_driver() {
        // With a(x) = 1 both levels equal x0 + Y at their update times.
        let model = SdeModel::new(Coefficient::Constant { c: 1.0 }, 0.0, 1.0).unwrap();
        let levy = LevyTriplet::new(
            0.3,
            0.2,
            LevyMeasure::CompoundPoisson {
                rate: 6.0,
                jumps: JumpDistribution::Normal { mean: 0.1, sd: 0.3 },
            },
        )
        .unwrap();
        let params = PairParams {
            coarse: LevelParams::new(0.25, 0.4),
            fine: LevelParams::new(0.125, 0.2),
        };
        let p = simulate_coupled(
            &model,
            &levy,
            &params,
            Scheme::Idealised,
            &RandomStream::new(9),
        )
        .unwrap();
        for (c, t) in p.coarse.times.iter().enumerate() {
            let f = p.fine.times.iter().position(|s| s == t).unwrap();
            assert!((p.coarse.post[c] - p.fine.post[f]).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_coarse_remainder_consistent_with_fine() {
        // a(x) = 1: the coarse direct path must equal x0 + Y at coarse
        // auxiliary times, where Y = Y^{h_c} + M^{h_c} = Y^{h_f} + M^{h_f}.
        let model = SdeModel::new(Coefficient::Constant { c: 1.0 }, 0.0, 1.0).unwrap();
        let levy = LevyTriplet::new(
            0.1,
            0.2,
            LevyMeasure::StableLike {
                c: 0.4,
                alpha: 0.9,
                asymmetry: 0.5,
            },
        )
        .unwrap();
        let params = PairParams {
            coarse: LevelParams::new(0.25, 0.3),
            fine: LevelParams::new(0.125, 0.05),
        };
        let p = simulate_coupled(
            &model,
            &levy,
            &params,
            Scheme::DirectConstant,
            &RandomStream::new(10),
        )
        .unwrap();
        for (c, t) in p.coarse.times.iter().enumerate() {
            let tag = p.timeline.tags[p.timeline.times.iter().position(|s| s == t).unwrap()];
            if tag.contains(Tags::AUX_COARSE) {
                let f = p.fine.times.iter().position(|s| s == t).unwrap();
                assert!((p.coarse.post[c] - p.fine.post[f]).abs() < 1e-12, "t = {t}");
            }
        }
        assert!(p.gaussian_fallback);
    }

    #[test]
    fn replay_marginal_conventions() {
        let levy = cp_driver(4.0, 0.2);
        let model = SdeModel::new(Coefficient::Linear, 1.0, 1.0).unwrap();
        let params = PairParams {
            coarse: LevelParams::new(0.5, 0.1),
            fine: LevelParams::new(0.25, 0.1),
        };
        let p = simulate_coupled(
            &model,
            &levy,
            &params,
            Scheme::ShotConstant,
            &RandomStream::new(12),
        )
        .unwrap();
        assert_eq!(replay_marginal(&p, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(
            replay_marginal(&p, 1.0).unwrap(),
            (p.coarse.terminal(), p.fine.terminal())
        );
        let (_, f) = replay_marginal(&p, 0.3).unwrap();
        let idx = p.fine.times.partition_point(|t| *t <= 0.3) - 1;
        assert_eq!(f, p.fine.post[idx]);
        assert!(replay_marginal(&p, 1.5).is_err());
        assert!(replay_marginal(&p, -0.1).is_err());
    }

    #[test]
    fn skeleton_dump_has_one_row_per_update() {
        let levy = cp_driver(4.0, 0.2);
        let model = SdeModel::new(Coefficient::Linear, 1.0, 1.0).unwrap();
        let params = PairParams {
            coarse: LevelParams::new(0.5, 0.1),
            fine: LevelParams::new(0.25, 0.1),
        };
        let p = simulate_coupled(
            &model,
            &levy,
            &params,
            Scheme::ShotConstant,
            &RandomStream::new(13),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_skeleton_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), p.timeline.len() + 1);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("0,fine_grid|coarse_grid,1,1,1,1"));
    }
}
