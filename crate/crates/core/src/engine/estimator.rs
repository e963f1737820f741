use rayon::prelude::*;
use serde::Serialize;

use super::plan::ReplicationPlan;
use super::schedule::LevelSchedule;
use super::stats::{Accumulator, LevelStats};
use crate::error::{config, Error, Result};
use crate::functionals::{eval_functional, FunctionalSpec};
use crate::levy::LevyTriplet;
use crate::rng::{tags, RandomStream};
use crate::schemes::{simulate_coupled, simulate_level, LevelParams, Scheme};
use crate::sde::SdeModel;

/// Replications per work unit. Results are merged in chunk order, so the
/// output does not depend on how chunks are spread over threads.
const CHUNK: u64 = 512;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MlmcEstimate {
    pub value: f64,
    pub std_error: f64,
    pub delta: f64,
    pub depth: usize,
    pub levels: Vec<LevelStats>,
    pub scheme: Scheme,
    pub seed: u64,
    /// Small jumps were simulated with the Gaussian fallback.
    pub gaussian_fallback: bool,
}

impl MlmcEstimate {
    pub fn total_cost(&self, beta: f64) -> f64 {
        self.levels.iter().map(|l| l.cost(beta)).sum()
    }
}

struct Problem<'a> {
    model: &'a SdeModel,
    levy: &'a LevyTriplet,
    functional: &'a FunctionalSpec,
    schedule: &'a LevelSchedule,
    scheme: Scheme,
}

impl Problem<'_> {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.levy.validate()?;
        self.functional.validate(self.model.horizon)?;
        if (self.schedule.horizon - self.model.horizon).abs() > 1e-12 * self.model.horizon {
            return Err(config("schedule horizon differs from the model horizon"));
        }
        Ok(())
    }

    fn sample_chunk(
        &self,
        k: usize,
        range: std::ops::Range<u64>,
        stream: &RandomStream,
    ) -> Result<LevelStats> {
        let level = self.schedule.levels[k];
        let mut st = LevelStats::new(k, level.eps, level.h);
        for i in range {
            let s = stream.derive(k as u64, i);
            if k == 1 {
                let path = simulate_level(self.model, self.levy, &level, self.scheme, &s)?;
                let f = eval_functional(self.functional, &path)?;
                st.diff.push(f);
                st.fine.push(f);
                st.fine_steps += path.intervals() as u64;
            } else {
                let pair = simulate_coupled(
                    self.model,
                    self.levy,
                    &self.schedule.pair(k),
                    self.scheme,
                    &s,
                )?;
                let ff = eval_functional(self.functional, &pair.fine)?;
                let fc = eval_functional(self.functional, &pair.coarse)?;
                st.diff.push(ff - fc);
                st.fine.push(ff);
                st.fine_steps += pair.fine.intervals() as u64;
                st.coarse_steps += pair.coarse.intervals() as u64;
            }
        }
        Ok(st)
    }

    fn sample_level(&self, k: usize, n: u64, stream: &RandomStream) -> Result<LevelStats> {
        let chunks = n.div_ceil(CHUNK);
        let parts = (0..chunks)
            .into_par_iter()
            .map(|c| self.sample_chunk(k, c * CHUNK..((c + 1) * CHUNK).min(n), stream))
            .collect::<Result<Vec<_>>>()?;
        let level = self.schedule.levels[k];
        let mut total = LevelStats::new(k, level.eps, level.h);
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}

/// Multilevel estimate with pair `(k, i)` driven by `stream.derive(k, i)`.
pub fn run_estimator_with_stream(
    model: &SdeModel,
    levy: &LevyTriplet,
    functional: &FunctionalSpec,
    schedule: &LevelSchedule,
    plan: &ReplicationPlan,
    scheme: Scheme,
    stream: &RandomStream,
) -> Result<MlmcEstimate> {
    let problem = Problem {
        model,
        levy,
        functional,
        schedule,
        scheme,
    };
    problem.validate()?;
    if plan.depth > schedule.k_max() {
        return Err(config(format!(
            "plan depth {} exceeds the schedule's k_max {}",
            plan.depth,
            schedule.k_max()
        )));
    }
    if plan.m != schedule.m {
        return Err(config("plan and schedule use different M"));
    }
    let mut levels = Vec::with_capacity(plan.depth);
    for k in 1..=plan.depth {
        levels.push(problem.sample_level(k, plan.replications(k), stream)?);
    }
    let value = levels.iter().map(|l| l.mean()).sum();
    let var: f64 = levels.iter().map(|l| l.variance() / l.count() as f64).sum();
    Ok(MlmcEstimate {
        value,
        std_error: var.sqrt(),
        delta: plan.delta,
        depth: plan.depth,
        levels,
        scheme,
        seed: stream.seed(),
        gaussian_fallback: scheme.uses_gaussian_fallback(levy, schedule.levels[plan.depth].h),
    })
}

pub fn run_estimator(
    model: &SdeModel,
    levy: &LevyTriplet,
    functional: &FunctionalSpec,
    schedule: &LevelSchedule,
    plan: &ReplicationPlan,
    scheme: Scheme,
    seed: u64,
) -> Result<MlmcEstimate> {
    let stream = RandomStream::new(seed).child(tags::ESTIMATE);
    run_estimator_with_stream(model, levy, functional, schedule, plan, scheme, &stream)
}

/// Pilot statistics for every level `1..=k_max` of the schedule.
pub fn level_profile(
    model: &SdeModel,
    levy: &LevyTriplet,
    functional: &FunctionalSpec,
    schedule: &LevelSchedule,
    scheme: Scheme,
    n_pilot: u64,
    seed: u64,
) -> Result<Vec<LevelStats>> {
    if n_pilot < 2 {
        return Err(Error::InsufficientData(format!(
            "n_pilot must be >= 2, got {n_pilot}"
        )));
    }
    let problem = Problem {
        model,
        levy,
        functional,
        schedule,
        scheme,
    };
    problem.validate()?;
    let stream = RandomStream::new(seed).child(tags::PILOT);
    (1..=schedule.k_max())
        .map(|k| problem.sample_level(k, n_pilot, &stream))
        .collect()
}

/// Plain Monte Carlo of `F` at a single level.
pub fn plain_monte_carlo(
    model: &SdeModel,
    levy: &LevyTriplet,
    functional: &FunctionalSpec,
    level: &LevelParams,
    scheme: Scheme,
    n: u64,
    stream: &RandomStream,
) -> Result<Accumulator> {
    functional.validate(model.horizon)?;
    let chunks = n.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let path = simulate_level(model, levy, level, scheme, &stream.derive(0, i))?;
                acc.push(eval_functional(functional, &path)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Accumulator::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}
