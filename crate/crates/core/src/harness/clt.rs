use rayon::prelude::*;
use serde::Serialize;

use super::normality::{normality_test, NormalityReport};
use crate::engine::{
    make_plan, make_schedule, run_estimator_with_stream, Accumulator, HStrategy, ScheduleSpec,
};
use crate::error::{config, Error, Result};
use crate::functionals::FunctionalSpec;
use crate::levy::LevyTriplet;
use crate::rng::{tags, RandomStream};
use crate::schemes::Scheme;
use crate::sde::SdeModel;
use crate::tolerances;

/// Repeated independent estimator runs over a grid of target accuracies.
#[derive(Clone, Debug)]
pub struct CltConfig {
    pub model: SdeModel,
    pub levy: LevyTriplet,
    pub functional: FunctionalSpec,
    /// `k_max` is raised to the deepest plan if needed.
    pub schedule: ScheduleSpec,
    pub scheme: Scheme,
    pub deltas: Vec<f64>,
    pub replications: usize,
    /// `E[F(X)]`; required for the normalised errors.
    pub reference: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CltRow {
    pub delta: f64,
    pub rep: usize,
    pub estimate: f64,
    /// `(estimate - reference) / δ`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltSummary {
    pub delta: f64,
    pub depth: usize,
    pub replications: usize,
    pub mean_z: f64,
    pub var_z: f64,
    /// Standard error of `var_z` from the fourth moment of `z`.
    pub var_z_std_error: f64,
    pub normality: NormalityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltExperiment {
    pub reference: f64,
    pub rows: Vec<CltRow>,
    pub summaries: Vec<CltSummary>,
}

fn extended_spec(cfg: &CltConfig, depth: usize) -> Result<ScheduleSpec> {
    let mut spec = cfg.schedule.clone();
    if depth > spec.k_max {
        if let HStrategy::Explicit { .. } = spec.strategy {
            return Err(config(format!(
                "explicit schedule has k_max {} but the plan needs depth {depth}",
                spec.k_max
            )));
        }
        spec.k_max = depth;
    }
    Ok(spec)
}

fn summarise(delta: f64, depth: usize, z: &[f64]) -> Result<CltSummary> {
    let acc = Accumulator::from_slice(z);
    let var_z = acc.variance();
    let sq: Vec<f64> = z.iter().map(|v| (v - acc.mean).powi(2)).collect();
    Ok(CltSummary {
        delta,
        depth,
        replications: z.len(),
        mean_z: acc.mean,
        var_z,
        var_z_std_error: Accumulator::from_slice(&sq).std_error(),
        normality: normality_test(z)?,
    })
}

/// Runs `replications` estimators per `δ`, replication `(d, r)` driven by
/// `child(CLT).derive(d, r)`.
pub fn run_clt_experiment(cfg: &CltConfig) -> Result<CltExperiment> {
    if cfg.replications < tolerances::CLT_MIN_REPLICATIONS {
        return Err(Error::InsufficientData(format!(
            "at least {} replications are required, got {}",
            tolerances::CLT_MIN_REPLICATIONS,
            cfg.replications
        )));
    }
    let reference = cfg.reference.ok_or(Error::MissingReference)?;
    if cfg.deltas.is_empty() {
        return Err(config("no target accuracies given"));
    }
    let alpha = cfg.functional.alpha();
    let plans = cfg
        .deltas
        .iter()
        .map(|d| make_plan(*d, alpha, cfg.schedule.m, cfg.model.horizon))
        .collect::<Result<Vec<_>>>()?;
    let depth = plans.iter().map(|p| p.depth).max().unwrap_or(1);
    let schedule = make_schedule(&cfg.levy, cfg.model.horizon, &extended_spec(cfg, depth)?)?;
    let root = RandomStream::new(cfg.seed).child(tags::CLT);
    let mut rows = Vec::with_capacity(cfg.deltas.len() * cfg.replications);
    let mut summaries = Vec::with_capacity(cfg.deltas.len());
    for (d, plan) in plans.iter().enumerate() {
        let estimates = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let stream = root.derive(d as u64, r as u64);
                run_estimator_with_stream(
                    &cfg.model,
                    &cfg.levy,
                    &cfg.functional,
                    &schedule,
                    plan,
                    cfg.scheme,
                    &stream,
                )
                .map(|e| e.value)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut z = Vec::with_capacity(cfg.replications);
        for (r, est) in estimates.into_iter().enumerate() {
            let zr = (est - reference) / plan.delta;
            z.push(zr);
            rows.push(CltRow {
                delta: plan.delta,
                rep: r,
                estimate: est,
                z: zr,
            });
        }
        summaries.push(summarise(plan.delta, plan.depth, &z)?);
    }
    Ok(CltExperiment {
        reference,
        rows,
        summaries,
    })
}

/// Single high-accuracy estimate of `E[F(X)]` at target accuracy `delta`,
/// for use as a reference when no closed form is available.
pub fn reference_value(cfg: &CltConfig, delta: f64) -> Result<(f64, f64)> {
    let plan = make_plan(
        delta,
        cfg.functional.alpha(),
        cfg.schedule.m,
        cfg.model.horizon,
    )?;
    let schedule = make_schedule(
        &cfg.levy,
        cfg.model.horizon,
        &extended_spec(cfg, plan.depth)?,
    )?;
    let stream = RandomStream::new(cfg.seed).child(tags::CLT).child(u64::MAX);
    let est = run_estimator_with_stream(
        &cfg.model,
        &cfg.levy,
        &cfg.functional,
        &schedule,
        &plan,
        cfg.scheme,
        &stream,
    )?;
    Ok((est.value, est.std_error))
}
