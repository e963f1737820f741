use levymlmc::engine::{
    level_profile, make_plan, make_schedule, run_estimator, validate_schedule, HStrategy,
    LevelSchedule, LevelStats, ReplicationPlan, ScheduleDiagnostics, ScheduleSpec,
};
use levymlmc::harness::{
    reference_value, run_clt_experiment, variance_decay_regression, CltConfig, CltExperiment,
    TestReport,
};
use levymlmc::limit::oracle_samples;
use levymlmc::rng::tags;
use levymlmc::schemes::{simulate_coupled, write_skeleton_csv};
use levymlmc::tolerances;
use levymlmc::tuning::optimal_m;
use levymlmc::{
    rho_sq_oracle, Error, MlmcEstimate, OracleMethod, OracleOptions, RandomStream,
    VarianceOracleResult,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{self, num, Artifact, Header};

pub type CliResult<T> = Result<T, CliError>;

fn header(cfg: &RunConfig) -> Header {
    Header {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

fn report(
    name: impl Into<String>,
    value: f64,
    pass: bool,
    tolerance: f64,
    n: usize,
    cfg: &RunConfig,
) -> TestReport {
    TestReport {
        name: name.into(),
        value,
        p_value: None,
        pass,
        tolerance,
        sample_size: n,
        seed: Some(cfg.seed),
        note: None,
    }
}

/// Schedule reaching at least `depth`, extending `k_max` where the strategy
/// allows it.
pub fn schedule_for_depth(cfg: &RunConfig, depth: usize) -> CliResult<LevelSchedule> {
    let mut spec: ScheduleSpec = cfg.schedule.clone();
    if depth > spec.k_max {
        if let HStrategy::Explicit { .. } = spec.strategy {
            return Err(Error::Config(format!(
                "explicit schedule has k_max {} but depth {depth} is required",
                spec.k_max
            ))
            .into());
        }
        spec.k_max = depth;
    }
    Ok(make_schedule(&cfg.levy, cfg.model.horizon, &spec)?)
}

pub struct EstimateRun {
    pub schedule: LevelSchedule,
    pub plan: ReplicationPlan,
    pub estimate: MlmcEstimate,
}

fn plan_for(cfg: &RunConfig) -> CliResult<ReplicationPlan> {
    let delta = cfg
        .plan
        .delta
        .ok_or_else(|| CliError::Config("plan.delta is required".into()))?;
    Ok(make_plan(
        delta,
        cfg.functional.alpha(),
        cfg.schedule.m,
        cfg.model.horizon,
    )?)
}

pub fn cmd_estimate(cfg: &RunConfig) -> CliResult<EstimateRun> {
    cfg.model.validate()?;
    cfg.levy.validate()?;
    let plan = plan_for(cfg)?;
    let schedule = schedule_for_depth(cfg, plan.depth)?;
    let estimate = run_estimator(
        &cfg.model,
        &cfg.levy,
        &cfg.functional,
        &schedule,
        &plan,
        cfg.scheme,
        cfg.seed,
    )?;
    Ok(EstimateRun {
        schedule,
        plan,
        estimate,
    })
}

fn level_rows(levels: &[LevelStats], beta: f64) -> Vec<Vec<String>> {
    levels
        .iter()
        .map(|l| {
            vec![
                l.k.to_string(),
                num(l.eps),
                num(l.h),
                l.count().to_string(),
                num(l.mean()),
                num(l.variance()),
                num(l.cost(beta)),
            ]
        })
        .collect()
}

const LEVEL_COLUMNS: [&str; 7] = [
    "k",
    "eps_k",
    "h_k",
    "n_k",
    "mean_diff",
    "var_diff",
    "cost_units",
];

pub fn render_estimate(cfg: &RunConfig, run: &EstimateRun) -> Vec<Artifact> {
    let h = header(cfg);
    let e = &run.estimate;
    let summary = vec![vec![
        num(e.value),
        num(e.std_error),
        num(e.delta),
        e.depth.to_string(),
        num(e.total_cost(cfg.beta)),
        e.scheme.name().to_string(),
        e.seed.to_string(),
    ]];
    let mut out = vec![
        output::csv(
            "summary.csv",
            &h,
            &[
                "value",
                "stderr",
                "delta",
                "L",
                "total_cost",
                "scheme",
                "seed",
            ],
            &summary,
        ),
        output::csv(
            "levels.csv",
            &h,
            &LEVEL_COLUMNS,
            &level_rows(&e.levels, cfg.beta),
        ),
    ];
    if e.gaussian_fallback {
        let mut r = report("gaussian_fallback", 1.0, true, 0.0, 0, cfg);
        r.note = Some("small jumps were simulated with the moment-matched Gaussian".into());
        out.push(output::reports(&h, &[r]));
    }
    out
}

/// Coupled pair `k` of replication 0, as used by the estimator.
pub fn dump_skeleton(cfg: &RunConfig, run: &EstimateRun, k: usize) -> CliResult<Artifact> {
    if k == 0 || k > run.plan.depth {
        return Err(CliError::Config(format!(
            "--dump-skeleton level must lie in 1..={}",
            run.plan.depth
        )));
    }
    let stream = RandomStream::new(cfg.seed)
        .child(tags::ESTIMATE)
        .derive(k as u64, 0);
    let pair = simulate_coupled(
        &cfg.model,
        &cfg.levy,
        &run.schedule.pair(k),
        cfg.scheme,
        &stream,
    )?;
    let mut buf = header(cfg).line().into_bytes();
    write_skeleton_csv(&pair, &mut buf)?;
    Ok(Artifact {
        name: format!("skeleton_k{k}.csv"),
        contents: String::from_utf8(buf).expect("utf-8 csv"),
    })
}

pub fn cmd_levels(cfg: &RunConfig) -> CliResult<Vec<LevelStats>> {
    let schedule = make_schedule(&cfg.levy, cfg.model.horizon, &cfg.schedule)?;
    Ok(level_profile(
        &cfg.model,
        &cfg.levy,
        &cfg.functional,
        &schedule,
        cfg.scheme,
        cfg.levels.n_pilot,
        cfg.seed,
    )?)
}

pub fn variance_decay_report(cfg: &RunConfig, stats: &[LevelStats]) -> TestReport {
    let pairs: Vec<LevelStats> = stats.iter().filter(|s| s.k >= 2).cloned().collect();
    let n = pairs.iter().map(|s| s.count() as usize).sum();
    match variance_decay_regression(&pairs, cfg.schedule.m) {
        Ok(r) => {
            let mut t = report(
                "variance_decay_slope",
                r.fit.slope,
                r.pass,
                tolerances::VARIANCE_R2_MIN,
                n,
                cfg,
            );
            t.note = Some(format!(
                "r_squared={} slope_band=[{}, {}] levels={:?}",
                r.fit.r_squared,
                tolerances::VARIANCE_SLOPE.0,
                tolerances::VARIANCE_SLOPE.1,
                r.levels
            ));
            t
        }
        Err(e) => {
            let mut t = report(
                "variance_decay_slope",
                f64::NAN,
                false,
                tolerances::VARIANCE_R2_MIN,
                n,
                cfg,
            );
            t.note = Some(e.to_string());
            t
        }
    }
}

pub fn render_levels(cfg: &RunConfig, stats: &[LevelStats]) -> Vec<Artifact> {
    let h = header(cfg);
    vec![
        output::csv(
            "levels.csv",
            &h,
            &LEVEL_COLUMNS,
            &level_rows(stats, cfg.beta),
        ),
        output::reports(&h, &[variance_decay_report(cfg, stats)]),
    ]
}

fn oracle_options(cfg: &RunConfig) -> CliResult<OracleOptions> {
    let r = &cfg.rho;
    let needs_schedule = r.methods.contains(&OracleMethod::LevelEmpirical);
    let schedule = if needs_schedule {
        Some(schedule_for_depth(cfg, r.level + 1)?)
    } else {
        None
    };
    Ok(OracleOptions {
        theta: cfg.schedule.theta,
        m: cfg.schedule.m,
        n_paths: r.n_paths,
        eps_sim: r.eps_sim,
        h_sim: r.h_sim,
        level: r.level,
        level_scheme: r.level_scheme.unwrap_or(cfg.scheme),
        schedule,
    })
}

pub fn cmd_rho(cfg: &RunConfig) -> CliResult<Vec<VarianceOracleResult>> {
    if cfg.rho.methods.is_empty() {
        return Err(CliError::Config("rho.methods is empty".into()));
    }
    let opts = oracle_options(cfg)?;
    cfg.rho
        .methods
        .iter()
        .map(|m| {
            Ok(rho_sq_oracle(
                &cfg.model,
                &cfg.levy,
                &cfg.functional,
                *m,
                &opts,
                cfg.seed,
            )?)
        })
        .collect()
}

/// Raw per-path oracle values, e.g. for distributional comparisons.
pub fn rho_samples(cfg: &RunConfig, method: OracleMethod) -> CliResult<Vec<f64>> {
    let opts = oracle_options(cfg)?;
    Ok(oracle_samples(
        &cfg.model,
        &cfg.levy,
        &cfg.functional,
        method,
        &opts,
        cfg.seed,
    )?)
}

pub fn concordance_reports(cfg: &RunConfig, results: &[VarianceOracleResult]) -> Vec<TestReport> {
    let mut out = Vec::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            let se = a.std_error.hypot(b.std_error);
            let gap = (a.rho_sq - b.rho_sq).abs();
            let sigmas = if se > 0.0 {
                gap / se
            } else if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let mut t = report(
                format!("oracle_concordance {}~{}", a.method.name(), b.method.name()),
                sigmas,
                sigmas <= tolerances::ORACLE_SIGMAS,
                tolerances::ORACLE_SIGMAS,
                (a.n_paths + b.n_paths) as usize,
                cfg,
            );
            t.note = Some(format!(
                "{} vs {} (combined stderr {se})",
                a.rho_sq, b.rho_sq
            ));
            out.push(t);
        }
    }
    for r in results {
        if !r.warnings.is_empty() {
            let mut t = report(
                format!("oracle_warnings {}", r.method.name()),
                r.warnings.len() as f64,
                true,
                0.0,
                r.n_paths as usize,
                cfg,
            );
            t.note = Some(r.warnings.join("; "));
            out.push(t);
        }
    }
    out
}

pub fn render_rho(cfg: &RunConfig, results: &[VarianceOracleResult]) -> Vec<Artifact> {
    let h = header(cfg);
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                num(r.rho_sq),
                num(r.std_error),
                r.n_paths.to_string(),
                (r.excluded_singular + r.excluded_nondifferentiable).to_string(),
                num(r.h_sim),
                num(r.eps_sim),
            ]
        })
        .collect();
    vec![
        output::csv(
            "oracle.csv",
            &h,
            &[
                "method",
                "rho_sq",
                "stderr",
                "n_paths",
                "excluded_paths",
                "h_sim",
                "eps_sim",
            ],
            &rows,
        ),
        output::reports(&h, &concordance_reports(cfg, results)),
    ]
}

pub struct CltRun {
    pub experiment: CltExperiment,
    /// `ρ²` the residual variance is compared with, if any.
    pub rho_sq: Option<f64>,
}

pub fn clt_config(cfg: &RunConfig) -> CltConfig {
    CltConfig {
        model: cfg.model.clone(),
        levy: cfg.levy.clone(),
        functional: cfg.functional.clone(),
        schedule: cfg.schedule.clone(),
        scheme: cfg.scheme,
        deltas: cfg.clt.deltas.clone(),
        replications: cfg.clt.replications,
        reference: cfg.clt.reference,
        seed: cfg.seed,
    }
}

pub fn cmd_clt(cfg: &RunConfig) -> CliResult<CltRun> {
    let mut c = clt_config(cfg);
    if c.reference.is_none() {
        if let Some(d) = cfg.clt.reference_delta {
            c.reference = Some(reference_value(&c, d)?.0);
        }
    }
    let rho_sq = match (cfg.clt.rho_sq, cfg.clt.oracle) {
        (Some(r), _) => Some(r),
        (None, Some(method)) => {
            let opts = oracle_options(&RunConfig {
                rho: crate::config::RhoSection {
                    methods: vec![method],
                    ..cfg.rho.clone()
                },
                ..cfg.clone()
            })?;
            Some(
                rho_sq_oracle(
                    &cfg.model,
                    &cfg.levy,
                    &cfg.functional,
                    method,
                    &opts,
                    cfg.seed,
                )?
                .rho_sq,
            )
        }
        (None, None) => None,
    };
    Ok(CltRun {
        experiment: run_clt_experiment(&c)?,
        rho_sq,
    })
}

pub fn clt_reports(cfg: &RunConfig, run: &CltRun) -> Vec<TestReport> {
    let mut out = Vec::new();
    for s in &run.experiment.summaries {
        let mut n = s
            .normality
            .to_report(&format!("normality delta={}", s.delta), Some(cfg.seed));
        n.sample_size = s.replications;
        out.push(n);
        let mut m = report(
            format!("mean_z delta={}", s.delta),
            s.mean_z,
            true,
            0.0,
            s.replications,
            cfg,
        );
        m.note = Some(format!("depth={}", s.depth));
        out.push(m);
        match run.rho_sq {
            Some(rho) => {
                let rel = s.var_z / rho - 1.0;
                let mut t = report(
                    format!("var_z delta={}", s.delta),
                    s.var_z,
                    rel.abs() <= tolerances::CLT_VARIANCE_REL,
                    tolerances::CLT_VARIANCE_REL,
                    s.replications,
                    cfg,
                );
                t.note = Some(format!(
                    "rho_sq={rho} relative_gap={rel} var_z_stderr={}",
                    s.var_z_std_error
                ));
                out.push(t);
            }
            None => {
                let mut t = report(
                    format!("var_z delta={}", s.delta),
                    s.var_z,
                    true,
                    0.0,
                    s.replications,
                    cfg,
                );
                t.note = Some(format!(
                    "no rho_sq to compare; var_z_stderr={}",
                    s.var_z_std_error
                ));
                out.push(t);
            }
        }
    }
    let mut by_delta: Vec<_> = run.experiment.summaries.iter().collect();
    by_delta.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    if by_delta.len() >= 2 {
        let (a, b) = (by_delta[0], by_delta[1]);
        let rel = (a.var_z / b.var_z - 1.0).abs();
        let mut t = report(
            "var_z_consistency",
            rel,
            rel < tolerances::CLT_DELTA_CONSISTENCY,
            tolerances::CLT_DELTA_CONSISTENCY,
            a.replications + b.replications,
            cfg,
        );
        t.note = Some(format!("deltas {} and {}", a.delta, b.delta));
        out.push(t);
    }
    out
}

pub fn render_clt(cfg: &RunConfig, run: &CltRun) -> Vec<Artifact> {
    let h = header(cfg);
    let rows: Vec<Vec<String>> = run
        .experiment
        .rows
        .iter()
        .map(|r| vec![num(r.delta), r.rep.to_string(), num(r.estimate), num(r.z)])
        .collect();
    vec![
        output::csv("clt.csv", &h, &["delta", "rep", "estimate", "z"], &rows),
        output::reports(&h, &clt_reports(cfg, run)),
    ]
}

/// `(M, g(M, β))` pairs.
pub type Curve = Vec<(u32, f64)>;

pub struct TuneRun {
    /// `(β, recommended M, curve)`.
    pub curves: Vec<(f64, u32, Curve)>,
}

pub fn cmd_tune(cfg: &RunConfig) -> CliResult<TuneRun> {
    let t = &cfg.tune;
    if t.betas.is_empty() {
        return Err(CliError::Config("tune.betas is empty".into()));
    }
    let curves = t
        .betas
        .iter()
        .map(|b| {
            let (m, curve) = optimal_m(*b, t.m_min..=t.m_max)?;
            Ok((*b, m, curve))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TuneRun { curves })
}

pub fn render_tune(cfg: &RunConfig, run: &TuneRun) -> Vec<Artifact> {
    let h = header(cfg);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (beta, m_star, curve) in &run.curves {
        rows.extend(
            curve
                .iter()
                .map(|(m, g)| vec![m.to_string(), num(*beta), num(*g)]),
        );
        let min = curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        reports.push(report(
            format!("optimal_m beta={beta}"),
            *m_star as f64,
            true,
            0.0,
            curve.len(),
            cfg,
        ));
        if let Some((_, g6)) = curve.iter().find(|c| c.0 == 6) {
            let ratio = g6 / min;
            reports.push(report(
                format!("g6_over_min beta={beta}"),
                ratio,
                ratio <= tolerances::M_NEAR_OPTIMAL_RATIO,
                tolerances::M_NEAR_OPTIMAL_RATIO,
                curve.len(),
                cfg,
            ));
        }
    }
    vec![
        output::csv("tune.csv", &h, &["M", "beta", "g"], &rows),
        output::reports(&h, &reports),
    ]
}

pub fn cmd_validate_schedule(cfg: &RunConfig) -> CliResult<ScheduleDiagnostics> {
    let schedule = make_schedule(&cfg.levy, cfg.model.horizon, &cfg.schedule)?;
    Ok(validate_schedule(&schedule, &cfg.levy)?)
}

pub fn render_validate_schedule(cfg: &RunConfig, d: &ScheduleDiagnostics) -> Vec<Artifact> {
    let h = header(cfg);
    let rows: Vec<Vec<String>> = d
        .rows
        .iter()
        .map(|r| {
            [
                r.eps, r.h, r.eps_aux, r.r2, r.r_h, r.r3a, r.r3b, r.r4, r.rdrift,
            ]
            .iter()
            .map(|v| num(*v))
            .fold(vec![r.k.to_string()], |mut acc, v| {
                acc.push(v);
                acc
            })
        })
        .collect();
    let mut clean = report(
        "schedule_clean",
        d.flagged.len() as f64,
        d.is_clean(),
        0.0,
        d.rows.len(),
        cfg,
    );
    if !d.flagged.is_empty() {
        clean.note = Some(format!("flagged: {}", d.flagged.join(", ")));
    }
    vec![
        output::csv(
            "schedule.csv",
            &h,
            &[
                "k",
                "eps_k",
                "h_k",
                "eps_aux_k",
                "r2",
                "r_h",
                "r3a",
                "r3b",
                "r4",
                "rdrift",
            ],
            &rows,
        ),
        output::reports(&h, &[clean]),
    ]
}
