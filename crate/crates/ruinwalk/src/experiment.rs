//! Experiment orchestration: simulate every level of the grid, compare the
//! scaled statistics with their limit laws and persist the artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ruinwalk_core::dists::{LimitLawG, ScaleFunction, TailModel};
use ruinwalk_core::exceed::{decomposition_stats, quadruple, ExceedanceRecord};
use ruinwalk_core::limits::{
    bg_constants, growth_bound_check, ks_distance, ks_two_sample, quadruple_joint_tail,
    trend_check, EmpiricalDistribution, GrowthReport, LimitLaw, TrendVerdict, WStarBG,
};
use ruinwalk_core::math::ls_slope;
use ruinwalk_core::mc::{ConditionalSample, EstimatorResult, RunConfig, Sampler};
use ruinwalk_core::models::{
    check_conditions, ConditionsReport, Granularity, ModelKind, Phi, ProcessModel,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{conditional_on, Pool};
use crate::io::{self, EstimateRow, KsRow, PlotRow};
use crate::spec::{Check, ExperimentSpec, Statistic, Verdict};

/// Quantile levels of the plot-data files.
const PLOT_LEVELS: [f64; 19] = [
    0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85,
    0.9, 0.95,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule.
    pub rule: String,
    pub pass: bool,
    /// Primary criteria decide the verdict; the others must always pass.
    pub primary: bool,
}

impl Criterion {
    fn new(name: &str, value: f64, rule: String, pass: bool, primary: bool) -> Self {
        Self {
            name: name.to_string(),
            value,
            rule,
            pass: pass && !value.is_nan(),
            primary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub hits: usize,
    pub paths_run: u64,
    pub exhausted: bool,
    pub ess: f64,
    pub p_hat: f64,
    pub stderr: f64,
}

impl From<&ConditionalSample> for SampleInfo {
    fn from(s: &ConditionalSample) -> Self {
        Self {
            hits: s.records.len(),
            paths_run: s.paths_run,
            exhausted: s.exhausted,
            ess: s.ess,
            p_hat: s.p_hat,
            stderr: s.stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimatorResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleInfo>,
    /// Named statistics of the conditional sample; reproducible from the
    /// record CSV via [`level_stats`].
    #[serde(default)]
    pub stats: BTreeMap<String, f64>,
}

/// Deterministic experiment summary (no timings, no worker count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub check: String,
    pub seed: u64,
    pub levels: Vec<Level>,
    #[serde(default)]
    pub ks_series: Vec<KsRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend: Option<TrendVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthReport>,
    pub criteria: Vec<Criterion>,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub as_expected: bool,
}

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    /// Hit records per level index.
    pub records: Vec<(usize, Vec<ExceedanceRecord>)>,
    pub estimates: Vec<EstimateRow>,
    pub plot: Vec<PlotRow>,
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Summary,
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Simulation counterpart of a model. A modulated walk described cycle by
/// cycle has the same path as its step-by-step version, and only the
/// latter supports big-jump proposals.
pub fn simulation_model(model: &ProcessModel) -> Result<ProcessModel> {
    match model.kind() {
        ModelKind::ModulatedWalk(m) if m.unit == Granularity::Cycle => {
            let mut m = m.clone();
            m.unit = Granularity::Step;
            Ok(ProcessModel::new(ModelKind::ModulatedWalk(m))?)
        }
        _ => Ok(model.clone()),
    }
}

/// Limit-law context of a model.
struct Ctx {
    model: ProcessModel,
    scale: ScaleFunction,
    g: LimitLawG,
}

impl Ctx {
    fn new(model: &ProcessModel) -> Result<Self> {
        let model = simulation_model(model)?;
        let r = model.theoretical_params().reference;
        Ok(Self {
            scale: r.scale_function()?,
            g: r.limit_law()?,
            model,
        })
    }

    fn e(&self, x: f64) -> f64 {
        self.scale.eval(x)
    }

    fn a(&self) -> f64 {
        self.model.theoretical_params().a
    }

    fn tau_law(&self) -> LimitLaw {
        let p = self.model.theoretical_params();
        LimitLaw::ScaledG {
            scale: p.mu / p.a,
            g: self.g.clone(),
        }
    }
}

fn wstats(
    records: &[ExceedanceRecord],
    f: impl Fn(&ExceedanceRecord) -> Option<f64>,
) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .filter_map(|r| f(r).filter(|v| v.is_finite()).map(|v| (v, r.weight)))
        .unzip()
}

fn empirical(vw: &(Vec<f64>, Vec<f64>)) -> Result<EmpiricalDistribution> {
    Ok(EmpiricalDistribution::new(&vw.0, Some(&vw.1))?)
}

fn wmean(vw: &(Vec<f64>, Vec<f64>)) -> f64 {
    let s: f64 = vw.1.iter().sum();
    vw.0.iter().zip(&vw.1).map(|(v, w)| v * w).sum::<f64>() / s
}

fn wcorr(xs: &[f64], ys: &[f64], ws: &[f64]) -> f64 {
    let s: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / s;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / s;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxy += w * (x - mx) * (y - my);
        sxx += w * (x - mx) * (x - mx);
        syy += w * (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Weighted share of records satisfying `pred`.
fn wfraction(records: &[ExceedanceRecord], pred: impl Fn(&ExceedanceRecord) -> bool) -> f64 {
    let total: f64 = records.iter().map(|r| r.weight).sum();
    records
        .iter()
        .filter(|r| pred(r))
        .map(|r| r.weight)
        .sum::<f64>()
        / total
}

fn scaled_tau(records: &[ExceedanceRecord], e: f64) -> (Vec<f64>, Vec<f64>) {
    wstats(records, |r| r.tau.map(|t| t / e))
}

fn scaled_tau_rw(records: &[ExceedanceRecord], a: f64, e: f64) -> (Vec<f64>, Vec<f64>) {
    wstats(records, |r| r.tau_rw.map(|n| a * n as f64 / e))
}

fn agrees(r: &ExceedanceRecord) -> bool {
    r.tau_rw.is_some() && r.tau_rw == r.tau_hat_rw
}

fn bg_laws(model: &ProcessModel, g: &LimitLawG) -> Result<(LimitLaw, LimitLaw)> {
    let ModelKind::BjorkGrandell(bg) = model.kind() else {
        return Err(Error::Validation(vec![
            "model: needs a bjork_grandell model".into(),
        ]));
    };
    let p = model.theoretical_params();
    let wstar = Box::new(LimitLaw::WStarBG(WStarBG::from_bg(bg)?));
    let mix = LimitLaw::Cor71MixI {
        d: 1.0,
        mu: bg.mean_length(),
        a: p.a,
        g: g.clone(),
        wstar: wstar.clone(),
    };
    let power = LimitLaw::Cor71Power {
        d: 1.0,
        beta: 1.0,
        g: g.clone(),
        wstar,
    };
    Ok((mix, power))
}

fn phi_of(model: &ProcessModel) -> Option<Phi> {
    match model.kind() {
        ModelKind::RateConstruction(rc) => Some(rc.phi),
        _ => None,
    }
}

/// Per-level statistics of a conditional sample. Depends only on the
/// columns stored in the record CSV, so re-reading that file reproduces
/// the numbers exactly.
pub fn level_stats(
    spec: &ExperimentSpec,
    x: f64,
    records: &[ExceedanceRecord],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let Some(model) = &spec.model else {
        return Ok(out);
    };
    if records.is_empty() {
        return Ok(out);
    }
    let ctx = Ctx::new(model)?;
    let e = ctx.e(x);
    let mut put = |k: &str, v: f64| {
        if v.is_finite() {
            out.insert(k.to_string(), v);
        }
    };
    match &spec.check {
        Check::Asymptote { .. } | Check::GrowthBound { .. } => {}
        Check::TauLimit { statistic, .. } => {
            let (vw, law) = match statistic {
                Statistic::TauRw => (
                    scaled_tau_rw(records, ctx.a(), e),
                    LimitLaw::G { g: ctx.g.clone() },
                ),
                Statistic::Tau => (scaled_tau(records, e), ctx.tau_law()),
            };
            let emp = empirical(&vw)?;
            put("ks", ks_distance(&emp, &law)?);
            put("median", emp.median());
            put("used", vw.0.len() as f64);
        }
        Check::Fluid { .. } => {
            let emp = empirical(&scaled_tau(records, e))?;
            put("ks", ks_distance(&emp, &ctx.tau_law())?);
            put("median", emp.median());
            put(
                "median_t_in_cycle",
                empirical(&wstats(records, |r| Some(r.t_in_cycle / e)))?.median(),
            );
        }
        Check::Quadruple { grid, .. } => {
            let a = ctx.a();
            let q: Vec<[f64; 4]> = records
                .iter()
                .map(|r| quadruple(r, a, e))
                .collect::<std::result::Result<_, _>>()?;
            let w: Vec<f64> = records.iter().map(|r| r.weight).collect();
            let total: f64 = w.iter().sum();
            let mut dev = 0.0f64;
            for &u in grid {
                for &v in grid {
                    let p: f64 = q
                        .iter()
                        .zip(&w)
                        .filter(|(q, _)| q[0] > u && q[3] > v)
                        .map(|(_, w)| w)
                        .sum::<f64>()
                        / total;
                    dev = dev.max((p - quadruple_joint_tail(&ctx.g, u, v)).abs());
                }
            }
            put("joint_dev", dev);
            let q3 = (q.iter().map(|q| q[2]).collect(), w.clone());
            put("mean_q3", wmean(&q3));
            let q1: Vec<f64> = q.iter().map(|q| q[0]).collect();
            let q2: Vec<f64> = q.iter().map(|q| -q[1]).collect();
            put("corr_q1_neg_q2", wcorr(&q1, &q2, &w));
            let g = LimitLaw::G { g: ctx.g.clone() };
            put(
                "ks_q1",
                ks_distance(&EmpiricalDistribution::new(&q1, Some(&w))?, &g)?,
            );
            let q4: Vec<f64> = q.iter().map(|q| q[3]).collect();
            put(
                "ks_q4",
                ks_distance(&EmpiricalDistribution::new(&q4, Some(&w))?, &g)?,
            );
        }
        Check::Agreement { ks_threshold, .. } => {
            put("agree_fraction", wfraction(records, agrees));
            if ks_threshold.is_some() {
                put(
                    "ks",
                    ks_distance(&empirical(&scaled_tau(records, e))?, &ctx.tau_law())?,
                );
            }
        }
        Check::Decomposition { .. } => {
            put("agree_fraction", wfraction(records, agrees));
            let d: Vec<_> = records
                .iter()
                .map(|r| decomposition_stats(r, e))
                .collect::<std::result::Result<_, _>>()?;
            let ml: (Vec<f64>, Vec<f64>) = d
                .iter()
                .zip(records)
                .filter_map(|(d, r)| d.mean_length.map(|m| (m, r.weight)))
                .unzip();
            if !ml.0.is_empty() {
                put("mean_length", wmean(&ml));
            }
            let tic = (
                d.iter().map(|d| d.t_in_cycle_scaled).collect(),
                records.iter().map(|r| r.weight).collect(),
            );
            put("median_t_in_cycle", empirical(&tic)?.median());
            put(
                "ks",
                ks_distance(&empirical(&scaled_tau(records, e))?, &ctx.tau_law())?,
            );
        }
        Check::BgHeavyLength { .. } => {
            let (mix, power) = bg_laws(&ctx.model, &ctx.g)?;
            let emp = empirical(&scaled_tau(records, x))?;
            let (k1, k2) = (ks_distance(&emp, &mix)?, ks_distance(&emp, &power)?);
            put("ks_mix_i", k1);
            put("ks_power", k2);
            put("ks_best", k1.min(k2));
            put("median", emp.median());
        }
        Check::Construction { .. } => {
            if let Some(phi) = phi_of(&ctx.model) {
                let f = phi.eval(x);
                let hits: Vec<f64> = records.iter().filter_map(|r| r.tau).collect();
                put(
                    "frac_tau_ge_phi",
                    hits.iter().filter(|&&t| t >= f).count() as f64 / hits.len() as f64,
                );
                let mut ratios: Vec<f64> = hits.iter().map(|t| t / f).collect();
                ratios.sort_by(f64::total_cmp);
                put("median_tau_over_phi", ratios[ratios.len() / 2]);
                put("phi_x", f);
            }
        }
    }
    Ok(out)
}

/// Smallest t with F(t) ≥ q, by bisection.
fn limit_quantile(law: &LimitLaw, q: f64) -> Result<f64> {
    let mut hi = 1.0;
    while law.cdf(hi)? < q {
        hi *= 2.0;
        if hi > 1e15 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if law.cdf(mid)? < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Scaled statistic and limit law drawn in the plot files.
fn plot_pair(
    spec: &ExperimentSpec,
    ctx: &Ctx,
    x: f64,
    records: &[ExceedanceRecord],
) -> Result<Option<(EmpiricalDistribution, LimitLaw)>> {
    let e = ctx.e(x);
    let pair = match &spec.check {
        Check::TauLimit {
            statistic: Statistic::TauRw,
            ..
        } => (
            scaled_tau_rw(records, ctx.a(), e),
            LimitLaw::G { g: ctx.g.clone() },
        ),
        Check::Quadruple { .. } => {
            let a = ctx.a();
            (
                wstats(records, |r| r.tau_hat_rw.map(|n| a * n as f64 / e)),
                LimitLaw::G { g: ctx.g.clone() },
            )
        }
        Check::TauLimit { .. }
        | Check::Fluid { .. }
        | Check::Agreement { .. }
        | Check::Decomposition { .. } => (scaled_tau(records, e), ctx.tau_law()),
        Check::BgHeavyLength { .. } => (scaled_tau(records, x), bg_laws(&ctx.model, &ctx.g)?.0),
        _ => return Ok(None),
    };
    if pair.0 .0.is_empty() {
        return Ok(None);
    }
    Ok(Some((empirical(&pair.0)?, pair.1)))
}

fn level_cfg(run: &RunConfig, i: usize) -> RunConfig {
    RunConfig {
        seed: run.seed.wrapping_add(i as u64),
        ..*run
    }
}

/// KS series, its trend verdict and the matching criterion.
fn ks_trend(
    levels: &[Level],
    key: &str,
    threshold: f64,
    name: &str,
    primary: bool,
) -> Result<(Vec<KsRow>, TrendVerdict, Criterion)> {
    let series: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| (l.x, l.stats.get(key).copied().unwrap_or(f64::NAN)))
        .collect();
    let rows = series
        .iter()
        .map(|&(x, ks)| KsRow {
            x,
            ks,
            threshold,
            pass: ks <= threshold,
        })
        .collect();
    let t = trend_check(&series, threshold)?;
    let c = Criterion::new(
        name,
        t.last,
        format!(
            "KS at largest x <= {threshold} and KS decreasing in ln x (slope {:.4})",
            t.slope
        ),
        t.pass,
        primary,
    );
    Ok((rows, t, c))
}

fn stat_at_last(levels: &[Level], key: &str) -> f64 {
    levels
        .last()
        .and_then(|l| l.stats.get(key).copied())
        .unwrap_or(f64::NAN)
}

/// Runs an experiment in memory.
pub fn evaluate(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let pool = Pool::new(spec.run.workers)?;
    let mut levels = Vec::new();
    let mut records = Vec::new();
    let mut estimates = Vec::new();
    let mut plot = Vec::new();
    let mut criteria = Vec::new();
    let mut ks_series = Vec::new();
    let mut trend = None;
    let mut conditions = None;
    let mut growth = None;

    if let Check::GrowthBound {
        alpha,
        beta,
        cutoff,
    } = &spec.check
    {
        let law = match cutoff {
            Some(c) => TailModel::discrete_power(*alpha, *c)?,
            None => TailModel::discrete_power(*alpha, ruinwalk_core::dists::DEFAULT_CUTOFF)?,
        };
        let rep = growth_bound_check(&law, &Phi::Power { beta: *beta })?;
        criteria.push(Criterion::new(
            "feasible",
            rep.increment_ratio,
            "partial sums of phi(x) f_x settle (last decade increment ratio < 0.9)".into(),
            rep.feasible,
            true,
        ));
        criteria.push(Criterion::new(
            "bound_holds_if_feasible",
            rep.bound.iter().map(|b| b.1 / b.2).fold(0.0, f64::max),
            "max k(y) F(y) / S(1) <= 1 on the grid whenever feasible".into(),
            !rep.feasible || rep.bound_holds,
            false,
        ));
        growth = Some(rep);
    } else {
        let model = spec.model.as_ref().expect("validated");
        let ctx = Ctx::new(model)?;
        let params = ctx.model.theoretical_params().clone();
        for (i, &x) in spec.x_grid.iter().enumerate() {
            let cfg = level_cfg(&spec.run, i);
            let mut level = Level {
                x,
                e_x: Some(ctx.e(x)),
                estimate: None,
                sample: None,
                stats: BTreeMap::new(),
            };
            if let Check::Asymptote { .. } = spec.check {
                let est = ruinwalk_core::mc::estimate_ruin_prob(&ctx.model, x, &cfg, &pool)?;
                estimates.push(EstimateRow {
                    x,
                    p_hat: est.p_hat,
                    stderr: est.stderr,
                    asymptote: est.asymptote,
                    ratio: est.ratio,
                });
                level.stats.insert("ratio".into(), est.ratio);
                level.estimate = Some(est);
            } else {
                let s = conditional_on(&ctx.model, x, &cfg, spec.target_hits, &pool)?;
                let asymptote = params.asymptote(x)?;
                estimates.push(EstimateRow {
                    x,
                    p_hat: s.p_hat,
                    stderr: s.stderr,
                    asymptote,
                    ratio: s.p_hat / asymptote,
                });
                level.stats = level_stats(spec, x, &s.records)?;
                if let Some((emp, law)) = plot_pair(spec, &ctx, x, &s.records)? {
                    for q in PLOT_LEVELS {
                        plot.push(PlotRow {
                            x,
                            q,
                            statistic: emp.quantile(q),
                            limit: limit_quantile(&law, q)?,
                        });
                    }
                }
                level.sample = Some(SampleInfo::from(&s));
                records.push((i, s.records));
            }
            levels.push(level);
        }

        match &spec.check {
            Check::Asymptote {
                band,
                max_inversions,
            } => {
                let r: Vec<f64> = levels.iter().map(|l| l.stats["ratio"]).collect();
                let last = *r.last().expect("nonempty grid");
                criteria.push(Criterion::new(
                    "ratio_at_largest_x",
                    last,
                    format!("p_hat/asymptote in [{}, {}]", band[0], band[1]),
                    last >= band[0] && last <= band[1],
                    true,
                ));
                let inv = r
                    .windows(2)
                    .filter(|w| (w[1] - 1.0).abs() > (w[0] - 1.0).abs())
                    .count();
                criteria.push(Criterion::new(
                    "ratio_inversions",
                    inv as f64,
                    format!(
                        "|ratio - 1| increases at most {max_inversions} time(s) along the grid"
                    ),
                    inv <= *max_inversions,
                    true,
                ));
            }
            Check::TauLimit {
                ks_threshold,
                conditions: cond,
                cross_check,
                statistic,
            } => {
                let (rows, t, c) = ks_trend(&levels, "ks", *ks_threshold, "ks_trend", true)?;
                ks_series = rows;
                trend = Some(t);
                criteria.push(c);
                if *cond {
                    let last = *spec.x_grid.last().expect("nonempty grid");
                    let mut grid = spec.x_grid.clone();
                    grid.extend([10.0 * last, 100.0 * last, 1000.0 * last]);
                    let rep = check_conditions(model, &params.reference, &grid)?;
                    for (name, chk) in [
                        ("domination", &rep.domination),
                        ("tail_equivalence", &rep.tail_equivalence),
                        ("light_cycles", &rep.light_cycles),
                    ] {
                        criteria.push(Criterion::new(
                            name,
                            chk.worst,
                            "numeric condition check".into(),
                            chk.pass,
                            true,
                        ));
                    }
                    conditions = Some(rep);
                }
                if let Some(cc) = cross_check {
                    let x = spec.x_grid[0];
                    let cfg = RunConfig {
                        sampler: Sampler::Crude,
                        n_paths: cc.n_paths,
                        ..level_cfg(&spec.run, 0)
                    };
                    let crude = conditional_on(&ctx.model, x, &cfg, spec.target_hits, &pool)?;
                    let e = ctx.e(x);
                    let stat = |rs: &[ExceedanceRecord]| match statistic {
                        Statistic::TauRw => scaled_tau_rw(rs, ctx.a(), e),
                        Statistic::Tau => scaled_tau(rs, e),
                    };
                    let bj = &records[0].1;
                    let ks =
                        ks_two_sample(&empirical(&stat(bj))?, &empirical(&stat(&crude.records))?);
                    criteria.push(Criterion::new(
                        "crude_cross_check",
                        ks,
                        format!(
                            "two-sample KS with {} crude hits at x = {x} <= {}",
                            crude.records.len(),
                            cc.ks_max
                        ),
                        ks <= cc.ks_max && !crude.exhausted,
                        true,
                    ));
                }
            }
            Check::Quadruple {
                joint_tol,
                q3_max,
                corr_min,
                ..
            } => {
                let dev = stat_at_last(&levels, "joint_dev");
                criteria.push(Criterion::new(
                    "joint_tail",
                    dev,
                    format!("max |P(q1>u, q4>v) - G(u+v)| <= {joint_tol}"),
                    dev <= *joint_tol,
                    true,
                ));
                let q3 = stat_at_last(&levels, "mean_q3");
                criteria.push(Criterion::new(
                    "mean_q3",
                    q3,
                    format!("<= {q3_max}"),
                    q3 <= *q3_max,
                    true,
                ));
                let corr = stat_at_last(&levels, "corr_q1_neg_q2");
                criteria.push(Criterion::new(
                    "corr_q1_neg_q2",
                    corr,
                    format!(">= {corr_min}"),
                    corr >= *corr_min,
                    true,
                ));
            }
            Check::Agreement {
                min_fraction,
                ratio_band,
                ks_threshold,
            } => {
                let f = stat_at_last(&levels, "agree_fraction");
                criteria.push(Criterion::new(
                    "agreement",
                    f,
                    format!("P(tau_rw = tau_hat_rw | M > x) >= {min_fraction}"),
                    f >= *min_fraction,
                    true,
                ));
                let r = estimates.last().map_or(f64::NAN, |e| e.ratio);
                criteria.push(Criterion::new(
                    "ratio_at_largest_x",
                    r,
                    format!("p_hat/asymptote in [{}, {}]", ratio_band[0], ratio_band[1]),
                    r >= ratio_band[0] && r <= ratio_band[1],
                    true,
                ));
                if let Some(t) = ks_threshold {
                    let (rows, tv, c) = ks_trend(&levels, "ks", *t, "ks_trend", true)?;
                    ks_series = rows;
                    trend = Some(tv);
                    criteria.push(c);
                }
            }
            Check::Decomposition {
                min_agree,
                mean_rel_tol,
                median_max,
            } => {
                let f = stat_at_last(&levels, "agree_fraction");
                criteria.push(Criterion::new(
                    "agreement",
                    f,
                    format!(">= {min_agree}"),
                    f >= *min_agree,
                    true,
                ));
                let ml = stat_at_last(&levels, "mean_length");
                let rel = (ml / params.mu - 1.0).abs();
                criteria.push(Criterion::new(
                    "mean_length",
                    ml,
                    format!(
                        "T_pre/(tau_hat - 1) within {} of mu = {}",
                        mean_rel_tol, params.mu
                    ),
                    rel <= *mean_rel_tol,
                    true,
                ));
                let m = stat_at_last(&levels, "median_t_in_cycle");
                criteria.push(Criterion::new(
                    "median_t_in_cycle",
                    m,
                    format!("<= {median_max}"),
                    m <= *median_max,
                    true,
                ));
            }
            Check::BgHeavyLength {
                slope_rel_tol,
                ks_threshold,
            } => {
                let ModelKind::BjorkGrandell(bg) = model.kind() else {
                    unreachable!("validated")
                };
                let (_, c1) = bg_constants(bg)?;
                let xs: Vec<f64> = spec.x_grid.clone();
                let ys: Vec<f64> = estimates
                    .iter()
                    .map(|e| e.p_hat / bg.length_high.tail(e.x))
                    .collect();
                let slope = ls_slope(&xs, &ys);
                criteria.push(Criterion::new(
                    "tail_slope",
                    slope,
                    format!("slope of p_hat/F(x) against x within {slope_rel_tol} of c1 = {c1:.6}"),
                    (slope / c1 - 1.0).abs() <= *slope_rel_tol,
                    true,
                ));
                let (rows, tv, _) = ks_trend(&levels, "ks_best", *ks_threshold, "ks_trend", false)?;
                ks_series = rows;
                trend = Some(tv);
                let best = stat_at_last(&levels, "ks_best");
                criteria.push(Criterion::new(
                    "ks_best_of_two",
                    best,
                    format!(
                        "min(KS vs mixture {:.4}, KS vs W*(1+W) {:.4}) <= {ks_threshold}",
                        stat_at_last(&levels, "ks_mix_i"),
                        stat_at_last(&levels, "ks_power")
                    ),
                    best <= *ks_threshold,
                    true,
                ));
            }
            Check::Fluid {
                ks_threshold,
                median_floor,
            } => {
                let (rows, tv, c) = ks_trend(&levels, "ks", *ks_threshold, "ks_trend", true)?;
                ks_series = rows;
                trend = Some(tv);
                criteria.push(c);
                let m = levels
                    .iter()
                    .map(|l| {
                        l.stats
                            .get("median_t_in_cycle")
                            .copied()
                            .unwrap_or(f64::NAN)
                    })
                    .fold(f64::INFINITY, f64::min);
                criteria.push(Criterion::new(
                    "median_t_in_cycle_floor",
                    m,
                    format!("median t_in_cycle/e(x) >= {median_floor} at every x"),
                    m >= *median_floor,
                    false,
                ));
            }
            Check::Construction { min_fraction } => {
                let ModelKind::RateConstruction(rc) = model.kind() else {
                    unreachable!("validated")
                };
                let rep = growth_bound_check(&rc.law, &rc.phi)?;
                criteria.push(Criterion::new(
                    "growth_bound_feasible",
                    rep.increment_ratio,
                    "partial sums of phi(x) f_x settle".into(),
                    rep.feasible,
                    true,
                ));
                growth = Some(rep);
                let f = levels
                    .iter()
                    .map(|l| l.stats.get("frac_tau_ge_phi").copied().unwrap_or(f64::NAN))
                    .fold(f64::INFINITY, f64::min);
                criteria.push(Criterion::new(
                    "tau_exceeds_phi",
                    f,
                    format!(
                        "share of big-jump hits with tau >= phi(x) is >= {min_fraction} at every x"
                    ),
                    f >= *min_fraction,
                    true,
                ));
            }
            Check::GrowthBound { .. } => unreachable!(),
        }
    }

    let verdict = Verdict::from(criteria.iter().filter(|c| c.primary).all(|c| c.pass));
    let secondary_ok = criteria.iter().filter(|c| !c.primary).all(|c| c.pass);
    let summary = Summary {
        name: spec.name.clone(),
        check: spec.check.name().to_string(),
        seed: spec.run.seed,
        levels,
        ks_series,
        trend,
        conditions,
        growth,
        criteria,
        verdict,
        expected: spec.expect,
        as_expected: verdict == spec.expect && secondary_ok,
    };
    Ok(Outcome {
        summary,
        records,
        estimates,
        plot,
    })
}

pub fn records_file(i: usize) -> String {
    format!("records_x{i}.csv")
}

/// Writes an outcome under `dir`.
pub fn write_outcome(spec: &ExperimentSpec, outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    io::ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };
    io::write_json(&emit("spec.json"), spec)?;
    io::write_json(&emit("summary.json"), &outcome.summary)?;
    for (i, recs) in &outcome.records {
        io::write_records(&emit(&records_file(*i)), recs)?;
    }
    if !outcome.estimates.is_empty() {
        io::write_csv(&emit("estimates.csv"), &outcome.estimates)?;
    }
    if !outcome.summary.ks_series.is_empty() {
        io::write_csv(&emit("ks_series.csv"), &outcome.summary.ks_series)?;
    }
    if !outcome.plot.is_empty() {
        io::write_csv(&emit("plot.csv"), &outcome.plot)?;
    }
    Ok(files)
}

/// Output directory of a spec: `<out_dir or "results">/<name>`.
pub fn output_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results"))
        .join(&spec.name)
}

/// Validates, runs and persists an experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    let outcome = evaluate(spec)?;
    let dir = output_dir(spec);
    let files = write_outcome(spec, &outcome, &dir)?;
    Ok(Report {
        summary: outcome.summary,
        dir,
        files,
    })
}
