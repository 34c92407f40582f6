//! Rare-event Monte Carlo: crude estimation, crude conditioning on
//! {M > x}, and a single-big-jump importance sampler.
//!
//! Every path draws from its own ChaCha8 stream keyed by (seed, path index),
//! and results are always reduced in path-index order, so output does not
//! depend on how an executor schedules paths.

use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exceed::{run_forced, run_path, ExceedanceRecord, Forced, HitStatus, StopRule};
use crate::models::{CyclePath, ProcessModel};

/// Paths per scheduling block in the sequential-stopping samplers.
pub const BLOCK: u64 = 4096;

/// Stream offset separating big-jump proposals from crude paths.
const BIG_JUMP_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Crude,
    BigJump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn new(n_paths: u64, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            stop: StopRule::default(),
            sampler: Sampler::Crude,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        param(
            "n_paths",
            self.n_paths as f64,
            self.n_paths >= 1,
            "must be at least 1",
        )?;
        param(
            "workers",
            self.workers as f64,
            self.workers >= 1,
            "must be at least 1",
        )?;
        StopRule::new(self.stop.barrier_mult, self.stop.max_cycles)?;
        Ok(())
    }
}

/// Runs a closure over a range of path indices and returns the results in
/// index order.
pub trait PathExecutor {
    fn map<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl PathExecutor for Sequential {
    fn map<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        range.map(f).collect()
    }
}

/// Counter-based stream for one path.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub x: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub ci95: [f64; 2],
    pub n_paths: u64,
    pub n_hits: u64,
    pub n_inconclusive: u64,
    /// Reference asymptote b · F̄^I(x).
    pub asymptote: f64,
    pub ratio: f64,
    /// Effective sample size of the accepted weights (big-jump only).
    pub ess: Option<f64>,
    /// Asymptotic fraction of exceedances lost to the barrier.
    pub truncation_bound: f64,
}

/// Wilson score interval; always contains the point estimate.
fn wilson(hits: u64, n: u64) -> [f64; 2] {
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    [
        (center - half).max(0.0).min(p),
        (center + half).min(1.0).max(p),
    ]
}

fn crude_status<E: PathExecutor>(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    exec: &E,
) -> Result<Vec<HitStatus>> {
    let out = exec.map(0..cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        run_path(model, x, &cfg.stop, &mut rng).map(|r| r.status)
    });
    out.into_iter().collect()
}

/// Estimates P(M > x) with the configured sampler.
pub fn estimate_ruin_prob<E: PathExecutor>(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    exec: &E,
) -> Result<EstimatorResult> {
    cfg.validate()?;
    let asymptote = model.theoretical_params().asymptote(x)?;
    let truncation_bound = cfg.stop.truncation_bound(model, x)?;
    match cfg.sampler {
        Sampler::Crude => {
            let st = crude_status(model, x, cfg, exec)?;
            let hits = st.iter().filter(|s| **s == HitStatus::Hit).count() as u64;
            let inconclusive = st.iter().filter(|s| **s == HitStatus::Inconclusive).count() as u64;
            let n = cfg.n_paths - inconclusive;
            if n == 0 {
                return Err(Error::AllInconclusive);
            }
            let p = hits as f64 / n as f64;
            Ok(EstimatorResult {
                x,
                p_hat: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
                ci95: wilson(hits, n),
                n_paths: cfg.n_paths,
                n_hits: hits,
                n_inconclusive: inconclusive,
                asymptote,
                ratio: p / asymptote,
                ess: None,
                truncation_bound,
            })
        }
        Sampler::BigJump => {
            let s = big_jump_batch(model, x, cfg, 0..cfg.n_paths, exec)?;
            let n = cfg.n_paths as f64;
            let w: Vec<f64> = s
                .iter()
                .map(|o| o.map_or(0.0, |r| r.log_weight.exp()))
                .collect();
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            let se = (var / n).sqrt();
            let hits = s.iter().filter(|o| o.is_some()).count() as u64;
            let p = mean.min(1.0);
            Ok(EstimatorResult {
                x,
                p_hat: p,
                stderr: se,
                ci95: [(p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)],
                n_paths: cfg.n_paths,
                n_hits: hits,
                n_inconclusive: 0,
                asymptote,
                ratio: p / asymptote,
                ess: Some(ess(&w)),
                truncation_bound,
            })
        }
    }
}

/// Kish effective sample size.
pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// A conditional sample given {M > x}.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSample {
    /// Hit records in path order; `weight` normalized to mean 1.
    pub records: Vec<ExceedanceRecord>,
    /// Paths (or proposals) simulated.
    pub paths_run: u64,
    /// Budget ran out before the target was met.
    pub exhausted: bool,
    pub ess: f64,
    /// Unnormalized importance estimate of P(M > x) (crude: hit fraction).
    pub p_hat: f64,
    pub stderr: f64,
}

/// Crude paths until `target_hits` exceedances are collected, within the
/// `n_paths` budget. Deterministic: blocks are scanned in order and the hit
/// list is truncated to the target.
pub fn conditional_sample_crude<E: PathExecutor>(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    target_hits: usize,
    exec: &E,
) -> Result<ConditionalSample> {
    cfg.validate()?;
    let mut records = Vec::new();
    let (mut next, mut valid, mut hits_all) = (0u64, 0u64, 0u64);
    while records.len() < target_hits && next < cfg.n_paths {
        let end = (next + BLOCK).min(cfg.n_paths);
        let block = exec.map(next..end, |i| {
            run_path(model, x, &cfg.stop, &mut path_rng(cfg.seed, i))
        });
        for r in block {
            let r = r?;
            if r.status != HitStatus::Inconclusive {
                valid += 1;
            }
            if r.is_hit() {
                hits_all += 1;
                records.push(r);
            }
        }
        next = end;
    }
    records.truncate(target_hits);
    let p = if valid > 0 {
        hits_all as f64 / valid as f64
    } else {
        0.0
    };
    Ok(ConditionalSample {
        exhausted: records.len() < target_hits,
        ess: records.len() as f64,
        stderr: if valid > 0 {
            (p * (1.0 - p) / valid as f64).sqrt()
        } else {
            0.0
        },
        p_hat: p,
        paths_run: next,
        records,
    })
}

/// Proposal law over the index of the big-jump unit.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexProposal {
    /// cdf[n-1] = P(index ≤ n).
    cdf: Vec<f64>,
    log_w: Vec<f64>,
}

impl IndexProposal {
    /// w_n ∝ P(ξ > x + n a) for n = 1..N, N = min(max_cycles, ⌈2(1+s)x/a⌉ + 16).
    pub fn new(model: &ProcessModel, x: f64, stop: &StopRule) -> Result<Self> {
        let p = model.theoretical_params();
        let horizon = (2.0 * (1.0 + stop.barrier_mult) * x.max(1.0) / p.a).ceil() + 16.0;
        let n = (horizon.min(stop.max_cycles as f64).min(1e8)) as usize;
        let raw: Vec<f64> = (1..=n)
            .map(|k| p.log_unit_tail(x + k as f64 * p.a))
            .collect();
        let top = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::DegenerateProposal);
        }
        let scaled: Vec<f64> = raw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = scaled.iter().sum();
        let log_total = total.ln() + top;
        let mut acc = 0.0;
        let cdf = scaled
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self {
            cdf,
            log_w: raw.iter().map(|l| l - log_total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// ln P(index = n).
    pub fn log_prob(&self, n: u64) -> f64 {
        self.log_w[(n - 1) as usize]
    }

    pub fn draw(&self, u: f64) -> u64 {
        let i = self.cdf.partition_point(|&c| c < u);
        (i.min(self.cdf.len() - 1) + 1) as u64
    }
}

fn big_jump_batch<E: PathExecutor>(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    range: Range<u64>,
    exec: &E,
) -> Result<Vec<Option<ExceedanceRecord>>> {
    let prop = IndexProposal::new(model, x, &cfg.stop)?;
    let out = exec.map(range, |i| -> Result<Option<ExceedanceRecord>> {
        let mut rng = path_rng(cfg.seed, BIG_JUMP_STREAM + i);
        let n = prop.draw(crate::math::open01(&mut rng));
        let mut buf = CyclePath::new();
        match run_forced(model, x, &cfg.stop, &mut rng, &mut buf, n)? {
            Forced::Accepted(mut r) => {
                r.log_weight -= prop.log_prob(n);
                Ok(Some(r))
            }
            Forced::Rejected => Ok(None),
        }
    });
    out.into_iter().collect()
}

/// Single-big-jump importance sampler for the law of paths given {M > x}.
/// Proposals run in blocks until `target_hits` are accepted or `n_paths`
/// proposals are spent. Weights are self-normalized in log space.
pub fn big_jump_sampler<E: PathExecutor>(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    target_hits: usize,
    exec: &E,
) -> Result<ConditionalSample> {
    cfg.validate()?;
    let mut records = Vec::new();
    let mut raw = Vec::new();
    let mut next = 0u64;
    while records.len() < target_hits && next < cfg.n_paths {
        let end = (next + BLOCK).min(cfg.n_paths);
        for o in big_jump_batch(model, x, cfg, next..end, exec)? {
            match o {
                Some(r) => {
                    raw.push(r.log_weight.exp());
                    if records.len() < target_hits {
                        records.push(r);
                    }
                }
                None => raw.push(0.0),
            }
        }
        next = end;
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n.max(1.0);
    let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    normalize(&mut records);
    let w: Vec<f64> = records.iter().map(|r| r.weight).collect();
    Ok(ConditionalSample {
        exhausted: records.len() < target_hits,
        ess: ess(&w),
        p_hat: mean,
        stderr: (var / n.max(1.0)).sqrt(),
        paths_run: next,
        records,
    })
}

/// Sets `weight` to exp(log_weight) normalized to mean 1, with a max shift.
pub fn normalize(records: &mut [ExceedanceRecord]) {
    let top = records
        .iter()
        .map(|r| r.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return;
    }
    let total: f64 = records.iter().map(|r| (r.log_weight - top).exp()).sum();
    let n = records.len() as f64;
    for r in records.iter_mut() {
        r.weight = (r.log_weight - top).exp() / total * n;
    }
}

/// Exact P(M > x) for the walk ξ = Exp(rate) − c: (1 − γ/rate) e^{−γx}
/// where γ > 0 solves rate/(rate − γ) · e^{−γc} = 1.
pub fn exponential_walk_ruin(rate: f64, c: f64, x: f64) -> Result<f64> {
    param("rate", rate, rate > 0.0, "must be positive")?;
    param("c", c, c * rate > 1.0, "needs negative drift (c > 1/rate)")?;
    // g(γ) = ln rate − ln(rate − γ) − γ c, root in (0, rate)
    let g = |y: f64| rate.ln() - (rate - y).ln() - y * c;
    let (mut lo, mut hi) = (1e-300f64, rate * (1.0 - 1e-15));
    // g < 0 just above 0 (negative drift), g → +∞ as γ → rate
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    Ok((1.0 - gamma / rate) * (-gamma * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::TailModel;
    use crate::models::StepLaw;

    fn walk() -> ProcessModel {
        ProcessModel::iid_walk(StepLaw::shifted(
            TailModel::pareto(2.5, 1.0).unwrap(),
            5.0 / 3.0,
        ))
        .unwrap()
    }

    #[test]
    fn index_weights_follow_tail_ratio() {
        let m = walk();
        let x = 50.0;
        let prop = IndexProposal::new(&m, x, &StopRule::default()).unwrap();
        let p = m.theoretical_params();
        for n in [1u64, 5, 40] {
            let got = (prop.log_prob(n + 1) - prop.log_prob(n)).exp();
            let want = ((1.0 + x + p.ref_shift + (n + 1) as f64 * p.a)
                / (1.0 + x + p.ref_shift + n as f64 * p.a))
                .powf(-2.5);
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(prop.draw(1e-300), 1);
        assert_eq!(prop.draw(1.0 - 1e-16), prop.len() as u64);
    }

    #[test]
    fn control_model_matches_crude() {
        let (rate, c) = (1.0, 1.5);
        let step = StepLaw::shifted(TailModel::exponential(rate).unwrap(), c);
        let m = ProcessModel::iid_walk(step).unwrap();
        let x = 3.0;
        let exact = exponential_walk_ruin(rate, c, x).unwrap();
        let r = estimate_ruin_prob(&m, x, &RunConfig::new(40_000, 9), &Sequential).unwrap();
        assert!(
            (r.p_hat - exact).abs() < 4.0 * r.stderr,
            "{} vs {exact}",
            r.p_hat
        );
        assert!(r.ci95[0] <= r.p_hat && r.p_hat <= r.ci95[1]);
    }

    #[test]
    fn zero_target_is_empty() {
        let s = conditional_sample_crude(&walk(), 5.0, &RunConfig::new(100, 1), 0, &Sequential)
            .unwrap();
        assert!(s.records.is_empty() && !s.exhausted);
    }

    #[test]
    fn big_jump_estimate_agrees_with_crude() {
        let m = walk();
        let x = 10.0;
        let mut cfg = RunConfig::new(60_000, 3);
        let crude = estimate_ruin_prob(&m, x, &cfg, &Sequential).unwrap();
        cfg.sampler = Sampler::BigJump;
        cfg.n_paths = 20_000;
        let bj = estimate_ruin_prob(&m, x, &cfg, &Sequential).unwrap();
        let se = (crude.stderr.powi(2) + bj.stderr.powi(2)).sqrt();
        assert!(
            (crude.p_hat - bj.p_hat).abs() < 4.0 * se,
            "{} vs {}",
            crude.p_hat,
            bj.p_hat
        );
    }

    #[test]
    fn weights_normalize() {
        let s =
            big_jump_sampler(&walk(), 20.0, &RunConfig::new(5_000, 4), 500, &Sequential).unwrap();
        let total: f64 = s.records.iter().map(|r| r.weight).sum();
        assert!((total / s.records.len() as f64 - 1.0).abs() < 1e-12);
        assert!(s.ess > 0.1 * s.records.len() as f64);
    }
}
