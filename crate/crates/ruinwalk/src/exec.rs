//! Thread-pool executor. Per-path streams are keyed by path index and
//! results come back in index order, so the worker count never changes
//! any output.

use std::ops::Range;

use rayon::prelude::*;
use ruinwalk_core::mc::{
    big_jump_sampler, conditional_sample_crude, estimate_ruin_prob, ConditionalSample,
    EstimatorResult, PathExecutor, RunConfig, Sampler,
};
use ruinwalk_core::models::ProcessModel;

use crate::error::Result;

pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl PathExecutor for Pool {
    fn map<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| range.into_par_iter().map(f).collect())
    }
}

/// Estimates P(M > x) on `cfg.workers` threads.
pub fn replicate(model: &ProcessModel, x: f64, cfg: &RunConfig) -> Result<EstimatorResult> {
    let pool = Pool::new(cfg.workers)?;
    Ok(estimate_ruin_prob(model, x, cfg, &pool)?)
}

/// Conditional sample given {M > x} with the sampler chosen in `cfg`.
pub fn conditional(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    target_hits: usize,
) -> Result<ConditionalSample> {
    let pool = Pool::new(cfg.workers)?;
    conditional_on(model, x, cfg, target_hits, &pool)
}

pub fn conditional_on(
    model: &ProcessModel,
    x: f64,
    cfg: &RunConfig,
    target_hits: usize,
    pool: &Pool,
) -> Result<ConditionalSample> {
    Ok(match cfg.sampler {
        Sampler::Crude => conditional_sample_crude(model, x, cfg, target_hits, pool)?,
        Sampler::BigJump => big_jump_sampler(model, x, cfg, target_hits, pool)?,
    })
}
