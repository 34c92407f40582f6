//! Running a path to its first exceedance of a level and extracting the
//! statistics that enter the limit theorems.

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::models::{CyclePath, ProcessModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitStatus {
    Hit,
    /// The walk fell below the barrier first.
    NoHit,
    /// The unit cap was reached before either event.
    Inconclusive,
}

/// Truncation of the infinite-horizon event {M > x}: give up once
/// Z_n < −s·max(x, 1) or after `max_cycles` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub barrier_mult: f64,
    pub max_cycles: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            barrier_mult: 4.0,
            max_cycles: 10_000_000,
        }
    }
}

impl StopRule {
    pub fn new(barrier_mult: f64, max_cycles: u64) -> Result<Self> {
        param(
            "barrier_mult",
            barrier_mult,
            barrier_mult > 0.0 && barrier_mult.is_finite(),
            "must be positive",
        )?;
        param(
            "max_cycles",
            max_cycles as f64,
            max_cycles >= 1,
            "must be at least 1",
        )?;
        Ok(Self {
            barrier_mult,
            max_cycles,
        })
    }

    pub fn barrier(&self, x: f64) -> f64 {
        -self.barrier_mult * x.max(1.0)
    }

    /// Asymptotic fraction of exceedances lost to the barrier,
    /// F̄^I((1+s)x) / F̄^I(x) for the model's reference law.
    pub fn truncation_bound(&self, model: &ProcessModel, x: f64) -> Result<f64> {
        let p = model.theoretical_params();
        let r = &p.reference;
        let base = r.tail_integral(x + p.ref_shift)?;
        if base <= 0.0 {
            return Ok(0.0);
        }
        Ok(r.tail_integral((1.0 + self.barrier_mult) * x + p.ref_shift)? / base)
    }
}

/// Outcome of one path. Indices are 1-based unit counts; τ̂ is the first
/// unit whose running maximum crosses the level, τ^rw the first unit that
/// ends above it. Pre-exceedance quantities are taken at τ̂ − 1 so that
/// τ = T_pre + t_in_cycle holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRecord {
    pub status: HitStatus,
    pub tau: Option<f64>,
    /// `None` when the walk never ends a unit above x before the stop rule.
    pub tau_rw: Option<u64>,
    pub tau_hat_rw: Option<u64>,
    /// T_{τ̂−1}.
    pub t_pre: f64,
    /// Within-unit passage time in unit τ̂.
    pub t_in_cycle: f64,
    /// Z_{τ̂−1}.
    pub z_before: f64,
    /// Z(τ) − x.
    pub overshoot: f64,
    /// Z_{τ̂−1} + ξ*_{τ̂} − x.
    pub cycle_overshoot: f64,
    /// max over m ≤ τ̂ − 1 of |Z_m + m a|, divided by τ̂.
    pub max_dev: f64,
    /// Importance weight (1 for crude paths; normalized to mean 1 in
    /// weighted batches).
    pub weight: f64,
    pub log_weight: f64,
    pub steps_run: u64,
}

impl ExceedanceRecord {
    fn miss(status: HitStatus, steps_run: u64) -> Self {
        Self {
            status,
            tau: None,
            tau_rw: None,
            tau_hat_rw: None,
            t_pre: f64::NAN,
            t_in_cycle: f64::NAN,
            z_before: f64::NAN,
            overshoot: f64::NAN,
            cycle_overshoot: f64::NAN,
            max_dev: f64::NAN,
            weight: 1.0,
            log_weight: 0.0,
            steps_run,
        }
    }

    pub fn is_hit(&self) -> bool {
        self.status == HitStatus::Hit
    }

    fn tau_hat(&self) -> Result<u64> {
        match (self.status, self.tau_hat_rw) {
            (HitStatus::Hit, Some(n)) => Ok(n),
            _ => Err(Error::NotHit),
        }
    }
}

/// Proposal outcome when the big-jump unit is forced at a given index.
pub(crate) enum Forced {
    Accepted(ExceedanceRecord),
    /// Exceedance before the forced unit, barrier first, or no exceedance.
    Rejected,
}

/// Simulates units from 0 until the first exceedance of `x` or the stop rule.
pub fn run_path<R: Rng + ?Sized>(
    model: &ProcessModel,
    x: f64,
    rule: &StopRule,
    rng: &mut R,
) -> Result<ExceedanceRecord> {
    param(
        "x",
        x,
        x >= 0.0 && x.is_finite(),
        "must be finite and nonnegative",
    )?;
    let mut buf = CyclePath::new();
    match run_inner(model, x, rule, rng, &mut buf, None)? {
        Forced::Accepted(rec) => Ok(rec),
        Forced::Rejected => unreachable!("crude paths are never rejected"),
    }
}

/// Like `run_path`, but unit `n` is drawn conditioned on a big jump. The
/// record is accepted only when the first exceedance happens at unit `n`;
/// its `log_weight` is ln of the unit likelihood ratio.
pub(crate) fn run_forced<R: Rng + ?Sized>(
    model: &ProcessModel,
    x: f64,
    rule: &StopRule,
    rng: &mut R,
    buf: &mut CyclePath,
    n: u64,
) -> Result<Forced> {
    run_inner(model, x, rule, rng, buf, Some(n))
}

fn run_inner<R: Rng + ?Sized>(
    model: &ProcessModel,
    x: f64,
    rule: &StopRule,
    rng: &mut R,
    buf: &mut CyclePath,
    forced: Option<u64>,
) -> Result<Forced> {
    let a = model.theoretical_params().a;
    let barrier = rule.barrier(x);
    let mut st = model.initial_state();
    let (mut z, mut t, mut dev) = (0.0f64, 0.0f64, 0.0f64);
    let mut log_lr = 0.0;
    let mut n: u64 = 0;
    let fast = model.has_fast_increment();
    loop {
        if n >= rule.max_cycles {
            return Ok(match forced {
                Some(_) => Forced::Rejected,
                None => Forced::Accepted(ExceedanceRecord::miss(HitStatus::Inconclusive, n)),
            });
        }
        n += 1;
        if forced == Some(n) {
            match model.conditioned_unit(&mut st, x - z, buf, rng) {
                Ok(lr) => log_lr = lr,
                Err(Error::EmptyConditioning { .. }) => return Ok(Forced::Rejected),
                Err(e) => return Err(e),
            }
        } else if fast {
            let xi = model.fast_increment(rng).expect("i.i.d. walk");
            if z + xi > x {
                buf.set_step(xi);
            } else {
                z += xi;
                t += 1.0;
                dev = dev.max((z + n as f64 * a).abs());
                if z < barrier {
                    return Ok(match forced {
                        Some(_) => Forced::Rejected,
                        None => Forced::Accepted(ExceedanceRecord::miss(HitStatus::NoHit, n)),
                    });
                }
                continue;
            }
        } else {
            model.next_unit(&mut st, buf, rng);
        }
        if z + buf.xi_star() > x {
            if forced.is_some_and(|k| k != n) {
                return Ok(Forced::Rejected);
            }
            let c = buf.crossing(x - z).expect("xi_star exceeds the level");
            let tau_hat = n;
            let mut rec = ExceedanceRecord {
                status: HitStatus::Hit,
                tau: Some(t + c.time),
                tau_rw: None,
                tau_hat_rw: Some(tau_hat),
                t_pre: t,
                t_in_cycle: c.time,
                z_before: z,
                overshoot: (z + c.value - x).max(0.0),
                cycle_overshoot: z + buf.xi_star() - x,
                max_dev: dev / tau_hat as f64,
                weight: 1.0,
                log_weight: log_lr,
                steps_run: n,
            };
            // continue along the embedded walk to find τ^rw
            let mut zz = z + buf.xi();
            loop {
                if zz > x {
                    rec.tau_rw = Some(n);
                    break;
                }
                if zz < barrier || n >= rule.max_cycles {
                    break;
                }
                n += 1;
                zz += match model.fast_increment(rng) {
                    Some(xi) => xi,
                    None => {
                        model.next_unit(&mut st, buf, rng);
                        buf.xi()
                    }
                };
            }
            rec.steps_run = n;
            return Ok(Forced::Accepted(rec));
        }
        z += buf.xi();
        t += buf.length();
        dev = dev.max((z + n as f64 * a).abs());
        if z < barrier {
            return Ok(match forced {
                Some(_) => Forced::Rejected,
                None => Forced::Accepted(ExceedanceRecord::miss(HitStatus::NoHit, n)),
            });
        }
    }
}

/// (a τ̂ / e(x), Z_{τ̂−1} / e(x), max_dev, (Z(τ) − x) / e(x)).
pub fn quadruple(rec: &ExceedanceRecord, a: f64, e_x: f64) -> Result<[f64; 4]> {
    let n = rec.tau_hat()?;
    Ok([
        a * n as f64 / e_x,
        rec.z_before / e_x,
        rec.max_dev,
        rec.overshoot / e_x,
    ])
}

/// Pieces of τ = T_pre + t_in_cycle, scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// T_{τ̂−1} / e(x).
    pub t_pre_scaled: f64,
    /// T_{τ̂−1} / (τ̂ − 1), the empirical mean unit length; `None` when τ̂ = 1.
    pub mean_length: Option<f64>,
    /// t_in_cycle / e(x).
    pub t_in_cycle_scaled: f64,
}

pub fn decomposition_stats(rec: &ExceedanceRecord, e_x: f64) -> Result<Decomposition> {
    let n = rec.tau_hat()?;
    Ok(Decomposition {
        t_pre_scaled: rec.t_pre / e_x,
        mean_length: (n > 1).then(|| rec.t_pre / (n - 1) as f64),
        t_in_cycle_scaled: rec.t_in_cycle / e_x,
    })
}
