//! Tail models: closed-form tails, integrated tails, mean-excess scale
//! functions, limit laws of the scaled overshoot, and inverse-CDF samplers
//! (including draws conditioned on exceeding a threshold).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

// needed for float methods under no_std; newer toolchains misreport it as unused
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::math::{self, integrate_tail, ln_1p, log_gamma_q, open01};

/// Relative tolerance used for every integrated-tail quadrature.
pub const QUAD_REL_TOL: f64 = 1e-8;

/// Default truncation point of [`TailModel::discrete_power`].
pub const DEFAULT_CUTOFF: u64 = 10_000_000;

/// Point masses f_j ∝ (j + 1)^{-(alpha + 1)} on {0, 1, ..., cutoff}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePower {
    alpha: f64,
    cutoff: u64,
    norm: f64,
}

impl DiscretePower {
    fn new(alpha: f64, cutoff: u64) -> Result<Self> {
        param(
            "alpha",
            alpha,
            alpha > 1.0 && alpha.is_finite(),
            "must exceed 1",
        )?;
        param("cutoff", cutoff as f64, cutoff >= 1, "must be at least 1")?;
        let norm = math::power_sum(alpha + 1.0, 1, cutoff + 1);
        Ok(Self {
            alpha,
            cutoff,
            norm,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    /// P(X = j).
    pub fn pmf(&self, j: u64) -> f64 {
        if j > self.cutoff {
            0.0
        } else {
            ((j + 1) as f64).powf(-(self.alpha + 1.0)) / self.norm
        }
    }

    /// P(X > k) for integer k ≥ -1.
    fn tail_int(&self, k: i64) -> f64 {
        if k < 0 {
            return 1.0;
        }
        let k = k as u64;
        if k >= self.cutoff {
            return 0.0;
        }
        math::power_sum(self.alpha + 1.0, k + 2, self.cutoff + 1) / self.norm
    }

    /// E[X; X > k] for integer k ≥ 0.
    fn partial_mean_int(&self, k: u64) -> f64 {
        if k >= self.cutoff {
            return 0.0;
        }
        let lo = k + 2;
        let hi = self.cutoff + 1;
        (math::power_sum(self.alpha, lo, hi) - math::power_sum(self.alpha + 1.0, lo, hi))
            / self.norm
    }

    fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0
        } else {
            self.tail_int(x.floor().min(self.cutoff as f64) as i64)
        }
    }

    fn mean(&self) -> f64 {
        self.partial_mean_int(0)
    }

    fn tail_integral(&self, x: f64) -> f64 {
        if x < 0.0 {
            return -x + self.mean();
        }
        let k = x.floor();
        if k >= self.cutoff as f64 {
            return 0.0;
        }
        let ku = k as u64;
        // E[(X - m)^+] with m = k + 1
        let m = ku + 1;
        let excess = self.partial_mean_int(m) - m as f64 * self.tail_int(m as i64);
        (k + 1.0 - x) * self.tail_int(ku as i64) + excess.max(0.0)
    }

    /// Smallest k with P(X > k) ≤ v.
    fn upper_quantile(&self, v: f64) -> f64 {
        let (mut lo, mut hi) = (0u64, self.cutoff);
        if self.tail_int(0) <= v {
            return 0.0;
        }
        // invariant: tail(lo) > v, tail(hi) <= v
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail_int(mid as i64) <= v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailKind {
    /// Lomax form: F̄(x) = (1 + x/sigma)^{-alpha} on [0, ∞).
    Pareto {
        alpha: f64,
        sigma: f64,
    },
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    /// F̄(x) = exp(-(x/scale)^beta), beta in (0, 1).
    WeibullHeavy {
        beta: f64,
        scale: f64,
    },
    DiscretePower(DiscretePower),
    Exponential {
        rate: f64,
    },
    Deterministic {
        value: f64,
    },
    GammaLight {
        shape: f64,
        rate: f64,
    },
}

/// A validated distribution on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub struct TailModel {
    kind: TailKind,
}

impl TailModel {
    pub fn pareto(alpha: f64, sigma: f64) -> Result<Self> {
        param(
            "alpha",
            alpha,
            alpha > 1.0 && alpha.is_finite(),
            "must exceed 1",
        )?;
        param(
            "sigma",
            sigma,
            sigma > 0.0 && sigma.is_finite(),
            "must be positive",
        )?;
        Ok(Self {
            kind: TailKind::Pareto { alpha, sigma },
        })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        param("mu", mu, mu.is_finite(), "must be finite")?;
        param(
            "sigma",
            sigma,
            sigma > 0.0 && sigma.is_finite(),
            "must be positive",
        )?;
        Ok(Self {
            kind: TailKind::Lognormal { mu, sigma },
        })
    }

    pub fn weibull_heavy(beta: f64, scale: f64) -> Result<Self> {
        param("beta", beta, beta > 0.0 && beta < 1.0, "must lie in (0, 1)")?;
        param(
            "scale",
            scale,
            scale > 0.0 && scale.is_finite(),
            "must be positive",
        )?;
        Ok(Self {
            kind: TailKind::WeibullHeavy { beta, scale },
        })
    }

    pub fn discrete_power(alpha: f64, cutoff: u64) -> Result<Self> {
        Ok(Self {
            kind: TailKind::DiscretePower(DiscretePower::new(alpha, cutoff)?),
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        param(
            "rate",
            rate,
            rate > 0.0 && rate.is_finite(),
            "must be positive",
        )?;
        Ok(Self {
            kind: TailKind::Exponential { rate },
        })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        param("value", value, value.is_finite(), "must be finite")?;
        Ok(Self {
            kind: TailKind::Deterministic { value },
        })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        param(
            "shape",
            shape,
            shape > 0.0 && shape.is_finite(),
            "must be positive",
        )?;
        param(
            "rate",
            rate,
            rate > 0.0 && rate.is_finite(),
            "must be positive",
        )?;
        Ok(Self {
            kind: TailKind::GammaLight { shape, rate },
        })
    }

    pub fn kind(&self) -> &TailKind {
        &self.kind
    }

    pub fn as_discrete(&self) -> Option<&DiscretePower> {
        match &self.kind {
            TailKind::DiscretePower(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_heavy(&self) -> bool {
        matches!(
            self.kind,
            TailKind::Pareto { .. }
                | TailKind::Lognormal { .. }
                | TailKind::WeibullHeavy { .. }
                | TailKind::DiscretePower(_)
        )
    }

    /// Tail index for regularly varying kinds.
    pub fn tail_index(&self) -> Option<f64> {
        match self.kind {
            TailKind::Pareto { alpha, .. } => Some(alpha),
            TailKind::DiscretePower(d) => Some(d.alpha),
            _ => None,
        }
    }

    /// F̄(x) = P(X > x).
    pub fn tail(&self, x: f64) -> f64 {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (1.0 + x / sigma).powf(-alpha)
                }
            }
            TailKind::DiscretePower(d) => d.tail(x),
            TailKind::Deterministic { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.log_tail(x).exp(),
        }
    }

    /// ln F̄(x); `-inf` outside the support.
    pub fn log_tail(&self, x: f64) -> f64 {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -alpha * ln_1p(x / sigma)
                }
            }
            TailKind::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    math::log_norm_sf((x.ln() - mu) / sigma)
                }
            }
            TailKind::WeibullHeavy { beta, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(x / scale).powf(beta)
                }
            }
            TailKind::DiscretePower(d) => d.tail(x).ln(),
            TailKind::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -rate * x
                }
            }
            TailKind::Deterministic { value } => {
                if x < value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            TailKind::GammaLight { shape, rate } => log_gamma_q(shape, rate * x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        -math::exp_m1(self.log_tail(x))
    }

    /// Lebesgue density where one exists.
    pub fn density(&self, x: f64) -> Option<f64> {
        let d = match self.kind {
            TailKind::Pareto { alpha, sigma } => {
                if x < 0.0 {
                    0.0
                } else {
                    alpha / sigma * (1.0 + x / sigma).powf(-alpha - 1.0)
                }
            }
            TailKind::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - mu) / sigma;
                    math::norm_pdf(z) / (x * sigma)
                }
            }
            TailKind::WeibullHeavy { beta, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let r = x / scale;
                    beta / scale * r.powf(beta - 1.0) * (-r.powf(beta)).exp()
                }
            }
            TailKind::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            TailKind::GammaLight { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let y = rate * x;
                    (shape * rate.ln() + (shape - 1.0) * x.ln() - y - math::ln_gamma(shape)).exp()
                }
            }
            TailKind::DiscretePower(_) | TailKind::Deterministic { .. } => return None,
        };
        Some(d)
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => sigma / (alpha - 1.0),
            TailKind::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            TailKind::WeibullHeavy { beta, scale } => scale * math::gamma_fn(1.0 + 1.0 / beta),
            TailKind::DiscretePower(d) => d.mean(),
            TailKind::Exponential { rate } => 1.0 / rate,
            TailKind::Deterministic { value } => value,
            TailKind::GammaLight { shape, rate } => shape / rate,
        }
    }

    /// E[X^p] for p > 0 (infinite when the moment does not exist).
    pub fn moment(&self, p: f64) -> Result<f64> {
        let m = match self.kind {
            TailKind::Pareto { alpha, sigma } => {
                if p >= alpha {
                    f64::INFINITY
                } else {
                    sigma.powf(p)
                        * (math::ln_gamma(p + 1.0) + math::ln_gamma(alpha - p)
                            - math::ln_gamma(alpha))
                        .exp()
                }
            }
            TailKind::Lognormal { mu, sigma } => (p * mu + 0.5 * p * p * sigma * sigma).exp(),
            TailKind::WeibullHeavy { beta, scale } => {
                scale.powf(p) * math::gamma_fn(1.0 + p / beta)
            }
            TailKind::Exponential { rate } => math::gamma_fn(p + 1.0) / rate.powf(p),
            TailKind::GammaLight { shape, rate } => {
                (math::ln_gamma(shape + p) - math::ln_gamma(shape)).exp() / rate.powf(p)
            }
            TailKind::Deterministic { value } => value.max(0.0).powf(p),
            TailKind::DiscretePower(d) => {
                if p >= d.alpha {
                    f64::INFINITY
                } else {
                    (1..=d.cutoff)
                        .rev()
                        .map(|j| (j as f64).powf(p) * d.pmf(j))
                        .sum()
                }
            }
        };
        Ok(m)
    }

    /// Mean excess E[X - x | X > x], the natural scale e(x) for lognormal and
    /// Weibull-type tails.
    pub fn mean_excess(&self, x: f64) -> Result<f64> {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => {
                Ok((sigma + x.max(0.0)) / (alpha - 1.0) - x.min(0.0))
            }
            TailKind::Exponential { rate } => Ok(1.0 / rate - x.min(0.0)),
            TailKind::Deterministic { value } => {
                if x < value {
                    Ok(value - x)
                } else {
                    Err(Error::EmptyConditioning { threshold: x })
                }
            }
            TailKind::DiscretePower(d) => {
                let t = d.tail(x);
                if t <= 0.0 {
                    Err(Error::EmptyConditioning { threshold: x })
                } else {
                    Ok(d.tail_integral(x) / t)
                }
            }
            _ => {
                if x < 0.0 {
                    // E[X - x | X > x] = E X - x for x below a nonnegative support
                    return Ok(self.mean() - x);
                }
                let base = self.log_tail(x);
                if base == f64::NEG_INFINITY {
                    return Err(Error::EmptyConditioning { threshold: x });
                }
                let q = integrate_tail(
                    |u: f64| (self.log_tail(x + u) - base).exp(),
                    0.0,
                    1e-3 * (1.0 + x),
                    QUAD_REL_TOL,
                )?;
                Ok(q.value)
            }
        }
    }

    /// ∫_x^∞ F̄(y) dy without the clamp at 1.
    pub fn tail_integral(&self, x: f64) -> Result<f64> {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => {
                if x < 0.0 {
                    Ok(-x + sigma / (alpha - 1.0))
                } else {
                    Ok(sigma / (alpha - 1.0) * (1.0 + x / sigma).powf(1.0 - alpha))
                }
            }
            TailKind::Exponential { rate } => {
                if x < 0.0 {
                    Ok(-x + 1.0 / rate)
                } else {
                    Ok((-rate * x).exp() / rate)
                }
            }
            TailKind::Deterministic { value } => Ok((value - x).max(0.0)),
            TailKind::DiscretePower(d) => Ok(d.tail_integral(x)),
            _ => {
                if x < 0.0 {
                    return Ok(-x + self.mean());
                }
                let lt = self.log_tail(x);
                if lt == f64::NEG_INFINITY || lt < -745.0 {
                    return Ok(0.0);
                }
                Ok(lt.exp() * self.mean_excess(x)?)
            }
        }
    }

    /// F̄^I(x) = min(1, ∫_x^∞ F̄(y) dy).
    pub fn integrated_tail(&self, x: f64) -> Result<f64> {
        Ok(self.tail_integral(x)?.min(1.0))
    }

    /// E[X; X > v].
    pub fn partial_mean_above(&self, v: f64) -> Result<f64> {
        match self.kind {
            TailKind::Deterministic { value } => Ok(if value > v { value } else { 0.0 }),
            TailKind::DiscretePower(d) => {
                if v < 0.0 {
                    Ok(d.mean())
                } else {
                    let k = v.floor() as u64;
                    Ok(d.partial_mean_int(k))
                }
            }
            _ => {
                if v <= 0.0 {
                    Ok(self.mean())
                } else {
                    Ok(v * self.tail(v) + self.tail_integral(v)?)
                }
            }
        }
    }

    /// The x with ln F̄(x) = `log_sf` (generalized inverse for discrete laws).
    pub fn upper_quantile_log(&self, log_sf: f64) -> f64 {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => sigma * math::exp_m1(-log_sf / alpha),
            TailKind::Lognormal { mu, sigma } => (mu + sigma * math::norm_isf_log(log_sf)).exp(),
            TailKind::WeibullHeavy { beta, scale } => scale * (-log_sf).max(0.0).powf(1.0 / beta),
            TailKind::Exponential { rate } => -log_sf / rate,
            TailKind::Deterministic { value } => value,
            TailKind::DiscretePower(d) => d.upper_quantile(log_sf.exp()),
            TailKind::GammaLight { shape, rate } => gamma_upper_quantile(shape, log_sf) / rate,
        }
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            TailKind::Deterministic { value } => value,
            // one powf is cheaper than ln followed by expm1
            TailKind::Pareto { alpha, sigma } => sigma * (open01(rng).powf(-1.0 / alpha) - 1.0),
            _ => self.upper_quantile_log(open01(rng).ln()),
        }
    }

    /// Draw of X given X > u, by inverting the CDF on (F(u), 1).
    pub fn conditional_tail_sample<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<f64> {
        let base = self.log_tail(u);
        if base == f64::NEG_INFINITY {
            return Err(Error::EmptyConditioning { threshold: u });
        }
        if let TailKind::Deterministic { value } = self.kind {
            return Ok(value);
        }
        let x = self.upper_quantile_log(open01(rng).ln() + base);
        Ok(if x > u { x } else { u.next_up() })
    }

    /// Draw of X given X ≤ u.
    pub fn sample_below<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<f64> {
        let lower = self.cdf(u);
        if lower <= 0.0 {
            return Err(Error::EmptyConditioning { threshold: u });
        }
        if let TailKind::Deterministic { value } = self.kind {
            return Ok(value);
        }
        let v = open01(rng) * lower;
        let x = self.upper_quantile_log(ln_1p(-v));
        Ok(x.min(u))
    }

    /// The mean-excess scale function e(x).
    pub fn scale_function(&self) -> Result<ScaleFunction> {
        match self.kind {
            // regularly varying: e(x) = x is the scale under which G = ParetoTail(alpha - 1)
            TailKind::Pareto { .. } | TailKind::DiscretePower(_) => Ok(ScaleFunction::identity()),
            TailKind::Lognormal { .. } | TailKind::WeibullHeavy { .. } => {
                ScaleFunction::tabulated(*self)
            }
            _ => Err(Error::LightTailed),
        }
    }

    /// Limit law G of F̄^I(x + t e(x)) / F̄^I(x).
    pub fn limit_law(&self) -> Result<LimitLawG> {
        match self.kind {
            TailKind::Pareto { alpha, .. } => Ok(LimitLawG::ParetoTail {
                exponent: alpha - 1.0,
            }),
            TailKind::DiscretePower(d) => Ok(LimitLawG::ParetoTail {
                exponent: d.alpha - 1.0,
            }),
            TailKind::Lognormal { .. } | TailKind::WeibullHeavy { .. } => Ok(LimitLawG::StdExp),
            _ => Err(Error::LightTailed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TailKind::Pareto { .. } => "pareto",
            TailKind::Lognormal { .. } => "lognormal",
            TailKind::WeibullHeavy { .. } => "weibull_heavy",
            TailKind::DiscretePower(_) => "discrete_power",
            TailKind::Exponential { .. } => "exponential",
            TailKind::Deterministic { .. } => "deterministic",
            TailKind::GammaLight { .. } => "gamma",
        }
    }
}

impl fmt::Display for TailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TailKind::Pareto { alpha, sigma } => write!(f, "Pareto({alpha}, {sigma})"),
            TailKind::Lognormal { mu, sigma } => write!(f, "Lognormal({mu}, {sigma})"),
            TailKind::WeibullHeavy { beta, scale } => write!(f, "WeibullHeavy({beta}, {scale})"),
            TailKind::DiscretePower(d) => write!(f, "DiscretePower({}, {})", d.alpha, d.cutoff),
            TailKind::Exponential { rate } => write!(f, "Exponential({rate})"),
            TailKind::Deterministic { value } => write!(f, "Deterministic({value})"),
            TailKind::GammaLight { shape, rate } => write!(f, "Gamma({shape}, {rate})"),
        }
    }
}

/// y with ln Q(shape, y) = log_sf, by safeguarded Newton on a bracket.
fn gamma_upper_quantile(shape: f64, log_sf: f64) -> f64 {
    if log_sf >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = shape.max(1.0);
    while log_gamma_q(shape, hi) > log_sf {
        lo = hi;
        hi *= 2.0;
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let lq = log_gamma_q(shape, y);
        let diff = lq - log_sf;
        if diff > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        // d ln Q / dy = -pdf / Q
        let log_pdf = (shape - 1.0) * y.ln() - y - math::ln_gamma(shape);
        let slope = -(log_pdf - lq).exp();
        let mut next = y - diff / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * y.max(1e-300) {
            return next;
        }
        y = next;
    }
    y
}

type ScaleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ScaleRepr {
    Identity,
    Table {
        model: TailModel,
        log_lo: f64,
        step: f64,
        log_e: Vec<f64>,
    },
    Custom(ScaleFn),
}

/// Scale function e(x): positive, nondecreasing, unbounded.
#[derive(Clone)]
pub struct ScaleFunction {
    repr: ScaleRepr,
}

impl fmt::Debug for ScaleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.repr {
            ScaleRepr::Identity => "identity",
            ScaleRepr::Table { .. } => "mean-excess (tabulated)",
            ScaleRepr::Custom(_) => "custom",
        };
        f.debug_struct("ScaleFunction")
            .field("repr", &name)
            .finish()
    }
}

/// Knots of tabulated scale functions, log-spaced over [TABLE_LO, TABLE_HI].
pub const SCALE_KNOTS: usize = 512;
const TABLE_LO: f64 = 0.1;
const TABLE_HI: f64 = 1e9;

impl ScaleFunction {
    pub fn identity() -> Self {
        Self {
            repr: ScaleRepr::Identity,
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self {
            repr: ScaleRepr::Custom(Arc::new(f)),
        }
    }

    fn tabulated(model: TailModel) -> Result<Self> {
        let log_lo = TABLE_LO.ln();
        let step = (TABLE_HI.ln() - log_lo) / (SCALE_KNOTS - 1) as f64;
        let log_e = (0..SCALE_KNOTS)
            .map(|i| {
                model
                    .mean_excess((log_lo + step * i as f64).exp())
                    .map(|e| e.ln())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            repr: ScaleRepr::Table {
                model,
                log_lo,
                step,
                log_e,
            },
        })
    }

    /// True when e(x) is available in closed form.
    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, ScaleRepr::Identity)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.repr {
            ScaleRepr::Identity => x,
            ScaleRepr::Custom(f) => f(x),
            ScaleRepr::Table {
                model,
                log_lo,
                step,
                log_e,
            } => {
                if !(TABLE_LO..=TABLE_HI).contains(&x) {
                    return model.mean_excess(x).unwrap_or(f64::NAN);
                }
                let pos = (x.ln() - log_lo) / step;
                let i = (pos.floor() as usize).min(SCALE_KNOTS - 2);
                let frac = pos - i as f64;
                ((1.0 - frac) * log_e[i] + frac * log_e[i + 1]).exp()
            }
        }
    }
}

/// Limit law G of the scaled first-exceedance index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLawG {
    /// Ḡ(t) = (1 + t)^{-exponent}.
    ParetoTail { exponent: f64 },
    /// Ḡ(t) = e^{-t}.
    StdExp,
    /// Piecewise-linear Ḡ through (t, Ḡ(t)) knots; zero beyond the last knot.
    Numeric { t: Vec<f64>, sf: Vec<f64> },
}

impl LimitLawG {
    pub fn numeric(t: Vec<f64>, sf: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t.len() != sf.len() {
            return Err(Error::Invalid(
                "numeric limit law needs matching grids of length >= 2".to_string(),
            ));
        }
        if t[0] != 0.0 || sf[0] != 1.0 {
            return Err(Error::Invalid(
                "numeric limit law must start at (0, 1)".to_string(),
            ));
        }
        let ordered = t.windows(2).all(|w| w[1] > w[0]) && sf.windows(2).all(|w| w[1] <= w[0]);
        if !ordered || sf.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::Invalid(
                "numeric limit law must be increasing in t, nonincreasing in sf".to_string(),
            ));
        }
        Ok(Self::Numeric { t, sf })
    }

    /// Ḡ(t).
    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            Self::ParetoTail { exponent } => (1.0 + t).powf(-exponent),
            Self::StdExp => (-t).exp(),
            Self::Numeric { t: ts, sf } => {
                let last = ts.len() - 1;
                if t >= ts[last] {
                    return 0.0;
                }
                let i = ts.partition_point(|&k| k <= t) - 1;
                let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
                sf[i] + w * (sf[i + 1] - sf[i])
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.sf(t)
    }

    /// t with Ḡ(t) = q.
    pub fn upper_quantile(&self, q: f64) -> f64 {
        match self {
            Self::ParetoTail { exponent } => q.powf(-1.0 / exponent) - 1.0,
            Self::StdExp => -q.ln(),
            Self::Numeric { t, sf } => {
                let last = t.len() - 1;
                if q < sf[last] {
                    return t[last];
                }
                let i = sf.partition_point(|&s| s > q).max(1) - 1;
                let i = i.min(last - 1);
                let (s0, s1) = (sf[i], sf[i + 1]);
                if s0 == s1 {
                    t[i]
                } else {
                    t[i] + (s0 - q) / (s0 - s1) * (t[i + 1] - t[i])
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.upper_quantile(open01(rng))
    }
}

/// Deviation of F̄(x + h(x)) / F̄(x) from 1 along a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InsensitivityReport {
    pub points: Vec<(f64, f64)>,
    pub max_deviation: f64,
    pub final_deviation: f64,
    pub pass: bool,
}

/// Numeric h-insensitivity diagnostic. Passes when the deviation at the
/// largest grid point is within `tol`.
pub fn check_insensitivity(
    model: &TailModel,
    h: &dyn Fn(f64) -> f64,
    grid: &[f64],
    tol: f64,
) -> InsensitivityReport {
    let points: Vec<(f64, f64)> = grid
        .iter()
        .map(|&x| {
            let ratio = (model.log_tail(x + h(x)) - model.log_tail(x)).exp();
            (x, (ratio - 1.0).abs())
        })
        .collect();
    let max_deviation = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let final_deviation = points.last().map_or(0.0, |p| p.1);
    InsensitivityReport {
        points,
        max_deviation,
        final_deviation,
        pass: final_deviation <= tol,
    }
}

/// e(x + e(x)) / e(x) along a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfNeglectReport {
    pub ratios: Vec<(f64, f64)>,
    pub sup: f64,
    /// Slope of ln ratio against ln x over the upper half of the grid.
    pub upper_slope: f64,
    pub bounded: bool,
}

pub fn check_weak_self_neglect(scale: &ScaleFunction, grid: &[f64]) -> SelfNeglectReport {
    let ratios: Vec<(f64, f64)> = grid
        .iter()
        .map(|&x| {
            let e = scale.eval(x);
            (x, scale.eval(x + e) / e)
        })
        .collect();
    let sup = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let upper = &ratios[ratios.len() / 2..];
    let lx: Vec<f64> = upper.iter().map(|r| r.0.ln()).collect();
    let lr: Vec<f64> = upper.iter().map(|r| r.1.ln()).collect();
    let upper_slope = math::ls_slope(&lx, &lr);
    SelfNeglectReport {
        ratios,
        sup,
        upper_slope,
        bounded: sup.is_finite() && upper_slope <= 0.05,
    }
}

/// Wire form `{"kind": string, "params": {name: number}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl DistSpec {
    fn get(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }
}

impl TryFrom<DistSpec> for TailModel {
    type Error = Error;

    fn try_from(spec: DistSpec) -> Result<Self> {
        match spec.kind.as_str() {
            "pareto" => TailModel::pareto(spec.get("alpha")?, spec.get("sigma")?),
            "lognormal" => TailModel::lognormal(spec.get("mu")?, spec.get("sigma")?),
            "weibull_heavy" => TailModel::weibull_heavy(spec.get("beta")?, spec.get("scale")?),
            "discrete_power" => {
                let cutoff = spec
                    .params
                    .get("cutoff")
                    .copied()
                    .unwrap_or(DEFAULT_CUTOFF as f64);
                param(
                    "cutoff",
                    cutoff,
                    cutoff >= 1.0 && cutoff.fract() == 0.0,
                    "must be a positive integer",
                )?;
                TailModel::discrete_power(spec.get("alpha")?, cutoff as u64)
            }
            "exponential" => TailModel::exponential(spec.get("rate")?),
            "deterministic" => TailModel::deterministic(spec.get("value")?),
            "gamma" => TailModel::gamma(spec.get("shape")?, spec.get("rate")?),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

impl From<TailModel> for DistSpec {
    fn from(model: TailModel) -> Self {
        let pairs: &[(&str, f64)] = match model.kind {
            TailKind::Pareto { alpha, sigma } => &[("alpha", alpha), ("sigma", sigma)],
            TailKind::Lognormal { mu, sigma } => &[("mu", mu), ("sigma", sigma)],
            TailKind::WeibullHeavy { beta, scale } => &[("beta", beta), ("scale", scale)],
            TailKind::DiscretePower(d) => &[("alpha", d.alpha), ("cutoff", d.cutoff as f64)],
            TailKind::Exponential { rate } => &[("rate", rate)],
            TailKind::Deterministic { value } => &[("value", value)],
            TailKind::GammaLight { shape, rate } => &[("shape", shape), ("rate", rate)],
        };
        DistSpec {
            kind: model.name().to_string(),
            params: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn heavy_models() -> Vec<TailModel> {
        alloc::vec![
            TailModel::pareto(2.5, 1.0).unwrap(),
            TailModel::lognormal(0.0, 1.0).unwrap(),
            TailModel::weibull_heavy(0.5, 1.0).unwrap(),
            TailModel::discrete_power(3.0, 100_000).unwrap(),
        ]
    }

    #[test]
    fn closed_form_tails() {
        let p = TailModel::pareto(2.0, 1.0).unwrap();
        assert_eq!(p.tail(0.0), 1.0);
        assert!((p.tail(1.0) - 0.25).abs() < 1e-15);
        let w = TailModel::weibull_heavy(0.5, 1.0).unwrap();
        assert!((w.tail(4.0) - (-2.0f64).exp()).abs() < 1e-15);
        let d = TailModel::deterministic(3.0).unwrap();
        assert_eq!(d.tail(2.9), 1.0);
        assert_eq!(d.tail(3.0), 0.0);
    }

    #[test]
    fn means() {
        assert!((TailModel::pareto(2.0, 1.0).unwrap().mean() - 1.0).abs() < 1e-15);
        assert_eq!(TailModel::deterministic(3.0).unwrap().mean(), 3.0);
        let ln = TailModel::lognormal(0.0, 1.0).unwrap();
        assert!((ln.mean() - 0.5f64.exp()).abs() < 1e-14);
        // mean equals the integrated tail from zero
        for m in heavy_models() {
            let ti = m.tail_integral(0.0).unwrap();
            assert!(
                (ti / m.mean() - 1.0).abs() < 1e-7,
                "{m}: {ti} vs {}",
                m.mean()
            );
        }
    }

    #[test]
    fn integrated_tail_pareto_and_clamp() {
        let p = TailModel::pareto(2.0, 1.0).unwrap();
        assert!((p.integrated_tail(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(p.integrated_tail(0.0).unwrap(), 1.0);
    }

    #[test]
    fn lognormal_integrated_tail_matches_midpoint_oracle() {
        let m = TailModel::lognormal(0.0, 1.0).unwrap();
        let h = 1e-3;
        let mut oracle = 0.0;
        let mut y = 5.0 + 0.5 * h;
        while y < 2_000.0 {
            oracle += math::norm_sf(y.ln()) * h;
            y += h;
        }
        let got = m.integrated_tail(5.0).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
        // closed form E[(X - x)^+] for the lognormal as a second route
        let x: f64 = 5.0;
        let d1 = (-x.ln() + 1.0) / 1.0;
        let bs = 0.5f64.exp() * (1.0 - math::norm_sf(d1)) - x * (1.0 - math::norm_sf(d1 - 1.0));
        assert!((got / bs - 1.0).abs() < 1e-8, "{got} vs {bs}");
    }

    #[test]
    fn integrated_tail_derivative_is_minus_tail() {
        for m in heavy_models() {
            if m.as_discrete().is_some() {
                continue;
            }
            for &x in &[0.5, 3.0, 20.0, 150.0] {
                let h = 1e-3 * x;
                let d =
                    (m.tail_integral(x + h).unwrap() - m.tail_integral(x - h).unwrap()) / (2.0 * h);
                let t = m.tail(x);
                assert!((d + t).abs() <= 1e-5 * t, "{m} at {x}: {d} vs {t}");
            }
        }
    }

    #[test]
    fn discrete_power_masses_and_tails() {
        let m = TailModel::discrete_power(3.0, 1000).unwrap();
        let d = *m.as_discrete().unwrap();
        let total: f64 = (0..=1000).map(|j| d.pmf(j)).sum();
        assert!((total - 1.0).abs() < 1e-13);
        for &k in &[0u64, 1, 7, 99, 999] {
            let brute: f64 = (k + 1..=1000).map(|j| d.pmf(j)).sum();
            assert!((m.tail(k as f64) - brute).abs() < 1e-14);
            assert!((m.tail(k as f64 + 0.5) - brute).abs() < 1e-14);
        }
        let mean: f64 = (0..=1000).map(|j| j as f64 * d.pmf(j)).sum();
        assert!((m.mean() - mean).abs() < 1e-12);
        // integrated tail as E[(X - x)^+]
        for &x in &[0.0, 2.5, 40.0] {
            let brute: f64 = (0..=1000u64)
                .map(|j| (j as f64 - x).max(0.0) * d.pmf(j))
                .sum();
            assert!((m.tail_integral(x).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_functions() {
        let p = TailModel::pareto(2.0, 1.0).unwrap();
        let e = p.scale_function().unwrap();
        assert_eq!(e.eval(10.0), 10.0);
        assert!(e.is_closed_form());
        assert_eq!(
            TailModel::exponential(1.0)
                .unwrap()
                .scale_function()
                .unwrap_err(),
            Error::LightTailed
        );
        // tabulated lognormal agrees with direct evaluation
        let ln = TailModel::lognormal(0.0, 1.0).unwrap();
        let s = ln.scale_function().unwrap();
        for &x in &[0.7, 13.0, 2.0e3, 5.5e6] {
            let direct = ln.mean_excess(x).unwrap();
            assert!((s.eval(x) / direct - 1.0).abs() < 1e-4, "x={x}");
        }
    }

    #[test]
    fn weibull_scale_trends_to_inverse_beta() {
        let w = TailModel::weibull_heavy(0.5, 1.0).unwrap();
        let s = w.scale_function().unwrap();
        let ratio = |x: f64| s.eval(x) / x.powf(0.5);
        // e(x) = 2(sqrt x + 1) for beta = 1/2, so the ratio falls to 2
        let r: Vec<f64> = [1e2, 1e4, 1e6, 1e8].iter().map(|&x| ratio(x)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!((r[3] - 2.0).abs() < 1e-3);
        assert!((s.eval(100.0) - 22.0).abs() < 1e-4);
    }

    #[test]
    fn limit_laws() {
        let p = TailModel::pareto(2.5, 1.0).unwrap();
        assert_eq!(
            p.limit_law().unwrap(),
            LimitLawG::ParetoTail { exponent: 1.5 }
        );
        let x = 1e6;
        let r = p.integrated_tail(x + x).unwrap() / p.integrated_tail(x).unwrap();
        assert!((r - 2f64.powf(-1.5)).abs() < 1e-3);
        assert_eq!(
            TailModel::lognormal(0.0, 1.0).unwrap().limit_law().unwrap(),
            LimitLawG::StdExp
        );
        assert_eq!(LimitLawG::ParetoTail { exponent: 2.0 }.sf(0.0), 1.0);
        assert!(TailModel::gamma(2.0, 1.0).unwrap().limit_law().is_err());
    }

    #[test]
    fn limit_ratio_converges_for_every_heavy_model() {
        for m in heavy_models() {
            let e = m.scale_function().unwrap();
            let g = m.limit_law().unwrap();
            let dev = |x: f64| {
                [0.5, 1.0, 2.0]
                    .iter()
                    .map(|&t| {
                        let r = m.integrated_tail(x + t * e.eval(x)).unwrap()
                            / m.integrated_tail(x).unwrap();
                        (r - g.sf(t)).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let (lo, hi) = if m.as_discrete().is_some() {
                (20.0, 2_000.0)
            } else {
                (20.0, 1e5)
            };
            assert!(dev(hi) < dev(lo), "{m}: {} !< {}", dev(hi), dev(lo));
        }
    }

    #[test]
    fn conditional_sampling() {
        let mut rng = SmallRng::seed_from_u64(7);
        let p = TailModel::pareto(2.0, 1.0).unwrap();
        let n = 200_000;
        let mut above = 0;
        for _ in 0..n {
            let v = p.conditional_tail_sample(9.0, &mut rng).unwrap();
            assert!(v > 9.0);
            if v > 19.0 {
                above += 1;
            }
        }
        let frac = above as f64 / n as f64;
        let sd = (0.25 * 0.75 / n as f64).sqrt();
        assert!((frac - 0.25).abs() < 4.0 * sd, "{frac}");
        let d = TailModel::deterministic(3.0).unwrap();
        assert_eq!(
            d.conditional_tail_sample(5.0, &mut rng),
            Err(Error::EmptyConditioning { threshold: 5.0 })
        );
        let dp = TailModel::discrete_power(2.0, 50).unwrap();
        assert!(dp.conditional_tail_sample(50.0, &mut rng).is_err());
        for _ in 0..1000 {
            let v = dp.conditional_tail_sample(3.5, &mut rng).unwrap();
            assert!(v >= 4.0 && v.fract() == 0.0);
            let b = dp.sample_below(3.5, &mut rng).unwrap();
            assert!(b <= 3.0);
        }
    }

    #[test]
    fn gamma_quantile_round_trip() {
        let g = TailModel::gamma(2.5, 1.5).unwrap();
        for &x in &[0.01, 0.8, 4.0, 30.0] {
            let back = g.upper_quantile_log(g.log_tail(x));
            assert!((back / x - 1.0).abs() < 1e-10, "{x} -> {back}");
        }
    }

    #[test]
    fn insensitivity_examples() {
        let p = TailModel::pareto(2.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=12).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
        let log_h = |x: f64| ln_1p(x);
        let r = check_insensitivity(&p, &log_h, &grid, 1e-3);
        assert!(r.pass);
        assert!(r.points.windows(2).all(|w| w[1].1 <= w[0].1));
        let lin = |x: f64| x;
        let r = check_insensitivity(&p, &lin, &grid, 1e-3);
        assert!(!r.pass);
        assert!((r.final_deviation - 0.75).abs() < 1e-3);
        let zero = |_: f64| 0.0;
        assert_eq!(
            check_insensitivity(&p, &zero, &grid, 0.0).max_deviation,
            0.0
        );
    }

    #[test]
    fn self_neglect_examples() {
        let grid: Vec<f64> = (1..=40).map(|k| 10f64.powf(k as f64 / 5.0)).collect();
        let r = check_weak_self_neglect(&ScaleFunction::identity(), &grid);
        assert!(r.ratios.iter().all(|p| (p.1 - 2.0).abs() < 1e-12));
        assert!(r.bounded);
        let r = check_weak_self_neglect(&ScaleFunction::from_fn(ln_1p), &grid);
        assert!(r.bounded);
        assert!((r.ratios.last().unwrap().1 - 1.0).abs() < 0.01);
        let r = check_weak_self_neglect(&ScaleFunction::from_fn(|_| 3.0), &grid);
        assert!(r.ratios.iter().all(|p| p.1 == 1.0));
        let r = check_weak_self_neglect(&ScaleFunction::from_fn(|x| x * x), &grid);
        assert!(!r.bounded);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TailModel::pareto(1.0, 1.0).is_err());
        assert!(TailModel::weibull_heavy(1.2, 1.0).is_err());
        assert!(TailModel::lognormal(0.0, -1.0).is_err());
        assert!(TailModel::discrete_power(0.5, 10).is_err());
    }
}
