//! Reference limit laws and the statistics used to compare simulated
//! conditional laws against them.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{LimitLawG, TailKind, TailModel, QUAD_REL_TOL};
use crate::error::{Error, Result};
use crate::math::{self, open01};
use crate::models::{lambda_excess_moment, BjorkGrandell, Phi};

const WSTAR_KNOTS: usize = 2048;

/// Law of W* = 1/(Λm − 1) under the tilted intensity law
/// f_Λ(λ)(λm − 1)^α 1{λ > λ0} / c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "WStarSpec", try_from = "WStarSpec")]
pub struct WStarBG {
    intensity: TailModel,
    m: f64,
    lambda0: f64,
    alpha: f64,
    c: f64,
    /// Knots in λ with the tilted mass below each knot.
    lam: Vec<f64>,
    cum: Vec<f64>,
    /// Unnormalized tabulated mass.
    total: f64,
}

#[derive(Serialize, Deserialize)]
struct WStarSpec {
    intensity: TailModel,
    m: f64,
    lambda0: f64,
    alpha: f64,
}

impl From<WStarBG> for WStarSpec {
    fn from(w: WStarBG) -> Self {
        WStarSpec {
            intensity: w.intensity,
            m: w.m,
            lambda0: w.lambda0,
            alpha: w.alpha,
        }
    }
}

impl TryFrom<WStarSpec> for WStarBG {
    type Error = Error;
    fn try_from(s: WStarSpec) -> Result<Self> {
        WStarBG::new(s.intensity, s.m, s.lambda0, s.alpha)
    }
}

impl WStarBG {
    pub fn new(intensity: TailModel, m: f64, lambda0: f64, alpha: f64) -> Result<Self> {
        crate::error::param("m", m, m > 0.0, "must be positive")?;
        crate::error::param(
            "lambda0",
            lambda0,
            lambda0 * m > 1.0,
            "needs lambda0 * m > 1",
        )?;
        crate::error::param("alpha", alpha, alpha > 0.0, "must be positive")?;
        let c = lambda_excess_moment(&intensity, m, lambda0, alpha)?;
        if !(c > 0.0) {
            return Err(Error::InvalidModel(
                "no intensity mass above lambda0".to_string(),
            ));
        }
        let (lam, cum, total) = if let TailKind::Deterministic { value } = *intensity.kind() {
            (alloc::vec![value, value], alloc::vec![0.0, 1.0], c)
        } else {
            let f =
                |l: f64| intensity.density(l).unwrap_or(0.0) * (l * m - 1.0).max(0.0).powf(alpha);
            // knots spaced evenly in the intensity's own log-tail scale
            let lt0 = intensity.log_tail(lambda0);
            let lt1 = lt0 - 45.0;
            let mut lam = Vec::with_capacity(WSTAR_KNOTS);
            for i in 0..WSTAR_KNOTS {
                let lt = lt0 + (lt1 - lt0) * i as f64 / (WSTAR_KNOTS - 1) as f64;
                let l = if i == 0 {
                    lambda0
                } else {
                    intensity.upper_quantile_log(lt)
                };
                lam.push(l.max(lambda0));
            }
            let mut cum = alloc::vec![0.0; WSTAR_KNOTS];
            for i in 1..WSTAR_KNOTS {
                let q = math::integrate(f, lam[i - 1], lam[i], 1e-10, 1e-14 * c)?;
                cum[i] = cum[i - 1] + q.value;
            }
            let total = cum[WSTAR_KNOTS - 1];
            for v in cum.iter_mut() {
                *v /= total;
            }
            (lam, cum, total)
        };
        Ok(Self {
            intensity,
            m,
            lambda0,
            alpha,
            c,
            lam,
            cum,
            total,
        })
    }

    pub fn from_bg(bg: &BjorkGrandell) -> Result<Self> {
        let alpha = bg.length_high.tail_index().ok_or_else(|| {
            Error::InvalidModel("length_high must be regularly varying".to_string())
        })?;
        let l0 = bg
            .lambda0
            .ok_or_else(|| Error::InvalidModel("W* needs a finite lambda0".to_string()))?;
        Self::new(bg.intensity, bg.claim.mean(), l0, alpha)
    }

    /// Normalizing constant c = E[(Λm − 1)^α; Λ > λ0].
    pub fn constant(&self) -> f64 {
        self.c
    }

    /// Upper end of the support, 1/(λ0 m − 1).
    pub fn support_end(&self) -> f64 {
        1.0 / (self.lambda0 * self.m - 1.0)
    }

    /// CDF by quadrature.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t >= self.support_end() {
            return Ok(1.0);
        }
        let lower = (1.0 / t + 1.0) / self.m;
        Ok((lambda_excess_moment(&self.intensity, self.m, lower, self.alpha)? / self.c).min(1.0))
    }

    /// CDF from the knot table (used inside mixtures).
    pub fn cdf_table(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.support_end() {
            return 1.0;
        }
        let lower = (1.0 / t + 1.0) / self.m;
        if self.lam.len() == 2 || lower >= self.lam[self.lam.len() - 1] {
            return 1.0 - interp(&self.lam, &self.cum, lower);
        }
        // tabulated mass below the knot, plus Simpson over the partial panel
        let i = self.lam.partition_point(|&v| v <= lower) - 1;
        let (l0, mid) = (self.lam[i], 0.5 * (self.lam[i] + lower));
        let part =
            (lower - l0) / 6.0 * (self.weight(l0) + 4.0 * self.weight(mid) + self.weight(lower));
        (1.0 - self.cum[i] - part / self.total).clamp(0.0, 1.0)
    }

    fn weight(&self, l: f64) -> f64 {
        self.intensity.density(l).unwrap_or(0.0) * (l * self.m - 1.0).max(0.0).powf(self.alpha)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open01(rng);
        let l = interp(&self.cum, &self.lam, u);
        1.0 / (l * self.m - 1.0)
    }
}

/// Piecewise-linear interpolation of ys over increasing xs, clamped.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let span = xs[i + 1] - xs[i];
    if span <= 0.0 {
        return ys[i + 1];
    }
    ys[i] + (x - xs[i]) / span * (ys[i + 1] - ys[i])
}

/// Reference laws for scaled first-exceedance statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLaw {
    G {
        g: LimitLawG,
    },
    /// Law of scale · W.
    ScaledG {
        scale: f64,
        g: LimitLawG,
    },
    /// Joint law of (W, −W, 0, W′) with P(W > u, W′ > v) = Ḡ(u + v); as a
    /// one-dimensional law it is the marginal of W.
    QuadrupleLaw {
        a: f64,
        g: LimitLawG,
    },
    /// W μ/a + d (1 + W) W*.
    Cor71MixI {
        d: f64,
        mu: f64,
        a: f64,
        g: LimitLawG,
        wstar: Box<LimitLaw>,
    },
    /// W*.
    Cor71MixII {
        wstar: Box<LimitLaw>,
    },
    /// d (1 + W)^β W*.
    Cor71Power {
        d: f64,
        beta: f64,
        g: LimitLawG,
        wstar: Box<LimitLaw>,
    },
    WStarBG(WStarBG),
}

impl LimitLaw {
    /// CDF at t.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        match self {
            LimitLaw::G { g } | LimitLaw::QuadrupleLaw { g, .. } => Ok(g.cdf(t)),
            LimitLaw::ScaledG { scale, g } => Ok(g.cdf(t / scale)),
            LimitLaw::WStarBG(w) => w.cdf(t),
            LimitLaw::Cor71MixII { wstar } => wstar.cdf(t),
            LimitLaw::Cor71MixI { d, mu, a, g, wstar } => {
                let s = mu / a;
                if *d == 0.0 {
                    return Ok(g.cdf(t / s));
                }
                // P(W* ≤ (t − W s) / (d (1 + W))), W over its upper quantiles
                mix_cdf(g, |w| {
                    let r = t - w * s;
                    if r <= 0.0 {
                        0.0
                    } else {
                        wstar.cdf_inner(r / (d * (1.0 + w)))
                    }
                })
            }
            LimitLaw::Cor71Power { d, beta, g, wstar } => {
                mix_cdf(g, |w| wstar.cdf_inner(t / (d * (1.0 + w).powf(*beta))))
            }
        }
    }

    /// Fast CDF for use inside mixture integrals.
    fn cdf_inner(&self, t: f64) -> f64 {
        match self {
            LimitLaw::WStarBG(w) => w.cdf_table(t),
            other => other.cdf(t).unwrap_or(f64::NAN),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LimitLaw::G { g } | LimitLaw::QuadrupleLaw { g, .. } => g.sample(rng),
            LimitLaw::ScaledG { scale, g } => scale * g.sample(rng),
            LimitLaw::WStarBG(w) => w.sample(rng),
            LimitLaw::Cor71MixII { wstar } => wstar.sample(rng),
            LimitLaw::Cor71MixI { d, mu, a, g, wstar } => {
                let w = g.sample(rng);
                let ws = wstar.sample(rng);
                w * mu / a + d * (1.0 + w) * ws
            }
            LimitLaw::Cor71Power { d, beta, g, wstar } => {
                let w = g.sample(rng);
                d * (1.0 + w).powf(*beta) * wstar.sample(rng)
            }
        }
    }
}

/// ∫_0^1 h(W(u)) du with W(u) the upper u-quantile of G.
fn mix_cdf(g: &LimitLawG, h: impl Fn(f64) -> f64) -> Result<f64> {
    let q = math::integrate(|u| h(g.upper_quantile(u)), 0.0, 1.0, 1e-7, 1e-9)?;
    Ok(q.value.clamp(0.0, 1.0))
}

/// Joint law of (W, W′) with P(W > u, W′ > v) = Ḡ(u + v).
pub fn quadruple_joint_tail(g: &LimitLawG, u: f64, v: f64) -> f64 {
    g.sf(u + v)
}

/// Draw of (W, W′) from the quadruple limit.
pub fn sample_quadruple_pair<R: Rng + ?Sized>(g: &LimitLawG, rng: &mut R) -> Result<(f64, f64)> {
    match g {
        LimitLawG::StdExp => Ok((math::exp_draw(1.0, rng), math::exp_draw(1.0, rng))),
        LimitLawG::ParetoTail { exponent } => {
            // mixed exponentials: E e^{−Z(u+v)} = (1 + u + v)^{−γ} for Z ~ Gamma(γ)
            let z = TailModel::gamma(*exponent, 1.0)?.sample(rng);
            Ok((math::exp_draw(1.0, rng) / z, math::exp_draw(1.0, rng) / z))
        }
        LimitLawG::Numeric { .. } => Err(Error::Invalid(
            "joint sampling needs a closed-form G".to_string(),
        )),
    }
}

/// Weighted empirical law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    /// Cumulative normalized weights aligned with `values`.
    cum: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(values: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("sample values must be finite".to_string()));
        }
        let w: Vec<f64> = match weights {
            Some(w) => {
                if w.len() != values.len() || w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(Error::Invalid(
                        "weights must be finite, nonnegative and match the sample".to_string(),
                    ));
                }
                w.to_vec()
            }
            None => alloc::vec![1.0; values.len()],
        };
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("weights sum to zero".to_string()));
        }
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut vals = Vec::with_capacity(idx.len());
        let mut cum = Vec::with_capacity(idx.len());
        let mut acc = 0.0;
        for &i in &idx {
            acc += w[i] / total;
            // merge ties so every distinct value appears once
            if vals.last() == Some(&values[i]) {
                *cum.last_mut().unwrap() = acc;
            } else {
                vals.push(values[i]);
                cum.push(acc);
            }
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Ok(Self { values: vals, cum })
    }

    /// Distinct support points, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let i = self.values.partition_point(|&v| v <= t);
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    fn cdf_left(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    /// Smallest support point with CDF ≥ p.
    pub fn quantile(&self, p: f64) -> f64 {
        let i = self.cum.partition_point(|&c| c < p);
        self.values[i.min(self.values.len() - 1)]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        (0..self.values.len())
            .map(|i| self.values[i] * (self.cum[i] - self.cdf_left(i)))
            .sum()
    }
}

/// Weighted one-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(emp: &EmpiricalDistribution, law: &LimitLaw) -> Result<f64> {
    let mut d = 0.0f64;
    for (i, &v) in emp.values.iter().enumerate() {
        let f = law.cdf(v)?;
        d = d
            .max((emp.cum[i] - f).abs())
            .max((emp.cdf_left(i) - f).abs());
    }
    Ok(d)
}

/// Weighted two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut d = 0.0f64;
    for &v in a.values.iter().chain(&b.values) {
        d = d.max((a.cdf(v) - b.cdf(v)).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub pass: bool,
    /// Least-squares slope of KS against ln x.
    pub slope: f64,
    pub last: f64,
    pub threshold: f64,
}

/// Pass iff the final KS is within `threshold` and KS falls with ln x.
pub fn trend_check(series: &[(f64, f64)], threshold: f64) -> Result<TrendVerdict> {
    if series.len() < 3 {
        return Err(Error::Invalid(
            "trend check needs at least 3 points".to_string(),
        ));
    }
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Invalid("trend check needs increasing x".to_string()));
    }
    let lx: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ks: Vec<f64> = series.iter().map(|p| p.1).collect();
    let slope = math::ls_slope(&lx, &ks);
    let last = ks[ks.len() - 1];
    Ok(TrendVerdict {
        pass: last <= threshold && slope < 0.0,
        slope,
        last,
        threshold,
    })
}

/// (c, c1) with c = E[(Λm − 1)^α; Λ > λ0] and
/// c1 = c / ((α − 1)(E R − m E[ΛR])).
pub fn bg_constants(bg: &BjorkGrandell) -> Result<(f64, f64)> {
    let alpha = bg
        .length_high
        .tail_index()
        .ok_or_else(|| Error::InvalidModel("length_high must be regularly varying".to_string()))?;
    let den = bg.mean_length() - bg.claim.mean() * bg.mean_lambda_length()?;
    if !(den > 0.0) {
        return Err(Error::InvalidModel(
            "E R − m E[ΛR] must be positive".to_string(),
        ));
    }
    let c = bg.heavy_length_constant()?;
    Ok((c, c / ((alpha - 1.0) * den)))
}

/// Output of [`growth_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub feasible: bool,
    /// First x (or checkpoint) at which a check failed.
    pub witness: Option<f64>,
    /// (checkpoint n, Σ_{x ≤ n} t_x f_x).
    pub partial_sums: Vec<(f64, f64)>,
    /// Ratio of the last two decade increments of the partial sums.
    pub increment_ratio: f64,
    pub mean_length_converges: bool,
    /// (y, k(y), bound k(1)F̄(1)/F̄(y)).
    pub bound: Vec<(f64, f64, f64)>,
    pub bound_holds: bool,
    /// (x, reconstructed t_{x+1}).
    pub recursion: Vec<(f64, f64)>,
    pub recursion_positive: bool,
    /// (x, φ(x) F̄(x)).
    pub growth: Vec<(f64, f64)>,
}

/// Checks whether the rate construction with law `law` and rate `phi` has a
/// finite mean cycle length and satisfies the bound on k(y) = E[R | ξ > y].
pub fn growth_bound_check(law: &TailModel, phi: &Phi) -> Result<GrowthReport> {
    let d = law.as_discrete().ok_or_else(|| {
        Error::InvalidModel("growth check needs a discrete power law".to_string())
    })?;
    let cutoff = d.cutoff();
    let mut checkpoints: Vec<u64> = Vec::new();
    let mut c = 10u64;
    while c <= cutoff {
        checkpoints.push(c);
        c *= 10;
    }
    if checkpoints.len() < 3 {
        return Err(Error::Invalid("cutoff must be at least 1000".to_string()));
    }
    let grid: Vec<u64> = checkpoints
        .iter()
        .map(|&n| n / 2)
        .chain(core::iter::once(1))
        .collect();

    let mut prefix = 0.0;
    let mut partial = Vec::new();
    let mut next_cp = 0;
    for j in 0..=cutoff {
        prefix += phi.eval(j as f64) * d.pmf(j);
        if next_cp < checkpoints.len() && j == checkpoints[next_cp] {
            partial.push((j as f64, prefix));
            next_cp += 1;
        }
    }
    // S(x) = Σ_{j > x} t_j f_j, summed from the far end for accuracy
    let mut suffix_at = alloc::collections::BTreeMap::new();
    let mut acc = 0.0;
    for j in (1..=cutoff).rev() {
        acc += phi.eval(j as f64) * d.pmf(j);
        let x = j - 1;
        if grid.contains(&x) || grid.contains(&j) {
            suffix_at.insert(x, acc);
        }
    }
    let suffix = |x: u64| suffix_at.get(&x).copied().unwrap_or(0.0);

    let incs: Vec<f64> = partial.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let k = incs.len();
    let increment_ratio = incs[k - 1] / incs[k - 2];
    let mean_length_converges = increment_ratio < 0.9;

    let s1 = suffix(1);
    let mut bound = Vec::new();
    let mut bound_holds = true;
    let mut witness = None;
    let mut recursion = Vec::new();
    let mut recursion_positive = true;
    let mut growth = Vec::new();
    let mut ys: Vec<u64> = grid.clone();
    ys.sort_unstable();
    for &y in &ys {
        let fy = law.tail(y as f64);
        let k_y = suffix(y) / fy;
        let b = s1 / fy;
        if y > 1 && !(k_y < b) {
            bound_holds = false;
            witness.get_or_insert(y as f64);
        }
        bound.push((y as f64, k_y, b));
        let t_next = (suffix(y) - suffix(y + 1)) / d.pmf(y + 1);
        if !(t_next > 0.0) {
            recursion_positive = false;
            witness.get_or_insert(y as f64);
        }
        recursion.push((y as f64, t_next));
        growth.push((y as f64, phi.eval(y as f64) * fy));
    }
    if !mean_length_converges {
        witness.get_or_insert(partial[partial.len() - 1].0);
    }
    Ok(GrowthReport {
        feasible: mean_length_converges && bound_holds && recursion_positive,
        witness,
        partial_sums: partial,
        increment_ratio,
        mean_length_converges,
        bound,
        bound_holds,
        recursion,
        recursion_positive,
        growth,
    })
}

/// Relative tolerance used for limit-law quadrature.
pub const LIMIT_QUAD_TOL: f64 = QUAD_REL_TOL;
