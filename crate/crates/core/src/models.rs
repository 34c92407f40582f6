//! Process models. Every model emits a stream of units (steps or
//! regeneration cycles) as piecewise-linear paths with jumps, so first
//! passage inside a unit is exact.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::TailModel;
use crate::error::{param, Error, Result};
use crate::math::{self, exp_draw, open01};

/// Fraction of the remaining level a single jump must clear in the
/// compound-cycle big-jump proposals.
pub const BIG_JUMP_THETA: f64 = 0.5;

/// Point at which tail coefficients lim F̄_y / F̄ are read off.
const COEFF_POINT: f64 = 1e10;

/// One linear piece: value at `start` (after any jump there) and slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub value: f64,
    pub slope: f64,
}

/// Where and at what value a unit first rises above a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub time: f64,
    pub value: f64,
}

/// One unit of a process, started at 0. The path is right-continuous: piece
/// i holds on [start_i, start_{i+1}), the last piece runs to `length`, and
/// the value at `length` is `xi` (which may differ from the left limit when
/// the unit ends with a jump).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CyclePath {
    pieces: Vec<Piece>,
    length: f64,
    xi: f64,
    xi_star: f64,
    state: Option<usize>,
}

impl CyclePath {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self) {
        self.pieces.clear();
        self.length = 0.0;
        self.xi = 0.0;
        self.xi_star = 0.0;
        self.state = None;
    }

    /// Loads a unit-length step with increment `xi`.
    pub(crate) fn set_step(&mut self, xi: f64) {
        self.reset();
        self.push(0.0, 0.0, 0.0);
        self.finish(1.0, Some(xi));
    }

    fn push(&mut self, start: f64, value: f64, slope: f64) {
        self.pieces.push(Piece {
            start,
            value,
            slope,
        });
    }

    fn end_of(&self, i: usize) -> f64 {
        self.pieces.get(i + 1).map_or(self.length, |p| p.start)
    }

    /// Closes the unit: `terminal` is the value at `length` when the unit
    /// ends with a jump, otherwise the last piece is extended.
    fn finish(&mut self, length: f64, terminal: Option<f64>) {
        self.length = length;
        let last = self.pieces.len() - 1;
        let p = self.pieces[last];
        self.xi = terminal.unwrap_or(p.value + p.slope * (length - p.start));
        let mut sup = 0.0f64;
        for i in 0..self.pieces.len() {
            let p = self.pieces[i];
            sup = sup.max(p.value);
            if p.slope > 0.0 {
                sup = sup.max(p.value + p.slope * (self.end_of(i) - p.start));
            }
        }
        self.xi_star = sup.max(self.xi);
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Unit length R.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Net increment ξ.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Running maximum ξ* = max(0, sup over (0, R]).
    pub fn xi_star(&self) -> f64 {
        self.xi_star
    }

    /// Modulator state that generated the unit, if any.
    pub fn state(&self) -> Option<usize> {
        self.state
    }

    /// First time the path exceeds `level`; `Some` exactly when ξ* > level.
    pub fn crossing(&self, level: f64) -> Option<Crossing> {
        if self.xi_star <= level {
            return None;
        }
        for i in 0..self.pieces.len() {
            let p = self.pieces[i];
            if p.value > level {
                return Some(Crossing {
                    time: p.start,
                    value: p.value,
                });
            }
            if p.slope > 0.0 {
                let end = self.end_of(i);
                if p.value + p.slope * (end - p.start) > level {
                    let t = p.start + (level - p.value) / p.slope;
                    return Some(Crossing {
                        time: t.min(end),
                        value: level,
                    });
                }
            }
        }
        Some(Crossing {
            time: self.length,
            value: self.xi,
        })
    }

    /// Within-unit first passage time of `level`, or R if there is none.
    pub fn first_passage(&self, level: f64) -> f64 {
        self.crossing(level).map_or(self.length, |c| c.time)
    }
}

/// One mixture component: weight · law of J − shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPart {
    pub weight: f64,
    pub law: TailModel,
    #[serde(default)]
    pub shift: f64,
}

/// Increment law ξ = J − shift, or a finite mixture of such laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepLawSpec", into = "StepLawSpec")]
pub struct StepLaw {
    parts: Vec<StepPart>,
}

#[derive(Serialize, Deserialize)]
struct StepLawSpec {
    parts: Vec<StepPart>,
}

impl TryFrom<StepLawSpec> for StepLaw {
    type Error = Error;
    fn try_from(s: StepLawSpec) -> Result<Self> {
        StepLaw::mixture(s.parts)
    }
}

impl From<StepLaw> for StepLawSpec {
    fn from(s: StepLaw) -> Self {
        StepLawSpec { parts: s.parts }
    }
}

impl StepLaw {
    pub fn shifted(law: TailModel, shift: f64) -> Self {
        Self {
            parts: alloc::vec![StepPart {
                weight: 1.0,
                law,
                shift
            }],
        }
    }

    pub fn mixture(parts: Vec<StepPart>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidModel(
                "step law needs at least one component".to_string(),
            ));
        }
        for p in &parts {
            param("weight", p.weight, p.weight > 0.0, "must be positive")?;
            param("shift", p.shift, p.shift.is_finite(), "must be finite")?;
        }
        let total: f64 = parts.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[StepPart] {
        &self.parts
    }

    pub fn tail(&self, y: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.weight * p.law.tail(y + p.shift))
            .sum()
    }

    /// ln P(ξ > y), accurate where the tail underflows.
    pub fn log_tail(&self, y: f64) -> f64 {
        let logs: Vec<f64> = self
            .parts
            .iter()
            .map(|p| p.weight.ln() + p.law.log_tail(y + p.shift))
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    }

    pub fn mean(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.weight * (p.law.mean() - p.shift))
            .sum()
    }

    fn pick<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        score: impl Fn(&StepPart) -> f64,
    ) -> Option<&StepPart> {
        if self.parts.len() == 1 {
            return Some(&self.parts[0]).filter(|p| score(p) > 0.0);
        }
        let total: f64 = self.parts.iter().map(&score).sum();
        if total <= 0.0 {
            return None;
        }
        let mut v = open01(rng) * total;
        for p in &self.parts {
            v -= score(p);
            if v < 0.0 {
                return Some(p);
            }
        }
        self.parts.iter().rev().find(|p| score(p) > 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.pick(rng, |p| p.weight).expect("weights are positive");
        p.law.sample(rng) - p.shift
    }

    /// Draw of ξ given ξ > u.
    pub fn sample_above<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<f64> {
        let p = self
            .pick(rng, |p| p.weight * p.law.tail(u + p.shift))
            .ok_or(Error::EmptyConditioning { threshold: u })?;
        Ok(p.law.conditional_tail_sample(u + p.shift, rng)? - p.shift)
    }

    /// The component used as reference law: the first heavy one, else the first.
    pub fn reference(&self) -> (TailModel, f64) {
        let p = self
            .parts
            .iter()
            .find(|p| p.law.is_heavy())
            .unwrap_or(&self.parts[0]);
        (p.law, p.shift)
    }

    /// lim P(ξ > y) / F̄_ref(y + ref_shift), read off far in the tail.
    pub fn tail_coefficient(&self, reference: &TailModel, ref_shift: f64) -> f64 {
        tail_ratio(|y| self.log_tail(y), reference, ref_shift, COEFF_POINT)
    }
}

/// Tail ratio from log tails, so laws like Weibull that underflow far out
/// still give a finite coefficient.
fn tail_ratio(log_tail: impl Fn(f64) -> f64, reference: &TailModel, ref_shift: f64, y: f64) -> f64 {
    let r = reference.log_tail(y + ref_shift);
    if r == f64::NEG_INFINITY {
        0.0
    } else {
        (log_tail(y) - r).exp()
    }
}

/// Cycle of random length with linear drift −`drift` and Poisson(`jump_rate`)
/// upward jumps drawn from `jump`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompoundCycle {
    pub length: TailModel,
    pub jump_rate: f64,
    pub jump: TailModel,
    pub drift: f64,
}

impl CompoundCycle {
    fn validate(&self) -> Result<()> {
        param(
            "jump_rate",
            self.jump_rate,
            self.jump_rate >= 0.0 && self.jump_rate.is_finite(),
            "must be nonnegative",
        )?;
        param(
            "drift",
            self.drift,
            self.drift.is_finite(),
            "must be finite",
        )?;
        if self.length.cdf(0.0) > 0.0 {
            return Err(Error::InvalidModel(
                "cycle length must be positive almost surely".to_string(),
            ));
        }
        Ok(())
    }

    /// E ξ = E R (λ E J − drift).
    pub fn mean_increment(&self) -> f64 {
        self.length.mean() * (self.jump_rate * self.jump.mean() - self.drift)
    }

    /// P(ξ > y) ~ λ E R · P(J > y) when the jump law is heavy.
    pub fn tail_scale(&self) -> f64 {
        self.jump_rate * self.length.mean()
    }

    fn sample<R: Rng + ?Sized>(&self, buf: &mut CyclePath, rng: &mut R) {
        let r = self.length.sample(rng);
        let law = self.jump;
        write_poisson_path(buf, r, self.jump_rate, self.drift, |g| law.sample(g), rng);
    }

    /// Cycle conditioned on at least one jump above BIG_JUMP_THETA · level.
    fn sample_conditioned<R: Rng + ?Sized>(
        &self,
        level: f64,
        buf: &mut CyclePath,
        rng: &mut R,
    ) -> Result<f64> {
        let r = self.length.sample(rng);
        write_big_jump_path(
            buf,
            r,
            self.jump_rate,
            self.drift,
            &self.jump,
            BIG_JUMP_THETA * level,
            rng,
        )
    }
}

/// Path over [0, r] with slope −drift and jumps at the epochs of a
/// Poisson(rate) process.
fn write_poisson_path<R: Rng + ?Sized>(
    buf: &mut CyclePath,
    r: f64,
    rate: f64,
    drift: f64,
    mut jump: impl FnMut(&mut R) -> f64,
    rng: &mut R,
) {
    buf.push(0.0, 0.0, -drift);
    if rate > 0.0 {
        let mut t = exp_draw(rate, rng);
        let mut z = 0.0;
        let mut last = 0.0;
        while t < r {
            z += -drift * (t - last) + jump(rng);
            buf.push(t, z, -drift);
            last = t;
            t += exp_draw(rate, rng);
        }
    }
    buf.finish(r, None);
}

/// Path over [0, r] conditioned on at least one jump exceeding `u`. Returns
/// ln of the likelihood ratio P(some jump > u | r).
fn write_big_jump_path<R: Rng + ?Sized>(
    buf: &mut CyclePath,
    r: f64,
    rate: f64,
    drift: f64,
    jump: &TailModel,
    u: f64,
    rng: &mut R,
) -> Result<f64> {
    let big_mean = rate * r * jump.tail(u);
    if !(big_mean > 0.0) {
        return Err(Error::EmptyConditioning { threshold: u });
    }
    let k = zero_truncated_poisson(big_mean, rng);
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(k + 4);
    for _ in 0..k {
        events.push((open01(rng) * r, jump.conditional_tail_sample(u, rng)?));
    }
    let small_rate = rate * jump.cdf(u);
    if small_rate > 0.0 {
        let mut t = exp_draw(small_rate, rng);
        while t < r {
            events.push((t, jump.sample_below(u, rng)?));
            t += exp_draw(small_rate, rng);
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    buf.push(0.0, 0.0, -drift);
    let (mut z, mut last) = (0.0, 0.0);
    for (t, j) in events {
        z += -drift * (t - last) + j;
        buf.push(t, z, -drift);
        last = t;
    }
    buf.finish(r, None);
    // ln(1 - e^{-m})
    Ok((-math::exp_m1(-big_mean)).ln())
}

/// Poisson(m) conditioned on being at least 1.
fn zero_truncated_poisson<R: Rng + ?Sized>(m: f64, rng: &mut R) -> usize {
    if m > 30.0 {
        loop {
            let mut k = 0;
            let mut t = exp_draw(1.0, rng);
            while t < m {
                k += 1;
                t += exp_draw(1.0, rng);
            }
            if k >= 1 {
                return k;
            }
        }
    }
    let v = open01(rng);
    // P(K = 1 | K ≥ 1) = m e^{-m} / (1 - e^{-m})
    let mut p = m * (-m).exp() / (-math::exp_m1(-m));
    let mut cum = p;
    let mut k = 1;
    while v > cum && k < 1000 {
        k += 1;
        p *= m / k as f64;
        cum += p;
    }
    k
}

/// Whether modulated units are single steps or full excursions from the
/// regeneration state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Step,
    Cycle,
}

/// Finite-state Markov modulator with per-state laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulator<L> {
    #[serde(rename = "P")]
    pub transition: Vec<Vec<f64>>,
    pub state_laws: Vec<L>,
    #[serde(default)]
    pub regen_state: usize,
    pub reference: TailModel,
    #[serde(default)]
    pub unit: Granularity,
}

impl<L> Modulator<L> {
    fn validate(&self) -> Result<()> {
        let n = self.transition.len();
        if n == 0 || self.state_laws.len() != n {
            return Err(Error::InvalidModel(
                "transition matrix and state laws must have matching nonzero size".to_string(),
            ));
        }
        if self.regen_state >= n {
            return Err(Error::InvalidModel(
                "regeneration state out of range".to_string(),
            ));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidModel(format!(
                    "row {i} of P is not a probability vector"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("row {i} of P sums to {s}")));
            }
        }
        let forward = reachable(&self.transition, self.regen_state, false);
        let backward = reachable(&self.transition, self.regen_state, true);
        if forward.iter().chain(&backward).any(|r| !r) {
            return Err(Error::InvalidModel(
                "modulating chain is not irreducible".to_string(),
            ));
        }
        Ok(())
    }

    fn next_state<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> usize {
        let row = &self.transition[y];
        let mut positive = row.iter().enumerate().filter(|(_, &p)| p > 0.0);
        let first = positive.next().map(|(j, _)| j).unwrap_or(y);
        if positive.next().is_none() {
            return first;
        }
        let mut v = open01(rng);
        for (j, &p) in row.iter().enumerate() {
            v -= p;
            if v < 0.0 && p > 0.0 {
                return j;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(y)
    }

    /// Stationary law π solving π P = π, Σ π = 1.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.transition.len();
        let mut m = alloc::vec![alloc::vec![0.0; n + 1]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().take(n).enumerate() {
                *cell = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for cell in m[n - 1].iter_mut() {
            *cell = 1.0;
        }
        solve(m)
    }

    /// P(return time to the regeneration state > n) for n ≥ 1.
    #[allow(clippy::needless_range_loop)]
    fn return_tail(&self, n: u64) -> f64 {
        let k = self.transition.len();
        let y0 = self.regen_state;
        let mut v: Vec<f64> = (0..k)
            .map(|j| if j == y0 { 0.0 } else { self.transition[y0][j] })
            .collect();
        for _ in 1..n.min(100_000) {
            let mut next = alloc::vec![0.0; k];
            for i in 0..k {
                if i == y0 || v[i] == 0.0 {
                    continue;
                }
                for j in 0..k {
                    if j != y0 {
                        next[j] += v[i] * self.transition[i][j];
                    }
                }
            }
            v = next;
        }
        v.iter().sum()
    }
}

fn reachable(p: &[Vec<f64>], from: usize, reverse: bool) -> Vec<bool> {
    let n = p.len();
    let mut seen = alloc::vec![false; n];
    let mut stack = alloc::vec![from];
    seen[from] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let edge = if reverse { p[j][i] } else { p[i][j] };
            if edge > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
#[allow(clippy::needless_range_loop)]
fn solve(mut m: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-14 {
            return Err(Error::InvalidModel(
                "singular stationary system".to_string(),
            ));
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BgRegime {
    /// Heavy claim sizes.
    HeavyClaims,
    /// Heavy intensity Λ, cycle length independent of Λ.
    HeavyIntensity,
    /// Heavy cycle length when Λ > λ0.
    HeavyLength,
}

/// Björk-Grandell cycle: draw Λ and R (R from `length_high` when Λ > λ0),
/// claims arrive at rate Λ with sizes from `claim`, premium rate 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BjorkGrandell {
    pub intensity: TailModel,
    pub claim: TailModel,
    pub length_low: TailModel,
    pub length_high: TailModel,
    /// `None`: R is independent of Λ and drawn from `length_low`.
    pub lambda0: Option<f64>,
    pub regime: BgRegime,
}

impl BjorkGrandell {
    fn threshold(&self) -> f64 {
        self.lambda0.unwrap_or(f64::INFINITY)
    }

    fn draw_length<R: Rng + ?Sized>(&self, lambda: f64, rng: &mut R) -> f64 {
        if lambda > self.threshold() {
            self.length_high.sample(rng)
        } else {
            self.length_low.sample(rng)
        }
    }

    /// E R.
    pub fn mean_length(&self) -> f64 {
        let hi = self.intensity.tail(self.threshold());
        (1.0 - hi) * self.length_low.mean() + hi * self.length_high.mean()
    }

    /// E[ΛR].
    pub fn mean_lambda_length(&self) -> Result<f64> {
        let above = if self.lambda0.is_some() {
            self.intensity.partial_mean_above(self.threshold())?
        } else {
            0.0
        };
        let below = self.intensity.mean() - above;
        Ok(below * self.length_low.mean() + above * self.length_high.mean())
    }

    /// c = E[(Λm − 1)^α; Λ > λ0] with α the tail index of `length_high`.
    pub fn heavy_length_constant(&self) -> Result<f64> {
        let alpha = self.length_high.tail_index().ok_or_else(|| {
            Error::InvalidModel("length_high must be regularly varying".to_string())
        })?;
        lambda_excess_moment(&self.intensity, self.claim.mean(), self.threshold(), alpha)
    }
}

/// E[(Λm − 1)^α; Λ > lower, Λm > 1].
pub fn lambda_excess_moment(intensity: &TailModel, m: f64, lower: f64, alpha: f64) -> Result<f64> {
    let lo = lower.max(1.0 / m);
    if !lo.is_finite() {
        return Ok(0.0);
    }
    if let crate::dists::TailKind::Deterministic { value } = *intensity.kind() {
        return Ok(if value > lo {
            (value * m - 1.0).powf(alpha)
        } else {
            0.0
        });
    }
    if intensity.tail(lo) <= 0.0 {
        return Ok(0.0);
    }
    intensity.density(lo).ok_or(Error::NoDensity)?;
    let f = |l: f64| intensity.density(l).unwrap_or(0.0) * (l * m - 1.0).max(0.0).powf(alpha);
    Ok(math::integrate_tail(f, lo, 1e-2 * (1.0 + lo), crate::dists::QUAD_REL_TOL)?.value)
}

/// Rate function φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phi {
    /// φ(x) = ceil(x^beta).
    Power {
        beta: f64,
    },
    Constant {
        value: f64,
    },
}

impl Phi {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Phi::Power { beta } => x.powf(beta).ceil().max(1.0),
            Phi::Constant { value } => value,
        }
    }

    /// P(φ(X) > t) for a nonnegative integer-valued X with tail F̄.
    fn exceed_tail(&self, tail: impl Fn(f64) -> f64, t: f64) -> f64 {
        match *self {
            Phi::Power { beta } => tail(t.floor().max(0.0).powf(1.0 / beta)),
            Phi::Constant { value } => {
                if value > t {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Unit length R = 1 with ξ = −b when X = 0; otherwise R = φ(X) and the path
/// sits at 0 until it jumps to X at time max(R − 1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstruction {
    pub law: TailModel,
    pub phi: Phi,
    /// Down-step; defaults to 2 E[X; X > 0] / f_0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub down: Option<f64>,
}

impl RateConstruction {
    fn f0(&self) -> f64 {
        self.law.cdf(0.0)
    }

    pub fn down_step(&self) -> f64 {
        self.down.unwrap_or(2.0 * self.law.mean() / self.f0())
    }

    /// E R = f_0 + Σ_{x>0} φ(x) f_x over the truncated support.
    pub fn mean_length(&self) -> f64 {
        let d = self.law.as_discrete().expect("validated as discrete");
        let mut s = 0.0;
        for j in (1..=d.cutoff()).rev() {
            s += self.phi.eval(j as f64) * d.pmf(j);
        }
        s + d.pmf(0)
    }

    fn write(&self, x: f64, buf: &mut CyclePath) {
        if x <= 0.0 {
            buf.push(0.0, 0.0, 0.0);
            buf.finish(1.0, Some(-self.down_step()));
            return;
        }
        let r = self.phi.eval(x);
        buf.push(0.0, 0.0, 0.0);
        if r > 1.0 {
            buf.push((r - 1.0).max(1.0), x, 0.0);
            buf.finish(r, None);
        } else {
            buf.finish(r, Some(x));
        }
    }
}

/// Process classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelKind {
    IidWalk { step: StepLaw },
    Regenerative(CompoundCycle),
    ModulatedWalk(Modulator<StepLaw>),
    ModulatedRegenerative(Modulator<CompoundCycle>),
    BjorkGrandell(BjorkGrandell),
    FluidTwoStage { a1: f64, up: TailModel },
    RateConstruction(RateConstruction),
}

/// Limit-theorem constants of a model, per unit (step or cycle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalParams {
    /// Drift magnitude −E ξ per unit.
    pub a: f64,
    /// Mean unit length.
    pub mu: f64,
    /// C = Σ c(y) π(y) (1 without modulation).
    pub c: f64,
    pub kappa: f64,
    pub pi: Vec<f64>,
    pub c_y: Vec<f64>,
    /// P(ξ > y) ~ tail_scale · F̄_ref(y + ref_shift).
    pub tail_scale: f64,
    /// tail_scale / a: multiplier of the reference integrated tail in the
    /// ruin asymptote.
    pub b_const: f64,
    pub reference: TailModel,
    pub ref_shift: f64,
}

impl TheoreticalParams {
    /// Single-big-jump approximation of P(ξ > y).
    pub fn unit_tail(&self, y: f64) -> f64 {
        (self.tail_scale * self.reference.tail(y + self.ref_shift)).min(1.0)
    }

    /// ln of `unit_tail` without clamping, for weights at large levels.
    pub fn log_unit_tail(&self, y: f64) -> f64 {
        self.tail_scale.ln() + self.reference.log_tail(y + self.ref_shift)
    }

    /// Reference asymptote b · F̄^I(x) for P(M > x).
    pub fn asymptote(&self, x: f64) -> Result<f64> {
        Ok((self.b_const * self.reference.tail_integral(x + self.ref_shift)?).min(1.0))
    }
}

/// Per-unit simulation state carried between units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitState {
    pub modulator: Option<usize>,
}

/// A validated process model with its theoretical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelKind", into = "ModelKind")]
pub struct ProcessModel {
    kind: ModelKind,
    params: TheoreticalParams,
}

impl TryFrom<ModelKind> for ProcessModel {
    type Error = Error;
    fn try_from(kind: ModelKind) -> Result<Self> {
        ProcessModel::new(kind)
    }
}

impl From<ProcessModel> for ModelKind {
    fn from(m: ProcessModel) -> Self {
        m.kind
    }
}

impl ProcessModel {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let params = theoretical_params_of(&kind)?;
        if !(params.a > 0.0) || !params.a.is_finite() {
            return Err(Error::InvalidModel(format!(
                "drift a = {} must be finite and positive",
                params.a
            )));
        }
        if !(params.mu > 0.0) {
            return Err(Error::InvalidModel(format!(
                "mean unit length {} must be positive",
                params.mu
            )));
        }
        Ok(Self { kind, params })
    }

    pub fn iid_walk(step: StepLaw) -> Result<Self> {
        Self::new(ModelKind::IidWalk { step })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn theoretical_params(&self) -> &TheoreticalParams {
        &self.params
    }

    /// True when units have unit length and are indexed by integer time.
    pub fn is_discrete_time(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::IidWalk { .. }
                | ModelKind::RateConstruction(_)
                | ModelKind::ModulatedWalk(_)
        )
    }

    pub fn initial_state(&self) -> UnitState {
        let modulator = match &self.kind {
            ModelKind::ModulatedWalk(m) => Some(m.regen_state),
            ModelKind::ModulatedRegenerative(m) => Some(m.regen_state),
            _ => None,
        };
        UnitState { modulator }
    }

    /// Draws the next unit into `buf`, advancing the modulator state.
    pub fn next_unit<R: Rng + ?Sized>(&self, st: &mut UnitState, buf: &mut CyclePath, rng: &mut R) {
        buf.reset();
        match &self.kind {
            ModelKind::IidWalk { step } => {
                buf.push(0.0, 0.0, 0.0);
                let xi = step.sample(rng);
                buf.finish(1.0, Some(xi));
            }
            ModelKind::Regenerative(c) => c.sample(buf, rng),
            ModelKind::ModulatedWalk(m) => {
                let y = st.modulator.unwrap_or(m.regen_state);
                match m.unit {
                    Granularity::Step => {
                        let (xi, next) = modulated_step_of(m, y, rng);
                        buf.push(0.0, 0.0, 0.0);
                        buf.finish(1.0, Some(xi));
                        st.modulator = Some(next);
                    }
                    Granularity::Cycle => {
                        let (mut y, mut z, mut t) = (y, 0.0, 0.0);
                        buf.push(0.0, 0.0, 0.0);
                        loop {
                            let (xi, next) = modulated_step_of(m, y, rng);
                            z += xi;
                            t += 1.0;
                            y = next;
                            if y == m.regen_state {
                                break;
                            }
                            buf.push(t, z, 0.0);
                        }
                        buf.finish(t, Some(z));
                        st.modulator = Some(y);
                    }
                }
                buf.state = Some(y);
            }
            ModelKind::ModulatedRegenerative(m) => {
                let y = st.modulator.unwrap_or(m.regen_state);
                match m.unit {
                    Granularity::Step => {
                        m.state_laws[y].sample(buf, rng);
                        st.modulator = Some(m.next_state(y, rng));
                    }
                    Granularity::Cycle => {
                        let mut sub = CyclePath::new();
                        let (mut y, mut z, mut t) = (y, 0.0, 0.0);
                        loop {
                            sub.reset();
                            m.state_laws[y].sample(&mut sub, rng);
                            for p in &sub.pieces {
                                buf.push(t + p.start, z + p.value, p.slope);
                            }
                            z += sub.xi;
                            t += sub.length;
                            y = m.next_state(y, rng);
                            if y == m.regen_state {
                                break;
                            }
                        }
                        buf.finish(t, None);
                        st.modulator = Some(y);
                    }
                }
                buf.state = Some(y);
            }
            ModelKind::BjorkGrandell(bg) => {
                let lambda = bg.intensity.sample(rng);
                let r = bg.draw_length(lambda, rng);
                let claim = bg.claim;
                write_poisson_path(buf, r, lambda, 1.0, |g| claim.sample(g), rng);
            }
            ModelKind::FluidTwoStage { a1, up } => {
                let r2 = up.sample(rng);
                buf.push(0.0, 0.0, -1.0);
                buf.push(*a1, -a1, 1.0);
                buf.finish(a1 + r2, None);
            }
            ModelKind::RateConstruction(rc) => {
                let x = rc.law.sample(rng);
                rc.write(x, buf);
            }
        }
    }

    /// For i.i.d. walks, the next increment without building a unit path.
    /// Consumes the rng exactly as `next_unit` does.
    #[inline]
    pub(crate) fn fast_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match &self.kind {
            ModelKind::IidWalk { step } => Some(step.sample(rng)),
            _ => None,
        }
    }

    /// Whether `fast_increment` applies.
    pub(crate) fn has_fast_increment(&self) -> bool {
        matches!(self.kind, ModelKind::IidWalk { .. })
    }

    /// A fresh unit from the initial state; for cycle-structured models
    /// successive calls are i.i.d.
    pub fn generate_cycle<R: Rng + ?Sized>(&self, rng: &mut R) -> CyclePath {
        let mut buf = CyclePath::new();
        let mut st = self.initial_state();
        self.next_unit(&mut st, &mut buf, rng);
        buf
    }

    /// Draws the next unit conditioned on a big jump relative to `level`
    /// (the distance from the current position to the target) and returns
    /// ln of the likelihood ratio true/proposal for the unit.
    pub fn conditioned_unit<R: Rng + ?Sized>(
        &self,
        st: &mut UnitState,
        level: f64,
        buf: &mut CyclePath,
        rng: &mut R,
    ) -> Result<f64> {
        buf.reset();
        let level = level.max(0.0);
        match &self.kind {
            ModelKind::IidWalk { step } => {
                let xi = step.sample_above(level, rng)?;
                buf.push(0.0, 0.0, 0.0);
                buf.finish(1.0, Some(xi));
                Ok(step.tail(level).ln())
            }
            ModelKind::Regenerative(c) => c.sample_conditioned(level, buf, rng),
            ModelKind::ModulatedWalk(m) if m.unit == Granularity::Step => {
                let y = st.modulator.unwrap_or(m.regen_state);
                let law = &m.state_laws[y];
                let xi = law.sample_above(level, rng)?;
                let next = m.next_state(y, rng);
                buf.push(0.0, 0.0, 0.0);
                buf.finish(1.0, Some(xi));
                buf.state = Some(y);
                st.modulator = Some(next);
                Ok(law.tail(level).ln())
            }
            ModelKind::ModulatedRegenerative(m) if m.unit == Granularity::Step => {
                let y = st.modulator.unwrap_or(m.regen_state);
                let lr = m.state_laws[y].sample_conditioned(level, buf, rng)?;
                buf.state = Some(y);
                st.modulator = Some(m.next_state(y, rng));
                Ok(lr)
            }
            ModelKind::ModulatedWalk(_) | ModelKind::ModulatedRegenerative(_) => {
                Err(Error::InvalidModel(
                    "big-jump proposals for modulated models need step granularity".to_string(),
                ))
            }
            ModelKind::BjorkGrandell(bg) => bg_conditioned(bg, level, buf, rng),
            ModelKind::FluidTwoStage { a1, up } => {
                let r2 = up.conditional_tail_sample(level + a1, rng)?;
                buf.push(0.0, 0.0, -1.0);
                buf.push(*a1, -a1, 1.0);
                buf.finish(a1 + r2, None);
                Ok(up.log_tail(level + a1))
            }
            ModelKind::RateConstruction(rc) => {
                let x = rc.law.conditional_tail_sample(level, rng)?;
                rc.write(x, buf);
                Ok(rc.law.log_tail(level))
            }
        }
    }

    /// One modulated step from state `y`: (increment, next state).
    pub fn modulated_step<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> Result<(f64, usize)> {
        match &self.kind {
            ModelKind::ModulatedWalk(m) if y < m.state_laws.len() => {
                Ok(modulated_step_of(m, y, rng))
            }
            ModelKind::ModulatedWalk(_) => Err(Error::Invalid(format!("state {y} out of range"))),
            _ => Err(Error::InvalidModel("not a modulated walk".to_string())),
        }
    }

    /// P(R > t) for the unit length.
    pub fn length_tail(&self, t: f64) -> f64 {
        match &self.kind {
            ModelKind::IidWalk { .. } => {
                if t < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::Regenerative(c) => c.length.tail(t),
            ModelKind::ModulatedWalk(m) => match m.unit {
                Granularity::Step => (t < 1.0) as u8 as f64,
                Granularity::Cycle => {
                    if t < 1.0 {
                        1.0
                    } else {
                        m.return_tail(t.floor() as u64)
                    }
                }
            },
            ModelKind::ModulatedRegenerative(m) => {
                // worst state: dominates the sub-path length of every state
                m.state_laws
                    .iter()
                    .map(|c| c.length.tail(t))
                    .fold(0.0, f64::max)
            }
            ModelKind::BjorkGrandell(bg) => {
                let hi = bg.intensity.tail(bg.threshold());
                (1.0 - hi) * bg.length_low.tail(t) + hi * bg.length_high.tail(t)
            }
            ModelKind::FluidTwoStage { a1, up } => up.tail(t - a1),
            ModelKind::RateConstruction(rc) => {
                if t < 1.0 {
                    1.0
                } else {
                    rc.phi.exceed_tail(|v| rc.law.tail(v), t)
                }
            }
        }
    }
}

fn modulated_step_of<R: Rng + ?Sized>(
    m: &Modulator<StepLaw>,
    y: usize,
    rng: &mut R,
) -> (f64, usize) {
    let xi = m.state_laws[y].sample(rng);
    (xi, m.next_state(y, rng))
}

fn bg_conditioned<R: Rng + ?Sized>(
    bg: &BjorkGrandell,
    level: f64,
    buf: &mut CyclePath,
    rng: &mut R,
) -> Result<f64> {
    let m = bg.claim.mean();
    let u = BIG_JUMP_THETA * level;
    match bg.regime {
        BgRegime::HeavyClaims => {
            let lambda = bg.intensity.sample(rng);
            let r = bg.draw_length(lambda, rng);
            write_big_jump_path(buf, r, lambda, 1.0, &bg.claim, u, rng)
        }
        BgRegime::HeavyIntensity => {
            if bg.lambda0.is_some() {
                return Err(Error::InvalidModel(
                    "heavy-intensity proposals need R independent of Λ".to_string(),
                ));
            }
            let r = bg.length_low.sample(rng);
            // ξ ≈ R(Λm − 1) > u
            let v = (u / r + 1.0) / m;
            let lambda = bg.intensity.conditional_tail_sample(v, rng)?;
            let claim = bg.claim;
            write_poisson_path(buf, r, lambda, 1.0, |g| claim.sample(g), rng);
            Ok(bg.intensity.log_tail(v))
        }
        BgRegime::HeavyLength => {
            let Some(l0) = bg.lambda0 else {
                return Err(Error::InvalidModel(
                    "heavy-length proposals need lambda0".to_string(),
                ));
            };
            // only cycles with Λm > 1 and Λ > λ0 can carry the jump
            let lo = l0.max(1.0 / m);
            let lambda = bg.intensity.conditional_tail_sample(lo, rng)?;
            let slope = lambda * m - 1.0;
            // ξ ≈ R(Λm − 1) > u
            let y = u / slope;
            let r = bg.length_high.conditional_tail_sample(y, rng)?;
            let claim = bg.claim;
            write_poisson_path(buf, r, lambda, 1.0, |g| claim.sample(g), rng);
            Ok(bg.intensity.log_tail(lo) + bg.length_high.log_tail(y))
        }
    }
}

fn theoretical_params_of(kind: &ModelKind) -> Result<TheoreticalParams> {
    let single = |a: f64, mu: f64, tail_scale: f64, reference: TailModel, ref_shift: f64| {
        TheoreticalParams {
            a,
            mu,
            c: 1.0,
            kappa: a,
            pi: alloc::vec![1.0],
            c_y: alloc::vec![tail_scale],
            tail_scale,
            b_const: tail_scale / a,
            reference,
            ref_shift,
        }
    };
    Ok(match kind {
        ModelKind::IidWalk { step } => {
            let (reference, shift) = step.reference();
            let c = step.tail_coefficient(&reference, shift);
            let mut p = single(-step.mean(), 1.0, c, reference, shift);
            p.c = c;
            p
        }
        ModelKind::Regenerative(cc) => {
            cc.validate()?;
            single(
                -cc.mean_increment(),
                cc.length.mean(),
                cc.tail_scale(),
                cc.jump,
                0.0,
            )
        }
        ModelKind::ModulatedWalk(m) => {
            m.validate()?;
            let means: Vec<f64> = m.state_laws.iter().map(|l| l.mean()).collect();
            let lens = alloc::vec![1.0; means.len()];
            let coeffs: Vec<f64> = m
                .state_laws
                .iter()
                .map(|l| l.tail_coefficient(&m.reference, 0.0))
                .collect();
            modulated_params(m, &means, &lens, &coeffs)?
        }
        ModelKind::ModulatedRegenerative(m) => {
            m.validate()?;
            for c in &m.state_laws {
                c.validate()?;
            }
            let means: Vec<f64> = m.state_laws.iter().map(|c| c.mean_increment()).collect();
            let lens: Vec<f64> = m.state_laws.iter().map(|c| c.length.mean()).collect();
            let coeffs: Vec<f64> = m
                .state_laws
                .iter()
                .map(|c| {
                    c.tail_scale()
                        * tail_ratio(|y| c.jump.log_tail(y), &m.reference, 0.0, COEFF_POINT)
                })
                .collect();
            modulated_params(m, &means, &lens, &coeffs)?
        }
        ModelKind::BjorkGrandell(bg) => {
            if let Some(l0) = bg.lambda0 {
                param("lambda0", l0, l0 > 0.0, "must be positive")?;
            }
            if bg.intensity.cdf(0.0) > 0.0
                && bg.intensity.tail(0.0) < 1.0
                && bg.intensity.mean() < 0.0
            {
                return Err(Error::InvalidModel(
                    "intensity must be nonnegative".to_string(),
                ));
            }
            let m = bg.claim.mean();
            let er = bg.mean_length();
            let elr = bg.mean_lambda_length()?;
            let a = er - m * elr;
            let (reference, scale) = match bg.regime {
                BgRegime::HeavyClaims => (bg.claim, elr),
                BgRegime::HeavyIntensity => {
                    let alpha = bg.intensity.tail_index().ok_or_else(|| {
                        Error::InvalidModel(
                            "heavy-intensity regime needs a regularly varying Λ".to_string(),
                        )
                    })?;
                    (bg.intensity, m.powf(alpha) * bg.length_low.moment(alpha)?)
                }
                BgRegime::HeavyLength => (bg.length_high, bg.heavy_length_constant()?),
            };
            single(a, er, scale, reference, 0.0)
        }
        ModelKind::FluidTwoStage { a1, up } => {
            param("a1", *a1, *a1 > 0.0 && a1.is_finite(), "must be positive")?;
            if up.cdf(0.0) > 0.0 && up.tail(0.0) < 1.0 && up.mean() < 0.0 {
                return Err(Error::InvalidModel(
                    "stage-2 length must be nonnegative".to_string(),
                ));
            }
            let a2 = up.mean();
            single(a1 - a2, a1 + a2, 1.0, *up, *a1)
        }
        ModelKind::RateConstruction(rc) => {
            if rc.law.as_discrete().is_none() {
                return Err(Error::InvalidModel(
                    "rate construction needs a discrete power law".to_string(),
                ));
            }
            if let Phi::Power { beta } = rc.phi {
                param("beta", beta, beta > 0.0, "must be positive")?;
            }
            let f0 = rc.f0();
            let b = rc.down_step();
            let threshold = rc.law.mean() / f0;
            param("b", b, b > threshold, "must exceed E[X; X>0]/f_0")?;
            single(b * f0 - rc.law.mean(), rc.mean_length(), 1.0, rc.law, 0.0)
        }
    })
}

fn modulated_params<L>(
    m: &Modulator<L>,
    means: &[f64],
    lens: &[f64],
    coeffs: &[f64],
) -> Result<TheoreticalParams> {
    let pi = m.stationary()?;
    let dot = |v: &[f64]| pi.iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
    let a_step = -dot(means);
    let mu_step = dot(lens);
    let c = dot(coeffs);
    let kappa = means.iter().map(|x| -x).fold(f64::NEG_INFINITY, f64::max);
    // per regeneration cycle: expected 1/π(y0) steps
    let k = match m.unit {
        Granularity::Step => 1.0,
        Granularity::Cycle => 1.0 / pi[m.regen_state],
    };
    Ok(TheoreticalParams {
        a: a_step * k,
        mu: mu_step * k,
        c,
        kappa,
        pi: pi.clone(),
        c_y: coeffs.to_vec(),
        tail_scale: c * k,
        b_const: c / a_step,
        reference: m.reference,
        ref_shift: 0.0,
    })
}

/// One condition's numeric verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub pass: bool,
    /// Ratios on the grid; for (C2) one fitted coefficient per state.
    pub values: Vec<(f64, f64)>,
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsReport {
    /// F̄_y(x) ≤ F̄(x) on the grid.
    pub domination: ConditionCheck,
    /// F̄_y(x)/F̄(x) → c(y): (state, fitted c(y)).
    pub tail_equivalence: ConditionCheck,
    /// P(R > x)/F̄(x) → 0.
    pub light_cycles: ConditionCheck,
}

/// Numeric check of domination, tail equivalence and the cycle-length
/// condition on `grid` (increasing, at least two points).
pub fn check_conditions(
    model: &ProcessModel,
    reference: &TailModel,
    grid: &[f64],
) -> Result<ConditionsReport> {
    if grid.len() < 2 {
        return Err(Error::Invalid(
            "condition grid needs at least two points".to_string(),
        ));
    }
    let tails: Vec<Box<dyn Fn(f64) -> f64 + '_>> = match &model.kind {
        ModelKind::IidWalk { step } => {
            alloc::vec![Box::new(move |y| step.tail(y)) as Box<dyn Fn(f64) -> f64>]
        }
        ModelKind::ModulatedWalk(m) => m
            .state_laws
            .iter()
            .map(|l| Box::new(move |y| l.tail(y)) as Box<dyn Fn(f64) -> f64>)
            .collect(),
        ModelKind::ModulatedRegenerative(m) => m
            .state_laws
            .iter()
            .map(|c| {
                let s = c.tail_scale();
                Box::new(move |y| (s * c.jump.tail(y)).min(1.0)) as Box<dyn Fn(f64) -> f64>
            })
            .collect(),
        _ => {
            let p = &model.params;
            alloc::vec![Box::new(move |y| p.unit_tail(y)) as Box<dyn Fn(f64) -> f64>]
        }
    };
    let ratio = |t: &dyn Fn(f64) -> f64, x: f64| {
        let r = reference.tail(x);
        if r > 0.0 {
            t(x) / r
        } else if t(x) > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };

    let mut dom_vals = Vec::new();
    for &x in grid {
        let w = tails
            .iter()
            .map(|t| ratio(t.as_ref(), x))
            .fold(0.0, f64::max);
        dom_vals.push((x, w));
    }
    let dom_worst = dom_vals.iter().map(|v| v.1).fold(0.0, f64::max);

    let n = grid.len();
    let mut coeffs = Vec::new();
    let mut eq_pass = true;
    let mut eq_worst = 0.0f64;
    for (i, t) in tails.iter().enumerate() {
        let last = ratio(t.as_ref(), grid[n - 1]);
        let prev = ratio(t.as_ref(), grid[n - 2]);
        let drift = (last - prev).abs() / last.abs().max(1e-12);
        let settled = drift <= 0.05 || (last < 1e-9 && prev < 1e-6);
        eq_pass &= settled && last.is_finite();
        eq_worst = eq_worst.max(drift);
        coeffs.push((i as f64, last));
    }

    let cyc: Vec<(f64, f64)> = grid
        .iter()
        .map(|&x| {
            let r = reference.tail(x);
            (
                x,
                if r > 0.0 {
                    model.length_tail(x) / r
                } else {
                    f64::INFINITY
                },
            )
        })
        .collect();
    let peak = cyc.iter().map(|v| v.1).fold(0.0, f64::max);
    let final_ratio = cyc[n - 1].1;
    let cyc_pass =
        final_ratio <= 1e-3 || (final_ratio <= 0.1 * peak && final_ratio <= cyc[n - 2].1);

    Ok(ConditionsReport {
        domination: ConditionCheck {
            pass: dom_worst <= 1.0 + 1e-9,
            values: dom_vals,
            worst: dom_worst,
        },
        tail_equivalence: ConditionCheck {
            pass: eq_pass,
            values: coeffs,
            worst: eq_worst,
        },
        light_cycles: ConditionCheck {
            pass: cyc_pass,
            values: cyc,
            worst: final_ratio,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn pareto_walk(alpha: f64, shift: f64) -> ProcessModel {
        ProcessModel::iid_walk(StepLaw::shifted(
            TailModel::pareto(alpha, 1.0).unwrap(),
            shift,
        ))
        .unwrap()
    }

    #[test]
    fn iid_walk_params() {
        let m = pareto_walk(2.0, 3.0);
        let p = m.theoretical_params();
        assert!((p.a - 2.0).abs() < 1e-12);
        assert_eq!(p.mu, 1.0);
        assert!((p.c - 1.0).abs() < 1e-12);
        assert!((p.b_const - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonnegative_drift() {
        let step = StepLaw::shifted(TailModel::deterministic(1.0).unwrap(), 0.0);
        assert!(matches!(
            ProcessModel::iid_walk(step),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn fluid_cycle_shape() {
        let up = TailModel::pareto(2.0, 1.0).unwrap();
        let m = ProcessModel::new(ModelKind::FluidTwoStage { a1: 2.0, up }).unwrap();
        let p = m.theoretical_params();
        assert!((p.a - 1.0).abs() < 1e-12 && (p.mu - 3.0).abs() < 1e-12);
        let mut rng = SmallRng::seed_from_u64(3);
        for _ in 0..2000 {
            let c = m.generate_cycle(&mut rng);
            let r2 = c.length() - 2.0;
            assert!((c.xi() - (r2 - 2.0)).abs() < 1e-12);
            assert!((c.xi_star() - (r2 - 2.0).max(0.0)).abs() < 1e-12);
            let x = 1.5;
            if r2 > x + 2.0 {
                assert!((c.first_passage(x) - (2.0 + (x + 2.0))).abs() < 1e-12);
            } else {
                assert_eq!(c.first_passage(x), c.length());
            }
        }
    }

    #[test]
    fn rate_construction_units() {
        let law = TailModel::discrete_power(3.0, 10_000).unwrap();
        let rc = RateConstruction {
            law,
            phi: Phi::Power { beta: 2.0 },
            down: None,
        };
        let m = ProcessModel::new(ModelKind::RateConstruction(rc)).unwrap();
        let b = rc.down_step();
        let mut buf = CyclePath::new();
        rc.write(0.0, &mut buf);
        assert_eq!((buf.length(), buf.xi(), buf.xi_star()), (1.0, -b, 0.0));
        buf.reset();
        rc.write(5.0, &mut buf);
        assert_eq!((buf.length(), buf.xi(), buf.xi_star()), (25.0, 5.0, 5.0));
        assert_eq!(buf.first_passage(3.0), 24.0);
        assert_eq!(buf.first_passage(5.0), 25.0);
        let p = m.theoretical_params();
        assert!((p.a - (b * rc.f0() - law.mean())).abs() < 1e-12);
    }

    #[test]
    fn bg_no_claims_and_single_claim() {
        let mut buf = CyclePath::new();
        write_poisson_path(
            &mut buf,
            2.5,
            0.0,
            1.0,
            |_: &mut SmallRng| 0.0,
            &mut SmallRng::seed_from_u64(0),
        );
        assert_eq!((buf.xi(), buf.xi_star()), (-2.5, 0.0));
        buf.reset();
        buf.push(0.0, 0.0, -1.0);
        buf.push(0.3, -0.3 + 5.0, -1.0);
        buf.finish(1.0, None);
        assert!((buf.xi() - 4.0).abs() < 1e-12);
        assert!((buf.xi_star() - 4.7).abs() < 1e-12);
        assert_eq!(
            buf.crossing(4.0),
            Some(Crossing {
                time: 0.3,
                value: 4.7
            })
        );
    }

    fn two_state(p: Vec<Vec<f64>>, shifts: [f64; 2]) -> Modulator<StepLaw> {
        let law = TailModel::pareto(2.0, 1.0).unwrap();
        Modulator {
            transition: p,
            state_laws: shifts.iter().map(|&s| StepLaw::shifted(law, s)).collect(),
            regen_state: 0,
            reference: law,
            unit: Granularity::Step,
        }
    }

    #[test]
    fn modulated_params_and_alternation() {
        let m = two_state(
            alloc::vec![alloc::vec![0.5, 0.5], alloc::vec![0.5, 0.5]],
            [2.0, 4.0],
        );
        let pm = ProcessModel::new(ModelKind::ModulatedWalk(m)).unwrap();
        assert!((pm.theoretical_params().a - 2.0).abs() < 1e-12);
        assert!((pm.theoretical_params().c - 1.0).abs() < 1e-9);

        let m = two_state(
            alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![1.0, 0.0]],
            [2.0, 4.0],
        );
        let pm = ProcessModel::new(ModelKind::ModulatedWalk(m)).unwrap();
        let mut rng = SmallRng::seed_from_u64(1);
        let mut y = 0;
        for i in 0..10 {
            let (_, next) = pm.modulated_step(y, &mut rng).unwrap();
            assert_eq!(next, (i + 1) % 2);
            y = next;
        }
    }

    #[test]
    fn reducible_chain_rejected() {
        let m = two_state(
            alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.5, 0.5]],
            [2.0, 4.0],
        );
        assert!(ProcessModel::new(ModelKind::ModulatedWalk(m)).is_err());
        let m = two_state(
            alloc::vec![alloc::vec![0.7, 0.2], alloc::vec![0.5, 0.5]],
            [2.0, 4.0],
        );
        assert!(ProcessModel::new(ModelKind::ModulatedWalk(m)).is_err());
    }

    #[test]
    fn conditions_examples() {
        let law = TailModel::pareto(2.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..=8).map(|k| 10f64.powi(k)).collect();
        let m = ProcessModel::iid_walk(StepLaw::shifted(law, 2.0)).unwrap();
        let r = check_conditions(&m, &law, &grid).unwrap();
        assert!(r.domination.pass && r.tail_equivalence.pass && r.light_cycles.pass);
        assert!((r.tail_equivalence.values[0].1 - 1.0).abs() < 1e-6);

        let half = StepLaw::mixture(alloc::vec![
            StepPart {
                weight: 0.5,
                law,
                shift: 2.0
            },
            StepPart {
                weight: 0.5,
                law: TailModel::deterministic(0.0).unwrap(),
                shift: 2.0
            },
        ])
        .unwrap();
        let m = ProcessModel::iid_walk(half).unwrap();
        let r = check_conditions(&m, &law, &grid).unwrap();
        assert!((r.tail_equivalence.values[0].1 - 0.5).abs() < 0.01);

        let cc = CompoundCycle {
            length: TailModel::pareto(1.5, 1.0).unwrap(),
            jump_rate: 0.1,
            jump: law,
            drift: 1.0,
        };
        let m = ProcessModel::new(ModelKind::Regenerative(cc)).unwrap();
        assert!(!check_conditions(&m, &law, &grid).unwrap().light_cycles.pass);
    }

    #[test]
    fn json_round_trip() {
        let m = pareto_walk(2.5, 5.0 / 3.0);
        let s = serde_json::to_string(&m).unwrap();
        let back: ProcessModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn underflowing_tails_keep_their_coefficient() {
        let w = TailModel::weibull_heavy(0.5, 1.0).unwrap();
        let m = ProcessModel::iid_walk(StepLaw::shifted(w, 3.0)).unwrap();
        let p = m.theoretical_params();
        assert!((p.tail_scale - 1.0).abs() < 1e-12);
        assert!(p.asymptote(100.0).unwrap() > 0.0);
        let mix = StepLaw::mixture(alloc::vec![
            StepPart {
                weight: 0.25,
                law: w,
                shift: 3.0
            },
            StepPart {
                weight: 0.75,
                law: TailModel::exponential(1.0).unwrap(),
                shift: 3.0
            },
        ])
        .unwrap();
        assert!((mix.tail_coefficient(&w, 3.0) - 0.25).abs() < 1e-12);
    }
}
