//! Special functions, quadrature and uniform helpers shared by the rest of
//! the crate. Everything here is `no_std`; transcendental functions come
//! from `libm`.

// published coefficients are kept digit for digit
#![allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]

use alloc::vec::Vec;
// needed for float methods under no_std; newer toolchains misreport it as unused
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

pub(crate) const LN_2PI_HALF: f64 = 0.918_938_533_204_672_8;

/// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Exponential(rate) draw.
pub fn exp_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    -open01(rng).ln() / rate
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

/// Standard normal upper tail P(Z > z).
pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_2PI_HALF).exp()
}

/// ln P(Z > z), accurate far into the upper tail where the tail itself
/// underflows.
pub fn log_norm_sf(z: f64) -> f64 {
    if z < 35.0 {
        norm_sf(z).ln()
    } else {
        let z2 = 1.0 / (z * z);
        let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2 + 105.0 * z2 * z2 * z2 * z2;
        -0.5 * z * z - LN_2PI_HALF - z.ln() + series.ln()
    }
}

/// Inverse of the standard normal CDF (Wichura, AS 241), where the argument is
/// supplied as `ln p` so that tail probabilities below the `f64` range are
/// still invertible.
fn norm_quantile_from_log(log_p: f64) -> f64 {
    let p = log_p.exp();
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545_5 + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_596)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    // ln of the smaller of p and 1 - p
    let log_r = if q < 0.0 { log_p } else { ln_1p(-p) };
    let mut r = (-log_r).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414_1e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_344_9e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_75)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446_0e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// z such that P(Z > z) = exp(log_sf).
pub fn norm_isf_log(log_sf: f64) -> f64 {
    -norm_quantile_from_log(log_sf)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    norm_quantile_from_log(p.ln())
}

/// ln Q(a, x), the log of the regularized upper incomplete gamma function.
pub fn log_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series for P, then complement
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        let p = (sum.ln() + prefix).exp();
        ln_1p(-p.min(1.0))
    } else {
        // modified Lentz continued fraction for Q
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h.ln() + prefix
    }
}

/// Σ_{k=n}^∞ k^{-s} for s > 1 and n ≥ 1 (Hurwitz zeta at integer offset).
pub fn zeta_tail(s: f64, n: u64) -> f64 {
    const SWITCH: u64 = 16;
    let mut direct = 0.0;
    let mut start = n.max(1);
    while start < SWITCH {
        direct += (start as f64).powf(-s);
        start += 1;
    }
    let big_n = start as f64;
    // Euler-Maclaurin with Bernoulli corrections up to B_8
    let lead = big_n.powf(1.0 - s) / (s - 1.0);
    let t0 = big_n.powf(-s);
    let inv = 1.0 / big_n;
    let mut corr = 0.5 * t0;
    let mut term = s * t0 * inv; // s N^{-s-1}
    corr += term / 12.0;
    term *= (s + 1.0) * (s + 2.0) * inv * inv;
    corr -= term / 720.0;
    term *= (s + 3.0) * (s + 4.0) * inv * inv;
    corr += term / 30_240.0;
    term *= (s + 5.0) * (s + 6.0) * inv * inv;
    corr -= term / 1_209_600.0;
    direct + lead + corr
}

/// Σ_{k=n}^{m} k^{-s}, exact to rounding for short ranges.
pub fn power_sum(s: f64, n: u64, m: u64) -> f64 {
    if m < n {
        return 0.0;
    }
    if m - n < 64 {
        let mut acc = 0.0;
        let mut k = m;
        // smallest terms first
        loop {
            acc += (k as f64).powf(-s);
            if k == n {
                break;
            }
            k -= 1;
        }
        return acc;
    }
    zeta_tail(s, n) - zeta_tail(s, m + 1)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Outcome of a quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss-Kronrod quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
        });
    }
    const MAX_PANELS: usize = 4000;
    let (v, e) = gk15(&f, a, b);
    let mut panels: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature { error: err });
        }
        let (worst, _) =
            panels.iter().enumerate().fold(
                (0, -1.0),
                |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc },
            );
        let (lo, hi, pv, pe) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision
            panels.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated cancellation from the running updates
    let value = panels.iter().map(|p| p.2).sum();
    let error = panels.iter().map(|p| p.3).sum();
    Ok(Quad { value, error })
}

/// ∫_a^∞ f for a nonnegative integrand, using geometrically growing panels
/// [a + h(2^k - 1), a + h(2^{k+1} - 1)] with a ratio-based remainder
/// estimate. Suitable for power, exponential and stretched-exponential
/// decay alike.
pub fn integrate_tail<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    first_width: f64,
    rel_tol: f64,
) -> Result<Quad> {
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut lo = a;
    let mut width = first_width;
    let mut prev = f64::NAN;
    for _ in 0..1100 {
        let hi = lo + width;
        if !hi.is_finite() {
            break;
        }
        let block = integrate(&f, lo, hi, 0.1 * rel_tol, 0.01 * rel_tol * sum)?;
        sum += block.value;
        err += block.error;
        let c = block.value;
        if sum > 0.0 && c <= rel_tol * 1e-2 * sum && (prev.is_nan() || c <= prev) {
            let rem = if prev > 0.0 && c < prev {
                let r = c / prev;
                c * r / (1.0 - r)
            } else {
                c
            };
            if rem <= 0.1 * rel_tol * sum {
                return Ok(Quad {
                    value: sum,
                    error: err + rem,
                });
            }
        }
        if sum == 0.0 && c == 0.0 && !prev.is_nan() && prev == 0.0 {
            // integrand vanished over two full panels starting from a
            return Ok(Quad {
                value: 0.0,
                error: 0.0,
            });
        }
        prev = c;
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Quadrature {
        error: err.max(sum),
    })
}

/// Least-squares slope of y on x.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
