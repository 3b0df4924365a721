//! Special functions and small numeric helpers.
//!
//! `libm` supplies the elementary functions and `lgamma`; digamma and
//! trigamma are evaluated by upward recurrence followed by their asymptotic
//! series.

use alloc::vec::Vec;

pub(crate) const LN_2: f64 = core::f64::consts::LN_2;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Digamma function ψ(x) for `x > 0`.
pub fn digamma(mut x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln x - 1/(2x) - Σ B_{2k} / (2k x^{2k})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + ln(x) - 0.5 * inv - series
}

/// Trigamma function ψ₁(x) for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1}
    let series = inv
        * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))));
    acc + inv + 0.5 * inv2 + series
}

/// `ln Γ(x + a) − ln Γ(x + b)` that stays accurate when `x` is huge
/// (up to 1e30 and beyond) by switching to the Stirling expansion in
/// Bernoulli polynomials.
pub fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    let scale = 1.0 + libm::fabs(a) + libm::fabs(b);
    if x >= 1.0e7 && x >= 1.0e4 * scale * scale {
        let b2 = |t: f64| t * t - t + 1.0 / 6.0;
        let b3 = |t: f64| t * t * t - 1.5 * t * t + 0.5 * t;
        let b4 = |t: f64| t * t * t * t - 2.0 * t * t * t + t * t - 1.0 / 30.0;
        let inv = 1.0 / x;
        (a - b) * ln(x) + (b2(a) - b2(b)) * inv / 2.0 - (b3(a) - b3(b)) * inv * inv / 6.0
            + (b4(a) - b4(b)) * inv * inv * inv / 12.0
    } else {
        ln_gamma(x + a) - ln_gamma(x + b)
    }
}

/// Logarithm of the generalized ascending factorial
/// `x (x + a) (x + 2a) ⋯ (x + (m − 1) a)` for `x > 0`, `a ≥ 0`.
///
/// Evaluated through log-gamma; falls back to a sum of logs when `x / a`
/// is so large that the gamma difference would cancel.
pub fn ln_rising(x: f64, m: u64, a: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if a == 0.0 {
        return m as f64 * ln(x);
    }
    let u = x / a;
    if u > 1.0e6 {
        return (0..m).map(|i| ln(x + i as f64 * a)).sum();
    }
    m as f64 * ln(a) + ln_gamma_ratio(u, m as f64, 0.0)
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + ln(values.iter().map(|v| exp(v - max)).sum::<f64>())
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_sf_df1(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc(sqrt(x / 2.0))
}

/// Two-sided exact binomial test of `k` successes in `n` trials at p = 1/2.
pub fn binomial_two_sided_half(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let tail = k.min(n - k);
    let terms: Vec<f64> = (0..=tail)
        .map(|i| ln_choose(n, i) - n as f64 * LN_2)
        .collect();
    (2.0 * exp(log_sum_exp(&terms))).min(1.0)
}

/// Percentile with linear interpolation between closest ranks
/// (`p` in [0, 100]). `values` need not be sorted.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = libm::ceil(rank) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Scales `v` to unit norm in place. Returns `false` for a zero or
/// non-finite vector, leaving it untouched.
pub fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p) - ln_1p(-p)
}
