//! Ewens-Pitman sampling formula: likelihood, maximum likelihood fit,
//! expected population uniques and the two-parameter Chinese restaurant
//! process.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::contingency::FrequencyCounts;
use crate::error::{Error, Result};
use crate::math;

/// Discount values above this are clamped here.
pub const ALPHA_MAX: f64 = 1.0 - 1e-8;
const GRADIENT_TOL: f64 = 1e-6;
const NEWTON_ITERATIONS: usize = 200;
/// Below this discount the fit is reported as the one-parameter Ewens case.
const EWENS_ALPHA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwensPitmanParams {
    pub theta: f64,
    pub alpha: f64,
}

impl EwensPitmanParams {
    pub fn new(theta: f64, alpha: f64) -> Result<Self> {
        let p = EwensPitmanParams { theta, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        if !(self.theta + self.alpha > 0.0) || !self.theta.is_finite() {
            return Err(Error::Domain(format!(
                "theta = {} must exceed -alpha = {}",
                self.theta, -self.alpha
            )));
        }
        Ok(())
    }
}

/// Parameter-dependent part of the log pmf:
/// `ln (θ+α)^{(k−1)↑α} − ln (θ+1)^{(n−1)↑1} + Σ_j s_j ln (1−α)^{(j−1)↑1}`.
fn partition_log_likelihood(counts: &FrequencyCounts, p: &EwensPitmanParams) -> f64 {
    let k = counts.k();
    let n = counts.n();
    let mut ll = math::ln_rising(p.theta + p.alpha, k.saturating_sub(1), p.alpha)
        - math::ln_rising(p.theta + 1.0, n.saturating_sub(1), 1.0);
    let base = math::ln_gamma(1.0 - p.alpha);
    for (j, s) in counts.iter() {
        if j > 1 {
            ll += s as f64 * (math::ln_gamma(j as f64 - p.alpha) - base);
        }
    }
    ll
}

/// Log probability of the frequency counts under the sampling formula.
pub fn epsf_log_pmf(counts: &FrequencyCounts, params: &EwensPitmanParams) -> Result<f64> {
    params.validate()?;
    let n = counts.n();
    if n == 0 {
        return Ok(0.0);
    }
    let mut combinatorial = math::ln_gamma(n as f64 + 1.0);
    for (j, s) in counts.iter() {
        combinatorial -= math::ln_gamma(s as f64 + 1.0) + s as f64 * math::ln_gamma(j as f64 + 1.0);
    }
    Ok(combinatorial + partition_log_likelihood(counts, params))
}

/// Derivatives of the log-likelihood in (θ, α).
struct Derivatives {
    value: f64,
    l_t: f64,
    l_a: f64,
    l_tt: f64,
    l_ta: f64,
    l_aa: f64,
}

fn derivatives(counts: &FrequencyCounts, theta: f64, alpha: f64) -> Derivatives {
    let k = counts.k();
    let n = counts.n();
    let mut value = 0.0;
    let (mut l_t, mut l_a, mut l_tt, mut l_ta, mut l_aa) = (0.0, 0.0, 0.0, 0.0, 0.0);
    // the (θ + iα) factors, summed directly
    for i in 1..k {
        let i = i as f64;
        let v = theta + i * alpha;
        let inv = 1.0 / v;
        value += math::ln(v);
        l_t += inv;
        l_a += i * inv;
        l_tt -= inv * inv;
        l_ta -= i * inv * inv;
        l_aa -= i * i * inv * inv;
    }
    // the (θ + i) factors, through polygamma differences
    if n > 1 {
        let top = theta + n as f64;
        value -= math::ln_gamma_ratio(theta + 1.0, n as f64 - 1.0, 0.0);
        l_t -= math::digamma(top) - math::digamma(theta + 1.0);
        l_tt += math::trigamma(theta + 1.0) - math::trigamma(top);
    }
    let lg_base = math::ln_gamma(1.0 - alpha);
    let psi_base = math::digamma(1.0 - alpha);
    let psi1_base = math::trigamma(1.0 - alpha);
    for (j, s) in counts.iter() {
        if j > 1 {
            let s = s as f64;
            let x = j as f64 - alpha;
            value += s * (math::ln_gamma(x) - lg_base);
            l_a += s * (psi_base - math::digamma(x));
            l_aa += s * (math::trigamma(x) - psi1_base);
        }
    }
    Derivatives {
        value,
        l_t,
        l_a,
        l_tt,
        l_ta,
        l_aa,
    }
}

/// Value, gradient and Hessian in the unconstrained coordinates
/// `a = ln(θ + α)`, `b = logit(α)`.
fn transformed(counts: &FrequencyCounts, a: f64, b: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let alpha = math::sigmoid(b);
    let ea = math::exp(a);
    let theta = ea - alpha;
    let d = derivatives(counts, theta, alpha);
    let da = alpha * (1.0 - alpha);
    let dda = da * (1.0 - 2.0 * alpha);
    let g = [d.l_t * ea, (d.l_a - d.l_t) * da];
    let h_aa = d.l_tt * ea * ea + d.l_t * ea;
    let h_ab = ea * da * (d.l_ta - d.l_tt);
    let h_bb = da * da * (d.l_aa - 2.0 * d.l_ta + d.l_tt) + (d.l_a - d.l_t) * dda;
    (d.value, g, [[h_aa, h_ab], [h_ab, h_bb]])
}

/// Same in the single coordinate `a = ln θ` with α = 0 or fixed.
fn transformed_fixed_alpha(counts: &FrequencyCounts, a: f64, alpha: f64) -> (f64, f64, f64) {
    let ea = math::exp(a);
    let d = derivatives(counts, ea - alpha, alpha);
    (d.value, d.l_t * ea, d.l_tt * ea * ea + d.l_t * ea)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// α̂ at zero: the one-parameter Ewens fit.
    Ewens,
    /// α̂ clamped just below one.
    AlphaClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub params: EwensPitmanParams,
    pub log_likelihood: f64,
    /// Euclidean gradient norm in (ln(θ+α), logit α), or in ln θ alone for
    /// boundary fits.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub start: usize,
    pub boundary: Option<Boundary>,
}

struct Attempt {
    a: f64,
    b: f64,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
}

/// Log-likelihood changes below this are rounding noise; near the optimum
/// a step is then judged by the gradient instead.
fn rounding(value: f64) -> f64 {
    1e-12 * (1.0 + libm::fabs(value))
}

fn norm2(g: [f64; 2]) -> f64 {
    math::sqrt(g[0] * g[0] + g[1] * g[1])
}

fn newton_2d(counts: &FrequencyCounts, mut a: f64, mut b: f64) -> Attempt {
    let (mut value, mut g, mut h) = transformed(counts, a, b);
    let mut iterations = 0;
    while iterations < NEWTON_ITERATIONS {
        let gnorm = math::sqrt(g[0] * g[0] + g[1] * g[1]);
        if gnorm < GRADIENT_TOL || !value.is_finite() {
            break;
        }
        iterations += 1;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = if h[0][0] < 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            // damped gradient ascent
            let scale = 1.0 / gnorm.max(1.0);
            [g[0] * scale, g[1] * scale]
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let na = a + t * step[0];
            let nb = b + t * step[1];
            let (nv, ng, nh) = transformed(counts, na, nb);
            let flat = nv.is_finite() && nv >= value - rounding(value) && norm2(ng) < gnorm;
            if nv.is_finite() && (nv > value || flat) {
                a = na;
                b = nb;
                value = nv;
                g = ng;
                h = nh;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Attempt {
        a,
        b,
        value,
        gradient_norm: math::sqrt(g[0] * g[0] + g[1] * g[1]),
        iterations,
    }
}

fn newton_1d(counts: &FrequencyCounts, mut a: f64, alpha: f64) -> Attempt {
    let (mut value, mut g, mut h) = transformed_fixed_alpha(counts, a, alpha);
    let mut iterations = 0;
    while iterations < NEWTON_ITERATIONS && libm::fabs(g) >= GRADIENT_TOL && value.is_finite() {
        iterations += 1;
        let step = if h < 0.0 { -g / h } else { g / libm::fabs(g).max(1.0) };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let na = a + t * step;
            let (nv, ng, nh) = transformed_fixed_alpha(counts, na, alpha);
            let flat = nv.is_finite() && nv >= value - rounding(value) && libm::fabs(ng) < libm::fabs(g);
            if nv.is_finite() && (nv > value || flat) {
                a = na;
                value = nv;
                g = ng;
                h = nh;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Attempt {
        a,
        b: f64::NAN,
        value,
        gradient_norm: libm::fabs(g),
        iterations,
    }
}

/// Maximum likelihood estimate of (θ, α) from frequency counts.
///
/// Newton-Raphson in `(ln(θ+α), logit α)` from four starting points with a
/// backtracking line search; falls back to damped gradient steps where the
/// Hessian is not negative definite. Requires at least two cells.
pub fn fit_mle(counts: &FrequencyCounts) -> Result<MleFit> {
    let k = counts.k();
    let n = counts.n();
    if k < 2 {
        return Err(Error::Domain(format!("need at least two cells, got k = {k}")));
    }
    let ratio = counts.s1() as f64 / k as f64;
    let alpha_m = ratio.clamp(0.05, 0.95);
    let starts = [(1.0, alpha_m), (10.0, alpha_m), (1.0, 0.5), (50.0, 0.2)];

    let mut best: Option<(usize, Attempt)> = None;
    let mut diagnostics = Vec::new();
    for (i, &(theta, alpha)) in starts.iter().enumerate() {
        let attempt = newton_2d(counts, math::ln(theta + alpha), math::logit(alpha));
        diagnostics.push(format!(
            "start {i}: loglik {:.6}, |grad| {:.3e}, {} iterations",
            attempt.value, attempt.gradient_norm, attempt.iterations
        ));
        let better = match &best {
            None => attempt.value.is_finite(),
            Some((_, b)) => attempt.value > b.value || (attempt.value == b.value && attempt.gradient_norm < b.gradient_norm),
        };
        if better {
            best = Some((i, attempt));
        }
    }
    let (start, attempt) = best.ok_or_else(|| Error::NonConvergence(diagnostics.join("; ")))?;
    let alpha = math::sigmoid(attempt.b);

    if alpha < EWENS_ALPHA {
        let ewens = newton_1d(counts, attempt.a, 0.0);
        return finish(counts, ewens, 0.0, start, Some(Boundary::Ewens), &diagnostics);
    }
    if alpha > ALPHA_MAX {
        log::warn!("alpha estimate {alpha} clamped to {ALPHA_MAX} (n = {n}, k = {k})");
        let clamped = newton_1d(counts, attempt.a, ALPHA_MAX);
        return finish(counts, clamped, ALPHA_MAX, start, Some(Boundary::AlphaClamped), &diagnostics);
    }
    if attempt.gradient_norm >= GRADIENT_TOL {
        return Err(Error::NonConvergence(format!(
            "no start reached gradient norm {GRADIENT_TOL:e}: {}",
            diagnostics.join("; ")
        )));
    }
    let params = EwensPitmanParams {
        theta: math::exp(attempt.a) - alpha,
        alpha,
    };
    params.validate()?;
    Ok(MleFit {
        params,
        log_likelihood: attempt.value,
        gradient_norm: attempt.gradient_norm,
        iterations: attempt.iterations,
        start,
        boundary: None,
    })
}

fn finish(
    counts: &FrequencyCounts,
    attempt: Attempt,
    alpha: f64,
    start: usize,
    boundary: Option<Boundary>,
    diagnostics: &[String],
) -> Result<MleFit> {
    if attempt.gradient_norm >= GRADIENT_TOL {
        return Err(Error::NonConvergence(format!(
            "boundary fit ({boundary:?}) did not converge, |grad| {:.3e}; {}",
            attempt.gradient_norm,
            diagnostics.join("; ")
        )));
    }
    let params = EwensPitmanParams {
        theta: math::exp(attempt.a) - alpha,
        alpha,
    };
    params.validate()?;
    Ok(MleFit {
        params,
        log_likelihood: partition_log_likelihood(counts, &params),
        gradient_norm: attempt.gradient_norm,
        iterations: attempt.iterations,
        start,
        boundary,
    })
}

fn check_population(params: &EwensPitmanParams, n_pop: f64) -> Result<()> {
    params.validate()?;
    if !(n_pop >= 1.0) || !n_pop.is_finite() {
        return Err(Error::Domain(format!("population size {n_pop} must be at least 1")));
    }
    Ok(())
}

/// `E(S₁) = N (θ+α)^{(N−1)↑}/(θ+1)^{(N−1)↑}` through log-gamma ratios.
pub fn expected_uniques_exact(params: &EwensPitmanParams, n_pop: f64) -> Result<f64> {
    check_population(params, n_pop)?;
    if n_pop == 1.0 {
        return Ok(1.0);
    }
    let (theta, alpha) = (params.theta, params.alpha);
    let log_ratio = math::ln_gamma_ratio(n_pop, theta + alpha - 1.0, theta) + math::ln_gamma(theta + 1.0)
        - math::ln_gamma(theta + alpha);
    Ok(n_pop * math::exp(log_ratio))
}

/// `ln[Γ(θ+1)/Γ(θ+α)]`.
fn ln_leading_constant(params: &EwensPitmanParams) -> f64 {
    math::ln_gamma(params.theta + 1.0) - math::ln_gamma(params.theta + params.alpha)
}

/// Large-N approximation `Γ(θ+1)/Γ(θ+α) N^α`.
pub fn expected_uniques_asymptotic(params: &EwensPitmanParams, n_pop: f64) -> Result<f64> {
    check_population(params, n_pop)?;
    Ok(math::exp(ln_leading_constant(params) + params.alpha * math::ln(n_pop)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub n_pop: f64,
    pub s1_hat: f64,
    /// Ratio before clamping; may exceed one.
    pub p_hat_raw: f64,
    /// Ratio clamped to [0, 1].
    pub p_hat: f64,
}

/// Estimated share of sample uniques that are population uniques,
/// `p̂ = (Ŝ₁/s₁)(n/N)` with the large-N form of Ŝ₁.
pub fn pop_unique_ratio(params: &EwensPitmanParams, n_pop: f64, n: u64, s1: u64) -> Result<PopulationEstimate> {
    check_population(params, n_pop)?;
    if s1 == 0 {
        return Err(Error::Undefined("population unique ratio with no sample uniques"));
    }
    if n < s1 {
        return Err(Error::Domain(format!("sample size {n} below sample uniques {s1}")));
    }
    if n_pop < n as f64 {
        return Err(Error::Domain(format!("population size {n_pop} below sample size {n}")));
    }
    let log_c = ln_leading_constant(params);
    let ln_n = math::ln(n_pop);
    let s1_hat = math::exp(log_c + params.alpha * ln_n);
    let p_hat_raw = math::exp(log_c + (params.alpha - 1.0) * ln_n) * n as f64 / s1 as f64;
    if p_hat_raw > 1.0 {
        log::warn!("population unique ratio {p_hat_raw} clamped to 1");
    }
    Ok(PopulationEstimate {
        n_pop,
        s1_hat,
        p_hat_raw,
        p_hat: p_hat_raw.clamp(0.0, 1.0),
    })
}

/// Draws a partition of `n` items from the two-parameter Chinese
/// restaurant process and returns its frequency counts.
pub fn sample_crp(params: &EwensPitmanParams, n: u64, seed: u64) -> Result<FrequencyCounts> {
    params.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_crp_with(params, n, &mut rng)
}

/// As [`sample_crp`], drawing from a caller-owned generator.
pub fn sample_crp_with<R: Rng + ?Sized>(params: &EwensPitmanParams, n: u64, rng: &mut R) -> Result<FrequencyCounts> {
    params.validate()?;
    let (theta, alpha) = (params.theta, params.alpha);
    let mut sizes: Vec<u64> = Vec::new();
    // table of every seated customer, for size-biased table picks
    let mut seat: Vec<u32> = Vec::with_capacity(n as usize);
    for i in 0..n {
        let k = sizes.len() as f64;
        let open_new = i == 0 || rng.random::<f64>() * (theta + i as f64) < theta + alpha * k;
        if open_new {
            seat.push(sizes.len() as u32);
            sizes.push(1);
            continue;
        }
        // table j with probability ∝ n_j − α: a size-biased pick, thinned
        let table = loop {
            let j = seat[rng.random_range(0..seat.len())] as usize;
            let size = sizes[j] as f64;
            if alpha == 0.0 || rng.random::<f64>() * size < size - alpha {
                break j;
            }
        };
        sizes[table] += 1;
        seat.push(table as u32);
    }
    Ok(FrequencyCounts::from_cell_sizes(sizes))
}

/// All partitions of `n` as frequency counts (`s_j` for j = 1..=n).
pub fn partitions(n: u64) -> Vec<FrequencyCounts> {
    fn rec(remaining: u64, max_part: u64, parts: &mut Vec<u64>, out: &mut Vec<FrequencyCounts>) {
        if remaining == 0 {
            out.push(FrequencyCounts::from_cell_sizes(parts.iter().copied()));
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            parts.push(part);
            rec(remaining - part, part, parts, out);
            parts.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut vec![], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(sizes: &[u64]) -> FrequencyCounts {
        FrequencyCounts::from_cell_sizes(sizes.iter().copied())
    }

    #[test]
    fn two_singletons() {
        let p = EwensPitmanParams::new(1.0, 0.5).unwrap();
        let v = epsf_log_pmf(&counts(&[1, 1]), &p).unwrap();
        assert!((v - math::ln(0.75)).abs() < 1e-14);
        let v = epsf_log_pmf(&counts(&[2]), &p).unwrap();
        assert!((v - math::ln(0.25)).abs() < 1e-14);
    }

    #[test]
    fn single_item_is_certain() {
        let p = EwensPitmanParams::new(3.0, 0.2).unwrap();
        assert_eq!(epsf_log_pmf(&counts(&[1]), &p).unwrap(), 0.0);
    }

    #[test]
    fn partition_count_of_six() {
        assert_eq!(partitions(6).len(), 11);
        assert_eq!(partitions(8).len(), 22);
    }

    #[test]
    fn pmf_sums_to_one_including_negative_theta() {
        for &(t, a) in &[(2.0, 0.3), (-0.2, 0.5), (0.5, 0.0)] {
            let p = EwensPitmanParams::new(t, a).unwrap();
            let total: f64 = partitions(6).iter().map(|c| math::exp(epsf_log_pmf(c, &p).unwrap())).sum();
            assert!((total - 1.0).abs() < 1e-12, "({t}, {a}): {total}");
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(EwensPitmanParams::new(-0.6, 0.5).is_err());
        assert!(EwensPitmanParams::new(1.0, 1.0).is_err());
        assert!(EwensPitmanParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn expected_uniques_edge_cases() {
        let p = EwensPitmanParams::new(1.0, 0.5).unwrap();
        assert_eq!(expected_uniques_exact(&p, 1.0).unwrap(), 1.0);
        assert!(expected_uniques_exact(&p, 1e30).unwrap().is_finite());
        assert!(expected_uniques_asymptotic(&p, 1e30).unwrap().is_finite());
        let direct = math::exp(math::ln_gamma(2.0) - math::ln_gamma(1.5) + 0.5 * math::ln(1e6));
        assert!((expected_uniques_asymptotic(&p, 1e6).unwrap() - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn near_one_discount_makes_everything_unique() {
        let p = EwensPitmanParams::new(0.0, 1.0 - 1e-9).unwrap();
        let e = expected_uniques_asymptotic(&p, 1e4).unwrap();
        assert!((e / 1e4 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ratio_requires_sample_uniques() {
        let p = EwensPitmanParams::new(1.0, 0.5).unwrap();
        assert!(pop_unique_ratio(&p, 1e10, 100, 0).is_err());
        assert!(pop_unique_ratio(&p, 10.0, 100, 5).is_err());
    }

    #[test]
    fn ratio_at_large_population_vanishes() {
        let p = EwensPitmanParams::new(15.0, 0.769).unwrap();
        let est = pop_unique_ratio(&p, 1e30, 1819, 400).unwrap();
        assert!(est.p_hat < 1e-5);
    }

    #[test]
    fn ratio_clamps_to_one() {
        let p = EwensPitmanParams::new(1e-6, 1.0 - 1e-9).unwrap();
        let est = pop_unique_ratio(&p, 100.0, 100, 10).unwrap();
        assert!(est.p_hat_raw > 1.0);
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn crp_single_customer_and_determinism() {
        let p = EwensPitmanParams::new(1.0, 0.5).unwrap();
        assert_eq!(sample_crp(&p, 1, 9).unwrap().s1(), 1);
        assert_eq!(sample_crp(&p, 1000, 4).unwrap(), sample_crp(&p, 1000, 4).unwrap());
        let c = sample_crp(&p, 1000, 4).unwrap();
        assert_eq!(c.n(), 1000);
    }

    #[test]
    fn mle_needs_two_cells() {
        assert!(fit_mle(&counts(&[5])).is_err());
    }

    #[test]
    fn mle_gradient_matches_finite_differences() {
        let c = counts(&[1, 1, 1, 2, 2, 3, 5, 8, 1, 1]);
        let (a, b) = (math::ln(2.5), math::logit(0.3));
        let (_, g, h) = transformed(&c, a, b);
        let f = |a: f64, b: f64| transformed(&c, a, b).0;
        let e = 1e-6;
        let ga = (f(a + e, b) - f(a - e, b)) / (2.0 * e);
        let gb = (f(a, b + e) - f(a, b - e)) / (2.0 * e);
        assert!((ga - g[0]).abs() < 1e-7 && (gb - g[1]).abs() < 1e-7);
        let gr = |a: f64, b: f64| transformed(&c, a, b).1;
        let haa = (gr(a + e, b)[0] - gr(a - e, b)[0]) / (2.0 * e);
        let hab = (gr(a, b + e)[0] - gr(a, b - e)[0]) / (2.0 * e);
        let hbb = (gr(a, b + e)[1] - gr(a, b - e)[1]) / (2.0 * e);
        assert!((haa - h[0][0]).abs() < 1e-6);
        assert!((hab - h[0][1]).abs() < 1e-6);
        assert!((hbb - h[1][1]).abs() < 1e-6);
    }

    #[test]
    fn mle_on_moderate_sample() {
        let p = EwensPitmanParams::new(5.0, 0.5).unwrap();
        let c = sample_crp(&p, 5000, 1).unwrap();
        let fit = fit_mle(&c).unwrap();
        assert!(fit.gradient_norm < 1e-6);
        assert!((fit.params.alpha - 0.5).abs() < 0.1, "{fit:?}");
    }
}
