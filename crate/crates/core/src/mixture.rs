//! Poisson kernel-based (PKB) and spherical Cauchy mixtures on the unit
//! sphere, fitted by EM with a lower bound on the mixture weights.
//!
//! Densities are taken with respect to the uniform probability measure on
//! S^{d-1}, so ρ = 0 gives density 1 everywhere.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Upper bound on the concentration: ρ ∈ [0, 1 − δ].
pub const RHO_DELTA: f64 = 1e-6;
pub const RHO_MAX: f64 = 1.0 - RHO_DELTA;

/// A component with less total responsibility than this is considered empty
/// and re-seeded.
const EMPTY_MASS: f64 = 1e-10;
const MAX_RESEEDS: u32 = 3;
const INNER_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "PKB")]
    Pkb,
    #[serde(rename = "sCauchy")]
    SCauchy,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Pkb => "PKB",
            Family::SCauchy => "sCauchy",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("pkb") {
            Ok(Family::Pkb)
        } else if s.eq_ignore_ascii_case("scauchy") || s.eq_ignore_ascii_case("spherical-cauchy") {
            Ok(Family::SCauchy)
        } else {
            Err(Error::Domain(format!("unknown mixture family {s:?}")))
        }
    }
}

impl Family {
    /// Coefficients `(A, B)` such that the log density is
    /// `A ln(1 − ρ²) − B ln ‖x − ρμ‖²`.
    fn coefficients(self, d: usize) -> (f64, f64) {
        match self {
            Family::Pkb => (1.0, d as f64 / 2.0),
            Family::SCauchy => ((d - 1) as f64, (d - 1) as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub mu: Vec<f64>,
    pub rho: f64,
}

/// `‖x − ρμ‖²` for unit `x`, `μ` with `t = x·μ`, written to keep precision
/// when ρ → 1 and t → 1.
#[inline]
fn sq_dist(t: f64, rho: f64) -> f64 {
    let one_minus_rho = 1.0 - rho;
    one_minus_rho * one_minus_rho + 2.0 * rho * (1.0 - t).max(0.0)
}

#[inline]
fn ln_one_minus_rho2(rho: f64) -> f64 {
    math::ln_1p(-rho) + math::ln_1p(rho)
}

#[inline]
fn log_density_at(family: Family, d: usize, t: f64, rho: f64) -> f64 {
    let (a, b) = family.coefficients(d);
    a * ln_one_minus_rho2(rho) - b * math::ln(sq_dist(t, rho))
}

fn check_args(x: &[f64], c: &ComponentParams, d: usize) -> Result<()> {
    if !(0.0..1.0).contains(&c.rho) {
        return Err(Error::Domain(format!("concentration {} outside [0, 1)", c.rho)));
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if c.mu.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c.mu.len() });
    }
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension {d} < 2")));
    }
    Ok(())
}

/// `ln[(1 − ρ²) / ‖x − ρμ‖^d]`.
pub fn pkb_log_density(x: &[f64], c: &ComponentParams, d: usize) -> Result<f64> {
    check_args(x, c, d)?;
    Ok(log_density_at(Family::Pkb, d, math::dot(x, &c.mu), c.rho))
}

/// `(d − 1) ln[(1 − ρ²) / ‖x − ρμ‖²]`.
pub fn scauchy_log_density(x: &[f64], c: &ComponentParams, d: usize) -> Result<f64> {
    check_args(x, c, d)?;
    Ok(log_density_at(Family::SCauchy, d, math::dot(x, &c.mu), c.rho))
}

pub fn log_density(family: Family, x: &[f64], c: &ComponentParams, d: usize) -> Result<f64> {
    match family {
        Family::Pkb => pkb_log_density(x, c, d),
        Family::SCauchy => scauchy_log_density(x, c, d),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    family: Family,
    weights: Vec<f64>,
    components: Vec<ComponentParams>,
    d: usize,
    eps: f64,
}

impl MixtureModel {
    pub fn new(family: Family, weights: Vec<f64>, components: Vec<ComponentParams>, eps: f64) -> Result<Self> {
        let k = weights.len();
        if k == 0 || components.len() != k {
            return Err(Error::LengthMismatch { expected: k, got: components.len() });
        }
        let d = components[0].mu.len();
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension {d} < 2")));
        }
        if !(eps >= 0.0) || eps * k as f64 > 1.0 {
            return Err(Error::Domain(format!("weight lower bound {eps} infeasible for K = {k}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {total}")));
        }
        for (i, (w, c)) in weights.iter().zip(&components).enumerate() {
            if !(*w >= eps * (1.0 - 1e-12)) {
                return Err(Error::Domain(format!("weight {i} = {w} below bound {eps}")));
            }
            if c.mu.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.mu.len() });
            }
            if (math::norm(&c.mu) - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("location {i} is not unit norm")));
            }
            if !(0.0..1.0).contains(&c.rho) {
                return Err(Error::Domain(format!("concentration {i} = {} outside [0, 1)", c.rho)));
            }
        }
        Ok(MixtureModel {
            family,
            weights,
            components,
            d,
            eps,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComponentParams] {
        &self.components
    }

    /// `ln f(x | φ_k)`.
    pub fn component_log_density(&self, k: usize, x: &[f64]) -> f64 {
        let c = &self.components[k];
        log_density_at(self.family, self.d, math::dot(x, &c.mu), c.rho)
    }

    /// `ln π_k + ln f(x | φ_k)` for every k.
    fn joint_log(&self, x: &[f64], out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = math::ln(self.weights[k]) + self.component_log_density(k, x);
        }
    }

    /// Mixture log density at one point.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.k()];
        self.joint_log(x, &mut buf);
        math::log_sum_exp(&buf)
    }

    /// Full-data mixture log-likelihood.
    pub fn log_likelihood(&self, xs: &[Vec<f64>]) -> f64 {
        xs.iter().map(|x| self.log_density(x)).sum()
    }
}

/// Hard cluster labels, zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memberships(pub Vec<usize>);

impl Memberships {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Posterior component probabilities at `x`.
pub fn responsibilities(model: &MixtureModel, x: &[f64]) -> Vec<f64> {
    let mut buf = vec![0.0; model.k()];
    model.joint_log(x, &mut buf);
    let total = math::log_sum_exp(&buf);
    buf.iter_mut().for_each(|v| *v = math::exp(*v - total));
    buf
}

/// Arg-max component per observation; ties go to the lowest index.
pub fn assign(model: &MixtureModel, xs: &[Vec<f64>]) -> Memberships {
    let mut buf = vec![0.0; model.k()];
    Memberships(
        xs.iter()
            .map(|x| {
                model.joint_log(x, &mut buf);
                let mut best = 0;
                for k in 1..buf.len() {
                    if buf[k] > buf[best] {
                        best = k;
                    }
                }
                best
            })
            .collect(),
    )
}

/// `Σ_i ln f(x_i | φ_{l_i})`; mixture weights are not included.
pub fn conditional_log_likelihood(model: &MixtureModel, xs: &[Vec<f64>], labels: &Memberships) -> Result<f64> {
    if labels.len() != xs.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: labels.len(),
        });
    }
    let mut total = 0.0;
    for (x, &l) in xs.iter().zip(labels.as_slice()) {
        if l >= model.k() {
            return Err(Error::Domain(format!("membership {l} outside 0..{}", model.k())));
        }
        total += model.component_log_density(l, x);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub family: Family,
    pub k: usize,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(family: Family, k: usize) -> Self {
        EmConfig {
            family,
            k,
            eps: 1e-3,
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: MixtureModel,
    /// Log-likelihood at initialization, after every iteration and after
    /// every accepted re-seed.
    pub trace: Vec<f64>,
    /// Re-seed events per component.
    pub reseeds: Vec<u32>,
    pub converged: bool,
}

/// γ-weighted log-likelihood of one component,
/// `Σ_i γ_i ln f(x_i | μ, ρ)`.
pub fn component_objective(family: Family, xs: &[Vec<f64>], weights: &[f64], params: &ComponentParams) -> f64 {
    let d = params.mu.len();
    xs.iter()
        .zip(weights)
        .map(|(x, &w)| w * log_density_at(family, d, math::dot(x, &params.mu), params.rho))
        .sum()
}

struct RhoObjective<'a> {
    a: f64,
    b: f64,
    total_weight: f64,
    t: &'a [f64],
    w: &'a [f64],
}

impl RhoObjective<'_> {
    /// First and second derivatives in ρ.
    fn derivatives(&self, rho: f64) -> (f64, f64) {
        let one_m = 1.0 - rho * rho;
        let mut g = -self.a * self.total_weight * 2.0 * rho / one_m;
        let mut h = -self.a * self.total_weight * 2.0 * (1.0 + rho * rho) / (one_m * one_m);
        for (&t, &w) in self.t.iter().zip(self.w) {
            let q = sq_dist(t, rho);
            let dq = 2.0 * (rho - t);
            g -= self.b * w * dq / q;
            h -= self.b * w * (2.0 / q - dq * dq / (q * q));
        }
        (g, h)
    }

    /// A local maximizer on [0, RHO_MAX] reached from `start` by bracketing
    /// the sign change of the derivative and safeguarded Newton.
    fn maximize_from(&self, start: f64) -> f64 {
        let (g0, _) = self.derivatives(start);
        if g0 == 0.0 {
            return start;
        }
        let (mut lo, mut hi);
        if g0 > 0.0 {
            lo = start;
            // walk towards 1 in the scale of −ln(1 − ρ)
            let mut s = -math::ln(1.0 - start);
            let s_max = -math::ln(RHO_DELTA);
            loop {
                s = ((s + 0.5) * 1.5).min(s_max);
                let cand = (1.0 - math::exp(-s)).min(RHO_MAX);
                if s >= s_max {
                    if self.derivatives(RHO_MAX).0 >= 0.0 {
                        return RHO_MAX;
                    }
                    hi = RHO_MAX;
                    break;
                }
                if self.derivatives(cand).0 < 0.0 {
                    hi = cand;
                    break;
                }
                lo = cand;
            }
        } else {
            hi = start;
            let mut cand = start;
            loop {
                cand *= 0.25;
                if cand < 1e-12 {
                    if self.derivatives(0.0).0 <= 0.0 {
                        return 0.0;
                    }
                    lo = 0.0;
                    break;
                }
                if self.derivatives(cand).0 > 0.0 {
                    lo = cand;
                    break;
                }
                hi = cand;
            }
        }
        // rtsafe: Newton step when it stays inside the bracket, else bisect.
        let mut rho = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (g, h) = self.derivatives(rho);
            if g > 0.0 {
                lo = rho;
            } else {
                hi = rho;
            }
            if g == 0.0 || hi - lo <= 4.0 * f64::EPSILON * hi.max(1e-300) {
                break;
            }
            let newton = rho - g / h;
            rho = if h < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        rho
    }
}

/// Weighted maximum-likelihood update of one component (one M-step).
///
/// Alternates a minorize-maximize step on μ (the normalized gradient of the
/// convex-in-μ objective) with a one-dimensional search in ρ, for at most
/// 50 rounds. Every accepted move is an ascent step, and the last move of
/// each round is in ρ.
pub fn m_step_component(family: Family, xs: &[Vec<f64>], weights: &[f64], current: &ComponentParams) -> ComponentParams {
    let d = current.mu.len();
    let (a, b) = family.coefficients(d);
    let total_weight: f64 = weights.iter().sum();
    let mut params = current.clone();
    let mut objective = component_objective(family, xs, weights, &params);
    let mut t = vec![0.0; xs.len()];
    for _ in 0..INNER_ITERATIONS {
        let start = objective;

        // μ: maximize the linear minorizer over the sphere.
        let mut direction = vec![0.0; d];
        for (x, &w) in xs.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let q = sq_dist(math::dot(x, &params.mu), params.rho);
            let scale = w / q;
            for (acc, xi) in direction.iter_mut().zip(x) {
                *acc += scale * xi;
            }
        }
        if math::normalize(&mut direction) {
            let trial = ComponentParams {
                mu: direction,
                rho: params.rho,
            };
            let value = component_objective(family, xs, weights, &trial);
            if value >= objective {
                params = trial;
                objective = value;
            }
        }

        // ρ: one-dimensional search with μ fixed.
        for (ti, x) in t.iter_mut().zip(xs) {
            *ti = math::dot(x, &params.mu);
        }
        let rho_obj = RhoObjective {
            a,
            b,
            total_weight,
            t: &t,
            w: weights,
        };
        let rho = rho_obj.maximize_from(params.rho);
        let trial = ComponentParams {
            mu: params.mu.clone(),
            rho,
        };
        let value = component_objective(family, xs, weights, &trial);
        if value >= objective {
            params = trial;
            objective = value;
        }

        if objective - start <= 1e-12 * (1.0 + objective.abs()) {
            break;
        }
    }
    params
}

/// Maximizes `Σ_k N_k ln π_k` subject to `π_k ≥ eps`, `Σ π_k = 1`:
/// clamp the weights that fall under the bound, renormalize the free ones,
/// and repeat until no new weight is clamped.
pub fn bounded_weights(masses: &[f64], eps: f64) -> Vec<f64> {
    let k = masses.len();
    let mut clamped = vec![false; k];
    loop {
        let free_mass: f64 = masses.iter().zip(&clamped).filter(|(_, &c)| !c).map(|(m, _)| m).sum();
        let n_clamped = clamped.iter().filter(|&&c| c).count();
        let budget = 1.0 - n_clamped as f64 * eps;
        let mut changed = false;
        let weights: Vec<f64> = masses
            .iter()
            .zip(clamped.iter_mut())
            .map(|(&m, c)| {
                if *c {
                    return eps;
                }
                let w = if free_mass > 0.0 { m / free_mass * budget } else { budget };
                if w < eps {
                    *c = true;
                    changed = true;
                }
                w
            })
            .collect();
        if !changed {
            return weights;
        }
    }
}

fn e_step(model: &MixtureModel, xs: &[Vec<f64>], gamma: &mut [Vec<f64>], point_ll: &mut [f64]) -> f64 {
    let mut buf = vec![0.0; model.k()];
    for (i, x) in xs.iter().enumerate() {
        model.joint_log(x, &mut buf);
        let total = math::log_sum_exp(&buf);
        point_ll[i] = total;
        for (k, g) in gamma.iter_mut().enumerate() {
            g[i] = math::exp(buf[k] - total);
        }
    }
    point_ll.iter().sum()
}

/// Greedy farthest-point seeding on cosine distance; the first location is
/// drawn from the seeded generator.
fn initial_locations(xs: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let first = rng.random_range(0..xs.len());
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = xs.iter().map(|x| 1.0 - math::dot(x, &xs[first])).collect();
    while chosen.len() < k {
        let mut best = 0;
        for i in 1..xs.len() {
            if nearest[i] > nearest[best] {
                best = i;
            }
        }
        chosen.push(best);
        for (n, x) in nearest.iter_mut().zip(xs) {
            *n = n.min(1.0 - math::dot(x, &xs[best]));
        }
    }
    chosen.into_iter().map(|i| xs[i].clone()).collect()
}

/// Fits a K-component mixture by EM.
///
/// Stops when one iteration gains less than `tol` in log-likelihood or
/// after `max_iter` iterations. An empty component is moved onto the
/// worst-fitted observation; more than three re-seeds of the same component
/// is reported as non-convergence.
pub fn fit_em(xs: &[Vec<f64>], config: &EmConfig) -> Result<EmFit> {
    let n = xs.len();
    let k = config.k;
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Domain(format!("n = {n} observations for K = {k} components")));
    }
    if !(config.eps >= 0.0) || config.eps * k as f64 > 1.0 {
        return Err(Error::Domain(format!("weight lower bound {} infeasible for K = {k}", config.eps)));
    }
    if !(config.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let d = xs[0].len();
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension {d} < 2")));
    }
    for x in xs {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
    }
    if d > n {
        log::warn!("embedding dimension {d} exceeds the number of observations {n}");
    }

    let components = initial_locations(xs, k, config.seed)
        .into_iter()
        .map(|mu| ComponentParams { mu, rho: 0.5 })
        .collect();
    let mut model = MixtureModel {
        family: config.family,
        weights: vec![1.0 / k as f64; k],
        components,
        d,
        eps: config.eps,
    };

    let mut gamma = vec![vec![0.0; n]; k];
    let mut point_ll = vec![0.0; n];
    let mut reseeds = vec![0u32; k];
    let mut ll = e_step(&model, xs, &mut gamma, &mut point_ll);
    let mut trace = vec![ll];
    let mut converged = false;

    for _ in 0..config.max_iter {
        // Re-seed empty components before the M-step.
        loop {
            let empty: Vec<usize> = (0..k).filter(|&j| gamma[j].iter().sum::<f64>() < EMPTY_MASS).collect();
            if empty.is_empty() {
                break;
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
            let saved = model.components.clone();
            for (slot, &j) in empty.iter().enumerate() {
                reseeds[j] += 1;
                if reseeds[j] > MAX_RESEEDS {
                    return Err(Error::NonConvergence(format!(
                        "component {j} emptied more than {MAX_RESEEDS} times (re-seeds per component: {reseeds:?})"
                    )));
                }
                log::warn!("re-seeding empty component {j}");
                model.components[j] = ComponentParams {
                    mu: xs[order[slot % n]].clone(),
                    rho: 0.5,
                };
            }
            let moved = e_step(&model, xs, &mut gamma, &mut point_ll);
            if moved < ll {
                model.components = saved;
                e_step(&model, xs, &mut gamma, &mut point_ll);
                break;
            }
            ll = moved;
            trace.push(ll);
        }

        let masses: Vec<f64> = gamma.iter().map(|g| g.iter().sum()).collect();
        model.weights = bounded_weights(&masses, config.eps);
        for j in 0..k {
            model.components[j] = m_step_component(config.family, xs, &gamma[j], &model.components[j]);
        }

        let next = e_step(&model, xs, &mut gamma, &mut point_ll);
        if !next.is_finite() {
            return Err(Error::NonConvergence("log-likelihood is not finite".into()));
        }
        let gain = next - ll;
        ll = next;
        trace.push(ll);
        if gain < config.tol {
            converged = true;
            break;
        }
    }

    Ok(EmFit {
        model,
        trace,
        reseeds,
        converged,
    })
}
