//! Absolute-error risk of a fitted model, and the bounds that control it.
//!
//! The risk on a window `[p − T, p + T]` ("body") is computed by quadrature
//! and split against two upper bounds: `I₁` from the coefficient errors and
//! `I₂` from the Taylor truncation error. The risk outside the window is
//! controlled by a closed-form subgaussian tail bound.

use serde::{Deserialize, Serialize};

use crate::analytic::{truncation_sup_error, FunctionSpec};
use crate::dist::{DistributionSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::learner::PolynomialModel;
use crate::quad::{self, Quadrature, DEFAULT_ABS_TOL, DEFAULT_MAX_SUBDIVISIONS};

/// Exponent of the moment argument behind [`tail_bound`].
pub const DEFAULT_P_EXP: f64 = 2.0;
/// Slack allowed in `body ≤ I₁ + I₂`.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-8;

/// `|y − ŷ(x)|`
pub fn cost(model: &PolynomialModel, x: f64, y: f64) -> f64 {
    (y - model.eval(x)).abs()
}

pub fn empirical_risk(model: &PolynomialModel, data: &LabeledDataset) -> Result<f64> {
    Ok(empirical_risk_with_se(model, data)?.0)
}

/// Mean cost and its standard error.
pub fn empirical_risk_with_se(
    model: &PolynomialModel,
    data: &LabeledDataset,
) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Argument(
            "empirical risk needs at least one sample".into(),
        ));
    }
    let n = data.len() as f64;
    let costs: Vec<f64> = data
        .points
        .iter()
        .map(|&(x, y)| cost(model, x, y))
        .collect();
    let mean = costs.iter().sum::<f64>() / n;
    if data.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// `∫ g·density` over `(lo, hi)` (either end may be infinite), split at the
/// density's breakpoints and clipped to its support. Atoms are not included.
fn integrate_continuous<G: Fn(f64) -> f64>(
    g: G,
    d: &DistributionSpec,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Quadrature> {
    let (mut lo, mut hi) = (lo, hi);
    if let Some((a, b)) = d.support() {
        lo = lo.max(a);
        hi = hi.min(b);
    }
    let mut total = Quadrature {
        value: 0.0,
        abs_error: 0.0,
        evaluations: 0,
        subdivisions: 0,
    };
    if !(lo < hi) {
        return Ok(total);
    }
    let mut edges = vec![lo];
    let mut cuts: Vec<f64> = d
        .breakpoints()
        .into_iter()
        .filter(|&b| b > lo && b < hi)
        .collect();
    if cuts.is_empty() && lo.is_infinite() && hi.is_infinite() {
        cuts.push(0.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    edges.extend(cuts);
    edges.push(hi);

    let integrand = |x: f64| {
        let w = d.density(x);
        if w == 0.0 {
            0.0
        } else {
            g(x) * w
        }
    };
    let share = tol / (edges.len() - 1) as f64;
    for w in edges.windows(2) {
        let q = match (w[0].is_finite(), w[1].is_finite()) {
            (true, true) => {
                quad::integrate(integrand, w[0], w[1], share, DEFAULT_MAX_SUBDIVISIONS)?
            }
            (false, true) => {
                quad::integrate_from_neg_infinity(integrand, w[1], share, DEFAULT_MAX_SUBDIVISIONS)?
            }
            (true, false) => {
                quad::integrate_to_infinity(integrand, w[0], share, DEFAULT_MAX_SUBDIVISIONS)?
            }
            (false, false) => unreachable!("a cut separates the two infinite ends"),
        };
        total.value += q.value;
        total.abs_error += q.abs_error;
        total.evaluations += q.evaluations;
        total.subdivisions += q.subdivisions;
    }
    Ok(total)
}

/// Quadrature value of a risk integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskIntegral {
    pub value: f64,
    pub abs_error: f64,
}

/// `∫_{|x−p| ≤ T} |f − ŷ| dP`, atoms included.
pub fn body_risk(
    model: &PolynomialModel,
    f: &FunctionSpec,
    d: &DistributionSpec,
    t: f64,
) -> Result<f64> {
    Ok(body_risk_detailed(model, f, d, t)?.value)
}

pub fn body_risk_detailed(
    model: &PolynomialModel,
    f: &FunctionSpec,
    d: &DistributionSpec,
    t: f64,
) -> Result<RiskIntegral> {
    d.validate()?;
    check_half_width(t)?;
    let p = model.expansion_point;
    let g = |x: f64| (f.eval(x) - model.eval(x)).abs();
    let q = integrate_continuous(g, d, p - t, p + t, DEFAULT_ABS_TOL)?;
    let atoms: f64 = d
        .atoms()
        .into_iter()
        .filter(|(x, _)| (x - p).abs() <= t)
        .map(|(x, w)| w * g(x))
        .sum();
    Ok(RiskIntegral {
        value: q.value.max(0.0) + atoms,
        abs_error: q.abs_error,
    })
}

/// Quadrature of the risk on each side of the window: `(x < p − T, x > p + T)`.
pub fn tail_risk(
    model: &PolynomialModel,
    f: &FunctionSpec,
    d: &DistributionSpec,
    t: f64,
) -> Result<(RiskIntegral, RiskIntegral)> {
    d.validate()?;
    check_half_width(t)?;
    let p = model.expansion_point;
    let g = |x: f64| (f.eval(x) - model.eval(x)).abs();
    let atoms = d.atoms();
    let side = |lo: f64, hi: f64, keep: &dyn Fn(f64) -> bool| -> Result<RiskIntegral> {
        let q = integrate_continuous(g, d, lo, hi, DEFAULT_ABS_TOL / 2.0)?;
        let mass: f64 = atoms
            .iter()
            .filter(|(x, _)| keep(*x))
            .map(|&(x, w)| w * g(x))
            .sum();
        Ok(RiskIntegral {
            value: q.value.max(0.0) + mass,
            abs_error: q.abs_error,
        })
    };
    let left = side(f64::NEG_INFINITY, p - t, &|x| x < p - t)?;
    let right = side(p + t, f64::INFINITY, &|x| x > p + t)?;
    Ok((left, right))
}

fn check_half_width(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "half-width T must be positive and finite, got {t}"
        )))
    }
}

/// Closed-form bound on `∫ e^{K|x|} dP` when `P(|x| > s) ≤ e^{−cs²}`:
/// `t* + 2·t*^{1−p}/(p − 1)` with `t* = max(1, e^{K²p/c})`.
pub fn tail_bound(k: f64, c: f64, p_exp: f64) -> Result<f64> {
    if !(p_exp > 1.0) {
        return Err(Error::DivergentBound(p_exp));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Argument(format!("K must be nonnegative, got {k}")));
    }
    if !(c > 0.0) {
        return Err(Error::Argument(format!("c must be positive, got {c}")));
    }
    let t_star = (k * k * p_exp / c).exp().max(1.0);
    if t_star.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(t_star + 2.0 * t_star.powf(1.0 - p_exp) / (p_exp - 1.0))
}

/// `∫_{|x| > s} e^{K|x|} dP ≤ e^{Ks − cs²} + K∫_s^∞ e^{Kt − ct²} dt`, the
/// layer-cake identity with `P(|x| > t) ≤ e^{−ct²}` substituted.
pub fn subgaussian_envelope_tail(k: f64, c: f64, s: f64) -> f64 {
    let s = s.max(0.0);
    let head = (k * s - c * s * s).exp();
    if k == 0.0 {
        return head;
    }
    let z = c.sqrt() * (s - k / (2.0 * c));
    let half_gauss = 0.5 * (std::f64::consts::PI / c).sqrt();
    let integral = if z > 20.0 {
        // erfc(z) < e^{−z²}/(z√π), and K²/4c − z² = Ks − cs².
        half_gauss * head / (z * std::f64::consts::PI.sqrt())
    } else {
        half_gauss * (k * k / (4.0 * c)).exp() * libm::erfc(z)
    };
    head + k * integral
}

/// Envelope data shared by the tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    /// `max(K_f, K̃)`
    pub k: f64,
    /// `A_f + Ã`
    pub amplitude: f64,
    /// Certified subgaussian constant.
    pub c: f64,
}

impl TailEnvelope {
    pub fn new(model: &PolynomialModel, f: &FunctionSpec, d: &DistributionSpec) -> Result<Self> {
        let (k_model, a_model) = model.subexp_envelope();
        Ok(TailEnvelope {
            k: f.subexp_constant()?.max(k_model),
            amplitude: f.amplitude()? + a_model,
            c: d.subgaussian_constant()?,
        })
    }
}

/// Bounds on the risk outside `[p − T, p + T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRiskBound {
    pub left: f64,
    pub right: f64,
    /// Bound on the two sides together; at most `left + right`.
    pub total: f64,
}

/// Upper bound on `∫_{|x−p|>T} |f − ŷ| dP` from `|f − ŷ| ≤ (A_f + Ã)e^{K|x|}`.
pub fn tail_risk_bound(
    model: &PolynomialModel,
    f: &FunctionSpec,
    d: &DistributionSpec,
    t: f64,
) -> Result<TailRiskBound> {
    check_half_width(t)?;
    let env = TailEnvelope::new(model, f, d)?;
    Ok(tail_risk_bound_with(&env, model.expansion_point, d, t))
}

pub fn tail_risk_bound_with(
    env: &TailEnvelope,
    p: f64,
    d: &DistributionSpec,
    t: f64,
) -> TailRiskBound {
    let side = |s: f64| env.amplitude * subgaussian_envelope_tail(env.k, env.c, s);
    let mut left = side(t - p);
    let mut right = side(t + p);
    let mut total = side(t - p.abs()).min(left + right);
    if let Some((lo, hi)) = d.support() {
        let reach = lo.abs().max(hi.abs());
        let cap = env.amplitude * (env.k * reach).exp();
        let mass_left = if lo < p - t {
            d.prob_open(f64::NEG_INFINITY, p - t)
        } else {
            0.0
        };
        let mass_right = if hi > p + t {
            d.prob_open(p + t, f64::INFINITY)
        } else {
            0.0
        };
        left = left.min(cap * mass_left);
        right = right.min(cap * mass_right);
        total = total.min(left + right);
    }
    TailRiskBound { left, right, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonTilde {
    pub value: f64,
    /// Half-width actually used; `max(T, 1)`.
    pub t_used: f64,
    /// True when `T < 1` was raised to 1.
    pub clamped: bool,
}

/// Per-coefficient budget `ε / (8(N+1)T^{N+1})`, with `T` raised to at least 1.
pub fn epsilon_tilde(eps: f64, n: usize, t: f64) -> Result<EpsilonTilde> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    check_half_width(t)?;
    let t_used = t.max(1.0);
    Ok(EpsilonTilde {
        value: eps / (8.0 * (n + 1) as f64 * t_used.powi(n as i32 + 1)),
        t_used,
        clamped: t < 1.0,
    })
}

/// `2T^{N+1}(N+1)·max_j |Δc_j|` with `T` raised to at least 1.
pub fn i1_bound(max_coefficient_error: f64, n: usize, t: f64) -> f64 {
    let t = t.max(1.0);
    2.0 * t.powi(n as i32 + 1) * (n + 1) as f64 * max_coefficient_error
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub expansion_point: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Mean cost on the supplied test data, with its standard error.
    pub empirical_risk: Option<f64>,
    pub empirical_se: Option<f64>,
    pub body_risk: f64,
    pub body_abs_error: f64,
    /// Bound on the risk outside the window.
    pub tail_bound: f64,
    pub tail_bound_left: f64,
    pub tail_bound_right: f64,
    /// Closed-form bound on `∫ e^{K|x|} dP`.
    pub moment_bound: f64,
    pub k: f64,
    pub c: f64,
    pub max_coefficient_error: f64,
    #[serde(rename = "I1_bound")]
    pub i1_bound: f64,
    #[serde(rename = "I2_bound")]
    pub i2_bound: f64,
    pub epsilon_tilde: Option<EpsilonTilde>,
    /// `body ≤ I₁ + I₂` within [`DECOMPOSITION_TOLERANCE`].
    pub decomposition_holds: bool,
}

impl RiskReport {
    /// Bound on the full risk, `body + tail`.
    pub fn risk_upper(&self) -> f64 {
        self.body_risk + self.tail_bound
    }
}

/// Options for [`risk_decomposition`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DecompositionOptions<'a> {
    pub eps: Option<f64>,
    pub test: Option<&'a LabeledDataset>,
    /// Defaults to [`DEFAULT_P_EXP`].
    pub p_exp: Option<f64>,
}

/// Full split of a model's risk at half-width `T`.
pub fn risk_decomposition(
    model: &PolynomialModel,
    f: &FunctionSpec,
    d: &DistributionSpec,
    t: f64,
    n: usize,
    opts: DecompositionOptions<'_>,
) -> Result<RiskReport> {
    check_half_width(t)?;
    if n < model.degree() {
        return Err(Error::Argument(format!(
            "N = {n} is below the model degree {}",
            model.degree()
        )));
    }
    let p = model.expansion_point;
    let truth = f.taylor_polynomial(p, n)?;
    let max_coefficient_error = (0..=n)
        .map(|j| {
            let c = model.coefficients.get(j).copied().unwrap_or(0.0);
            (c - truth.coefficients[j]).abs()
        })
        .fold(0.0, f64::max);
    let i1 = i1_bound(max_coefficient_error, n, t);
    let i2 = truncation_sup_error(f, p, n, t)?;
    let body = body_risk_detailed(model, f, d, t)?;
    let env = TailEnvelope::new(model, f, d)?;
    let tails = tail_risk_bound_with(&env, p, d, t);
    let moment = tail_bound(env.k, env.c, opts.p_exp.unwrap_or(DEFAULT_P_EXP))?;
    let eps_tilde = opts.eps.map(|e| epsilon_tilde(e, n, t)).transpose()?;
    let (empirical_risk, empirical_se) = match opts.test {
        Some(data) => {
            let (r, se) = empirical_risk_with_se(model, data)?;
            (Some(r), Some(se))
        }
        None => (None, None),
    };
    Ok(RiskReport {
        expansion_point: p,
        t,
        n,
        empirical_risk,
        empirical_se,
        body_risk: body.value,
        body_abs_error: body.abs_error,
        tail_bound: tails.total,
        tail_bound_left: tails.left,
        tail_bound_right: tails.right,
        moment_bound: moment,
        k: env.k,
        c: env.c,
        max_coefficient_error,
        i1_bound: i1,
        i2_bound: i2,
        epsilon_tilde: eps_tilde,
        decomposition_holds: body.value <= i1 + i2 + DECOMPOSITION_TOLERANCE,
    })
}
