//! Taylor learning: pick a density point, estimate derivatives there from
//! nearby samples, and emit the resulting polynomial.
//!
//! Also hosts the exact binomial sample-size calculator used to reason about
//! how many draws are needed before a window around the density point holds
//! enough stencil nodes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{eval_shifted, factorial};
use crate::dist::LabeledDataset;
use crate::error::{Error, OrderShortfall, Result, ShortfallReport};
use crate::fdweights::{StencilSolver, DUPLICATE_TOLERANCE};

/// Bisection stops once the current interval holds fewer points than this.
pub const DENSITY_MIN_POINTS: usize = 8;
/// ... or once it is narrower than this fraction of the initial width.
pub const DENSITY_MIN_RELATIVE_WIDTH: f64 = 1e-9;

const MAX_WINDOW_SHRINKS: usize = 64;

/// How stencil nodes are drawn from the window around the expansion point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeStrategy {
    /// The samples closest to the expansion point.
    Nearest,
    /// The samples closest to Chebyshev targets spanning the window.
    #[default]
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    /// Polynomial degree `N`.
    #[serde(alias = "N")]
    pub degree: usize,
    /// Stencil size; `N + 2` when absent.
    #[serde(default)]
    pub m_per_order: Option<usize>,
    #[serde(default = "default_h_max")]
    pub h_max: f64,
    #[serde(default = "default_h_shrink")]
    pub h_shrink: f64,
    #[serde(default = "default_cond_max")]
    pub cond_max: f64,
    #[serde(default)]
    pub p_override: Option<f64>,
    #[serde(default)]
    pub node_strategy: NodeStrategy,
}

fn default_h_max() -> f64 {
    1.0
}
fn default_h_shrink() -> f64 {
    0.5
}
fn default_cond_max() -> f64 {
    1e10
}

impl LearnerConfig {
    pub fn new(degree: usize) -> Self {
        LearnerConfig {
            degree,
            m_per_order: None,
            h_max: default_h_max(),
            h_shrink: default_h_shrink(),
            cond_max: default_cond_max(),
            p_override: None,
            node_strategy: NodeStrategy::default(),
        }
    }

    pub fn m_per_order(&self) -> usize {
        self.m_per_order.unwrap_or(self.degree + 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_per_order() < self.degree + 1 {
            return Err(Error::Config(format!(
                "m_per_order {} must be at least N+1 = {}",
                self.m_per_order(),
                self.degree + 1
            )));
        }
        if !(self.h_shrink > 0.0 && self.h_shrink < 1.0) {
            return Err(Error::Config("h_shrink must lie in (0, 1)".into()));
        }
        if !(self.h_max.is_finite() && self.h_max > 0.0) {
            return Err(Error::Config("h_max must be positive".into()));
        }
        if !(self.cond_max >= 1.0) {
            return Err(Error::Config("cond_max must be at least 1".into()));
        }
        if self.degree > crate::analytic::MAX_DERIVATIVE_ORDER {
            return Err(Error::Config(
                "degree exceeds supported derivative order".into(),
            ));
        }
        if let Some(p) = self.p_override {
            if !p.is_finite() {
                return Err(Error::Config("p_override must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDiagnostics {
    pub order: usize,
    /// Window half-width the accepted stencil was drawn from.
    pub window: f64,
    pub node_count: usize,
    pub condition_estimate: f64,
    /// False when no window met `cond_max` and the best-conditioned attempt was kept.
    pub gate_passed: bool,
    /// Achieved stencil reach `max |x_j − p|`.
    pub reach: f64,
}

/// `ŷ(x) = Σ c_j (x − p)ʲ`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub expansion_point: f64,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub diagnostics: Vec<OrderDiagnostics>,
}

impl PolynomialModel {
    /// A model with given coefficients and no fit history.
    pub fn from_coefficients(expansion_point: f64, coefficients: Vec<f64>) -> Self {
        PolynomialModel {
            expansion_point,
            coefficients,
            diagnostics: Vec::new(),
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_shifted(&self.coefficients, self.expansion_point, x)
    }

    /// Coefficients of the same polynomial in powers of `x`.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        let n = self.coefficients.len();
        let shift = -self.expansion_point;
        let mut out = vec![0.0; n];
        for (j, c) in self.coefficients.iter().enumerate() {
            // (x + shift)^j = Σ_i C(j,i) x^i shift^{j−i}
            let mut binom = 1.0;
            for i in 0..=j {
                out[i] += c * binom * shift.powi((j - i) as i32);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }

    /// `(K̃, Ã)` with `n!|b_n| ≤ K̃ⁿ` for `n ≥ 1` and `|ŷ(x)| ≤ Ã·e^{K̃|x|}`.
    pub fn subexp_envelope(&self) -> (f64, f64) {
        let b = self.monomial_coefficients();
        let k = b
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| (factorial(n) * c.abs()).powf(1.0 / n as f64))
            .fold(1.0, f64::max);
        let amplitude = b.first().map_or(0.0, |c| c.abs()).max(1.0);
        (k, amplitude)
    }

    /// Hex SHA-256 over the bit patterns of the expansion point and coefficients.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.expansion_point.to_bits().to_le_bytes());
        for c in &self.coefficients {
            h.update(c.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Trace of the empirical bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBisection {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub initial_width: f64,
    /// Points inside the final interval.
    pub count: usize,
    pub depth: usize,
}

/// Empirical density point by repeated halving toward the heavier half.
pub fn find_density_point(xs: &[f64]) -> Result<f64> {
    Ok(density_bisection(xs)?.point)
}

pub fn density_bisection(xs: &[f64]) -> Result<DensityBisection> {
    if xs.is_empty() {
        return Err(Error::Argument(
            "density point needs at least one sample".into(),
        ));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("samples must be finite".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = (sorted[0], sorted[sorted.len() - 1]);
    let initial_width = hi - lo;
    let (mut start, mut end) = (0, sorted.len());
    let mut depth = 0;
    loop {
        let count = end - start;
        if initial_width == 0.0
            || count < DENSITY_MIN_POINTS
            || hi - lo < DENSITY_MIN_RELATIVE_WIDTH * initial_width
        {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        // Left half is [lo, mid], right half is (mid, hi].
        let split = start + sorted[start..end].partition_point(|&x| x <= mid);
        if 2 * (split - start) >= count {
            hi = mid;
            end = split;
        } else {
            lo = mid;
            start = split;
        }
        depth += 1;
    }
    Ok(DensityBisection {
        point: lo + 0.5 * (hi - lo),
        lo,
        hi,
        initial_width,
        count: end - start,
        depth,
    })
}

/// `P(Binomial(trials, γ) ≤ k)`, summed exactly in log space.
pub fn binomial_cdf(k: u64, trials: u64, gamma: f64) -> f64 {
    if k >= trials || gamma <= 0.0 {
        return 1.0;
    }
    if gamma >= 1.0 {
        return 0.0;
    }
    let ln_miss = (-gamma).ln_1p();
    let ln_hit = gamma.ln();
    let n = trials as f64;
    let mut ln_binom = 0.0;
    let mut terms = Vec::with_capacity(k as usize + 1);
    for j in 0..=k {
        if j > 0 {
            let jf = j as f64;
            ln_binom += (n - jf + 1.0).ln() - jf.ln();
        }
        terms.push(ln_binom + (n - j as f64) * ln_miss + j as f64 * ln_hit);
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    (top + sum.ln()).exp().min(1.0)
}

/// Smallest `M` with `P(fewer than m of M draws land in a window of mass γ) < δ`.
pub fn required_samples(gamma: f64, m: u64, delta: f64) -> Result<u64> {
    if gamma == 0.0 {
        return Err(Error::NoGuarantee);
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Argument(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let fails = |trials: u64| binomial_cdf(m - 1, trials, gamma) >= delta;
    // Fewer than m draws can never hold m hits, so M = m − 1 always fails.
    let mut lo = m - 1;
    let mut hi = m;
    while fails(hi) {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .filter(|&h| h < 1 << 62)
            .ok_or_else(|| Error::Nonconvergence("required sample size overflows".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fails(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Nodes chosen from a window, with the requested count for shortfall reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSelection {
    /// Indices into the input slice.
    pub indices: Vec<usize>,
    pub nodes: Vec<f64>,
    pub requested: usize,
}

impl NodeSelection {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// How many requested nodes the window could not supply.
    pub fn shortfall(&self) -> usize {
        self.requested.saturating_sub(self.nodes.len())
    }
}

/// In-window candidates `(index, x)` sorted by distance to `p` (then by `x`,
/// then index), with near-duplicates of an earlier candidate removed.
fn window_candidates(xs: &[f64], p: f64, h: f64) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = xs
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, x)| (x - p).abs() < h)
        .collect();
    cand.sort_by(|a, b| {
        (a.1 - p)
            .abs()
            .total_cmp(&(b.1 - p).abs())
            .then(a.1.total_cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    // Sorting by x makes near-duplicates adjacent.
    let tol = DUPLICATE_TOLERANCE * h;
    let mut by_x: Vec<(usize, usize, f64)> = cand
        .iter()
        .enumerate()
        .map(|(rank, &(i, x))| (rank, i, x))
        .collect();
    by_x.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let mut keep = vec![true; cand.len()];
    let mut run_start = 0;
    for k in 1..by_x.len() {
        if by_x[k].2 - by_x[k - 1].2 <= tol {
            // Keep whichever member of the run ranks nearest to p.
            let best = (run_start..=k).map(|r| by_x[r].0).min().unwrap();
            for r in run_start..=k {
                keep[by_x[r].0] = by_x[r].0 == best;
            }
        } else {
            run_start = k;
        }
    }
    cand.into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// The `m` distinct samples in `(p − h, p + h)` closest to `p`.
pub fn select_nodes(xs: &[f64], p: f64, m: usize, h: f64) -> NodeSelection {
    let chosen: Vec<(usize, f64)> = window_candidates(xs, p, h).into_iter().take(m).collect();
    NodeSelection {
        indices: chosen.iter().map(|c| c.0).collect(),
        nodes: chosen.iter().map(|c| c.1).collect(),
        requested: m,
    }
}

/// `m` distinct samples in `(p − h, p + h)`, each the unused sample nearest
/// one of the Chebyshev targets `p + h·cos((2i+1)π/2m)`. Returned in order of
/// distance from `p`.
pub fn select_spread_nodes(xs: &[f64], p: f64, m: usize, h: f64) -> NodeSelection {
    let mut cand = window_candidates(xs, p, h);
    if cand.len() > m {
        cand.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut used = vec![false; cand.len()];
        for i in 0..m {
            let target = p + h * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos();
            let at = cand.partition_point(|c| c.1 < target);
            let mut left = at.checked_sub(1);
            let mut right = (at < cand.len()).then_some(at);
            while let Some(l) = left.filter(|&l| used[l]) {
                left = l.checked_sub(1);
            }
            while let Some(r) = right.filter(|&r| used[r]) {
                right = (r + 1 < cand.len()).then_some(r + 1);
            }
            let pick = match (left, right) {
                (Some(l), Some(r)) => {
                    if target - cand[l].1 <= cand[r].1 - target {
                        l
                    } else {
                        r
                    }
                }
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!("more candidates than targets"),
            };
            used[pick] = true;
        }
        cand = cand
            .into_iter()
            .zip(used)
            .filter_map(|(c, u)| u.then_some(c))
            .collect();
        cand.sort_by(|a, b| {
            (a.1 - p)
                .abs()
                .total_cmp(&(b.1 - p).abs())
                .then(a.1.total_cmp(&b.1))
        });
    }
    NodeSelection {
        indices: cand.iter().map(|c| c.0).collect(),
        nodes: cand.iter().map(|c| c.1).collect(),
        requested: m,
    }
}

struct Attempt {
    window: f64,
    selection: NodeSelection,
    /// `None` when the selection repeats the previous attempt's.
    solver: Option<StencilSolver>,
}

/// Fit a degree-`N` Taylor model to noiseless samples.
pub fn fit(data: &LabeledDataset, cfg: &LearnerConfig) -> Result<PolynomialModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("cannot fit an empty dataset".into()));
    }
    let xs = data.xs();
    let p = match cfg.p_override {
        Some(p) => p,
        None => find_density_point(&xs)?,
    };
    let n = cfg.degree;
    let m = cfg.m_per_order();
    let select = |h: f64| match cfg.node_strategy {
        NodeStrategy::Nearest => select_nodes(&xs, p, m, h),
        NodeStrategy::Spread => select_spread_nodes(&xs, p, m, h),
    };

    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let shortfall_report = |available: usize| ShortfallReport {
        distinct_total: distinct.len(),
        per_order: (0..=n)
            .map(|j| OrderShortfall {
                order: j,
                needed: j + 1,
                available,
            })
            .collect(),
    };
    if distinct.len() < n + 1 {
        let available = select(cfg.h_max).len();
        return Err(Error::InsufficientData(shortfall_report(available)));
    }

    // Window schedule h_max, h_max·s, h_max·s², … built lazily and shared by all orders.
    let mut attempts: Vec<Attempt> = Vec::new();
    let extend = |attempts: &mut Vec<Attempt>| -> Result<()> {
        let window = cfg.h_max * cfg.h_shrink.powi(attempts.len() as i32);
        let selection = select(window);
        let repeat = attempts
            .last()
            .is_some_and(|a| a.selection.indices == selection.indices);
        let solver = if repeat || selection.is_empty() {
            None
        } else {
            Some(StencilSolver::new(&selection.nodes, p)?)
        };
        attempts.push(Attempt {
            window,
            selection,
            solver,
        });
        Ok(())
    };

    let mut coefficients = Vec::with_capacity(n + 1);
    let mut diagnostics = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut accepted: Option<usize> = None;
        let mut best: Option<usize> = None;
        for k in 0..MAX_WINDOW_SHRINKS {
            if k == attempts.len() {
                extend(&mut attempts)?;
            }
            let attempt = &attempts[k];
            if attempt.selection.len() < j + 1 {
                break;
            }
            let Some(solver) = &attempt.solver else {
                continue;
            };
            if solver.condition_estimate() <= cfg.cond_max {
                accepted = Some(k);
                break;
            }
            let better = best.is_none_or(|b| {
                let prev = attempts[b].solver.as_ref().unwrap().condition_estimate();
                solver.condition_estimate() < prev
            });
            if better {
                best = Some(k);
            }
        }
        let Some(k) = accepted.or(best) else {
            let available = attempts.first().map_or(0, |a| a.selection.len());
            return Err(Error::InsufficientData(shortfall_report(available)));
        };
        let attempt = &attempts[k];
        let solver = attempt.solver.as_ref().unwrap();
        let table = solver.table(j)?;
        let values: Vec<f64> = attempt
            .selection
            .indices
            .iter()
            .map(|&i| data.points[i].1)
            .collect();
        let derivative = table.apply(&values);
        coefficients.push(derivative / factorial(j));
        diagnostics.push(OrderDiagnostics {
            order: j,
            window: attempt.window,
            node_count: attempt.selection.len(),
            condition_estimate: solver.condition_estimate(),
            gate_passed: accepted.is_some(),
            reach: table.reach,
        });
    }

    Ok(PolynomialModel {
        expansion_point: p,
        coefficients,
        diagnostics,
    })
}
