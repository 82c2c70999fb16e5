//! Finite-difference weights on arbitrary distinct nodes.
//!
//! Weights `a_j` for the `n`-th derivative at `p` solve the moment system
//!
//! ```text
//! Σ_j a_j (h_j − p)^m = n!·[m = n],   m = 0..k
//! ```
//!
//! which makes the stencil exact on every polynomial of degree `≤ k`. The
//! float backend centers the nodes at `p`, scales them into `[−1, 1]` by the
//! power of two just above their largest distance from `p`, solves the scaled
//! system by LU with partial pivoting, refines with double-double residuals,
//! and unscales. The
//! [`exact`] backend solves the same system over the rationals.

pub mod exact;

use serde::{Deserialize, Serialize};

use crate::analytic::factorial;
use crate::error::{Error, Result};

/// Nodes closer than this fraction of the stencil reach are duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

const MAX_REFINEMENTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub nodes: Vec<f64>,
    pub order: usize,
    pub point: f64,
    pub weights: Vec<f64>,
    /// `‖A‖∞·‖A⁻¹‖∞` of the scaled moment matrix.
    pub condition_estimate: f64,
    /// `max_j |h_j − p|`
    pub reach: f64,
    /// `(max_j h_j − min_j h_j) / reach`, the observed stencil spread constant.
    pub spread_ratio: f64,
}

impl WeightTable {
    /// `Σ a_j y_j`
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(a, y)| a * y).sum()
    }
}

/// LU-factored scaled moment matrix for one node set; yields weights for
/// every order `0..=k` without refactoring.
#[derive(Debug, Clone)]
pub struct StencilSolver {
    nodes: Vec<f64>,
    point: f64,
    reach: f64,
    scale: f64,
    spread_ratio: f64,
    matrix: Vec<Vec<Dd>>,
    lu: Lu,
    condition_estimate: f64,
}

impl StencilSolver {
    pub fn new(nodes: &[f64], point: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InsufficientNodes {
                order: 0,
                needed: 1,
                available: 0,
            });
        }
        if !point.is_finite() || nodes.iter().any(|h| !h.is_finite()) {
            return Err(Error::Argument("nodes and point must be finite".into()));
        }
        // h − p is formed exactly as a double-double, and the scale is a power
        // of two, so the moment matrix below is accurate to ~1e-32.
        let centered: Vec<Dd> = nodes.iter().map(|&h| Dd::diff(h, point)).collect();
        let reach = centered.iter().fold(0.0f64, |m, z| m.max(z.hi.abs()));
        check_distinct(nodes, reach)?;
        // A single node sitting on p has reach 0; any positive scale works.
        let scale = if reach > 0.0 {
            power_of_two_at_least(reach)
        } else {
            1.0
        };
        let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let size = nodes.len();
        let mut exact = vec![vec![Dd::ZERO; size]; size];
        for (j, z) in centered.iter().enumerate() {
            let u = z.scale(1.0 / scale);
            let mut pow = Dd::ONE;
            for row in exact.iter_mut() {
                row[j] = pow;
                pow = pow.mul(u);
            }
        }
        let matrix: Vec<Vec<f64>> = exact
            .iter()
            .map(|row| row.iter().map(|x| x.hi).collect())
            .collect();
        let lu = Lu::factor(&matrix).ok_or_else(|| {
            let (first, second) = closest_pair(nodes);
            Error::DegenerateStencil { first, second }
        })?;
        let condition_estimate = inf_norm(&matrix) * lu.inverse_inf_norm();

        Ok(StencilSolver {
            nodes: nodes.to_vec(),
            point,
            reach,
            scale,
            spread_ratio: if reach > 0.0 { (hi - lo) / reach } else { 0.0 },
            matrix: exact,
            lu,
            condition_estimate: condition_estimate.max(1.0),
        })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn table(&self, order: usize) -> Result<WeightTable> {
        let size = self.nodes.len();
        if order >= size {
            return Err(Error::InsufficientNodes {
                order,
                needed: order + 1,
                available: size,
            });
        }
        let mut rhs = vec![0.0; size];
        rhs[order] = factorial(order);
        // Iterative refinement with double-double residuals.
        let mut w: Vec<Dd> = self.lu.solve(&rhs).into_iter().map(Dd::from).collect();
        for _ in 0..MAX_REFINEMENTS {
            let residual: Vec<f64> = self
                .matrix
                .iter()
                .zip(&rhs)
                .map(|(row, &b)| {
                    row.iter()
                        .zip(&w)
                        .fold(Dd::from(b), |acc, (a, x)| acc.sub(a.mul(*x)))
                        .to_f64()
                })
                .collect();
            let correction = self.lu.solve(&residual);
            let size_w = w.iter().fold(0.0f64, |m, x| m.max(x.hi.abs()));
            let size_c = correction.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, d) in w.iter_mut().zip(correction) {
                *x = x.add(Dd::from(d));
            }
            if size_c <= 1e-20 * size_w {
                break;
            }
        }
        let unscale = self.scale.powi(order as i32);
        Ok(WeightTable {
            nodes: self.nodes.clone(),
            order,
            point: self.point,
            weights: w.into_iter().map(|x| x.to_f64() / unscale).collect(),
            condition_estimate: self.condition_estimate,
            reach: if self.spread_ratio == 0.0 {
                0.0
            } else {
                self.reach
            },
            spread_ratio: self.spread_ratio,
        })
    }
}

/// Weights for the `order`-th derivative at `point` on `nodes`.
pub fn fd_weights(nodes: &[f64], order: usize, point: f64) -> Result<WeightTable> {
    if order >= nodes.len() {
        return Err(Error::InsufficientNodes {
            order,
            needed: order + 1,
            available: nodes.len(),
        });
    }
    StencilSolver::new(nodes, point)?.table(order)
}

/// `f⁽ⁿ⁾(p) ≈ Σ a_j y_j` over the given `(x, y)` pairs.
pub fn estimate_derivative(points: &[(f64, f64)], order: usize, point: f64) -> Result<f64> {
    let nodes: Vec<f64> = points.iter().map(|p| p.0).collect();
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(fd_weights(&nodes, order, point)?.apply(&values))
}

/// Formal accuracy order `k + 1 − n` of an `(k+1)`-node stencil for the `n`-th
/// derivative on well-spread nodes.
pub fn accuracy_order(node_count: usize, order: usize) -> Result<usize> {
    if node_count <= order {
        return Err(Error::InsufficientNodes {
            order,
            needed: order + 1,
            available: node_count,
        });
    }
    Ok(node_count - order)
}

fn check_distinct(nodes: &[f64], reach: f64) -> Result<()> {
    if nodes.len() < 2 {
        return Ok(());
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tol = DUPLICATE_TOLERANCE * reach;
    for w in sorted.windows(2) {
        if w[1] - w[0] <= tol {
            return Err(Error::DegenerateStencil {
                first: w[0],
                second: w[1],
            });
        }
    }
    Ok(())
}

fn power_of_two_at_least(x: f64) -> f64 {
    let mut s = 2f64.powi(x.log2().ceil() as i32);
    while s < x {
        s *= 2.0;
    }
    s
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let v = s - a;
        Dd {
            hi: s,
            lo: (a - (s - v)) + (b - v),
        }
    }

    fn quick(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    /// `a − b` exactly.
    fn diff(a: f64, b: f64) -> Dd {
        Dd::two_sum(a, -b)
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let u = Dd::quick(s.hi, s.lo + t.hi);
        Dd::quick(u.hi, u.lo + t.lo)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::quick(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    /// Exact when `k` is a power of two.
    fn scale(self, k: f64) -> Dd {
        Dd {
            hi: self.hi * k,
            lo: self.lo * k,
        }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }
}

fn closest_pair(nodes: &[f64]) -> (f64, f64) {
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .min_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
        .map(|w| (w[0], w[1]))
        .unwrap_or((nodes[0], nodes[0]))
}

fn inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense LU with partial pivoting, `PA = LU` stored in place.
#[derive(Debug, Clone)]
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &[Vec<f64>]) -> Option<Self> {
        let n = a.len();
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| lu[i][col].abs().total_cmp(&lu[j][col].abs()))?;
            if lu[pivot][col] == 0.0 {
                return None;
            }
            lu.swap(col, pivot);
            perm.swap(col, pivot);
            for row in col + 1..n {
                let factor = lu[row][col] / lu[col][col];
                lu[row][col] = factor;
                for k in col + 1..n {
                    lu[row][k] -= factor * lu[col][k];
                }
            }
        }
        Some(Lu { lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[i][k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[i][k] * x[k];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    fn inverse_inf_norm(&self) -> f64 {
        let n = self.lu.len();
        let mut row_sums = vec![0.0; n];
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[col] = 1.0;
            for (sum, v) in row_sums.iter_mut().zip(self.solve(&e)) {
                *sum += v.abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }
}
