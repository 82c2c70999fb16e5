//! Ground-truth target functions.
//!
//! Every learnable target here is entire, has closed-form derivatives of every
//! order and carries a subexponential constant `K` with `n!·|a_n| ≤ Kⁿ` for the
//! Taylor coefficients `a_n` at the origin (`n ≥ 1`). The constant term is
//! tracked separately as an amplitude so that `|f(x)| ≤ A·e^{K|x|}` holds for
//! all `x`.
//!
//! Functions with a finite radius of convergence are kept out of the learnable
//! set. They can still be evaluated and differentiated, which is what negative
//! experiments need, but they refuse to produce a `K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order any oracle will answer.
pub const MAX_DERIVATIVE_ORDER: usize = 64;

/// Default resolution of the grid used by [`truncation_sup_error`].
pub const DEFAULT_SUP_GRID: usize = 10_000;

/// A named target, addressable from configuration as e.g.
/// `{"fn": "poly", "coeffs": [2, 3]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum FunctionSpec {
    Sin,
    Cos,
    Exp,
    /// `x ↦ e^{αx}`
    ScaledExp {
        alpha: f64,
    },
    /// `Σ coeffs[j]·xʲ`
    Poly {
        coeffs: Vec<f64>,
    },
    /// Finite linear combination of other targets.
    Combo {
        terms: Vec<Term>,
    },
    /// `x ↦ 1/(1 + (x/radius)²)`: analytic on ℝ but with convergence radius
    /// `radius` at the origin. Counterexample only.
    Runge {
        #[serde(default = "one")]
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub f: FunctionSpec,
}

impl FunctionSpec {
    /// Resolve a registry name plus positional parameters.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "`{name}` takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let spec = match name {
            "sin" => want(0).map(|_| FunctionSpec::Sin)?,
            "cos" => want(0).map(|_| FunctionSpec::Cos)?,
            "exp" => want(0).map(|_| FunctionSpec::Exp)?,
            "scaled_exp" => want(1).map(|_| FunctionSpec::ScaledExp { alpha: params[0] })?,
            "poly" => FunctionSpec::Poly {
                coeffs: params.to_vec(),
            },
            "runge" => match params {
                [] => FunctionSpec::Runge { radius: 1.0 },
                [r] => FunctionSpec::Runge { radius: *r },
                _ => return Err(Error::Config("`runge` takes at most 1 parameter".into())),
            },
            other => return Err(Error::UnknownFunction(other.to_string())),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The quarantined list of non-entire targets used for negative tests.
    pub fn counterexamples() -> Vec<FunctionSpec> {
        vec![FunctionSpec::Runge { radius: 1.0 }]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::ScaledExp { alpha } if !alpha.is_finite() => {
                Err(Error::Config("scaled_exp alpha must be finite".into()))
            }
            FunctionSpec::Poly { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::Config("poly coefficients must be finite".into()))
            }
            FunctionSpec::Runge { radius } if !(radius.is_finite() && *radius > 0.0) => {
                Err(Error::Config("runge radius must be positive".into()))
            }
            FunctionSpec::Combo { terms } => {
                if terms.is_empty() {
                    return Err(Error::Config("combo needs at least one term".into()));
                }
                for t in terms {
                    if !t.weight.is_finite() {
                        return Err(Error::Config("combo weights must be finite".into()));
                    }
                    t.f.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable identifier, e.g. `poly[2,3]`.
    pub fn name(&self) -> String {
        match self {
            FunctionSpec::Sin => "sin".into(),
            FunctionSpec::Cos => "cos".into(),
            FunctionSpec::Exp => "exp".into(),
            FunctionSpec::ScaledExp { alpha } => format!("scaled_exp[{alpha}]"),
            FunctionSpec::Poly { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("poly[{}]", parts.join(","))
            }
            FunctionSpec::Combo { terms } => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|t| format!("{}*{}", t.weight, t.f.name()))
                    .collect();
                format!("combo[{}]", parts.join("+"))
            }
            FunctionSpec::Runge { radius } => format!("runge[{radius}]"),
        }
    }

    /// Whether the target belongs to the learnable (entire, subexponential) registry.
    pub fn is_learnable(&self) -> bool {
        match self {
            FunctionSpec::Runge { .. } => false,
            FunctionSpec::Combo { terms } => terms.iter().all(|t| t.f.is_learnable()),
            _ => true,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Sin => x.sin(),
            FunctionSpec::Cos => x.cos(),
            FunctionSpec::Exp => x.exp(),
            FunctionSpec::ScaledExp { alpha } => (alpha * x).exp(),
            FunctionSpec::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            FunctionSpec::Combo { terms } => terms.iter().map(|t| t.weight * t.f.eval(x)).sum(),
            FunctionSpec::Runge { radius } => {
                let u = x / radius;
                1.0 / (1.0 + u * u)
            }
        }
    }

    /// Exact `f⁽ⁿ⁾(p)`.
    pub fn derivative(&self, n: usize, p: f64) -> Result<f64> {
        if n > MAX_DERIVATIVE_ORDER {
            return Err(Error::Capability(format!(
                "derivative order {n} exceeds supported maximum {MAX_DERIVATIVE_ORDER}"
            )));
        }
        Ok(self.derivative_unchecked(n, p))
    }

    fn derivative_unchecked(&self, n: usize, p: f64) -> f64 {
        match self {
            FunctionSpec::Sin => match n % 4 {
                0 => p.sin(),
                1 => p.cos(),
                2 => -p.sin(),
                _ => -p.cos(),
            },
            FunctionSpec::Cos => match n % 4 {
                0 => p.cos(),
                1 => -p.sin(),
                2 => -p.cos(),
                _ => p.sin(),
            },
            FunctionSpec::Exp => p.exp(),
            FunctionSpec::ScaledExp { alpha } => alpha.powi(n as i32) * (alpha * p).exp(),
            FunctionSpec::Poly { coeffs } => {
                if n >= coeffs.len() {
                    return 0.0;
                }
                // Horner over the n-th derived coefficients a_j·j!/(j-n)!.
                coeffs[n..]
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (i, a)| acc * p + a * falling_factorial(i + n, n))
            }
            FunctionSpec::Combo { terms } => terms
                .iter()
                .map(|t| t.weight * t.f.derivative_unchecked(n, p))
                .sum(),
            FunctionSpec::Runge { radius } => {
                // g(u) = 1/(1+u²) = Im 1/(u-i), so g⁽ⁿ⁾(u) = (-1)ⁿ n! Im (u-i)^{-(n+1)}.
                let u = p / radius;
                let rho = (u * u + 1.0).sqrt();
                let theta = (-1.0f64).atan2(u);
                let k = (n + 1) as f64;
                let im = -rho.powf(-k) * (k * theta).sin();
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * factorial(n) * im / radius.powi(n as i32)
            }
        }
    }

    /// Subexponential constant `K ≥ 1` with `n!·|a_n| ≤ Kⁿ` for every `n ≥ 1`.
    pub fn subexp_constant(&self) -> Result<f64> {
        match self {
            FunctionSpec::Sin | FunctionSpec::Cos | FunctionSpec::Exp => Ok(1.0),
            FunctionSpec::ScaledExp { alpha } => Ok(alpha.abs().max(1.0)),
            FunctionSpec::Poly { coeffs } => Ok(coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, a)| (factorial(j) * a.abs()).powf(1.0 / j as f64))
                .fold(1.0, f64::max)),
            FunctionSpec::Combo { terms } => {
                // n!|Σ w_i a_{i,n}| ≤ (Σ|w_i|)·max K_iⁿ ≤ (max(1,Σ|w_i|)·max K_i)ⁿ
                let mut weight = 0.0;
                let mut k = 1.0f64;
                for t in terms {
                    weight += t.weight.abs();
                    k = k.max(t.f.subexp_constant()?);
                }
                Ok(weight.max(1.0) * k)
            }
            FunctionSpec::Runge { radius } => Err(Error::Capability(format!(
                "runge[{radius}] has finite convergence radius and no subexponential constant"
            ))),
        }
    }

    /// Amplitude `A ≥ 1` with `|f(x)| ≤ A·e^{K|x|}` for all `x`.
    pub fn amplitude(&self) -> Result<f64> {
        self.subexp_constant()?;
        Ok(self.eval(0.0).abs().max(1.0))
    }

    /// Largest `n ∈ 1..=n_max` violating `|f⁽ⁿ⁾(0)| ≤ Kⁿ`, if any.
    pub fn subexp_violation(&self, n_max: usize) -> Result<Option<usize>> {
        let k = self.subexp_constant()?;
        for n in 1..=n_max.min(MAX_DERIVATIVE_ORDER) {
            let d = self.derivative_unchecked(n, 0.0).abs();
            let bound = k.powi(n as i32);
            if d > bound * (1.0 + 1e-12) {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }

    pub fn taylor_polynomial(&self, p: f64, degree: usize) -> Result<TaylorPolynomial> {
        let mut coefficients = Vec::with_capacity(degree + 1);
        for j in 0..=degree {
            coefficients.push(self.derivative(j, p)? / factorial(j));
        }
        Ok(TaylorPolynomial {
            expansion_point: p,
            coefficients,
        })
    }
}

/// `Σ c_j (x−p)ʲ`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorPolynomial {
    pub expansion_point: f64,
    pub coefficients: Vec<f64>,
}

impl TaylorPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_shifted(&self.coefficients, self.expansion_point, x)
    }
}

/// Horner evaluation of `Σ c_j (x−p)ʲ`.
pub fn eval_shifted(coefficients: &[f64], p: f64, x: f64) -> f64 {
    let z = x - p;
    coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `j·(j−1)···(j−n+1)`
pub fn falling_factorial(j: usize, n: usize) -> f64 {
    (j + 1 - n..=j).fold(1.0, |acc, k| acc * k as f64)
}

/// `Σ_{j ≥ from} zʲ/j!` for `z ≥ 0`, summed term by term.
pub fn exp_series_tail(z: f64, from: usize) -> f64 {
    if z == 0.0 {
        return if from == 0 { 1.0 } else { 0.0 };
    }
    if !z.is_finite() {
        return f64::INFINITY;
    }
    // z^from / from! built in log space to avoid premature overflow.
    let ln_first = from as f64 * z.ln() - ln_factorial(from);
    let mut term = ln_first.exp();
    let mut sum = 0.0;
    let mut j = from;
    loop {
        sum += term;
        j += 1;
        term *= z / j as f64;
        if (j as f64) > z && term <= sum * 1e-17 {
            break;
        }
        if !sum.is_finite() {
            break;
        }
    }
    sum
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Upper estimate of `sup_{|x−p| ≤ T} |T_{p,N}(f)(x) − f(x)|`.
///
/// Two estimates are formed and the smaller returned: the analytic remainder
/// `e^{K|p|}·Σ_{j>N} (KT)ʲ/j!`, and the maximum over a uniform grid widened by
/// half a grid step times a bound on the derivative of the error. Both are
/// upper bounds.
pub fn truncation_sup_error(f: &FunctionSpec, p: f64, n: usize, t: f64) -> Result<f64> {
    truncation_sup_error_with_grid(f, p, n, t, DEFAULT_SUP_GRID)
}

pub fn truncation_sup_error_with_grid(
    f: &FunctionSpec,
    p: f64,
    n: usize,
    t: f64,
    grid: usize,
) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Argument(format!(
            "half-width T must be positive, got {t}"
        )));
    }
    if grid < 2 {
        return Err(Error::Argument("sup grid needs at least 2 points".into()));
    }
    let k = f.subexp_constant()?;
    let taylor = f.taylor_polynomial(p, n)?;
    if let FunctionSpec::Poly { coeffs } = f {
        if n + 1 >= coeffs.len() {
            return Ok(0.0);
        }
    }
    let growth = (k * p.abs()).exp();
    let remainder = growth * exp_series_tail(k * t, n + 1);

    let step = 2.0 * t / (grid - 1) as f64;
    let grid_max = (0..grid)
        .map(|i| {
            let x = p - t + step * i as f64;
            (taylor.eval(x) - f.eval(x)).abs()
        })
        .fold(0.0, f64::max);
    // |e'| on the interval is the degree-(N−1) remainder of f'.
    let slope = growth * k * exp_series_tail(k * t, n);
    let gridded = grid_max + 0.5 * step * slope;
    Ok(remainder.min(gridded))
}
