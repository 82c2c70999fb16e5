//! Sampleable marginals on ℝ and the deterministic labeling channel.
//!
//! Every distribution exposes exact tail and interval probabilities, a
//! density/atom split for quadrature, and, for the certified families, a
//! constant `c > 0` with `P(|x| > T) ≤ e^{−cT²}` for all `T ≥ 0`.
//!
//! Sampling draws from a ChaCha stream keyed by `(seed, stream)`. Draws are
//! produced one after another from that stream, so a shorter sample is always
//! a prefix of a longer one with the same key.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytic::FunctionSpec;
use crate::error::{Error, Result};

/// Stand-in for `c = +∞` (a point mass at the origin has no tail at all).
pub const C_MAX: f64 = 1e6;

/// Minimum sample size accepted by [`DistributionSpec::empirical_tail_check`].
pub const MIN_TAIL_CHECK_SAMPLES: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform {
        a: f64,
        b: f64,
    },
    /// Centered gaussian.
    Gaussian {
        sigma: f64,
    },
    /// Centered gaussian conditioned on `[a, b]`.
    TruncatedGaussian {
        sigma: f64,
        a: f64,
        b: f64,
    },
    PointMass {
        at: f64,
    },
    Mixture {
        components: Vec<Component>,
    },
    /// Exponential tails; not subgaussian. Exploratory use only.
    Laplace {
        scale: f64,
    },
    /// No finite moments. Exploratory use only.
    Cauchy {
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub d: DistributionSpec,
}

/// A tail constant together with whether it is an analytic certificate or a
/// fit to samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstant {
    pub c: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheckRow {
    pub t: f64,
    pub frequency: f64,
    pub bound: f64,
    pub pass: bool,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Per-draw RNG keyed by seed and stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl DistributionSpec {
    /// Resolve a family name plus positional parameters.
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
        let d = match name {
            "uniform" => want(2).map(|_| DistributionSpec::Uniform {
                a: params[0],
                b: params[1],
            })?,
            "gaussian" => want(1).map(|_| DistributionSpec::Gaussian { sigma: params[0] })?,
            "truncated_gaussian" => want(3).map(|_| DistributionSpec::TruncatedGaussian {
                sigma: params[0],
                a: params[1],
                b: params[2],
            })?,
            "point_mass" => want(1).map(|_| DistributionSpec::PointMass { at: params[0] })?,
            "laplace" => want(1).map(|_| DistributionSpec::Laplace { scale: params[0] })?,
            "cauchy" => want(1).map(|_| DistributionSpec::Cauchy { scale: params[0] })?,
            other => return Err(Error::UnknownDistribution(other.to_string())),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        match self {
            DistributionSpec::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad("uniform needs finite a < b");
                }
            }
            DistributionSpec::Gaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return bad("gaussian needs sigma > 0");
                }
            }
            DistributionSpec::TruncatedGaussian { sigma, a, b } => {
                if !(sigma.is_finite() && *sigma > 0.0 && a.is_finite() && b.is_finite() && a < b) {
                    return bad("truncated gaussian needs sigma > 0 and finite a < b");
                }
                if std_normal_cdf(b / sigma) - std_normal_cdf(a / sigma) <= 0.0 {
                    return bad("truncated gaussian interval carries no mass");
                }
            }
            DistributionSpec::PointMass { at } => {
                if !at.is_finite() {
                    return bad("point mass location must be finite");
                }
            }
            DistributionSpec::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component");
                }
                for c in components {
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return bad("mixture weights must be positive");
                    }
                    c.d.validate()?;
                }
            }
            DistributionSpec::Laplace { scale } | DistributionSpec::Cauchy { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return bad("scale must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match self {
            DistributionSpec::Uniform { a, b } => format!("uniform[{a},{b}]"),
            DistributionSpec::Gaussian { sigma } => format!("gaussian[{sigma}]"),
            DistributionSpec::TruncatedGaussian { sigma, a, b } => {
                format!("truncated_gaussian[{sigma};{a},{b}]")
            }
            DistributionSpec::PointMass { at } => format!("point_mass[{at}]"),
            DistributionSpec::Mixture { components } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|c| format!("{}*{}", c.weight, c.d.name()))
                    .collect();
                format!("mixture[{}]", parts.join("+"))
            }
            DistributionSpec::Laplace { scale } => format!("laplace[{scale}]"),
            DistributionSpec::Cauchy { scale } => format!("cauchy[{scale}]"),
        }
    }

    /// Characteristic length, used to size test grids.
    pub fn scale(&self) -> f64 {
        match self {
            DistributionSpec::Uniform { a, b } => a.abs().max(b.abs()).max(f64::MIN_POSITIVE),
            DistributionSpec::Gaussian { sigma } => *sigma,
            DistributionSpec::TruncatedGaussian { sigma, a, b } => sigma.min(a.abs().max(b.abs())),
            DistributionSpec::PointMass { at } => at.abs().max(1.0),
            DistributionSpec::Mixture { components } => {
                components.iter().map(|c| c.d.scale()).fold(0.0, f64::max)
            }
            DistributionSpec::Laplace { scale } | DistributionSpec::Cauchy { scale } => *scale,
        }
    }

    fn total_weight(components: &[Component]) -> f64 {
        components.iter().map(|c| c.weight).sum()
    }

    /// `count` i.i.d. draws from stream 0 of `seed`.
    pub fn sample(&self, seed: u64, count: usize) -> Result<Vec<f64>> {
        self.sample_stream(seed, 0, count)
    }

    pub fn sample_stream(&self, seed: u64, stream: u64, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::Argument("sample count must be at least 1".into()));
        }
        self.validate()?;
        let mut rng = rng_for(seed, stream);
        Ok((0..count).map(|_| self.draw(&mut rng)).collect())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            DistributionSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            DistributionSpec::TruncatedGaussian { sigma, a, b } => {
                let (lo, hi) = (a / sigma, b / sigma);
                let mass = std_normal_cdf(hi) - std_normal_cdf(lo);
                if mass > 0.05 {
                    loop {
                        let z: f64 = StandardNormal.sample(rng);
                        if z >= lo && z <= hi {
                            return sigma * z;
                        }
                    }
                }
                // Narrow window: uniform proposal accepted by relative density.
                let peak = if lo <= 0.0 && hi >= 0.0 {
                    0.0
                } else {
                    lo.abs().min(hi.abs())
                };
                loop {
                    let z = lo + (hi - lo) * rng.random::<f64>();
                    let accept = (-0.5 * (z * z - peak * peak)).exp();
                    if rng.random::<f64>() <= accept {
                        return sigma * z;
                    }
                }
            }
            DistributionSpec::PointMass { at } => *at,
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return c.d.draw(rng);
                    }
                }
                components[components.len() - 1].d.draw(rng)
            }
            DistributionSpec::Laplace { scale } => {
                let u = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            DistributionSpec::Cauchy { scale } => scale * (PI * (rng.random::<f64>() - 0.5)).tan(),
        }
    }

    /// Exact `P(|x| > T)`.
    pub fn survival(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            DistributionSpec::Uniform { a, b } => {
                let above = (b - t.max(*a)).max(0.0);
                let below = ((-t).min(*b) - a).max(0.0);
                (above + below) / (b - a)
            }
            DistributionSpec::Gaussian { sigma } => erfc(t / (sigma * SQRT_2)),
            DistributionSpec::TruncatedGaussian { .. } => 1.0 - self.prob_closed(-t, t),
            DistributionSpec::PointMass { at } => {
                if at.abs() > t {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                components
                    .iter()
                    .map(|c| c.weight * c.d.survival(t))
                    .sum::<f64>()
                    / total
            }
            DistributionSpec::Laplace { scale } => (-t / scale).exp(),
            DistributionSpec::Cauchy { scale } => 1.0 - 2.0 / PI * (t / scale).atan(),
        }
    }

    /// Exact `P(lo < x < hi)`.
    pub fn prob_open(&self, lo: f64, hi: f64) -> f64 {
        if !(lo < hi) {
            return 0.0;
        }
        match self {
            DistributionSpec::PointMass { at } => {
                if lo < *at && *at < hi {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                components
                    .iter()
                    .map(|c| c.weight * c.d.prob_open(lo, hi))
                    .sum::<f64>()
                    / total
            }
            _ => self.continuous_mass(lo, hi),
        }
    }

    /// Exact `P(lo ≤ x ≤ hi)`.
    pub fn prob_closed(&self, lo: f64, hi: f64) -> f64 {
        if lo > hi {
            return 0.0;
        }
        match self {
            DistributionSpec::PointMass { at } => {
                if lo <= *at && *at <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                components
                    .iter()
                    .map(|c| c.weight * c.d.prob_closed(lo, hi))
                    .sum::<f64>()
                    / total
            }
            _ => self.continuous_mass(lo, hi),
        }
    }

    fn continuous_mass(&self, lo: f64, hi: f64) -> f64 {
        match self {
            DistributionSpec::Uniform { a, b } => (hi.min(*b) - lo.max(*a)).max(0.0) / (b - a),
            DistributionSpec::Gaussian { sigma } => {
                // Use the upper tail for both ends when above the mean to avoid cancellation.
                if lo >= 0.0 {
                    0.5 * (erfc(lo / (sigma * SQRT_2)) - erfc(hi / (sigma * SQRT_2)))
                } else if hi <= 0.0 {
                    0.5 * (erfc(-hi / (sigma * SQRT_2)) - erfc(-lo / (sigma * SQRT_2)))
                } else {
                    std_normal_cdf(hi / sigma) - std_normal_cdf(lo / sigma)
                }
            }
            DistributionSpec::TruncatedGaussian { sigma, a, b } => {
                let (l, h) = (lo.max(*a), hi.min(*b));
                if l >= h {
                    return 0.0;
                }
                let z = std_normal_cdf(b / sigma) - std_normal_cdf(a / sigma);
                (std_normal_cdf(h / sigma) - std_normal_cdf(l / sigma)) / z
            }
            DistributionSpec::Laplace { scale } => {
                let cdf = |x: f64| {
                    if x < 0.0 {
                        0.5 * (x / scale).exp()
                    } else {
                        1.0 - 0.5 * (-x / scale).exp()
                    }
                };
                cdf(hi) - cdf(lo)
            }
            DistributionSpec::Cauchy { scale } => ((hi / scale).atan() - (lo / scale).atan()) / PI,
            DistributionSpec::PointMass { .. } | DistributionSpec::Mixture { .. } => {
                unreachable!("handled by callers")
            }
        }
    }

    /// Density of the continuous part (atoms excluded).
    pub fn density(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            DistributionSpec::Gaussian { sigma } => std_normal_pdf(x / sigma) / sigma,
            DistributionSpec::TruncatedGaussian { sigma, a, b } => {
                if x < *a || x > *b {
                    return 0.0;
                }
                let z = std_normal_cdf(b / sigma) - std_normal_cdf(a / sigma);
                std_normal_pdf(x / sigma) / (sigma * z)
            }
            DistributionSpec::PointMass { .. } => 0.0,
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                components
                    .iter()
                    .map(|c| c.weight * c.d.density(x))
                    .sum::<f64>()
                    / total
            }
            DistributionSpec::Laplace { scale } => (-x.abs() / scale).exp() / (2.0 * scale),
            DistributionSpec::Cauchy { scale } => {
                let u = x / scale;
                1.0 / (PI * scale * (1.0 + u * u))
            }
        }
    }

    /// Atom locations with their probabilities.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            DistributionSpec::PointMass { at } => vec![(*at, 1.0)],
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                components
                    .iter()
                    .flat_map(|c| {
                        c.d.atoms()
                            .into_iter()
                            .map(move |(x, w)| (x, w * c.weight / total))
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Points where the density may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            DistributionSpec::Uniform { a, b }
            | DistributionSpec::TruncatedGaussian { a, b, .. } => {
                vec![*a, *b]
            }
            DistributionSpec::Mixture { components } => {
                components.iter().flat_map(|c| c.d.breakpoints()).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Bounded support `[lo, hi]`, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            DistributionSpec::Uniform { a, b }
            | DistributionSpec::TruncatedGaussian { a, b, .. } => Some((*a, *b)),
            DistributionSpec::PointMass { at } => Some((*at, *at)),
            DistributionSpec::Mixture { components } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for c in components {
                    let (l, h) = c.d.support()?;
                    lo = lo.min(l);
                    hi = hi.max(h);
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// Certified `c > 0` with `P(|x| > T) ≤ e^{−cT²}` for every `T ≥ 0`.
    pub fn subgaussian_constant(&self) -> Result<f64> {
        self.validate()?;
        match self {
            // 2Q(t) ≤ e^{−t²/2}; a factor 2 of slack on top.
            DistributionSpec::Gaussian { sigma } => Ok(1.0 / (4.0 * sigma * sigma)),
            // With 0 ∈ [a,b] and B = max(|a|,|b|): P(|x| ≤ T) ≥ T/(2B) for T ≤ B,
            // and −ln(1 − t/2) ≥ t/2 ≥ t²/2 on [0,1]. A truncated centered
            // gaussian puts at least as much mass near 0 as the uniform.
            DistributionSpec::Uniform { a, b }
            | DistributionSpec::TruncatedGaussian { a, b, .. } => {
                if *a > 0.0 || *b < 0.0 {
                    return Err(Error::Capability(format!(
                        "{}: support excludes 0, so P(|x|>T)=1 for small T>0",
                        self.name()
                    )));
                }
                let big = a.abs().max(b.abs());
                Ok(1.0 / (2.0 * big * big))
            }
            DistributionSpec::PointMass { at } => {
                if *at == 0.0 {
                    Ok(C_MAX)
                } else {
                    Err(Error::Capability(format!(
                        "{}: P(|x|>T)=1 for T<|at|, no c>0 exists",
                        self.name()
                    )))
                }
            }
            DistributionSpec::Mixture { components } => self.certify_mixture(components),
            DistributionSpec::Laplace { .. } | DistributionSpec::Cauchy { .. } => {
                Err(Error::Capability(format!(
                    "{} is heavier-tailed than any gaussian",
                    self.name()
                )))
            }
        }
    }

    /// Cell-wise certificate for mixtures.
    ///
    /// Beyond the bounded parts only gaussian components remain, each with its
    /// own certificate. On `(0, B]` a geometric grid is used: on a cell
    /// `[t_i, t_{i+1}]`, `−ln S(T)/T² ≥ −ln S(t_i)/t_{i+1}²` because `S` is
    /// nonincreasing. The innermost cell `[0, t_0]` relies on
    /// `−ln S(T) ≥ P(|x| ≤ T) ≥ w_0 + α·T`, with `w_0` the atom at the origin
    /// and `α` a lower bound on the symmetric mass rate there.
    fn certify_mixture(&self, components: &[Component]) -> Result<f64> {
        let total = Self::total_weight(components);
        let mut c_far = f64::INFINITY;
        let mut bounded_extent: f64 = 0.0;
        for comp in components {
            match &comp.d {
                DistributionSpec::Gaussian { sigma } => {
                    c_far = c_far.min(1.0 / (4.0 * sigma * sigma));
                }
                DistributionSpec::Laplace { .. } | DistributionSpec::Cauchy { .. } => {
                    return Err(Error::Capability(format!(
                        "mixture component {} is not subgaussian",
                        comp.d.name()
                    )));
                }
                DistributionSpec::Mixture { .. } => {
                    // Nested mixtures: certify recursively and treat as gaussian-like.
                    c_far = c_far.min(comp.d.subgaussian_constant()?);
                    if let Some((lo, hi)) = comp.d.support() {
                        bounded_extent = bounded_extent.max(lo.abs()).max(hi.abs());
                    }
                }
                other => {
                    let (lo, hi) = other.support().expect("bounded family");
                    bounded_extent = bounded_extent.max(lo.abs()).max(hi.abs());
                }
            }
        }
        if bounded_extent == 0.0 {
            // Only centered gaussians and atoms at 0.
            return Ok(c_far.min(C_MAX));
        }

        let t0 = bounded_extent * 1e-6;
        let near_rate = components
            .iter()
            .map(|c| c.weight / total * c.d.mass_rate_near_zero(t0))
            .sum::<f64>();
        let atom0 = self
            .atoms()
            .iter()
            .filter(|(x, _)| *x == 0.0)
            .map(|(_, w)| w)
            .sum::<f64>();
        let mut c = (atom0 + near_rate * t0) / (t0 * t0);

        let ratio = 1.002f64;
        let mut lo = t0;
        while lo < bounded_extent {
            let hi = (lo * ratio).min(bounded_extent);
            let s = self.survival(lo);
            let cell = if s <= 0.0 {
                f64::INFINITY
            } else {
                -s.ln() / (hi * hi)
            };
            c = c.min(cell);
            lo = hi;
        }
        let c = c.min(c_far).min(C_MAX);
        if c > 0.0 && c.is_finite() {
            Ok(c)
        } else {
            Err(Error::Capability(format!(
                "{}: P(|x|>T)=1 for some T>0, no c>0 exists",
                self.name()
            )))
        }
    }

    /// `α` with `P(|x| ≤ T) ≥ α·T` for `0 ≤ T ≤ t0` (continuous part only).
    fn mass_rate_near_zero(&self, t0: f64) -> f64 {
        match self {
            DistributionSpec::Uniform { a, b } => {
                if (*b >= t0 || *a <= -t0) && *a <= 0.0 && *b >= 0.0 {
                    return 1.0 / (b - a);
                }
                0.0
            }
            DistributionSpec::Gaussian { sigma } => 2.0 * std_normal_pdf(t0 / sigma) / sigma,
            DistributionSpec::TruncatedGaussian { sigma, a, b } => {
                if *a <= 0.0 && *b >= 0.0 && (*b >= t0 || *a <= -t0) {
                    let z = std_normal_cdf(b / sigma) - std_normal_cdf(a / sigma);
                    std_normal_pdf(t0 / sigma) / (sigma * z)
                } else {
                    0.0
                }
            }
            DistributionSpec::Mixture { components } => {
                let total = Self::total_weight(components);
                components
                    .iter()
                    .map(|c| c.weight / total * c.d.mass_rate_near_zero(t0))
                    .sum()
            }
            _ => 0.0,
        }
    }

    /// The certified constant when there is one, otherwise a fit to the
    /// empirical tail of `n` draws flagged as uncertified.
    pub fn tail_constant(&self, seed: u64, n: usize) -> Result<TailConstant> {
        match self.subgaussian_constant() {
            Ok(c) => Ok(TailConstant { c, certified: true }),
            Err(Error::Capability(_)) => Ok(TailConstant {
                c: self.fit_tail_constant(seed, n)?,
                certified: false,
            }),
            Err(e) => Err(e),
        }
    }

    /// `min −ln(freq(|x|>T))/T²` over the upper half of the empirical `|x|` quantiles.
    pub fn fit_tail_constant(&self, seed: u64, n: usize) -> Result<f64> {
        if n < MIN_TAIL_CHECK_SAMPLES {
            return Err(Error::Argument(format!(
                "tail fit needs at least {MIN_TAIL_CHECK_SAMPLES} samples"
            )));
        }
        let mut abs: Vec<f64> = self.sample(seed, n)?.into_iter().map(f64::abs).collect();
        abs.sort_by(f64::total_cmp);
        let mut c = f64::INFINITY;
        for i in (n / 2)..(n - 10) {
            let t = abs[i];
            if t <= 0.0 {
                continue;
            }
            let freq = (n - i - 1) as f64 / n as f64;
            c = c.min(-freq.ln() / (t * t));
        }
        if c.is_finite() && c > 0.0 {
            Ok(c)
        } else {
            Err(Error::Capability(format!(
                "{}: tail fit failed",
                self.name()
            )))
        }
    }

    /// Compare empirical `|x| > T` frequencies against `e^{−cT²}`.
    pub fn empirical_tail_check(
        &self,
        seed: u64,
        n: usize,
        t_grid: &[f64],
    ) -> Result<Vec<TailCheckRow>> {
        if n < MIN_TAIL_CHECK_SAMPLES {
            return Err(Error::Argument(format!(
                "tail check needs at least {MIN_TAIL_CHECK_SAMPLES} samples"
            )));
        }
        let c = self.subgaussian_constant()?;
        let xs = self.sample(seed, n)?;
        let nf = n as f64;
        Ok(t_grid
            .iter()
            .map(|&t| {
                let hits = xs.iter().filter(|x| x.abs() > t).count();
                let frequency = hits as f64 / nf;
                let bound = (-c * t * t).exp();
                let slack = 3.0 * (bound * (1.0 - bound) / nf).sqrt() + 3.0 / nf;
                TailCheckRow {
                    t,
                    frequency,
                    bound,
                    pass: frequency <= bound + slack,
                }
            })
            .collect())
    }
}

/// Samples paired with exact labels `y = f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub points: Vec<(f64, f64)>,
    pub seed: Option<u64>,
    pub fn_name: String,
}

/// Dataset plus provenance, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEnvelope {
    pub seed: Option<u64>,
    #[serde(rename = "fn")]
    pub function: Option<FunctionSpec>,
    pub dist: Option<DistributionSpec>,
    pub fn_name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
}

pub fn label(f: &FunctionSpec, xs: &[f64]) -> LabeledDataset {
    LabeledDataset {
        points: xs.iter().map(|&x| (x, f.eval(x))).collect(),
        seed: None,
        fn_name: f.name(),
    }
}

impl LabeledDataset {
    /// Sample and label in one go.
    pub fn generate(
        f: &FunctionSpec,
        d: &DistributionSpec,
        seed: u64,
        stream: u64,
        count: usize,
    ) -> Result<Self> {
        let xs = d.sample_stream(seed, stream, count)?;
        let mut data = label(f, &xs);
        data.seed = Some(seed);
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for &(x, y) in &self.points {
            out.serialize(CsvRow { x, y })?;
        }
        if self.points.is_empty() {
            out.write_record(["x", "y"])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, fn_name: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::Config("dataset CSV header must be `x,y`".into()));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            if !(row.x.is_finite() && row.y.is_finite()) {
                return Err(Error::Config("dataset values must be finite".into()));
            }
            points.push((row.x, row.y));
        }
        Ok(LabeledDataset {
            points,
            seed: None,
            fn_name: fn_name.to_string(),
        })
    }

    pub fn envelope(
        &self,
        f: Option<&FunctionSpec>,
        d: Option<&DistributionSpec>,
    ) -> DatasetEnvelope {
        DatasetEnvelope {
            seed: self.seed,
            function: f.cloned(),
            dist: d.cloned(),
            fn_name: self.fn_name.clone(),
            points: self.points.clone(),
        }
    }
}

impl From<DatasetEnvelope> for LabeledDataset {
    fn from(e: DatasetEnvelope) -> Self {
        LabeledDataset {
            points: e.points,
            seed: e.seed,
            fn_name: e.fn_name,
        }
    }
}
