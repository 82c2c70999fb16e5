//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Fornberg's recurrence: `weights[n][j]` for the `n`-th derivative at `p`,
/// for every `n ≤ max_order`, using all nodes.
pub fn fornberg(nodes: &[f64], p: f64, max_order: usize) -> Vec<Vec<f64>> {
    let len = nodes.len();
    let mut c = vec![vec![0.0; len]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - p;
    for i in 1..len {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - p;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// `P(Binomial(trials, γ) ≤ k)` in exact rational arithmetic.
pub fn binomial_cdf_exact(k: u64, trials: u64, gamma: &BigRational) -> BigRational {
    let one = BigRational::one();
    let miss = &one - gamma;
    let mut total = BigRational::zero();
    let mut binom = BigInt::one();
    for j in 0..=k.min(trials) {
        if j > 0 {
            binom = binom * BigInt::from(trials - j + 1) / BigInt::from(j);
        }
        let term = BigRational::from_integer(binom.clone())
            * num_traits::pow(gamma.clone(), j as usize)
            * num_traits::pow(miss.clone(), (trials - j) as usize);
        total += term;
    }
    total
}

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `E e^{K|X|}` for `X ~ N(0, σ²)`: `2 e^{K²σ²/2} Φ(Kσ)`.
pub fn gaussian_abs_exp_moment(k: f64, sigma: f64) -> f64 {
    2.0 * (k * k * sigma * sigma / 2.0).exp() * phi(k * sigma)
}

/// `E e^{K|X|}` for `X ~ U[a, b]` with `a ≤ 0 ≤ b`.
pub fn uniform_abs_exp_moment(k: f64, a: f64, b: f64) -> f64 {
    ((k * b).exp() - 1.0 + (-k * a).exp() - 1.0) / (k * (b - a))
}

pub fn falling(m: usize, n: usize) -> f64 {
    if n > m {
        return 0.0;
    }
    (m + 1 - n..=m).fold(1.0, |acc, v| acc * v as f64)
}
