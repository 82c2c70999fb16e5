//! Moment-system solve over ℚ.
//!
//! Float inputs are converted exactly (every finite `f64` is a dyadic
//! rational), so the result is the true weight vector for the given nodes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Argument(format!("{x} is not finite")))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Exact weights for the `order`-th derivative at `point`.
pub fn fd_weights_exact(
    nodes: &[BigRational],
    order: usize,
    point: &BigRational,
) -> Result<Vec<BigRational>> {
    let size = nodes.len();
    if order >= size {
        return Err(Error::InsufficientNodes {
            order,
            needed: order + 1,
            available: size,
        });
    }
    for i in 0..size {
        for j in i + 1..size {
            if nodes[i] == nodes[j] {
                let v = to_f64(&nodes[i]);
                return Err(Error::DegenerateStencil {
                    first: v,
                    second: v,
                });
            }
        }
    }

    // Augmented system [A | b] with A[m][j] = (h_j − p)^m.
    let mut rows: Vec<Vec<BigRational>> = vec![Vec::with_capacity(size + 1); size];
    let centered: Vec<BigRational> = nodes.iter().map(|h| h - point).collect();
    let mut powers: Vec<BigRational> = vec![BigRational::one(); size];
    for (m, row) in rows.iter_mut().enumerate() {
        row.extend(powers.iter().cloned());
        row.push(if m == order {
            BigRational::from_integer(factorial(order))
        } else {
            BigRational::zero()
        });
        for (p, z) in powers.iter_mut().zip(&centered) {
            *p = &*p * z;
        }
    }

    for col in 0..size {
        let pivot = (col..size)
            .find(|&r| !rows[r][col].is_zero())
            .expect("distinct nodes give a nonsingular Vandermonde matrix");
        rows.swap(col, pivot);
        let inv = rows[col][col].recip();
        for k in col..=size {
            rows[col][k] = &rows[col][k] * &inv;
        }
        for r in 0..size {
            if r == col || rows[r][col].is_zero() {
                continue;
            }
            let factor = rows[r][col].clone();
            for k in col..=size {
                let delta = &factor * &rows[col][k];
                rows[r][k] -= delta;
            }
        }
    }
    Ok(rows.into_iter().map(|mut row| row.pop().unwrap()).collect())
}

/// Convenience wrapper over `f64` nodes; results rounded back to `f64`.
pub fn fd_weights_exact_f64(nodes: &[f64], order: usize, point: f64) -> Result<Vec<f64>> {
    let nodes: Vec<BigRational> = nodes
        .iter()
        .map(|&h| to_rational(h))
        .collect::<Result<_>>()?;
    let point = to_rational(point)?;
    Ok(fd_weights_exact(&nodes, order, &point)?
        .iter()
        .map(to_f64)
        .collect())
}
