//! Odd-order Legendre polynomials and the memoryless preprocessor built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
pub fn p3(x: f64) -> f64 {
    let x2 = x * x;
    x * (5.0 * x2 - 3.0) / 2.0
}

#[inline]
pub fn p5(x: f64) -> f64 {
    let x2 = x * x;
    x * ((63.0 * x2 - 70.0) * x2 + 15.0) / 8.0
}

#[inline]
pub fn p7(x: f64) -> f64 {
    let x2 = x * x;
    x * (((429.0 * x2 - 693.0) * x2 + 315.0) * x2 - 35.0) / 16.0
}

/// Legendre polynomial of the first kind for order 3, 5 or 7.
pub fn legendre_odd(x: f64, order: u32) -> Result<f64> {
    match order {
        3 => Ok(p3(x)),
        5 => Ok(p5(x)),
        7 => Ok(p7(x)),
        other => Err(Error::UnsupportedLegendreOrder(other)),
    }
}

/// `[P3(x), P5(x), P7(x)]`.
#[inline]
pub fn odd_basis(x: f64) -> [f64; 3] {
    [p3(x), p5(x), p7(x)]
}

/// `y = x + a1 P3(x) + a2 P5(x) + a3 P7(x)`, applied element-wise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub coeffs: [f64; 3],
}

impl Preprocessor {
    pub fn new(coeffs: [f64; 3]) -> Self {
        Self { coeffs }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.apply_with_basis(x, &odd_basis(x))
    }

    #[inline]
    pub fn apply_with_basis(&self, x: f64, basis: &[f64; 3]) -> f64 {
        let a = &self.coeffs;
        x + a[0] * basis[0] + a[1] * basis[1] + a[2] * basis[2]
    }
}

pub fn preprocess(x: &[f64], pre: &Preprocessor) -> Vec<f64> {
    x.iter().map(|&v| pre.apply(v)).collect()
}
