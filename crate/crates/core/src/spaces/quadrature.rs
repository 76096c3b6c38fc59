//! Collapsed-coordinate (Duffy) quadrature on the reference triangle.
//!
//! A tensor Gauss-Legendre rule on the unit square is mapped onto the
//! triangle by `x = s`, `y = t (1 - s)`. The Jacobian `(1 - s)` raises the
//! polynomial degree in `s` by one, so `n` points per direction integrate
//! total degree `2n - 2` exactly.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(l0, l1, l2)`; reference coordinates are
    /// `x = l1`, `y = l2`.
    pub points: Vec<[f64; 3]>,
    /// Weights on the reference triangle; they sum to 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f(x, y)` over the reference triangle.
    pub fn integrate_reference(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * f(l[1], l[2]))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Returns a rule exact for all polynomials of total degree `min_degree`.
pub fn make_quadrature(min_degree: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_DEGREE).contains(&min_degree) {
        return Err(Error::UnsupportedQuadrature(min_degree));
    }
    let n = (min_degree + 3) / 2;
    let (nodes, weights) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut w = Vec::with_capacity(n * n);
    for (s, ws) in nodes.iter().zip(&weights) {
        for (t, wt) in nodes.iter().zip(&weights) {
            let x = *s;
            let y = t * (1.0 - s);
            points.push([1.0 - x - y, x, y]);
            w.push(ws * wt * (1.0 - s));
        }
    }
    Ok(QuadratureRule {
        points,
        weights: w,
        degree: 2 * n - 2,
    })
}
