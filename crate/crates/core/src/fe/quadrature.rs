//! Collapsed Gauss-Legendre rules on the reference simplex.

use crate::error::{Result, VmsError};

/// Quadrature rule in barycentric coordinates. Weights are volume
/// fractions: they sum to one, so `sum_q w_q f(x_q) * |K|` integrates over
/// a cell `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub order: usize,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        // Newton on P_m starting from the Chebyshev-like guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..m {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = m as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

impl QuadratureRule {
    /// Rule on the reference `dim`-simplex exact for polynomials of total
    /// degree `order`.
    pub fn simplex(dim: usize, order: usize) -> Result<QuadratureRule> {
        if dim != 2 && dim != 3 {
            return Err(VmsError::Config(format!("no quadrature for dimension {dim}")));
        }
        // The Duffy Jacobian adds dim - 1 to the degree along the first axis.
        let m = (order + dim).div_ceil(2);
        let (x, w) = gauss_legendre(m.max(1));
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let fact = if dim == 2 { 2.0 } else { 6.0 };
        if dim == 2 {
            for a in 0..x.len() {
                for b in 0..x.len() {
                    let (u, v) = (x[a], x[b]);
                    let px = u;
                    let py = v * (1.0 - u);
                    points.push([1.0 - px - py, px, py, 0.0]);
                    weights.push(fact * w[a] * w[b] * (1.0 - u));
                }
            }
        } else {
            for a in 0..x.len() {
                for b in 0..x.len() {
                    for c in 0..x.len() {
                        let (u, v, s) = (x[a], x[b], x[c]);
                        let px = u;
                        let py = v * (1.0 - u);
                        let pz = s * (1.0 - u) * (1.0 - v);
                        points.push([1.0 - px - py - pz, px, py, pz]);
                        weights.push(fact * w[a] * w[b] * w[c] * (1.0 - u).powi(2) * (1.0 - v));
                    }
                }
            }
        }
        Ok(QuadratureRule {
            dim,
            points,
            weights,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
