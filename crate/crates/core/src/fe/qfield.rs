//! Fields stored at the quadrature points of every cell.

use rayon::prelude::*;

use crate::fe::assemble::{assemble_vector, CellValues};
use crate::fe::quadrature::QuadratureRule;
use crate::fe::space::FeSpace;

/// Vector (or scalar, `comps == 1`) values at `n_q` points per cell,
/// stored cell-major: `values[k * n_q + q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField {
    pub comps: usize,
    pub n_q: usize,
    pub values: Vec<[f64; 3]>,
}

impl QuadField {
    pub fn zeros(n_cells: usize, n_q: usize, comps: usize) -> Self {
        QuadField {
            comps,
            n_q,
            values: vec![[0.0; 3]; n_cells * n_q],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.n_q.max(1)
    }

    #[inline]
    pub fn at(&self, k: usize, q: usize) -> &[f64; 3] {
        &self.values[k * self.n_q + q]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize, q: usize) -> &mut [f64; 3] {
        &mut self.values[k * self.n_q + q]
    }

    /// Values of an FE function of `space` at the points of `rule`.
    pub fn from_fe(space: &FeSpace, coeffs: &[f64], rule: &QuadratureRule) -> Self {
        let tab = space.tabulate(rule);
        let comps = space.components();
        let values = (0..space.mesh().n_cells())
            .into_par_iter()
            .flat_map_iter(|k| {
                let cv = CellValues::new(space, rule, &tab, k);
                (0..rule.len())
                    .map(|q| {
                        let mut v = [0.0; 3];
                        for (c, slot) in v.iter_mut().enumerate().take(comps) {
                            *slot = cv.value_of(space, coeffs, c, q);
                        }
                        v
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        QuadField {
            comps,
            n_q: rule.len(),
            values,
        }
    }

    /// Gradient of a scalar FE function at the points of `rule`.
    pub fn gradient_of(space: &FeSpace, coeffs: &[f64], rule: &QuadratureRule) -> Self {
        assert_eq!(space.components(), 1);
        let tab = space.tabulate(rule);
        let values = (0..space.mesh().n_cells())
            .into_par_iter()
            .flat_map_iter(|k| {
                let cv = CellValues::new(space, rule, &tab, k);
                (0..rule.len())
                    .map(|q| cv.grad_of(space, coeffs, 0, q))
                    .collect::<Vec<_>>()
            })
            .collect();
        QuadField {
            comps: space.dim(),
            n_q: rule.len(),
            values,
        }
    }

    /// Samples a closure at the physical quadrature points.
    pub fn from_fn(
        space: &FeSpace,
        rule: &QuadratureRule,
        comps: usize,
        f: impl Fn(&crate::mesh::Point) -> [f64; 3] + Sync,
    ) -> Self {
        let values = (0..space.mesh().n_cells())
            .into_par_iter()
            .flat_map_iter(|k| {
                rule.points
                    .iter()
                    .map(|p| {
                        let mut v = f(&space.map_point(k, p));
                        v[comps..].iter_mut().for_each(|x| *x = 0.0);
                        v
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        QuadField {
            comps,
            n_q: rule.len(),
            values,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn axpy(&mut self, a: f64, other: &QuadField) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            for c in 0..3 {
                x[c] += a * y[c];
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x *= a));
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    /// Discrete L2 inner product with the weights of `rule` on `space`'s mesh.
    pub fn inner(&self, other: &QuadField, space: &FeSpace, rule: &QuadratureRule) -> f64 {
        assert_eq!(self.n_q, rule.len());
        let mut s = 0.0;
        for k in 0..space.mesh().n_cells() {
            let vol = space.geometry(k).volume;
            let mut cell = 0.0;
            for q in 0..self.n_q {
                let (a, b) = (self.at(k, q), other.at(k, q));
                cell += rule.weights[q] * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
            }
            s += vol * cell;
        }
        s
    }

    pub fn norm(&self, space: &FeSpace, rule: &QuadratureRule) -> f64 {
        self.inner(self, space, rule).max(0.0).sqrt()
    }

    /// `out[i] = (self, phi_i)` for the basis of `space` (scalar or vector).
    pub fn pair_basis(&self, space: &FeSpace, rule: &QuadratureRule) -> Vec<f64> {
        assert_eq!(self.n_q, rule.len());
        assemble_vector(space, rule, space.n_dofs(), |cv, out| {
            for (q, &w) in cv.jxw.iter().enumerate() {
                let f = self.at(cv.cell, q);
                for a in 0..cv.n_basis {
                    let Some(i) = cv.dofs[a] else { continue };
                    for c in 0..space.components() {
                        out.push((space.vector_dof(c, i), w * f[c] * cv.phi(q, a)));
                    }
                }
            }
        })
    }

    /// `out[j] = (self, grad psi_j)` for a scalar space.
    pub fn pair_gradients(&self, space: &FeSpace, rule: &QuadratureRule) -> Vec<f64> {
        assert_eq!(space.components(), 1);
        assemble_vector(space, rule, space.n_dofs(), |cv, out| {
            for (q, &w) in cv.jxw.iter().enumerate() {
                let f = self.at(cv.cell, q);
                for a in 0..cv.n_basis {
                    let Some(i) = cv.dofs[a] else { continue };
                    let g = cv.grad(q, a);
                    out.push((i, w * (f[0] * g[0] + f[1] * g[1] + f[2] * g[2])));
                }
            }
        })
    }

    /// Quadrature average of the magnitude on each cell.
    pub fn cell_mean_magnitude(&self, rule: &QuadratureRule) -> Vec<f64> {
        (0..self.n_cells())
            .map(|k| {
                (0..self.n_q)
                    .map(|q| {
                        let v = self.at(k, q);
                        rule.weights[q] * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
                    })
                    .sum()
            })
            .collect()
    }
}
