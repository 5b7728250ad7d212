//! Cell-loop assembly of the bilinear forms and load vectors.
//!
//! Element contributions are computed in parallel and merged in cell order,
//! so results are bitwise reproducible regardless of the thread count.

use rayon::prelude::*;

use crate::error::{Result, VmsError};
use crate::fe::quadrature::QuadratureRule;
use crate::fe::space::{FeSpace, Tabulation};
use crate::fe::sparse::{SparseCholesky, SparseOperator, TripletBuilder};
use crate::mesh::Point;

/// Per-cell quantities at the points of a rule.
pub struct CellValues<'a> {
    pub cell: usize,
    pub n_basis: usize,
    /// Quadrature weight times cell volume.
    pub jxw: Vec<f64>,
    /// `values[q * n_basis + a]`.
    pub values: &'a [f64],
    /// `grads[q * n_basis + a]`.
    pub grads: Vec<[f64; 3]>,
    pub dofs: Vec<Option<usize>>,
}

impl<'a> CellValues<'a> {
    pub fn new(space: &FeSpace, rule: &QuadratureRule, tab: &'a Tabulation, k: usize) -> Self {
        let nb = tab.n_basis;
        let vol = space.geometry(k).volume;
        let mut grads = vec![[0.0; 3]; rule.len() * nb];
        for q in 0..rule.len() {
            space.gradients(tab, k, q, &mut grads[q * nb..(q + 1) * nb]);
        }
        CellValues {
            cell: k,
            n_basis: nb,
            jxw: rule.weights.iter().map(|w| w * vol).collect(),
            values: &tab.values,
            grads,
            dofs: space.cell_dofs(k).collect(),
        }
    }

    #[inline]
    pub fn phi(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.n_basis + a]
    }

    #[inline]
    pub fn grad(&self, q: usize, a: usize) -> &[f64; 3] {
        &self.grads[q * self.n_basis + a]
    }

    /// Value of the scalar component `comp` of an FE function at point `q`.
    pub fn value_of(&self, space: &FeSpace, coeffs: &[f64], comp: usize, q: usize) -> f64 {
        let nodes = space.cell_nodes(self.cell);
        (0..self.n_basis)
            .map(|a| self.phi(q, a) * space.coeff(coeffs, comp, nodes[a]))
            .sum()
    }

    /// Gradient of the scalar component `comp` at point `q`.
    pub fn grad_of(&self, space: &FeSpace, coeffs: &[f64], comp: usize, q: usize) -> [f64; 3] {
        let nodes = space.cell_nodes(self.cell);
        let mut g = [0.0; 3];
        for a in 0..self.n_basis {
            let c = space.coeff(coeffs, comp, nodes[a]);
            if c != 0.0 {
                let ga = self.grad(q, a);
                for d in 0..3 {
                    g[d] += c * ga[d];
                }
            }
        }
        g
    }
}

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Runs `kernel` on every cell in parallel and merges the emitted triplets
/// in cell order.
pub(crate) fn assemble_cells<F>(
    space: &FeSpace,
    rule: &QuadratureRule,
    rows: usize,
    cols: usize,
    symmetric: bool,
    kernel: F,
) -> SparseOperator
where
    F: Fn(&CellValues, &mut Vec<(usize, usize, f64)>) + Sync,
{
    let tab = space.tabulate(rule);
    let locals: Vec<Vec<(usize, usize, f64)>> = (0..space.mesh().n_cells())
        .into_par_iter()
        .map(|k| {
            let cv = CellValues::new(space, rule, &tab, k);
            let mut out = Vec::new();
            kernel(&cv, &mut out);
            out
        })
        .collect();
    let nnz = locals.iter().map(Vec::len).sum();
    let mut b = TripletBuilder::with_capacity(rows, cols, nnz);
    for l in locals {
        for (i, j, v) in l {
            b.push(i, j, v);
        }
    }
    b.build(symmetric)
}

/// Same as [`assemble_cells`] for vectors.
pub(crate) fn assemble_vector<F>(space: &FeSpace, rule: &QuadratureRule, len: usize, kernel: F) -> Vec<f64>
where
    F: Fn(&CellValues, &mut Vec<(usize, f64)>) + Sync,
{
    let tab = space.tabulate(rule);
    let locals: Vec<Vec<(usize, f64)>> = (0..space.mesh().n_cells())
        .into_par_iter()
        .map(|k| {
            let cv = CellValues::new(space, rule, &tab, k);
            let mut out = Vec::new();
            kernel(&cv, &mut out);
            out
        })
        .collect();
    let mut v = vec![0.0; len];
    for l in locals {
        for (i, x) in l {
            v[i] += x;
        }
    }
    v
}

/// Scalar element matrix replicated on the diagonal component blocks.
fn push_componentwise(
    space: &FeSpace,
    cv: &CellValues,
    local: &[f64],
    out: &mut Vec<(usize, usize, f64)>,
) {
    let nb = cv.n_basis;
    for c in 0..space.components() {
        for a in 0..nb {
            let Some(i) = cv.dofs[a] else { continue };
            for b in 0..nb {
                let Some(j) = cv.dofs[b] else { continue };
                out.push((space.vector_dof(c, i), space.vector_dof(c, j), local[a * nb + b]));
            }
        }
    }
}

pub fn assemble_mass(space: &FeSpace) -> SparseOperator {
    assemble_mass_with(space, &space.default_rule())
}

pub fn assemble_mass_with(space: &FeSpace, rule: &QuadratureRule) -> SparseOperator {
    let n = space.n_dofs();
    assemble_cells(space, rule, n, n, true, |cv, out| {
        let nb = cv.n_basis;
        let mut local = vec![0.0; nb * nb];
        for (q, &w) in cv.jxw.iter().enumerate() {
            for a in 0..nb {
                for b in 0..nb {
                    local[a * nb + b] += w * cv.phi(q, a) * cv.phi(q, b);
                }
            }
        }
        push_componentwise(space, cv, &local, out);
    })
}

pub fn assemble_stiffness(space: &FeSpace) -> SparseOperator {
    let n = space.n_dofs();
    assemble_cells(space, &space.default_rule(), n, n, true, |cv, out| {
        let nb = cv.n_basis;
        let mut local = vec![0.0; nb * nb];
        for (q, &w) in cv.jxw.iter().enumerate() {
            for a in 0..nb {
                for b in 0..nb {
                    local[a * nb + b] += w * dot(cv.grad(q, a), cv.grad(q, b));
                }
            }
        }
        push_componentwise(space, cv, &local, out);
    })
}

/// `G[i, j] = (phi_i, grad psi_j)` for vector `v` and scalar `q` on one mesh.
pub fn assemble_gradient_coupling(v: &FeSpace, q: &FeSpace) -> Result<SparseOperator> {
    check_pair(v, q)?;
    let rule = v.default_rule();
    let qtab = q.tabulate(&rule);
    Ok(assemble_cells(v, &rule, v.n_dofs(), q.n_dofs(), false, |cv, out| {
        let qv = CellValues::new(q, &rule, &qtab, cv.cell);
        for (qp, &w) in cv.jxw.iter().enumerate() {
            for a in 0..cv.n_basis {
                let Some(i) = cv.dofs[a] else { continue };
                let pa = w * cv.phi(qp, a);
                for b in 0..qv.n_basis {
                    let Some(j) = qv.dofs[b] else { continue };
                    let g = qv.grad(qp, b);
                    for c in 0..v.components() {
                        out.push((v.vector_dof(c, i), j, pa * g[c]));
                    }
                }
            }
        }
    }))
}

fn check_pair(v: &FeSpace, q: &FeSpace) -> Result<()> {
    if v.components() != v.dim() || q.components() != 1 {
        return Err(VmsError::Input(
            "gradient coupling needs a vector velocity space and a scalar pressure space".into(),
        ));
    }
    if !std::sync::Arc::ptr_eq(v.mesh(), q.mesh()) && v.mesh().n_cells() != q.mesh().n_cells() {
        return Err(VmsError::Input("spaces live on different meshes".into()));
    }
    Ok(())
}

/// Advection velocity `a` and its divergence at point `q` of a cell.
pub(crate) fn advection_at(space: &FeSpace, cv: &CellValues, a: &[f64], q: usize) -> ([f64; 3], f64) {
    let mut vel = [0.0; 3];
    let mut div = 0.0;
    for c in 0..space.dim() {
        vel[c] = cv.value_of(space, a, c, q);
        div += cv.grad_of(space, a, c, q)[c];
    }
    (vel, div)
}

/// Skew-symmetrized convection `C[i, j] = b(a, phi_j, phi_i)` with
/// `b(a, v, w) = ((a . grad) v + 1/2 (div a) v, w)`.
pub fn assemble_convection(space: &FeSpace, a: &[f64]) -> Result<SparseOperator> {
    if a.len() != space.n_dofs() || space.components() != space.dim() {
        return Err(VmsError::Input(format!(
            "advection field has {} coefficients, space has {} (vector space required)",
            a.len(),
            space.n_dofs()
        )));
    }
    let n = space.n_dofs();
    Ok(assemble_cells(space, &space.default_rule(), n, n, false, |cv, out| {
        let nb = cv.n_basis;
        let mut local = vec![0.0; nb * nb];
        for (q, &w) in cv.jxw.iter().enumerate() {
            let (vel, div) = advection_at(space, cv, a, q);
            for b in 0..nb {
                let nb_q = dot(&vel, cv.grad(q, b)) + 0.5 * div * cv.phi(q, b);
                for t in 0..nb {
                    local[t * nb + b] += w * nb_q * cv.phi(q, t);
                }
            }
        }
        push_componentwise(space, cv, &local, out);
    }))
}

/// Order used for loads of smooth data: three orders above assembly.
pub fn load_rule(space: &FeSpace) -> QuadratureRule {
    QuadratureRule::simplex(space.dim(), 2 * space.degree() + 4).expect("dimension already validated")
}

/// `load[i] = (f, phi_i)`.
pub fn assemble_load(space: &FeSpace, f: impl Fn(&Point) -> [f64; 3] + Sync) -> Vec<f64> {
    assemble_load_with(space, &load_rule(space), f)
}

pub fn assemble_load_with(
    space: &FeSpace,
    rule: &QuadratureRule,
    f: impl Fn(&Point) -> [f64; 3] + Sync,
) -> Vec<f64> {
    assemble_vector(space, rule, space.n_dofs(), |cv, out| {
        for (q, &w) in cv.jxw.iter().enumerate() {
            let x = space.map_point(cv.cell, &rule.points[q]);
            let fx = f(&x);
            for a in 0..cv.n_basis {
                let Some(i) = cv.dofs[a] else { continue };
                for c in 0..space.components() {
                    out.push((space.vector_dof(c, i), w * fx[c] * cv.phi(q, a)));
                }
            }
        }
    })
}

/// L2 projection onto the space: solves `M c = load(f)`.
pub fn l2_project(space: &FeSpace, f: impl Fn(&Point) -> [f64; 3] + Sync) -> Result<Vec<f64>> {
    let m = assemble_mass(space);
    let chol = SparseCholesky::new(&m)?;
    Ok(chol.solve(&assemble_load(space, f)))
}

/// Max norm of an FE function. Exact for degree 1 (vertex max of the
/// Euclidean magnitude); for higher degree the max over a barycentric
/// lattice with 4 subdivisions per edge.
pub fn linf_norm(space: &FeSpace, u: &[f64]) -> f64 {
    let mag = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if space.degree() == 1 {
        return space.node_values(u).iter().map(mag).fold(0.0, f64::max);
    }
    let dim = space.dim();
    let m = 4usize;
    let mut lattice = Vec::new();
    for i in 0..=m {
        for j in 0..=m - i {
            if dim == 2 {
                let (a, b) = (i as f64 / m as f64, j as f64 / m as f64);
                lattice.push(vec![1.0 - a - b, a, b]);
            } else {
                for k in 0..=m - i - j {
                    let (a, b, c) = (i as f64 / m as f64, j as f64 / m as f64, k as f64 / m as f64);
                    lattice.push(vec![1.0 - a - b - c, a, b, c]);
                }
            }
        }
    }
    let basis: Vec<Vec<f64>> = lattice.iter().map(|l| space.reference_basis(l).0).collect();
    let mut best: f64 = 0.0;
    for k in 0..space.mesh().n_cells() {
        let nodes = space.cell_nodes(k);
        for phi in &basis {
            let mut v = [0.0; 3];
            for (a, &node) in nodes.iter().enumerate() {
                for c in 0..space.components() {
                    v[c] += phi[a] * space.coeff(u, c, node);
                }
            }
            best = best.max(mag(&v));
        }
    }
    best
}
