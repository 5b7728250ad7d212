//! Continuous Lagrange spaces on simplicial meshes.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Result, VmsError};
use crate::fe::quadrature::QuadratureRule;
use crate::mesh::{simplex_signed_volume, Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Homogeneous Dirichlet: boundary nodes carry no DOF.
    ZeroTrace,
    /// All nodes carry DOFs; the constant mode is removed by the caller
    /// (multiplier in the solver, [`FeSpace::remove_mean`] otherwise).
    ZeroMean,
    None,
}

/// Volume and barycentric gradients of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub volume: f64,
    /// `grad_bary[i]` is the (constant) gradient of the i-th barycentric
    /// coordinate.
    pub grad_bary: [[f64; 3]; 4],
}

impl CellGeometry {
    pub fn new(dim: usize, p: &[Point]) -> CellGeometry {
        let volume = simplex_signed_volume(dim, p);
        // Rows of the inverse Jacobian give the gradients of lambda_1..lambda_d.
        let mut jac = [[0.0; 3]; 3];
        for c in 0..dim {
            for r in 0..dim {
                jac[r][c] = p[c + 1][r] - p[0][r];
            }
        }
        let inv = invert(dim, &jac);
        let mut grad_bary = [[0.0; 3]; 4];
        for i in 1..=dim {
            for r in 0..dim {
                grad_bary[i][r] = inv[i - 1][r];
            }
        }
        for r in 0..dim {
            grad_bary[0][r] = -(1..=dim).map(|i| grad_bary[i][r]).sum::<f64>();
        }
        CellGeometry {
            volume: volume.abs(),
            grad_bary,
        }
    }
}

fn invert(dim: usize, a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    if dim == 2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        inv[0][0] = a[1][1] / det;
        inv[0][1] = -a[0][1] / det;
        inv[1][0] = -a[1][0] / det;
        inv[1][1] = a[0][0] / det;
    } else {
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        for i in 0..3 {
            for j in 0..3 {
                let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
                let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
                inv[i][j] = (a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]) / det;
            }
        }
    }
    inv
}

/// Basis values and barycentric derivatives tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_points: usize,
    pub n_basis: usize,
    pub bary_len: usize,
    /// `values[q * n_basis + a]`.
    pub values: Vec<f64>,
    /// `dbary[(q * n_basis + a) * bary_len + i] = d phi_a / d lambda_i`.
    pub dbary: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    components: usize,
    constraint: Constraint,
    nodes: Vec<Point>,
    nodes_per_cell: usize,
    cell_nodes: Vec<usize>,
    node_dof: Vec<Option<usize>>,
    dof_node: Vec<usize>,
    geometry: Arc<Vec<CellGeometry>>,
}

impl FeSpace {
    pub fn new(
        mesh: Arc<Mesh>,
        degree: usize,
        components: usize,
        constraint: Constraint,
    ) -> Result<FeSpace> {
        if !(1..=2).contains(&degree) {
            return Err(VmsError::Config(format!(
                "unsupported polynomial degree {degree} (supported: 1, 2)"
            )));
        }
        if components != 1 && components != mesh.dim() {
            return Err(VmsError::Config(format!(
                "a space has 1 or {} components, got {components}",
                mesh.dim()
            )));
        }
        let dim = mesh.dim();
        let nv = dim + 1;
        let mut nodes: Vec<Point> = mesh.vertices().to_vec();
        let mut boundary = mesh.boundary_vertex_mask();
        let nodes_per_cell = if degree == 1 { nv } else { nv + nv * (nv - 1) / 2 };
        let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * nodes_per_cell);
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        for c in mesh.cells() {
            cell_nodes.extend_from_slice(c);
            if degree == 2 {
                for i in 0..nv {
                    for j in i + 1..nv {
                        let key = (c[i].min(c[j]), c[i].max(c[j]));
                        let id = *edge_id.entry(key).or_insert_with(|| {
                            let (a, b) = (mesh.vertices()[key.0], mesh.vertices()[key.1]);
                            nodes.push([
                                0.5 * (a[0] + b[0]),
                                0.5 * (a[1] + b[1]),
                                0.5 * (a[2] + b[2]),
                            ]);
                            boundary.push(false);
                            nodes.len() - 1
                        });
                        cell_nodes.push(id);
                    }
                }
            }
        }
        if degree == 2 {
            for f in mesh.boundary_facets() {
                for i in 0..f.vertices.len() {
                    for j in i + 1..f.vertices.len() {
                        let (a, b) = (f.vertices[i], f.vertices[j]);
                        if let Some(&id) = edge_id.get(&(a.min(b), a.max(b))) {
                            boundary[id] = true;
                        }
                    }
                }
            }
        }
        let mut node_dof = vec![None; nodes.len()];
        let mut dof_node = Vec::new();
        for (n, slot) in node_dof.iter_mut().enumerate() {
            if constraint == Constraint::ZeroTrace && boundary[n] {
                continue;
            }
            *slot = Some(dof_node.len());
            dof_node.push(n);
        }
        let geometry = (0..mesh.n_cells())
            .map(|k| CellGeometry::new(dim, &mesh.cell_points(k)))
            .collect();
        Ok(FeSpace {
            mesh,
            degree,
            components,
            constraint,
            nodes,
            nodes_per_cell,
            cell_nodes,
            node_dof,
            dof_node,
            geometry: Arc::new(geometry),
        })
    }

    /// Space of the same mesh with another degree/shape, sharing geometry.
    pub fn sibling(&self, degree: usize, components: usize, constraint: Constraint) -> Result<FeSpace> {
        FeSpace::new(self.mesh.clone(), degree, components, constraint)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// DOFs per component.
    pub fn n_scalar_dofs(&self) -> usize {
        self.dof_node.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.dof_node.len()
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.nodes_per_cell
    }

    pub fn cell_nodes(&self, k: usize) -> &[usize] {
        &self.cell_nodes[k * self.nodes_per_cell..(k + 1) * self.nodes_per_cell]
    }

    pub fn node_dof(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    pub fn dof_node(&self, dof: usize) -> usize {
        self.dof_node[dof]
    }

    /// Global vector DOF of `(component, scalar dof)`.
    #[inline]
    pub fn vector_dof(&self, comp: usize, sdof: usize) -> usize {
        comp * self.dof_node.len() + sdof
    }

    pub fn geometry(&self, k: usize) -> &CellGeometry {
        &self.geometry[k]
    }

    /// Scalar DOFs of the nodes of cell `k` (None for constrained nodes).
    pub fn cell_dofs(&self, k: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        self.cell_nodes(k).iter().map(|&n| self.node_dof[n])
    }

    /// Quadrature rule of order `2 * degree + 1` used for assembly.
    pub fn default_rule(&self) -> QuadratureRule {
        QuadratureRule::simplex(self.dim(), 2 * self.degree + 1).expect("dimension already validated")
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        let nb = self.nodes_per_cell;
        let bl = self.dim() + 1;
        let mut values = Vec::with_capacity(rule.len() * nb);
        let mut dbary = vec![0.0; rule.len() * nb * bl];
        for (q, p) in rule.points.iter().enumerate() {
            let (v, d) = self.reference_basis(&p[..bl]);
            values.extend_from_slice(&v);
            dbary[q * nb * bl..(q + 1) * nb * bl].copy_from_slice(&d);
        }
        Tabulation {
            n_points: rule.len(),
            n_basis: nb,
            bary_len: bl,
            values,
            dbary,
        }
    }

    /// Basis values and barycentric derivatives at a barycentric point.
    pub fn reference_basis(&self, lam: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let bl = lam.len();
        let nb = self.nodes_per_cell;
        let mut v = vec![0.0; nb];
        let mut d = vec![0.0; nb * bl];
        if self.degree == 1 {
            for a in 0..bl {
                v[a] = lam[a];
                d[a * bl + a] = 1.0;
            }
        } else {
            for a in 0..bl {
                v[a] = lam[a] * (2.0 * lam[a] - 1.0);
                d[a * bl + a] = 4.0 * lam[a] - 1.0;
            }
            let mut e = bl;
            for i in 0..bl {
                for j in i + 1..bl {
                    v[e] = 4.0 * lam[i] * lam[j];
                    d[e * bl + i] = 4.0 * lam[j];
                    d[e * bl + j] = 4.0 * lam[i];
                    e += 1;
                }
            }
        }
        (v, d)
    }

    /// Physical gradients of all local basis functions at tabulated point `q`
    /// on cell `k`, written into `out[a] = grad phi_a`.
    pub fn gradients(&self, tab: &Tabulation, k: usize, q: usize, out: &mut [[f64; 3]]) {
        let g = &self.geometry[k].grad_bary;
        let (nb, bl) = (tab.n_basis, tab.bary_len);
        for a in 0..nb {
            let d = &tab.dbary[(q * nb + a) * bl..(q * nb + a + 1) * bl];
            let mut r = [0.0; 3];
            for (i, di) in d.iter().enumerate() {
                if *di != 0.0 {
                    for c in 0..3 {
                        r[c] += di * g[i][c];
                    }
                }
            }
            out[a] = r;
        }
    }

    /// Physical position of barycentric point `lam` on cell `k`.
    pub fn map_point(&self, k: usize, lam: &[f64]) -> Point {
        let c = self.mesh.cell(k);
        let mut x = [0.0; 3];
        for (i, &v) in c.iter().enumerate() {
            let p = self.mesh.vertices()[v];
            for d in 0..3 {
                x[d] += lam[i] * p[d];
            }
        }
        x
    }

    /// Nodal interpolant of `f` (components beyond `components()` ignored).
    pub fn interpolate(&self, f: impl Fn(&Point) -> [f64; 3]) -> Vec<f64> {
        let n = self.n_scalar_dofs();
        let mut out = vec![0.0; self.n_dofs()];
        for (sdof, &node) in self.dof_node.iter().enumerate() {
            let v = f(&self.nodes[node]);
            for c in 0..self.components {
                out[c * n + sdof] = v[c];
            }
        }
        out
    }

    /// Value of the FE function at every node (zero at constrained nodes).
    pub fn node_values(&self, coeffs: &[f64]) -> Vec<[f64; 3]> {
        let n = self.n_scalar_dofs();
        self.node_dof
            .iter()
            .map(|d| {
                let mut v = [0.0; 3];
                if let Some(s) = d {
                    for c in 0..self.components {
                        v[c] = coeffs[c * n + s];
                    }
                }
                v
            })
            .collect()
    }

    /// Coefficient of `(component, node)` including constrained zeros.
    #[inline]
    pub fn coeff(&self, coeffs: &[f64], comp: usize, node: usize) -> f64 {
        match self.node_dof[node] {
            Some(s) => coeffs[comp * self.dof_node.len() + s],
            None => 0.0,
        }
    }

    /// Barycentric coordinates of `x` in cell `k`.
    pub fn barycentric(&self, k: usize, x: &Point) -> Vec<f64> {
        let dim = self.dim();
        let g = &self.geometry[k].grad_bary;
        let p0 = self.mesh.vertices()[self.mesh.cell(k)[0]];
        let mut lam = vec![0.0; dim + 1];
        for i in 1..=dim {
            lam[i] = (0..dim).map(|r| g[i][r] * (x[r] - p0[r])).sum();
        }
        lam[0] = 1.0 - lam[1..].iter().sum::<f64>();
        lam
    }

    /// Point evaluation by brute-force cell search; `None` outside the mesh.
    pub fn eval_point(&self, coeffs: &[f64], x: &Point) -> Option<[f64; 3]> {
        let k = (0..self.mesh.n_cells())
            .find(|&k| self.barycentric(k, x).iter().all(|&l| l >= -1e-12))?;
        let lam = self.barycentric(k, x);
        let (v, _) = self.reference_basis(&lam);
        let mut out = [0.0; 3];
        for (a, &node) in self.cell_nodes(k).iter().enumerate() {
            for c in 0..self.components {
                out[c] += v[a] * self.coeff(coeffs, c, node);
            }
        }
        Some(out)
    }

    /// `m_j = integral of the j-th scalar basis function`.
    pub fn mean_weights(&self) -> Vec<f64> {
        let rule = self.default_rule();
        let tab = self.tabulate(&rule);
        let mut m = vec![0.0; self.n_scalar_dofs()];
        for k in 0..self.mesh.n_cells() {
            let vol = self.geometry[k].volume;
            for q in 0..rule.len() {
                for (a, d) in self.cell_dofs(k).enumerate() {
                    if let Some(d) = d {
                        m[d] += rule.weights[q] * vol * tab.values[q * tab.n_basis + a];
                    }
                }
            }
        }
        m
    }

    /// Subtracts the mean value from a scalar unconstrained function.
    pub fn remove_mean(&self, coeffs: &mut [f64]) {
        assert_eq!(self.components, 1);
        assert_ne!(self.constraint, Constraint::ZeroTrace);
        let m = self.mean_weights();
        let area: f64 = m.iter().sum();
        let mean = m.iter().zip(coeffs.iter()).map(|(a, b)| a * b).sum::<f64>() / area;
        coeffs.iter_mut().for_each(|c| *c -= mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured, BoxDomain};

    fn mesh(dim: usize, n: usize) -> Arc<Mesh> {
        Arc::new(build_structured(dim, n, BoxDomain::unit()).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = mesh(2, 2);
        let s = FeSpace::new(m.clone(), 1, 1, Constraint::None).unwrap();
        assert_eq!(s.n_dofs(), 9);
        let s = FeSpace::new(m.clone(), 1, 1, Constraint::ZeroTrace).unwrap();
        assert_eq!(s.n_dofs(), 1);
        let s = FeSpace::new(m.clone(), 1, 2, Constraint::ZeroTrace).unwrap();
        assert_eq!(s.n_dofs(), 2);
        let s = FeSpace::new(m.clone(), 2, 1, Constraint::None).unwrap();
        assert_eq!(s.n_dofs(), 25);
        let s = FeSpace::new(m.clone(), 2, 1, Constraint::ZeroTrace).unwrap();
        assert_eq!(s.n_dofs(), 9);
        // the single diagonal of the n = 1 mesh is interior
        let s = FeSpace::new(mesh(2, 1), 2, 1, Constraint::ZeroTrace).unwrap();
        assert_eq!(s.n_dofs(), 1);
        let s = FeSpace::new(mesh(3, 2), 2, 1, Constraint::ZeroTrace).unwrap();
        assert_eq!(s.n_dofs(), 27);
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(
            FeSpace::new(mesh(2, 1), 3, 1, Constraint::None),
            Err(VmsError::Config(_))
        ));
        assert!(FeSpace::new(mesh(2, 1), 0, 1, Constraint::None).is_err());
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let m = mesh(3, 1);
        let s = FeSpace::new(m, 1, 1, Constraint::None).unwrap();
        for k in 0..6 {
            let g = s.geometry(k).grad_bary;
            for r in 0..3 {
                assert!((g[0][r] + g[1][r] + g[2][r] + g[3][r]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_quadratics() {
        let s = FeSpace::new(mesh(2, 3), 2, 1, Constraint::None).unwrap();
        let f = |x: &Point| [x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1], 0.0, 0.0];
        let c = s.interpolate(f);
        for x in [[0.13, 0.71, 0.0], [0.5, 0.5, 0.0], [0.99, 0.02, 0.0]] {
            let v = s.eval_point(&c, &x).unwrap();
            assert!((v[0] - f(&x)[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_mean_removes_constants() {
        let s = FeSpace::new(mesh(2, 3), 1, 1, Constraint::ZeroMean).unwrap();
        let mut c = vec![3.5; s.n_dofs()];
        s.remove_mean(&mut c);
        assert!(c.iter().all(|v| v.abs() < 1e-14));
    }
}
