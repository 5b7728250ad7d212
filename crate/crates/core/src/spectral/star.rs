//! Composite space of resolved plus orthogonal subgrid functions.
//!
//! The subgrid block is realized inside the degree-two Lagrange space on
//! the same mesh: a function `w` of the enriched space splits into
//! `pi w` (its L2 projection onto the degree-one space) and the
//! orthogonal remainder `w - pi w`.

use std::sync::Arc;

use faer::Mat;

use crate::error::{Result, VmsError};
use crate::fe::{
    assemble_gradient_coupling, assemble_mass, assemble_stiffness, Constraint, FeSpace, SparseCholesky,
    SparseOperator, TripletBuilder,
};
use crate::mesh::Mesh;
use crate::spectral::spectrum::{decompose_dense, spectral_decompose_capped, Spectrum, DENSE_CAP};

/// Interpolation of degree-one functions into the degree-two space on the
/// same mesh (vertex values copied, edge midpoints averaged).
pub fn embedding(low: &FeSpace, high: &FeSpace) -> Result<SparseOperator> {
    if low.degree() != 1 || high.degree() != 2 || low.components() != high.components() {
        return Err(VmsError::Input("embedding maps a degree-one space into its degree-two sibling".into()));
    }
    let mesh = low.mesh();
    let nv = mesh.dim() + 1;
    let mut seen = vec![false; high.n_nodes()];
    let mut b = TripletBuilder::new(high.n_dofs(), low.n_dofs());
    for k in 0..mesh.n_cells() {
        let cell = mesh.cell(k);
        let hn = high.cell_nodes(k);
        let mut local = 0;
        let mut entries: Vec<(usize, Vec<usize>)> = (0..nv).map(|i| (hn[i], vec![cell[i]])).collect();
        for i in 0..nv {
            for j in i + 1..nv {
                entries.push((hn[nv + local], vec![cell[i], cell[j]]));
                local += 1;
            }
        }
        for (node, verts) in entries {
            if seen[node] {
                continue;
            }
            seen[node] = true;
            let Some(hd) = high.node_dof(node) else { continue };
            let w = 1.0 / verts.len() as f64;
            for v in verts {
                if let Some(ld) = low.node_dof(v) {
                    for c in 0..low.components() {
                        b.push(high.vector_dof(c, hd), low.vector_dof(c, ld), w);
                    }
                }
            }
        }
    }
    Ok(b.build(false))
}

/// Resolved velocity space, enriched space, pressure space and the
/// operators linking them.
pub struct StarSpace {
    pub fe: FeSpace,
    pub enriched: FeSpace,
    pub pressure: FeSpace,
    pub h: f64,
    pub mass_fe: SparseOperator,
    pub stiff_fe: SparseOperator,
    pub mass_e: SparseOperator,
    /// Degree-one to degree-two interpolation.
    pub embed: SparseOperator,
    /// `B_E[j, i] = (e_i, grad psi_j)` on the enriched space.
    pub coupling_e: SparseOperator,
    /// Pressure Neumann stiffness and mass.
    pub stiff_p: SparseOperator,
    pub mass_p: SparseOperator,
    chol_fe: SparseCholesky,
    chol_e: SparseCholesky,
}

impl StarSpace {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let dim = mesh.dim();
        let fe = FeSpace::new(mesh.clone(), 1, dim, Constraint::ZeroTrace)?;
        let enriched = FeSpace::new(mesh.clone(), 2, dim, Constraint::ZeroTrace)?;
        let pressure = FeSpace::new(mesh.clone(), 1, 1, Constraint::ZeroMean)?;
        let mass_fe = assemble_mass(&fe);
        let mass_e = assemble_mass(&enriched);
        Ok(StarSpace {
            h: mesh.h_max(),
            stiff_fe: assemble_stiffness(&fe),
            embed: embedding(&fe, &enriched)?,
            coupling_e: assemble_gradient_coupling(&enriched, &pressure)?.transpose(),
            stiff_p: assemble_stiffness(&pressure),
            mass_p: assemble_mass(&pressure),
            chol_fe: SparseCholesky::new(&mass_fe)?,
            chol_e: SparseCholesky::new(&mass_e)?,
            mass_fe,
            mass_e,
            fe,
            enriched,
            pressure,
        })
    }

    pub fn n_fe(&self) -> usize {
        self.fe.n_dofs()
    }

    pub fn n_e(&self) -> usize {
        self.enriched.n_dofs()
    }

    /// Spectrum of the resolved Laplacian.
    pub fn fe_spectrum(&self) -> Result<Spectrum> {
        let mut s = spectral_decompose_capped(&self.stiff_fe, &self.mass_fe, DENSE_CAP)?;
        s.tag = "laplacian".into();
        Ok(s)
    }

    /// Spectrum of the pressure Neumann Laplacian (first mode constant).
    pub fn pressure_spectrum(&self) -> Result<Spectrum> {
        let mut s = spectral_decompose_capped(&self.stiff_p, &self.mass_p, DENSE_CAP)?;
        s.tag = "pressure".into();
        Ok(s)
    }

    /// `P = M_h^-1 I^T M_E`: coefficients of `pi w` for `w` in the enriched space.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        self.chol_fe.solve(&self.embed.matvec_transpose(&self.mass_e.matvec(w)))
    }

    /// `(pi w, w - pi w)` with the remainder in enriched coefficients.
    pub fn split(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.project(w);
        let ip = self.embed.matvec(&p);
        (p, w.iter().zip(&ip).map(|(a, b)| a - b).collect())
    }

    pub fn compose(&self, w_fe: &[f64], w_perp: &[f64]) -> Vec<f64> {
        let ip = self.embed.matvec(w_fe);
        ip.iter().zip(w_perp).map(|(a, b)| a + b).collect()
    }

    pub fn mass_e_solve(&self, b: &[f64]) -> Vec<f64> {
        self.chol_e.solve(b)
    }

    pub fn mass_e_solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.chol_e.solve_mat(b)
    }

    pub fn mass_fe_solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.chol_fe.solve_mat(b)
    }

    /// Norm of the star space: `|pi w|_s^2 + h^-2s |w - pi w|^2`.
    pub fn norm(&self, w: &[f64], s: f64, fe_spec: &Spectrum) -> f64 {
        let (p, perp) = self.split(w);
        star_norm(&p, &perp, &self.mass_e, s, self.h, fe_spec)
    }

    /// Dense `P = M_h^-1 I^T M_E`.
    pub fn projection_matrix(&self) -> Mat<f64> {
        let it_me = self.embed.transpose().to_dense() * self.mass_e.to_dense();
        self.chol_fe.solve_mat(&it_me)
    }

    /// Dense stabilized Laplacian on the enriched space:
    /// `P^T K_h P + h^-2 (M_E - P^T M_h P)`.
    pub fn explicit_operator(&self) -> Mat<f64> {
        let p = self.projection_matrix();
        let kh = self.stiff_fe.to_dense();
        let mh = self.mass_fe.to_dense();
        let me = self.mass_e.to_dense();
        let fe_part = p.transpose() * &kh * &p;
        let mp = p.transpose() * &mh * &p;
        let h2 = 1.0 / (self.h * self.h);
        let n = me.nrows();
        Mat::from_fn(n, n, |i, j| {
            let a = fe_part[(i, j)] + h2 * (me[(i, j)] - mp[(i, j)]);
            let b = fe_part[(j, i)] + h2 * (me[(j, i)] - mp[(j, i)]);
            0.5 * (a + b)
        })
    }

    /// Spectrum of [`StarSpace::explicit_operator`] against `M_E`.
    pub fn explicit_spectrum(&self) -> Result<Spectrum> {
        decompose_dense(
            "star",
            self.explicit_operator().as_ref(),
            self.mass_e.to_dense().as_ref(),
            DENSE_CAP,
        )
    }

    /// L2-orthogonal projection onto the discretely solenoidal subspace
    /// `{w : (w, grad q) = 0 for all q}` of the enriched space.
    pub fn leray(&self) -> Result<LerayProjector<'_>> {
        let np = self.pressure.n_dofs();
        let bt = self.coupling_e.transpose().to_dense();
        let minv_bt = self.chol_e.solve_mat(&bt);
        let b = self.coupling_e.to_dense();
        let schur = &b * &minv_bt;
        let reg = Mat::<f64>::from_fn(np, np, |i, j| schur[(i, j)] + 1.0);
        let lu = reg.partial_piv_lu();
        Ok(LerayProjector {
            space: self,
            minv_bt,
            lu,
        })
    }
}

pub struct LerayProjector<'a> {
    space: &'a StarSpace,
    minv_bt: Mat<f64>,
    lu: faer::linalg::solvers::PartialPivLu<f64>,
}

impl LerayProjector<'_> {
    /// `v - M_E^-1 B_E^T r` with `(B_E M_E^-1 B_E^T + 1 1^T) r = B_E v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let bv = self.space.coupling_e.matvec(v);
        let rhs = Mat::<f64>::from_fn(bv.len(), 1, |i, _| bv[i]);
        let r = self.lu.solve(&rhs);
        let corr = &self.minv_bt * &r;
        v.iter().enumerate().map(|(i, x)| x - corr[(i, 0)]).collect()
    }
}

/// `(|w_fe|_{W^s}^2 + h^-2s |w_perp|^2)^(1/2)`, with the remainder measured
/// in the enriched mass matrix.
pub fn star_norm(w_fe: &[f64], w_perp: &[f64], mass_perp: &SparseOperator, s: f64, h: f64, spec: &Spectrum) -> f64 {
    let a = crate::spectral::fractional_norm(w_fe, s, spec);
    let b = mass_perp.bilinear(w_perp, w_perp).max(0.0);
    (a * a + h.powf(-2.0 * s) * b).sqrt()
}
