//! Backward-Euler/Picard time stepping of the coupled velocity, pressure
//! and subscale system.
//!
//! Each Picard iteration freezes the advection velocity `a` and `tau`,
//! eliminates the subscale through its closed-form update and solves one
//! monolithic sparse system for
//! `[u | p | mean multiplier | xi = pi(N(a,u) + grad p)]`.

use std::sync::Arc;

use crate::diagnostics::{energy_ledger_entry, EnergyRecord};
use crate::error::{Result, VmsError};
use crate::fe::assemble::{advection_at, assemble_cells, dot, CellValues};
use crate::fe::{
    assemble_convection, assemble_gradient_coupling, assemble_mass, assemble_stiffness, linf_norm, Constraint,
    FeSpace, QuadField, SparseLu, SparseOperator, TripletBuilder,
};
use crate::mesh::{Mesh, Point};
use crate::subgrid::{advance_subscale, compute_tau, cross_terms, residual_field, Projector, StabParams, SubscaleField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub dt: f64,
    pub t_final: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear_tol: f64,
    /// `false` drops the convective form entirely (Stokes regime).
    pub convection: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            dt: 0.01,
            t_final: 0.2,
            picard_tol: 1e-10,
            picard_max: 50,
            linear_tol: 1e-10,
            convection: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("time.dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            errs.push(format!("time.T must be nonnegative, got {}", self.t_final));
        }
        for (k, v) in [("solver.picard_tol", self.picard_tol), ("solver.linear_tol", self.linear_tol)] {
            if !(v > 0.0 && v < 1.0) {
                errs.push(format!("{k} must lie in (0, 1), got {v}"));
            }
        }
        if self.picard_max == 0 {
            errs.push("solver.picard_max must be at least 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(VmsError::Config(errs.join("; ")))
        }
    }

    /// Number of steps `ceil(T / dt)`.
    pub fn n_steps(&self) -> usize {
        let r = self.t_final / self.dt;
        let n = r.round();
        if (r - n).abs() < 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

/// Velocity, pressure and subscale at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StarState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub tilde: SubscaleField,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub tau: f64,
    pub iterations: usize,
    pub increment: f64,
    /// Advection velocity of the accepted linear solve.
    pub advection: Vec<f64>,
}

/// Spaces and time-independent operators of one mesh.
pub struct Discretization {
    pub velocity: FeSpace,
    pub pressure: FeSpace,
    pub h: f64,
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
    /// `(phi_i, grad psi_j)`.
    pub grad: SparseOperator,
    pub grad_t: SparseOperator,
    pub p_stiffness: SparseOperator,
    /// `int psi_j`, the zero-mean constraint row.
    pub p_mean: Vec<f64>,
    pub projector: Projector,
}

impl Discretization {
    /// Equal-order spaces of `degree` on `mesh`.
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        let dim = mesh.dim();
        let velocity = FeSpace::new(mesh.clone(), degree, dim, Constraint::ZeroTrace)?;
        let pressure = FeSpace::new(mesh.clone(), degree, 1, Constraint::ZeroMean)?;
        let grad = assemble_gradient_coupling(&velocity, &pressure)?;
        Ok(Discretization {
            h: mesh.h_max(),
            mass: assemble_mass(&velocity),
            stiffness: assemble_stiffness(&velocity),
            grad_t: grad.transpose(),
            grad,
            p_stiffness: assemble_stiffness(&pressure),
            p_mean: pressure.mean_weights(),
            projector: Projector::new(&velocity)?,
            velocity,
            pressure,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.velocity.mesh()
    }

    pub fn n_u(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_p(&self) -> usize {
        self.pressure.n_dofs()
    }

    pub fn zero_state(&self) -> StarState {
        StarState {
            u: vec![0.0; self.n_u()],
            p: vec![0.0; self.n_p()],
            tilde: SubscaleField::zeros(&self.velocity),
            t: 0.0,
        }
    }

    /// Initial projection: `xi` solves the Neumann problem
    /// `(grad xi, grad q) = (u0, grad q)` with zero mean, then
    /// `u_0h = pi(u0 - grad xi)` and the subscale is the orthogonal remainder.
    /// Returns the state and `xi`.
    pub fn initialize(&self, u0: impl Fn(&Point) -> [f64; 3] + Sync) -> Result<(StarState, Vec<f64>)> {
        let rule = self.projector.rule().clone();
        let dim = self.velocity.dim();
        let u0q = QuadField::from_fn(&self.velocity, &rule, dim, u0);
        let np = self.n_p();
        let mut b = TripletBuilder::new(np + 1, np + 1);
        b.push_block(0, 0, &self.p_stiffness, 1.0);
        for (j, &m) in self.p_mean.iter().enumerate() {
            b.push(j, np, m);
            b.push(np, j, m);
        }
        let mut rhs = u0q.pair_gradients(&self.pressure, &rule);
        rhs.push(0.0);
        let sol = SparseLu::new(&b.build(true))?.solve(&rhs);
        let xi = sol[..np].to_vec();
        let mut w = u0q;
        w.axpy(-1.0, &QuadField::gradient_of(&self.pressure, &xi, &rule));
        let u = self.projector.project(&w);
        let tilde = self.projector.project_orthogonal(&w)?;
        let state = StarState {
            u,
            p: vec![0.0; np],
            tilde: SubscaleField { values: tilde },
            t: 0.0,
        };
        if !state.u.iter().all(|v| v.is_finite()) {
            return Err(VmsError::Solver("initial projection produced non-finite values".into()));
        }
        Ok((state, xi))
    }

    /// `tau` for the advection field `a` (ignores velocity without convection).
    pub fn tau(&self, a: &[f64], cfg: &SolveConfig, params: &StabParams) -> Result<f64> {
        let ulinf = if cfg.convection { linf_norm(&self.velocity, a) } else { 0.0 };
        compute_tau(params, self.h, ulinf)
    }

    /// One backward-Euler step from `state` with load vector `load = (f, phi_i)`.
    pub fn step(
        &self,
        state: &StarState,
        load: &[f64],
        cfg: &SolveConfig,
        params: &StabParams,
    ) -> Result<(StarState, StepReport)> {
        let dt = cfg.dt;
        let mut a = state.u.clone();
        let mut p_prev = state.p.clone();
        let mut last = f64::INFINITY;
        for it in 1..=cfg.picard_max {
            let tau = self.tau(&a, cfg, params)?;
            let (u, p) = self.solve_linearized(state, load, &a, tau, cfg, params)?;
            if !u.iter().chain(&p).all(|v| v.is_finite()) {
                return Err(VmsError::Divergence(format!("non-finite solution in Picard iteration {it}")));
            }
            let num: f64 = u.iter().zip(&a).chain(p.iter().zip(&p_prev)).map(|(x, y)| (x - y).powi(2)).sum();
            let den: f64 = u.iter().chain(&p).map(|x| x * x).sum();
            let incr = num.sqrt() / den.sqrt().max(1e-300);
            last = incr;
            if !cfg.convection || incr <= cfg.picard_tol {
                let res = residual_field(&self.velocity, &self.pressure, &a, &u, &p);
                let tilde = advance_subscale(&state.tilde, &res, tau, dt, &self.projector)?;
                let next = StarState {
                    u,
                    p,
                    tilde,
                    t: state.t + dt,
                };
                return Ok((
                    next,
                    StepReport {
                        tau,
                        iterations: it,
                        increment: incr,
                        advection: a,
                    },
                ));
            }
            a = u;
            p_prev = p;
        }
        Err(VmsError::NonConvergence {
            iterations: cfg.picard_max,
            residual: last,
        })
    }

    fn solve_linearized(
        &self,
        state: &StarState,
        load: &[f64],
        a: &[f64],
        tau: f64,
        cfg: &SolveConfig,
        params: &StabParams,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (nu_dofs, np) = (self.n_u(), self.n_p());
        let (o_p, o_l, o_x) = (nu_dofs, nu_dofs + np, nu_dofs + np + 1);
        let n = o_x + nu_dofs;
        let dt = cfg.dt;
        let gamma = 1.0 / (1.0 / dt + 1.0 / tau);
        let mut b = TripletBuilder::with_capacity(n, n, 8 * (self.mass.nnz() + self.grad.nnz()));
        b.push_block(0, 0, &self.mass, 1.0 / dt);
        b.push_block(0, 0, &self.stiffness, params.nu);
        b.push_block(0, o_p, &self.grad, 1.0);
        b.push_block(o_p, 0, &self.grad_t, 1.0);
        b.push_block(o_p, o_p, &self.p_stiffness, -gamma);
        b.push_block(o_p, o_x, &self.grad_t, gamma);
        b.push_block(o_x, o_p, &self.grad, -gamma);
        b.push_block(o_x, o_x, &self.mass, gamma);
        for (j, &m) in self.p_mean.iter().enumerate() {
            b.push(o_p + j, o_l, m);
            b.push(o_l, o_p + j, m);
        }
        let mut rhs = vec![0.0; n];
        let mu = self.mass.matvec(&state.u);
        let (cross_m, cross_c) = cross_terms(&self.velocity, &self.pressure, a, &state.tilde);
        for i in 0..nu_dofs {
            rhs[i] = load[i] + mu[i] / dt + gamma / dt * cross_m[i];
        }
        for j in 0..np {
            rhs[o_p + j] = -gamma / dt * cross_c[j];
        }
        if cfg.convection {
            let c = assemble_convection(&self.velocity, a)?;
            let (snn, snp) = self.stabilization_blocks(a);
            b.push_block(0, 0, &c, 1.0);
            b.push_block(0, 0, &snn, gamma);
            b.push_block(0, o_p, &snp, gamma);
            b.push_block_transpose(o_p, 0, &snp, -gamma);
            b.push_block_transpose(0, o_x, &c, -gamma);
            b.push_block(o_x, 0, &c, -gamma);
        }
        let sol = SparseLu::new(&b.build(false))?.solve(&rhs);
        Ok((sol[..nu_dofs].to_vec(), sol[o_p..o_l].to_vec()))
    }

    /// `(N(a, phi_j), N(a, phi_i))` and `(N(a, phi_i), grad psi_j)`.
    fn stabilization_blocks(&self, a: &[f64]) -> (SparseOperator, SparseOperator) {
        let v = &self.velocity;
        let rule = v.default_rule();
        let n = v.n_dofs();
        let nn = assemble_cells(v, &rule, n, n, true, |cv, out| {
            let nb = cv.n_basis;
            let mut local = vec![0.0; nb * nb];
            for (q, &w) in cv.jxw.iter().enumerate() {
                let ns = convective_values(v, cv, a, q);
                for i in 0..nb {
                    for j in 0..nb {
                        local[i * nb + j] += w * ns[i] * ns[j];
                    }
                }
            }
            for c in 0..v.components() {
                for i in 0..nb {
                    let Some(di) = cv.dofs[i] else { continue };
                    for j in 0..nb {
                        let Some(dj) = cv.dofs[j] else { continue };
                        out.push((v.vector_dof(c, di), v.vector_dof(c, dj), local[i * nb + j]));
                    }
                }
            }
        });
        let ptab = self.pressure.tabulate(&rule);
        let np = assemble_cells(v, &rule, n, self.n_p(), false, |cv, out| {
            let pv = CellValues::new(&self.pressure, &rule, &ptab, cv.cell);
            for (q, &w) in cv.jxw.iter().enumerate() {
                let ns = convective_values(v, cv, a, q);
                for i in 0..cv.n_basis {
                    let Some(di) = cv.dofs[i] else { continue };
                    for j in 0..pv.n_basis {
                        let Some(dj) = pv.dofs[j] else { continue };
                        let g = pv.grad(q, j);
                        for c in 0..v.components() {
                            out.push((v.vector_dof(c, di), dj, w * ns[i] * g[c]));
                        }
                    }
                }
            }
        });
        (nn, np)
    }

    /// Max over pressure basis functions of `|(u + tilde, grad psi_j)|`.
    pub fn divergence_residual(&self, state: &StarState) -> f64 {
        let (_, cont) = cross_terms(&self.velocity, &self.pressure, &state.u, &state.tilde);
        let gu = self.grad_t.matvec(&state.u);
        gu.iter().zip(&cont).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max)
    }

    /// Max-norm residual of the discrete momentum equation for an accepted step.
    pub fn momentum_residual(
        &self,
        prev: &StarState,
        next: &StarState,
        report: &StepReport,
        load: &[f64],
        cfg: &SolveConfig,
        params: &StabParams,
    ) -> Result<f64> {
        let du: Vec<f64> = next.u.iter().zip(&prev.u).map(|(a, b)| (a - b) / cfg.dt).collect();
        let mut r = self.mass.matvec(&du);
        let ku = self.stiffness.matvec(&next.u);
        let gp = self.grad.matvec(&next.p);
        for i in 0..r.len() {
            r[i] += params.nu * ku[i] + gp[i] - load[i];
        }
        if cfg.convection {
            let cu = assemble_convection(&self.velocity, &report.advection)?.matvec(&next.u);
            let (cross, _) = cross_terms(&self.velocity, &self.pressure, &report.advection, &next.tilde);
            for i in 0..r.len() {
                r[i] += cu[i] - cross[i];
            }
        }
        Ok(r.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
    }

    /// Runs `cfg.n_steps()` steps from `initial`, keeping every
    /// `snapshot_every`-th state (and the initial one).
    pub fn run(
        &self,
        initial: StarState,
        load: &[f64],
        cfg: &SolveConfig,
        params: &StabParams,
        snapshot_every: usize,
    ) -> Result<RunOutput> {
        cfg.validate()?;
        params.validate()?;
        let n = cfg.n_steps();
        let every = snapshot_every.max(1);
        let mut ledger = Vec::with_capacity(n);
        let mut reports = Vec::with_capacity(n);
        let mut snapshots = vec![initial.clone()];
        let mut state = initial.clone();
        for k in 1..=n {
            let (mut next, rep) = self
                .step(&state, load, cfg, params)
                .map_err(|e| VmsError::Step {
                    step: k,
                    source: Box::new(e),
                })?;
            next.t = initial.t + k as f64 * cfg.dt;
            ledger.push(energy_ledger_entry(self, &state, &next, load, cfg.dt, rep.tau, params.nu));
            if k % every == 0 || k == n {
                snapshots.push(next.clone());
            }
            reports.push(rep);
            state = next;
        }
        Ok(RunOutput {
            initial,
            ledger,
            reports,
            snapshots,
            final_state: state,
        })
    }
}

/// `N(a, phi_i)` (scalar part) for every local basis function at point `q`.
fn convective_values(v: &FeSpace, cv: &CellValues, a: &[f64], q: usize) -> Vec<f64> {
    let (vel, div) = advection_at(v, cv, a, q);
    (0..cv.n_basis)
        .map(|i| dot(&vel, cv.grad(q, i)) + 0.5 * div * cv.phi(q, i))
        .collect()
}

pub struct RunOutput {
    pub initial: StarState,
    pub ledger: Vec<EnergyRecord>,
    pub reports: Vec<StepReport>,
    pub snapshots: Vec<StarState>,
    pub final_state: StarState,
}
