//! Dynamic orthogonal subscales stored at quadrature points.

use crate::error::{Result, VmsError};
use crate::fe::assemble::{advection_at, assemble_mass, assemble_vector, dot};
use crate::fe::{FeSpace, QuadField, QuadratureRule, SparseCholesky};

/// Guard against 0/0 in the orthogonality ratio of a vanishing subscale.
pub const ORTHOGONALITY_EPS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabParams {
    pub nu: f64,
    pub c_s: f64,
    pub c_c: f64,
    /// Lower bound applied to `1/tau`.
    pub tau_floor: f64,
}

impl Default for StabParams {
    fn default() -> Self {
        StabParams {
            nu: 0.01,
            c_s: 4.0,
            c_c: 2.0,
            tau_floor: 1e-12,
        }
    }
}

impl StabParams {
    pub fn new(nu: f64) -> Result<Self> {
        let p = StabParams {
            nu,
            ..StabParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            errs.push(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.c_s > 0.0 && self.c_s.is_finite()) {
            errs.push(format!("C_s must be positive, got {}", self.c_s));
        }
        if !(self.c_c >= 0.0 && self.c_c.is_finite()) {
            errs.push(format!("C_c must be nonnegative, got {}", self.c_c));
        }
        if !(self.tau_floor >= 0.0) {
            errs.push(format!("tau_floor must be nonnegative, got {}", self.tau_floor));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(VmsError::Config(errs.join("; ")))
        }
    }
}

/// Global relaxation time `h^2 / (C_s nu + C_c h |u|_inf)`.
pub fn compute_tau(params: &StabParams, h: f64, u_linf: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(VmsError::Config(format!("mesh size must be positive, got {h}")));
    }
    if !(u_linf >= 0.0) {
        return Err(VmsError::Input(format!("velocity max norm must be nonnegative, got {u_linf}")));
    }
    let inv = ((params.c_s * params.nu + params.c_c * h * u_linf) / (h * h)).max(params.tau_floor);
    Ok(1.0 / inv)
}

/// Subscale velocity at the assembly quadrature points of a velocity space.
#[derive(Debug, Clone, PartialEq)]
pub struct SubscaleField {
    pub values: QuadField,
}

impl SubscaleField {
    pub fn zeros(space: &FeSpace) -> Self {
        SubscaleField {
            values: QuadField::zeros(space.mesh().n_cells(), space.default_rule().len(), space.components()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.is_finite()
    }
}

/// L2 projection onto a velocity space, realized with the discrete
/// quadrature inner product of its assembly rule.
pub struct Projector {
    space: FeSpace,
    rule: QuadratureRule,
    mass: SparseCholesky,
}

impl Projector {
    pub fn new(space: &FeSpace) -> Result<Self> {
        Ok(Projector {
            space: space.clone(),
            rule: space.default_rule(),
            mass: SparseCholesky::new(&assemble_mass(space))?,
        })
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Coefficients of `pi f`.
    pub fn project(&self, f: &QuadField) -> Vec<f64> {
        self.mass.solve(&f.pair_basis(&self.space, &self.rule))
    }

    /// `f - pi f` at the quadrature points.
    pub fn project_orthogonal(&self, f: &QuadField) -> Result<QuadField> {
        if !f.is_finite() {
            return Err(VmsError::Divergence("non-finite field passed to the orthogonal projection".into()));
        }
        let c = self.project(f);
        let mut out = f.clone();
        out.axpy(-1.0, &QuadField::from_fe(&self.space, &c, &self.rule));
        Ok(out)
    }

    pub fn norm(&self, f: &QuadField) -> f64 {
        f.norm(&self.space, &self.rule)
    }

    /// `|pi f| / max(|f|, eps)`.
    pub fn orthogonality_ratio(&self, f: &QuadField) -> f64 {
        let c = self.project(f);
        let pf = QuadField::from_fe(&self.space, &c, &self.rule);
        self.norm(&pf) / self.norm(f).max(ORTHOGONALITY_EPS)
    }
}

/// `N(a, u) + grad p` at the quadrature points, with
/// `N(a, v) = (a . grad) v + 1/2 (div a) v`.
pub fn residual_field(
    velocity: &FeSpace,
    pressure: &FeSpace,
    advection: &[f64],
    u: &[f64],
    p: &[f64],
) -> QuadField {
    let rule = velocity.default_rule();
    let dim = velocity.dim();
    let mut r = QuadField::gradient_of(pressure, p, &rule);
    let tab = velocity.tabulate(&rule);
    for k in 0..velocity.mesh().n_cells() {
        let cv = crate::fe::assemble::CellValues::new(velocity, &rule, &tab, k);
        for q in 0..rule.len() {
            let (a, div) = advection_at(velocity, &cv, advection, q);
            let slot = r.at_mut(k, q);
            for c in 0..dim {
                let g = cv.grad_of(velocity, u, c, q);
                slot[c] += dot(&a, &g) + 0.5 * div * cv.value_of(velocity, u, c, q);
            }
        }
    }
    r
}

/// Backward-Euler update `(old/dt - pi_perp res) / (1/dt + 1/tau)`,
/// followed by re-projection onto the orthogonal complement.
pub fn advance_subscale(
    old: &SubscaleField,
    res: &QuadField,
    tau: f64,
    dt: f64,
    projector: &Projector,
) -> Result<SubscaleField> {
    if !(tau > 0.0 && dt > 0.0) {
        return Err(VmsError::Input(format!("tau and dt must be positive (tau {tau}, dt {dt})")));
    }
    let gamma = 1.0 / (1.0 / dt + 1.0 / tau);
    let perp = projector.project_orthogonal(res)?;
    let mut next = old.values.clone();
    next.scale(gamma / dt);
    next.axpy(-gamma, &perp);
    Ok(SubscaleField {
        values: projector.project_orthogonal(&next)?,
    })
}

/// `(momentum, continuity)` with `momentum[i] = b(a, phi_i, tilde)` and
/// `continuity[j] = (tilde, grad psi_j)`.
pub fn cross_terms(
    velocity: &FeSpace,
    pressure: &FeSpace,
    advection: &[f64],
    tilde: &SubscaleField,
) -> (Vec<f64>, Vec<f64>) {
    let rule = velocity.default_rule();
    let t = &tilde.values;
    let momentum = assemble_vector(velocity, &rule, velocity.n_dofs(), |cv, out| {
        for (q, &w) in cv.jxw.iter().enumerate() {
            let (a, div) = advection_at(velocity, cv, advection, q);
            let s = t.at(cv.cell, q);
            for b in 0..cv.n_basis {
                let Some(i) = cv.dofs[b] else { continue };
                let n = dot(&a, cv.grad(q, b)) + 0.5 * div * cv.phi(q, b);
                for c in 0..velocity.components() {
                    out.push((velocity.vector_dof(c, i), w * n * s[c]));
                }
            }
        }
    });
    (momentum, t.pair_gradients(pressure, &rule))
}
