//! Energy budget, constraint residuals, interpolated norms and the
//! local energy residual.

use crate::error::{Result, VmsError};
use crate::fe::assemble::CellValues;
use crate::fe::quadrature::gauss_legendre;
use crate::fe::{QuadField, QuadratureRule, SparseCholesky, SparseOperator};
use crate::mesh::Point;
use crate::solver::{Discretization, StarState};

/// Absolute floor of the imbalance scale.
pub const IMBALANCE_FLOOR: f64 = 1e-300;

/// One step of the discrete energy budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    pub ke_fe: f64,
    pub ke_sub: f64,
    pub visc_diss: f64,
    pub sub_diss: f64,
    pub power_in: f64,
    pub jump_terms: f64,
    pub imbalance: f64,
}

impl EnergyRecord {
    /// Scale the imbalance is measured against.
    pub fn scale(&self, dt: f64) -> f64 {
        self.ke_fe
            .max(dt * self.visc_diss)
            .max((dt * self.power_in).abs())
            .max(IMBALANCE_FLOOR)
    }

    pub fn relative_imbalance(&self, dt: f64) -> f64 {
        self.imbalance.abs() / self.scale(dt)
    }

    /// Imbalance implied by this row and its predecessor.
    pub fn recompute_imbalance(&self, prev: &EnergyRecord) -> f64 {
        let dt = self.t - prev.t;
        (self.ke_fe - prev.ke_fe) + (self.ke_sub - prev.ke_sub) + self.jump_terms
            + dt * (self.visc_diss + self.sub_diss - self.power_in)
    }

    pub fn total_energy(&self) -> f64 {
        self.ke_fe + self.ke_sub
    }
}

/// Budget of the step `prev -> next` taken with relaxation time `tau`.
pub fn energy_ledger_entry(
    disc: &Discretization,
    prev: &StarState,
    next: &StarState,
    load: &[f64],
    dt: f64,
    tau: f64,
    nu: f64,
) -> EnergyRecord {
    let proj = &disc.projector;
    let mut jump = next.tilde.values.clone();
    jump.axpy(-1.0, &prev.tilde.values);
    let sub = SubscaleSquares {
        prev: proj.norm(&prev.tilde.values).powi(2),
        next: proj.norm(&next.tilde.values).powi(2),
        jump: proj.norm(&jump).powi(2),
    };
    budget_record(next.t, dt, tau, nu, &disc.mass, &disc.stiffness, load, &prev.u, &next.u, sub)
}

/// Squared L2 norms of the subscale before, after and across a step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubscaleSquares {
    pub prev: f64,
    pub next: f64,
    pub jump: f64,
}

/// Budget of one step from the resolved-scale operators and coefficient
/// vectors plus the subscale norms.
#[allow(clippy::too_many_arguments)]
pub fn budget_record(
    t: f64,
    dt: f64,
    tau: f64,
    nu: f64,
    mass: &SparseOperator,
    stiffness: &SparseOperator,
    load: &[f64],
    u_prev: &[f64],
    u_next: &[f64],
    sub: SubscaleSquares,
) -> EnergyRecord {
    let du: Vec<f64> = u_next.iter().zip(u_prev).map(|(a, b)| a - b).collect();
    let ke_prev = 0.5 * mass.bilinear(u_prev, u_prev);
    let rec = EnergyRecord {
        t,
        ke_fe: 0.5 * mass.bilinear(u_next, u_next),
        ke_sub: 0.5 * sub.next,
        visc_diss: nu * stiffness.bilinear(u_next, u_next),
        sub_diss: sub.next / tau,
        power_in: load.iter().zip(u_next).map(|(a, b)| a * b).sum(),
        jump_terms: 0.5 * mass.bilinear(&du, &du) + 0.5 * sub.jump,
        imbalance: 0.0,
    };
    let prev_e = ke_prev + 0.5 * sub.prev;
    EnergyRecord {
        imbalance: rec.total_energy() - prev_e + rec.jump_terms + dt * (rec.visc_diss + rec.sub_diss - rec.power_in),
        ..rec
    }
}

pub fn divergence_residual(disc: &Discretization, state: &StarState) -> f64 {
    disc.divergence_residual(state)
}

/// `sqrt(load^T K^-1 load)`, the computable stand-in for the dual norm of
/// the forcing.
pub fn forcing_dual_norm(disc: &Discretization, load: &[f64]) -> Result<f64> {
    if load.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let k = SparseCholesky::new(&disc.stiffness)?;
    let x = k.solve(load);
    Ok(load.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
}

/// Data bound `1/2 |u_0h|^2 + 1/2 |tilde_0h|^2 + (1/nu) sum dt |f|_*^2`.
pub fn a_priori_bound(
    disc: &Discretization,
    initial: &StarState,
    load: &[f64],
    dt: f64,
    n_steps: usize,
    nu: f64,
) -> Result<f64> {
    let fstar = forcing_dual_norm(disc, load)?;
    Ok(0.5 * disc.mass.bilinear(&initial.u, &initial.u)
        + 0.5 * disc.projector.norm(&initial.tilde.values).powi(2)
        + n_steps as f64 * dt * fstar * fstar / nu)
}

/// `E_N + sum (jumps + dt (visc/2 + sub))`, the quantity the data bound
/// controls.
pub fn ledger_total(ledger: &[EnergyRecord], t0: f64) -> f64 {
    let mut prev_t = t0;
    let mut s = 0.0;
    for r in ledger {
        let dt = r.t - prev_t;
        s += r.jump_terms + dt * (0.5 * r.visc_diss + r.sub_diss);
        prev_t = r.t;
    }
    s + ledger.last().map_or(0.0, EnergyRecord::total_energy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEntry {
    /// Time exponent (`f64::INFINITY` for the max).
    pub r: f64,
    /// Space exponent.
    pub k: f64,
    /// `| |u|_{L^k} |_{L^r(0,T)}` by quadrature.
    pub direct: f64,
    /// `| |u|^(1-theta) |grad u|^theta |_{L^r(0,T)}`, the interpolation bound.
    pub interpolated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub entries: Vec<NormEntry>,
}

/// Exponent pairs reported per dimension.
pub fn norm_pairs(dim: usize) -> [(f64, f64); 3] {
    if dim == 3 {
        [(f64::INFINITY, 2.0), (2.0, 6.0), (4.0, 3.0)]
    } else {
        [(f64::INFINITY, 2.0), (2.0, 6.0), (4.0, 4.0)]
    }
}

fn interpolation_exponent(dim: usize, k: f64) -> f64 {
    if dim == 3 {
        1.5 - 3.0 / k
    } else {
        1.0 - 2.0 / k
    }
}

/// `(int_0^T g^r)^(1/r)` by the trapezoid rule, or `max g` for `r = inf`.
fn time_norm(times: &[f64], g: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return g.iter().fold(0.0, |m: f64, v| m.max(*v));
    }
    let mut s = 0.0;
    for i in 1..times.len() {
        s += 0.5 * (times[i] - times[i - 1]) * (g[i].powf(r) + g[i - 1].powf(r));
    }
    s.powf(1.0 / r)
}

/// Space norms of the FE velocity of every snapshot, then the mixed norms.
pub fn interpolated_norm_report(disc: &Discretization, history: &[StarState]) -> NormReport {
    let v = &disc.velocity;
    let dim = v.dim();
    let rule = QuadratureRule::simplex(dim, 8).expect("valid dimension");
    let pairs = norm_pairs(dim);
    let times: Vec<f64> = history.iter().map(|s| s.t).collect();
    let mut lk = vec![Vec::new(); pairs.len()];
    let mut l2 = Vec::new();
    let mut h1 = Vec::new();
    for s in history {
        let q = QuadField::from_fe(v, &s.u, &rule);
        for (i, &(_, k)) in pairs.iter().enumerate() {
            let mut acc = 0.0;
            for c in 0..v.mesh().n_cells() {
                let vol = v.geometry(c).volume;
                for (j, w) in rule.weights.iter().enumerate() {
                    let x = q.at(c, j);
                    acc += vol * w * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().powf(k);
                }
            }
            lk[i].push(acc.powf(1.0 / k));
        }
        l2.push(disc.mass.bilinear(&s.u, &s.u).max(0.0).sqrt());
        h1.push(disc.stiffness.bilinear(&s.u, &s.u).max(0.0).sqrt());
    }
    let entries = pairs
        .iter()
        .enumerate()
        .map(|(i, &(r, k))| {
            let th = interpolation_exponent(dim, k);
            let g: Vec<f64> = l2.iter().zip(&h1).map(|(a, b)| a.powf(1.0 - th) * b.powf(th)).collect();
            NormEntry {
                r,
                k,
                direct: time_norm(&times, &lk[i], r),
                interpolated: time_norm(&times, &g, r),
            }
        })
        .collect();
    NormReport { entries }
}

/// Nonnegative space-time test function
/// `phi = c * prod_d ((x_d - lo_d)(hi_d - x_d))^3 * ((t - t0)(t1 - t))^3`
/// on the box `[lo, hi]` times `[t0, t1]`, normalized to a unit maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTest {
    pub lo: Point,
    pub hi: Point,
    pub t0: f64,
    pub t1: f64,
    /// Spatial quadrature order for the pairing.
    pub order: usize,
}

/// Minimum number of snapshots inside the time window.
pub const MIN_WINDOW_SNAPSHOTS: usize = 16;

/// `((s - a)(b - s))^3 / ((b - a)/2)^6` and its first two derivatives.
fn bump_1d(s: f64, a: f64, b: f64) -> [f64; 3] {
    if s <= a || s >= b {
        return [0.0; 3];
    }
    let n = ((b - a) / 2.0).powi(6);
    let q = (s - a) * (b - s);
    let dq = a + b - 2.0 * s;
    [
        q.powi(3) / n,
        3.0 * q * q * dq / n,
        (6.0 * q * dq * dq - 6.0 * q * q) / n,
    ]
}

impl BumpTest {
    pub fn new(lo: Point, hi: Point, t0: f64, t1: f64) -> Self {
        BumpTest {
            lo,
            hi,
            t0,
            t1,
            order: 14,
        }
    }

    /// Spatial factor: value, gradient and Laplacian.
    pub fn space(&self, dim: usize, x: &Point) -> (f64, [f64; 3], f64) {
        let f: Vec<[f64; 3]> = (0..dim).map(|d| bump_1d(x[d], self.lo[d], self.hi[d])).collect();
        let prod_except = |skip: usize| (0..dim).filter(|&d| d != skip).map(|d| f[d][0]).product::<f64>();
        let val = (0..dim).map(|d| f[d][0]).product();
        let mut grad = [0.0; 3];
        let mut lap = 0.0;
        for d in 0..dim {
            let o = prod_except(d);
            grad[d] = f[d][1] * o;
            lap += f[d][2] * o;
        }
        (val, grad, lap)
    }

    /// Time factor and its derivative.
    pub fn time(&self, t: f64) -> (f64, f64) {
        let b = bump_1d(t, self.t0, self.t1);
        (b[0], b[1])
    }

    pub fn eval(&self, dim: usize, x: &Point, t: f64) -> f64 {
        self.space(dim, x).0 * self.time(t).0
    }
}

/// Distributional pairing of the local energy balance with the bump:
/// `int int [-1/2|u|^2 d_t phi - (1/2|u|^2 + p) u . grad phi
///  - nu/2 |u|^2 lap phi + nu |grad u|^2 phi - f . u phi]`.
///
/// The time-derivative term is integrated exactly against the piecewise
/// linear interpolant in time of the spatial integral; the remaining terms
/// use the trapezoid rule over the snapshots.
pub fn local_energy_residual(
    disc: &Discretization,
    history: &[StarState],
    forcing: impl Fn(&Point) -> [f64; 3],
    nu: f64,
    bump: &BumpTest,
) -> Result<f64> {
    if history.len() < 2 {
        return Err(VmsError::Config("local energy residual needs at least two snapshots".into()));
    }
    let (ta, tb) = (history[0].t, history[history.len() - 1].t);
    if !(bump.t0 >= ta && bump.t1 <= tb && bump.t0 < bump.t1) {
        return Err(VmsError::Config(format!(
            "bump window [{}, {}] is not inside the snapshot range [{ta}, {tb}]",
            bump.t0, bump.t1
        )));
    }
    let inside = history.iter().filter(|s| s.t >= bump.t0 && s.t <= bump.t1).count();
    if inside < MIN_WINDOW_SNAPSHOTS {
        return Err(VmsError::Config(format!(
            "bump window holds {inside} snapshots, at least {MIN_WINDOW_SNAPSHOTS} are required"
        )));
    }
    let v = &disc.velocity;
    let pr = &disc.pressure;
    let dim = v.dim();
    let rule = QuadratureRule::simplex(dim, bump.order)?;
    let vtab = v.tabulate(&rule);
    let ptab = pr.tabulate(&rule);
    // Precompute the bump at every physical quadrature point.
    let n_cells = v.mesh().n_cells();
    let mut bump_q = Vec::with_capacity(n_cells * rule.len());
    for k in 0..n_cells {
        for p in &rule.points {
            let x = v.map_point(k, p);
            bump_q.push((bump.space(dim, &x), forcing(&x)));
        }
    }
    let mut energy = Vec::with_capacity(history.len());
    let mut rest = Vec::with_capacity(history.len());
    for s in history {
        let (mut e, mut r) = (0.0, 0.0);
        for k in 0..n_cells {
            if bump_q[k * rule.len()..(k + 1) * rule.len()].iter().all(|b| b.0 .0 == 0.0 && b.0 .1 == [0.0; 3]) {
                continue;
            }
            let cv = CellValues::new(v, &rule, &vtab, k);
            let pv = CellValues::new(pr, &rule, &ptab, k);
            for (q, &w) in cv.jxw.iter().enumerate() {
                let ((phi, gphi, lphi), f) = &bump_q[k * rule.len() + q];
                let mut u = [0.0; 3];
                let mut gu2 = 0.0;
                for c in 0..dim {
                    u[c] = cv.value_of(v, &s.u, c, q);
                    let g = cv.grad_of(v, &s.u, c, q);
                    gu2 += g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                }
                let p = pv.value_of(pr, &s.p, 0, q);
                let half = 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
                let udg = u[0] * gphi[0] + u[1] * gphi[1] + u[2] * gphi[2];
                let fu = f[0] * u[0] + f[1] * u[1] + f[2] * u[2];
                e += w * half * phi;
                r += w * (-(half + p) * udg - nu * half * lphi + nu * gu2 * phi - fu * phi);
            }
        }
        energy.push(e);
        rest.push(r);
    }
    // Trapezoid for the non-derivative terms.
    let mut total = 0.0;
    for i in 1..history.len() {
        let (t0, t1) = (history[i - 1].t, history[i].t);
        total += 0.5 * (t1 - t0) * (rest[i - 1] * bump.time(t0).0 + rest[i] * bump.time(t1).0);
    }
    // Exact integral of the linear-in-time energy against d_t phi.
    let (gx, gw) = gauss_legendre(4);
    for i in 1..history.len() {
        let (t0, t1) = (history[i - 1].t, history[i].t);
        let (a, b) = (t0.max(bump.t0), t1.min(bump.t1));
        if b <= a {
            continue;
        }
        for (x, w) in gx.iter().zip(&gw) {
            let t = a + (b - a) * x;
            let lin = energy[i - 1] + (energy[i] - energy[i - 1]) * (t - t0) / (t1 - t0);
            total -= (b - a) * w * lin * bump.time(t).1;
        }
    }
    Ok(total)
}

/// Errors of a state against an exact velocity, velocity gradient and
/// pressure (pressures compared after removing their means).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub u_l2: f64,
    pub u_h1: f64,
    pub p_l2: f64,
}

pub fn error_norms(
    disc: &Discretization,
    state: &StarState,
    u: impl Fn(&Point) -> [f64; 3],
    grad_u: impl Fn(&Point) -> [[f64; 3]; 3],
    p: impl Fn(&Point) -> f64,
) -> ErrorNorms {
    let v = &disc.velocity;
    let pr = &disc.pressure;
    let dim = v.dim();
    let rule = QuadratureRule::simplex(dim, 6).expect("valid dimension");
    let vtab = v.tabulate(&rule);
    let ptab = pr.tabulate(&rule);
    let (mut eu, mut eg) = (0.0, 0.0);
    let mut pe = Vec::new();
    let (mut pe1, mut vol_total) = (0.0, 0.0);
    for k in 0..v.mesh().n_cells() {
        let cv = CellValues::new(v, &rule, &vtab, k);
        let pv = CellValues::new(pr, &rule, &ptab, k);
        for (q, &w) in cv.jxw.iter().enumerate() {
            let x = v.map_point(k, &rule.points[q]);
            let (ue, ge) = (u(&x), grad_u(&x));
            for c in 0..dim {
                eu += w * (cv.value_of(v, &state.u, c, q) - ue[c]).powi(2);
                let g = cv.grad_of(v, &state.u, c, q);
                for d in 0..dim {
                    eg += w * (g[d] - ge[c][d]).powi(2);
                }
            }
            let e = pv.value_of(pr, &state.p, 0, q) - p(&x);
            pe.push((w, e));
            pe1 += w * e;
            vol_total += w;
        }
    }
    let mean = pe1 / vol_total;
    ErrorNorms {
        u_l2: eu.sqrt(),
        u_h1: eg.sqrt(),
        p_l2: pe.iter().map(|(w, e)| w * (e - mean).powi(2)).sum::<f64>().sqrt(),
    }
}

/// Observed rates `log(e_k / e_{k+1}) / log(h_k / h_{k+1})`.
pub fn observed_rates(h: &[f64], e: &[f64]) -> Vec<f64> {
    (1..h.len())
        .map(|i| (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln())
        .collect()
}
