//! Helpers shared by the integration tests: hand-written P1 evaluation on
//! triangles, independent of the library's tabulation code.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmsns::fe::FeSpace;
use vmsns::mesh::{build_structured, BoxDomain, Mesh};
use faer::Mat;
use vmsns::fe::QuadField;
use vmsns::Discretization;

pub fn mesh(n: usize) -> Arc<Mesh> {
    Arc::new(build_structured(2, n, BoxDomain::unit()).unwrap())
}

pub fn disc(n: usize) -> Discretization {
    Discretization::new(mesh(n), 1).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Area and barycentric gradients of a triangle.
pub fn triangle(p: &[[f64; 3]]) -> (f64, [[f64; 2]; 3]) {
    let (x0, y0) = (p[0][0], p[0][1]);
    let (x1, y1) = (p[1][0], p[1][1]);
    let (x2, y2) = (p[2][0], p[2][1]);
    let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let g = [
        [(y1 - y2) / det, (x2 - x1) / det],
        [(y2 - y0) / det, (x0 - x2) / det],
        [(y0 - y1) / det, (x1 - x0) / det],
    ];
    (0.5 * det.abs(), g)
}

pub fn cell_area(m: &Mesh, k: usize) -> f64 {
    let pts: Vec<[f64; 3]> = m.cell(k).iter().map(|&v| m.vertices()[v]).collect();
    triangle(&pts).0
}

/// Barycentric coordinates of the edge midpoints; weights 1/3 each.
pub const MIDPOINTS: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

/// Value and gradient of component `c` of a P1 field on cell `k`.
pub fn p1_local(space: &FeSpace, coeffs: &[f64], k: usize, c: usize, lam: &[f64]) -> (f64, [f64; 2]) {
    let m = space.mesh();
    let cell = m.cell(k);
    let pts: Vec<[f64; 3]> = cell.iter().map(|&v| m.vertices()[v]).collect();
    let (_, g) = triangle(&pts);
    let (mut val, mut grad) = (0.0, [0.0; 2]);
    for (a, &v) in cell.iter().enumerate() {
        let coef = space.node_dof(v).map_or(0.0, |d| coeffs[space.vector_dof(c, d)]);
        val += coef * lam[a];
        grad[0] += coef * g[a][0];
        grad[1] += coef * g[a][1];
    }
    (val, grad)
}

/// Hat function of scalar DOF `i` at barycentric point `lam` of cell `k`,
/// with its gradient.
pub fn hat(space: &FeSpace, i: usize, k: usize, lam: &[f64]) -> (f64, [f64; 2]) {
    let mut e = vec![0.0; space.n_dofs()];
    e[i] = 1.0;
    p1_local(space, &e, k, 0, lam)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dense_solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    use faer::linalg::solvers::Solve;
    let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.full_piv_lu().solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

/// Quadrature-point operators: `phi` maps velocity coefficients to point
/// values, `grad` maps pressure coefficients to point gradients, `w` holds
/// the weights. Point values are flattened as `(k * nq + q) * 2 + c`.
struct PointOps {
    phi: Mat<f64>,
    grad: Mat<f64>,
    w: Vec<f64>,
    mean: Vec<f64>,
}

fn point_ops(d: &Discretization) -> PointOps {
    let rule = d.projector.rule();
    let nq = rule.len();
    let nc = d.mesh().n_cells();
    let n = 2 * nc * nq;
    let column = |f: QuadField, m: &mut Mat<f64>, j: usize| {
        for (i, v) in f.values.iter().enumerate() {
            m[(2 * i, j)] = v[0];
            m[(2 * i + 1, j)] = v[1];
        }
    };
    let mut phi = Mat::<f64>::zeros(n, d.n_u());
    for j in 0..d.n_u() {
        let mut e = vec![0.0; d.n_u()];
        e[j] = 1.0;
        column(QuadField::from_fe(&d.velocity, &e, rule), &mut phi, j);
    }
    let mut grad = Mat::<f64>::zeros(n, d.n_p());
    let mut mean = vec![0.0; d.n_p()];
    for j in 0..d.n_p() {
        let mut e = vec![0.0; d.n_p()];
        e[j] = 1.0;
        column(QuadField::gradient_of(&d.pressure, &e, rule), &mut grad, j);
        let vals = QuadField::from_fe(&d.pressure, &e, rule);
        for k in 0..nc {
            let area = cell_area(d.mesh(), k);
            for q in 0..nq {
                mean[j] += area * rule.weights[q] * vals.at(k, q)[0];
            }
        }
    }
    let mut w = vec![0.0; n];
    for k in 0..nc {
        let area = cell_area(d.mesh(), k);
        for q in 0..nq {
            w[2 * (k * nq + q)] = area * rule.weights[q];
            w[2 * (k * nq + q) + 1] = area * rule.weights[q];
        }
    }
    PointOps { phi, grad, w, mean }
}

/// Saddle problem for `(u_0h, tilde, xi)` with the subscale as a free point
/// field constrained to be orthogonal to the velocity space:
///
/// ```text
/// (u, v) + (grad xi, v)         = (u0, v)
/// (tilde, s) + (grad xi, s)     = (u0, s)     s orthogonal to V_h
/// (u + tilde, grad q)           = 0
/// ```
pub fn init_oracle(d: &Discretization, u0: impl Fn(&[f64; 3]) -> [f64; 3] + Sync) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ops = point_ops(d);
    let rule = d.projector.rule();
    let u0q = QuadField::from_fn(&d.velocity, rule, 2, u0);
    let flat: Vec<f64> = u0q.values.iter().flat_map(|v| [v[0], v[1]]).collect();
    let (nu, np, nt) = (d.n_u(), d.n_p(), flat.len());
    let (ot, ox, om, ol) = (nu, nu + nt, nu + nt + np, nu + nt + np + nu);
    let n = ol + 1;
    let mut a = Mat::<f64>::zeros(n, n);
    let mut b = vec![0.0; n];
    // W-weighted products
    let wt = |x: &Mat<f64>, i: usize, y: &Mat<f64>, j: usize| -> f64 {
        (0..nt).map(|r| ops.w[r] * x[(r, i)] * y[(r, j)]).sum()
    };
    for i in 0..nu {
        for j in 0..nu {
            a[(i, j)] = wt(&ops.phi, i, &ops.phi, j);
        }
        for j in 0..np {
            let g = wt(&ops.phi, i, &ops.grad, j);
            a[(i, ox + j)] = g;
            a[(ox + j, i)] = g;
        }
        b[i] = (0..nt).map(|r| ops.w[r] * ops.phi[(r, i)] * flat[r]).sum();
        for r in 0..nt {
            let wp = ops.w[r] * ops.phi[(r, i)];
            a[(ot + r, om + i)] = -wp;
            a[(om + i, ot + r)] = wp;
        }
    }
    for r in 0..nt {
        a[(ot + r, ot + r)] = ops.w[r];
        for j in 0..np {
            let wg = ops.w[r] * ops.grad[(r, j)];
            a[(ot + r, ox + j)] = wg;
            a[(ox + j, ot + r)] = wg;
        }
        b[ot + r] = ops.w[r] * flat[r];
    }
    for j in 0..np {
        a[(ox + j, ol)] = ops.mean[j];
        a[(ol, ox + j)] = ops.mean[j];
    }
    let x = dense_solve(&a, &b);
    (x[..nu].to_vec(), x[ot..ox].to_vec(), x[ox..om].to_vec())
}

/// Random velocity with `(u, grad q) = 0` for every pressure function:
/// Euclidean projection onto the null space of the discrete divergence.
pub fn discretely_solenoidal(d: &Discretization, seed: u64) -> Vec<f64> {
    let nu = d.n_u();
    let g = d.grad.to_dense();
    let ggt = &g * g.transpose();
    let evd = ggt.self_adjoint_eigen(faer::Side::Lower).unwrap();
    let ev: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = random_vec(nu, &mut rng(seed));
    let mut u = vec![0.0; nu];
    let basis = evd.U();
    for k in (0..nu).filter(|&k| ev[k].abs() <= 1e-12 * top) {
        let coef: f64 = (0..nu).map(|i| basis[(i, k)] * c[i]).sum();
        (0..nu).for_each(|i| u[i] += coef * basis[(i, k)]);
    }
    assert!(u.iter().any(|v| v.abs() > 1e-3));
    u
}
