//! Sparse assembly against brute-force element loops written from scratch
//! (own barycentric gradients, own edge-midpoint rule).

#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vmsns::fe::*;

/// `b(a, v, w) = ((a . grad) v + 1/2 (div a) v, w)`.
fn convection_oracle(space: &FeSpace, a: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let m = space.mesh();
    let mut s = 0.0;
    for k in 0..m.n_cells() {
        let area = cell_area(m, k);
        for lam in &MIDPOINTS {
            let (a0, ga0) = p1_local(space, a, k, 0, lam);
            let (a1, ga1) = p1_local(space, a, k, 1, lam);
            let div = ga0[0] + ga1[1];
            for c in 0..2 {
                let (vc, gv) = p1_local(space, v, k, c, lam);
                let (wc, _) = p1_local(space, w, k, c, lam);
                s += area / 3.0 * ((a0 * gv[0] + a1 * gv[1]) * wc + 0.5 * div * vc * wc);
            }
        }
    }
    s
}

#[test]
fn scalar_dof_counts() {
    let m = mesh(2);
    assert_eq!(FeSpace::new(m.clone(), 1, 1, Constraint::None).unwrap().n_dofs(), 9);
    assert_eq!(FeSpace::new(m.clone(), 1, 1, Constraint::ZeroTrace).unwrap().n_dofs(), 1);
    assert_eq!(FeSpace::new(m, 1, 2, Constraint::ZeroTrace).unwrap().n_dofs(), 2);
}

#[test]
fn mass_and_stiffness_match_element_loop() {
    let m = mesh(3);
    let v = FeSpace::new(m.clone(), 1, 1, Constraint::None).unwrap();
    let mass = assemble_mass(&v);
    let stiff = assemble_stiffness(&v);
    let n = v.n_dofs();
    let mut dm = vec![0.0; n * n];
    let mut dk = vec![0.0; n * n];
    for k in 0..m.n_cells() {
        let cell = m.cell(k);
        let pts: Vec<[f64; 3]> = cell.iter().map(|&i| m.vertices()[i]).collect();
        let (area, g) = triangle(&pts);
        for a in 0..3 {
            for b in 0..3 {
                let (i, j) = (v.node_dof(cell[a]).unwrap(), v.node_dof(cell[b]).unwrap());
                dm[i * n + j] += area / 12.0 * if a == b { 2.0 } else { 1.0 };
                dk[i * n + j] += area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            assert!((mass.get(i, j) - dm[i * n + j]).abs() < 1e-13);
            assert!((stiff.get(i, j) - dk[i * n + j]).abs() < 1e-12);
        }
    }
    assert!(mass.asymmetry() < 1e-13 && stiff.asymmetry() < 1e-13);
}

#[test]
fn first_dirichlet_eigenvalue() {
    let v = FeSpace::new(mesh(16), 1, 1, Constraint::ZeroTrace).unwrap();
    let spec = vmsns::spectral::spectral_decompose(&assemble_stiffness(&v), &assemble_mass(&v)).unwrap();
    let l1 = spec.eigenvalues[0];
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((l1 - exact).abs() / exact < 0.05, "{l1}");
}

#[test]
fn gradient_coupling_matches_oracle_and_integrates_by_parts() {
    let m = mesh(2);
    let v = FeSpace::new(m.clone(), 1, 2, Constraint::ZeroTrace).unwrap();
    let q = FeSpace::new(m.clone(), 1, 1, Constraint::ZeroMean).unwrap();
    let g = assemble_gradient_coupling(&v, &q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let u = random_vec(v.n_dofs(), &mut rng);
        let p = random_vec(q.n_dofs(), &mut rng);
        let (mut oracle, mut by_parts) = (0.0, 0.0);
        for k in 0..m.n_cells() {
            let area = cell_area(&m, k);
            for lam in &MIDPOINTS {
                let (pv, gp) = p1_local(&q, &p, k, 0, lam);
                let (u0, gu0) = p1_local(&v, &u, k, 0, lam);
                let (u1, gu1) = p1_local(&v, &u, k, 1, lam);
                oracle += area / 3.0 * (u0 * gp[0] + u1 * gp[1]);
                by_parts -= area / 3.0 * pv * (gu0[0] + gu1[1]);
            }
        }
        let val = dot(&u, &g.matvec(&p));
        assert!((val - oracle).abs() < 1e-13);
        assert!((val - by_parts).abs() < 1e-12);
    }
    let ones = vec![1.0; q.n_dofs()];
    assert!(g.matvec(&ones).iter().all(|x| x.abs() < 1e-14));
}

#[test]
fn convection_matches_oracle() {
    let m = mesh(2);
    let v = FeSpace::new(m, 1, 2, Constraint::ZeroTrace).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // zero-trace advection on n = 2 has one interior vertex; use n = 4 too
    for n in [2, 4] {
        let v = FeSpace::new(mesh(n), 1, 2, Constraint::ZeroTrace).unwrap();
        for _ in 0..5 {
            let a = random_vec(v.n_dofs(), &mut rng);
            let x = random_vec(v.n_dofs(), &mut rng);
            let y = random_vec(v.n_dofs(), &mut rng);
            let c = assemble_convection(&v, &a).unwrap();
            let val = dot(&y, &c.matvec(&x));
            assert!((val - convection_oracle(&v, &a, &x, &y)).abs() < 1e-13, "{n}");
        }
    }
    let zero = vec![0.0; v.n_dofs()];
    assert_eq!(assemble_convection(&v, &zero).unwrap().to_dense().norm_max(), 0.0);
}

#[test]
fn load_matches_oracle() {
    let m = mesh(3);
    let v = FeSpace::new(m.clone(), 1, 2, Constraint::ZeroTrace).unwrap();
    assert!(assemble_load(&v, |_| [0.0; 3]).iter().all(|x| *x == 0.0));
    let c = [0.7, -1.3, 0.0];
    let load = assemble_load(&v, |_| c);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = random_vec(v.n_dofs(), &mut rng);
    let mut oracle = 0.0;
    for k in 0..m.n_cells() {
        let area = cell_area(&m, k);
        for lam in &MIDPOINTS {
            for comp in 0..2 {
                oracle += area / 3.0 * c[comp] * p1_local(&v, &w, k, comp, lam).0;
            }
        }
    }
    assert!((dot(&load, &w) - oracle).abs() < 1e-13);
}

#[test]
fn l2_projection_of_x_squared() {
    let v = FeSpace::new(mesh(4), 1, 1, Constraint::None).unwrap();
    let f = |x: &[f64; 3]| [x[0] * x[0], 0.0, 0.0];
    let pf = l2_project(&v, f).unwrap();
    // normal equations with a load computed by the library at high order
    let rule = QuadratureRule::simplex(2, 8).unwrap();
    let b = assemble_load_with(&v, &rule, f);
    let dense = assemble_mass(&v).to_dense();
    let n = v.n_dofs();
    let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    use faer::linalg::solvers::Solve;
    let x = dense.partial_piv_lu().solve(&rhs);
    for i in 0..n {
        assert!((pf[i] - x[(i, 0)]).abs() < 1e-12);
    }
    let again = l2_project(&v, |x| [v.eval_point(&pf, x).unwrap()[0], 0.0, 0.0]).unwrap();
    for i in 0..n {
        assert!((again[i] - pf[i]).abs() < 1e-12);
    }
}

#[test]
fn linf_of_random_p1_is_max_coefficient() {
    let v = FeSpace::new(mesh(4), 1, 1, Constraint::None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = random_vec(v.n_dofs(), &mut rng);
    let expect = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert_eq!(linf_norm(&v, &c), expect);
    assert_eq!(linf_norm(&v, &vec![0.0; v.n_dofs()]), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convection_is_skew(seed in any::<u64>(), n in 2usize..6) {
        let v = FeSpace::new(mesh(n), 1, 2, Constraint::ZeroTrace).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_vec(v.n_dofs(), &mut rng);
        let x = random_vec(v.n_dofs(), &mut rng);
        let c = assemble_convection(&v, &a).unwrap();
        let k = assemble_stiffness(&v);
        let mm = assemble_mass(&v);
        let scale = linf_norm(&v, &a) * k.bilinear(&x, &x).sqrt() * mm.bilinear(&x, &x).sqrt();
        prop_assert!(c.bilinear(&x, &x).abs() <= 1e-12 * scale);
    }

    #[test]
    fn mass_is_positive(seed in any::<u64>()) {
        let v = FeSpace::new(mesh(3), 1, 2, Constraint::ZeroTrace).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vec(v.n_dofs(), &mut rng);
        prop_assert!(assemble_mass(&v).bilinear(&x, &x) > 0.0);
    }

    #[test]
    fn projection_is_idempotent_on_the_space(seed in any::<u64>()) {
        let v = FeSpace::new(mesh(3), 1, 1, Constraint::None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_vec(v.n_dofs(), &mut rng);
        let back = l2_project(&v, |x| [v.eval_point(&c, x).unwrap()[0], 0.0, 0.0]).unwrap();
        for (a, b) in back.iter().zip(&c) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
