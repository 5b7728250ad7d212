#![allow(clippy::needless_range_loop)]
mod common;

use common::*;
use vmsns::diagnostics::*;
use vmsns::fe::{assemble_load, TripletBuilder};
use vmsns::fields::{vortex, Forcing};
use vmsns::{SolveConfig, StabParams, StarState};

#[test]
fn budget_record_two_dof_by_hand() {
    let mut m = TripletBuilder::new(2, 2);
    m.push(0, 0, 2.0);
    m.push(1, 1, 4.0);
    let mut k = TripletBuilder::new(2, 2);
    for (i, j, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)] {
        k.push(i, j, v);
    }
    let sub = SubscaleSquares { prev: 0.3, next: 0.2, jump: 0.1 };
    let r = budget_record(0.1, 0.1, 0.5, 0.01, &m.build(true), &k.build(true), &[1.0, 0.5], &[1.0, 0.0], &[0.5, 0.5], sub);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
    assert!(close(r.ke_fe, 0.75));
    assert!(close(r.ke_sub, 0.1));
    assert!(close(r.visc_diss, 0.005));
    assert!(close(r.sub_diss, 0.4));
    assert!(close(r.power_in, 0.75));
    assert!(close(r.jump_terms, 0.8));
    assert!(close(r.imbalance, 0.4655));
    let prev = EnergyRecord { t: 0.0, ke_fe: 1.0, ke_sub: 0.15, ..EnergyRecord::default() };
    assert!(close(r.recompute_imbalance(&prev), r.imbalance));
}

#[test]
fn zero_state_budget_is_zero() {
    let d = disc(3);
    let s = d.zero_state();
    let r = energy_ledger_entry(&d, &s, &s, &vec![0.0; d.n_u()], 0.1, 0.2, 0.01);
    assert_eq!(r, EnergyRecord::default());
    assert_eq!(r.relative_imbalance(0.1), 0.0);
}

fn constant_history(n: usize, c: [f64; 2], times: &[f64]) -> (vmsns::Discretization, Vec<StarState>) {
    let d = disc(n);
    let mut s = d.zero_state();
    for dof in 0..d.velocity.n_scalar_dofs() {
        for (comp, val) in c.iter().enumerate() {
            s.u[d.velocity.vector_dof(comp, dof)] = *val;
        }
    }
    let hist = times.iter().map(|&t| StarState { t, ..s.clone() }).collect();
    (d, hist)
}

fn window() -> BumpTest {
    BumpTest::new([0.2, 0.2, 0.0], [0.8, 0.8, 0.0], 0.02, 0.18)
}

fn times() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.01).collect()
}

#[test]
fn local_residual_vanishes_for_trivial_flows() {
    let (d, hist) = constant_history(10, [0.0, 0.0], &times());
    assert_eq!(local_energy_residual(&d, &hist, |_| [0.0; 3], 0.01, &window()).unwrap(), 0.0);
    // constant inside the bump support (the boundary layer of the
    // zero-trace space lies in the outer ring of cells)
    let (d, hist) = constant_history(10, [0.7, -0.4], &times());
    let r = local_energy_residual(&d, &hist, |_| [0.0; 3], 0.01, &window()).unwrap();
    assert!(r.abs() < 1e-10, "{r}");
}

#[test]
fn local_residual_is_affine_in_forcing() {
    let d = disc(8);
    let (s0, _) = d.initialize(|x| vortex(2, x)).unwrap();
    let hist: Vec<StarState> = times().iter().map(|&t| StarState { t, ..s0.clone() }).collect();
    let f = |a: f64| move |x: &[f64; 3]| [a * x[1] * x[1], -a * x[0], 0.0];
    let r0 = local_energy_residual(&d, &hist, f(0.0), 0.01, &window()).unwrap();
    let r1 = local_energy_residual(&d, &hist, f(1.0), 0.01, &window()).unwrap();
    let r2 = local_energy_residual(&d, &hist, f(2.0), 0.01, &window()).unwrap();
    assert!(((r2 - r1) - (r1 - r0)).abs() < 1e-12 * (1.0 + r1.abs()));
    assert!((r1 - r0).abs() > 1e-6);
}

#[test]
fn local_residual_window_errors() {
    let (d, hist) = constant_history(4, [0.0, 0.0], &times());
    let late = BumpTest::new([0.2, 0.2, 0.0], [0.8, 0.8, 0.0], 0.1, 0.5);
    assert!(local_energy_residual(&d, &hist, |_| [0.0; 3], 0.01, &late).is_err());
    let short = BumpTest::new([0.2, 0.2, 0.0], [0.8, 0.8, 0.0], 0.05, 0.1);
    assert!(local_energy_residual(&d, &hist, |_| [0.0; 3], 0.01, &short).is_err());
    assert!(local_energy_residual(&d, &hist[..1], |_| [0.0; 3], 0.01, &window()).is_err());
}

#[test]
fn norm_report_on_simple_histories() {
    let (d, hist) = constant_history(4, [0.0, 0.0], &times());
    let rep = interpolated_norm_report(&d, &hist);
    assert_eq!(rep.entries.len(), 3);
    assert!(rep.entries.iter().all(|e| e.direct == 0.0 && e.interpolated == 0.0));

    let d = disc(6);
    let (s0, _) = d.initialize(|x| vortex(2, x)).unwrap();
    let history = |ts: &[f64]| -> Vec<StarState> { ts.iter().map(|&t| StarState { t, ..s0.clone() }).collect() };
    let long = interpolated_norm_report(&d, &history(&[0.0, 0.5, 1.0, 2.0]));
    let short = interpolated_norm_report(&d, &history(&[0.0, 1.0]));
    let l2 = d.mass.bilinear(&s0.u, &s0.u).sqrt();
    // r = inf, k = 2 is the L2 norm itself
    assert_eq!((long.entries[0].r, long.entries[0].k), (f64::INFINITY, 2.0));
    assert!((long.entries[0].direct - l2).abs() < 1e-12 * l2);
    assert!((long.entries[0].interpolated - l2).abs() < 1e-12 * l2);
    // constant in time: doubling the interval scales by 2^(1/r)
    for (a, b) in long.entries.iter().zip(&short.entries).skip(1) {
        let f = 2f64.powf(1.0 / a.r);
        assert!((a.direct - f * b.direct).abs() < 1e-12 * a.direct);
        assert!((a.interpolated - f * b.interpolated).abs() < 1e-12 * a.interpolated);
        assert!(b.direct > 0.0);
    }
}

#[test]
fn data_bound_controls_forced_run() {
    let d = disc(4);
    let params = StabParams::new(0.05).unwrap();
    let cfg = SolveConfig { dt: 0.02, t_final: 0.1, ..SolveConfig::default() };
    let (s0, _) = d.initialize(|x| vortex(2, x)).unwrap();
    let load = assemble_load(&d.velocity, |x| Forcing::Constant([1.0, 0.5, 0.0]).eval(x));
    let out = d.run(s0.clone(), &load, &cfg, &params, 1).unwrap();
    let bound = a_priori_bound(&d, &s0, &load, cfg.dt, cfg.n_steps(), params.nu).unwrap();
    assert!(ledger_total(&out.ledger, 0.0) <= bound);
    assert_eq!(forcing_dual_norm(&d, &vec![0.0; d.n_u()]).unwrap(), 0.0);
}

#[test]
fn error_norms_and_rates() {
    let d = disc(4);
    let mut s = d.zero_state();
    s.p.iter_mut().for_each(|p| *p = 3.0);
    let e = error_norms(&d, &s, |_| [0.0; 3], |_| [[0.0; 3]; 3], |_| 0.0);
    assert_eq!(e.u_l2, 0.0);
    assert_eq!(e.u_h1, 0.0);
    assert!(e.p_l2 < 1e-12);
    let h = [0.4, 0.2, 0.1];
    let r = observed_rates(&h, &[0.16, 0.04, 0.01]);
    assert!(r.iter().all(|x| (x - 2.0).abs() < 1e-12));
}
