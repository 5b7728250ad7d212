#![allow(clippy::needless_range_loop)]
mod common;

use std::path::Path;
use std::sync::Arc;

use common::*;
use vmsns::fields::vortex;
use vmsns::io::*;
use vmsns::mesh::{build_structured, BoxDomain};
use vmsns::{Discretization, SolveConfig, StabParams, VmsError};

#[test]
fn vtk_of_zero_state() {
    let d = disc(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.vtk");
    write_fields(&d, &d.zero_state(), &path).unwrap();
    let a = read_fields(&path).unwrap();
    assert_eq!((a.n_points, a.n_cells), (16, 18));
    assert!(a.velocity.iter().all(|v| *v == [0.0; 3]));
    assert!(a.pressure.iter().chain(&a.subscale).all(|v| *v == 0.0));
}

#[test]
fn vtk_round_trip() {
    let d = disc(4);
    let (mut s, _) = d.initialize(|x| vortex(2, x)).unwrap();
    s.p = random_vec(d.n_p(), &mut rng(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.vtk");
    write_fields(&d, &s, &path).unwrap();
    let a = read_fields(&path).unwrap();
    let vel = d.velocity.node_values(&s.u);
    let pres = d.pressure.node_values(&s.p);
    for i in 0..a.n_points {
        for c in 0..3 {
            assert!((a.velocity[i][c] - vel[i][c]).abs() <= 1e-15 * (1.0 + vel[i][c].abs()));
        }
        assert!((a.pressure[i] - pres[i][0]).abs() <= 1e-15 * (1.0 + pres[i][0].abs()));
    }
    let mags = s.tilde.values.cell_mean_magnitude(d.projector.rule());
    assert_eq!(a.subscale, mags);
}

#[test]
fn vtk_single_cell_mesh() {
    let d = Discretization::new(Arc::new(build_structured(2, 1, BoxDomain::unit()).unwrap()), 1).unwrap();
    let text = vmsns::io::vtk::fields_to_vtk(&d, &d.zero_state());
    let a = vmsns::io::vtk::parse_fields(&text, Path::new("mem")).unwrap();
    assert_eq!((a.n_points, a.n_cells), (4, 2));
    assert_eq!((a.velocity.len(), a.pressure.len(), a.subscale.len()), (4, 4, 2));
}

fn short_run() -> Vec<vmsns::diagnostics::EnergyRecord> {
    let d = disc(4);
    let (s0, _) = d.initialize(|x| vortex(2, x)).unwrap();
    let cfg = SolveConfig { t_final: 0.03, ..SolveConfig::default() };
    d.run(s0, &vec![0.0; d.n_u()], &cfg, &StabParams::new(0.01).unwrap(), 1).unwrap().ledger
}

#[test]
fn ledger_files_are_byte_identical_and_check_clean() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_ledger(&a, &short_run()).unwrap();
    write_ledger(&b, &short_run()).unwrap();
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let rows = read_ledger(&a).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(check_ledger(&rows, 1e-10).ok());
    assert!(String::from_utf8(ta).unwrap().starts_with(LEDGER_HEADER));
}

#[test]
fn ledger_check_catches_corruption() {
    let mut rows = short_run();
    rows[1].ke_fe *= 1.001;
    let c = check_ledger(&rows, 1e-10);
    assert!(!c.ok());
    assert!(c.failures.iter().any(|(r, _)| *r == 2 || *r == 3));
    let mut rows = short_run();
    rows[2].t = rows[1].t;
    assert!(!check_ledger(&rows, 1e-10).ok());
}

#[test]
fn malformed_ledger_is_a_parse_error() {
    let p = Path::new("bad.csv");
    assert!(matches!(vmsns::io::ledger::parse_ledger("t,x\n1,2\n", p), Err(VmsError::Parse { .. })));
    let text = format!("{LEDGER_HEADER}\n0.1,1,2,3\n");
    assert!(matches!(vmsns::io::ledger::parse_ledger(&text, p), Err(VmsError::Parse { line: 2, .. })));
}

#[test]
fn config_errors_are_collected() {
    let p = Path::new("s.cfg");
    let e = parse_config_str("mesh.n = 0\nphysics.nu = -1\ntime.dt = 0.1\n", p).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("mesh.n") && msg.contains("physics.nu") && msg.contains("time.T"), "{msg}");
    let e = parse_config_str("mesh.n = 4\nphysics.nu = 0.1\ntime.dt = 0.1\ntime.T = 1\nphysics.nuu = 2\n", p).unwrap_err();
    assert!(e.to_string().contains("physics.nu"));
    let ok = parse_config_str("[mesh]\nn = 4\n[physics]\nnu = 0.1\n[time]\ndt = 0.1\nT = 1\n", p).unwrap();
    assert_eq!(ok.n, 4);
    assert!(ok.wants(OutputFormat::Csv) && ok.wants(OutputFormat::Vtk));
}
