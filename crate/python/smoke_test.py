"""Smoke test for the vmsns_py extension module."""

import math
import os
import tempfile

import vmsns_py as v


def main():
    mesh = v.Mesh(8)
    assert mesh.n_cells == 128 and mesh.n_vertices == 81
    assert abs(mesh.total_volume() - 1.0) < 1e-14
    assert mesh.refine().n_cells == 4 * mesh.n_cells

    disc = v.Discretization(mesh)
    s0 = disc.initialize("vortex")
    assert len(s0.u) == disc.n_u and len(s0.p) == disc.n_p
    assert disc.divergence_residual(s0) < 1e-12
    assert disc.orthogonality_ratio(s0) < 1e-8

    run = disc.run(s0, nu=0.01, dt=0.01, t_final=0.05)
    ledger = run.ledger()
    assert len(ledger) == 5
    energies = [r["ke_fe"] + r["ke_sub"] for r in ledger]
    assert all(b < a for a, b in zip(energies, energies[1:]))
    assert all(abs(r["imbalance"]) < 1e-10 for r in ledger)
    assert all(math.isfinite(t) and t > 0 for t in run.tau)

    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "s.cfg")
        with open(cfg, "w") as f:
            f.write("mesh.n = 4\nphysics.nu = 0.05\ntime.dt = 0.02\ntime.T = 0.06\n")
        assert v.load_config(cfg)["n"] == 4
        assert len(v.run_scenario(cfg).ledger()) == 3
        out = os.path.join(tmp, "out")
        assert v.cli(["run", "--config", cfg, "--out", out]) == 0
        check = v.check_ledger_file(os.path.join(out, "ledger.csv"))
        assert check["ok"] and check["rows"] == 3
        try:
            v.load_config(os.path.join(tmp, "missing.cfg"))
        except OSError:
            pass
        else:
            raise AssertionError("missing config should raise")

    rows = v.spectra_suite(base_n=2, levels=1)
    assert any(r["lemma"] == "infsup" for r in rows)
    print("smoke test ok:", mesh, "energy", energies[0], "->", energies[-1])


if __name__ == "__main__":
    main()
