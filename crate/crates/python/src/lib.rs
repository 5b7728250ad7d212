//! Python bindings: meshes, discretizations, time stepping, the energy
//! ledger, scenario files and the spectral suite.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vmsns::diagnostics::EnergyRecord;
use vmsns::fe::assemble_load;
use vmsns::fields::{Forcing, InitialCondition};
use vmsns::io::{check_ledger, parse_config, read_ledger, Scenario, ScenarioConfig};
use vmsns::mesh::{build_structured, mesh_quality, refine_uniform, BoxDomain};
use vmsns::solver::RunOutput;
use vmsns::{SolveConfig, StabParams, VmsError};

fn to_py(e: VmsError) -> PyErr {
    match e.root() {
        VmsError::Io { .. } => PyOSError::new_err(e.to_string()),
        VmsError::Config(_) | VmsError::Input(_) | VmsError::Size { .. } | VmsError::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn initial_from(name: &str) -> PyResult<InitialCondition> {
    match name {
        "zero" => Ok(InitialCondition::Zero),
        "vortex" => Ok(InitialCondition::Vortex),
        "manufactured" => Ok(InitialCondition::Manufactured),
        _ => Err(PyValueError::new_err(format!("unknown initial condition `{name}`"))),
    }
}

fn forcing_from(name: &str, value: [f64; 3], nu: f64, convection: bool) -> PyResult<Forcing> {
    match name {
        "zero" => Ok(Forcing::Zero),
        "constant" => Ok(Forcing::Constant(value)),
        "manufactured" => Ok(Forcing::Manufactured { nu, convection }),
        _ => Err(PyValueError::new_err(format!("unknown forcing `{name}`"))),
    }
}

fn record_dict<'py>(py: Python<'py>, r: &EnergyRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("ke_fe", r.ke_fe)?;
    d.set_item("ke_sub", r.ke_sub)?;
    d.set_item("visc_diss", r.visc_diss)?;
    d.set_item("sub_diss", r.sub_diss)?;
    d.set_item("power_in", r.power_in)?;
    d.set_item("jump_terms", r.jump_terms)?;
    d.set_item("imbalance", r.imbalance)?;
    Ok(d)
}

/// Structured simplicial mesh of a box.
#[pyclass(name = "Mesh", module = "vmsns_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Arc<vmsns::Mesh>,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (n, dim = 2, lo = None, hi = None))]
    fn new(n: usize, dim: usize, lo: Option<[f64; 3]>, hi: Option<[f64; 3]>) -> PyResult<Self> {
        let domain = match (lo, hi) {
            (None, None) => BoxDomain::unit(),
            (Some(lo), Some(hi)) => BoxDomain::new(lo, hi),
            _ => return Err(PyValueError::new_err("give both `lo` and `hi` or neither")),
        };
        let m = build_structured(dim, n, domain).map_err(to_py)?;
        Ok(PyMesh { inner: Arc::new(m) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn h_max(&self) -> f64 {
        self.inner.h_max()
    }

    #[getter]
    fn h_min(&self) -> f64 {
        self.inner.h_min()
    }

    fn total_volume(&self) -> f64 {
        self.inner.total_volume()
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices().to_vec()
    }

    fn cells(&self) -> Vec<Vec<usize>> {
        self.inner.cells().to_vec()
    }

    fn refine(&self) -> PyMesh {
        PyMesh {
            inner: Arc::new(refine_uniform(&self.inner)),
        }
    }

    fn quality<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let q = mesh_quality(&self.inner);
        let d = PyDict::new(py);
        d.set_item("h_max", q.h_max)?;
        d.set_item("h_min", q.h_min)?;
        d.set_item("min_shape_ratio", q.min_shape_ratio)?;
        d.set_item("quasi_uniformity", q.quasi_uniformity)?;
        d.set_item("degenerate_cells", q.degenerate_cells)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(dim={}, vertices={}, cells={}, h={:.4})",
            self.inner.dim(),
            self.inner.n_vertices(),
            self.inner.n_cells(),
            self.inner.h_max()
        )
    }
}

/// Resolved velocity, pressure and subscale at one time level.
#[pyclass(name = "State", module = "vmsns_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: vmsns::StarState,
}

#[pymethods]
impl PyState {
    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }

    /// Subscale values per cell and quadrature point, `[cell][point][component]`.
    fn subscale(&self) -> Vec<Vec<[f64; 3]>> {
        let f = &self.inner.tilde.values;
        f.values.chunks(f.n_q.max(1)).map(|c| c.to_vec()).collect()
    }
}

/// Output of a run: ledger, per-step solver reports and the kept states.
#[pyclass(name = "RunResult", module = "vmsns_py", frozen)]
struct PyRunResult {
    inner: RunOutput,
}

#[pymethods]
impl PyRunResult {
    fn ledger<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.ledger.iter().map(|r| record_dict(py, r)).collect()
    }

    #[getter]
    fn iterations(&self) -> Vec<usize> {
        self.inner.reports.iter().map(|r| r.iterations).collect()
    }

    #[getter]
    fn tau(&self) -> Vec<f64> {
        self.inner.reports.iter().map(|r| r.tau).collect()
    }

    #[getter]
    fn initial(&self) -> PyState {
        PyState {
            inner: self.inner.initial.clone(),
        }
    }

    #[getter]
    fn final_state(&self) -> PyState {
        PyState {
            inner: self.inner.final_state.clone(),
        }
    }

    fn snapshots(&self) -> Vec<PyState> {
        self.inner
            .snapshots
            .iter()
            .map(|s| PyState { inner: s.clone() })
            .collect()
    }
}

/// Equal-order spaces, operators and the subscale projector on a mesh.
#[pyclass(name = "Discretization", module = "vmsns_py", frozen)]
struct PyDiscretization {
    inner: Arc<vmsns::Discretization>,
}

#[pymethods]
impl PyDiscretization {
    #[new]
    #[pyo3(signature = (mesh, degree = 1))]
    fn new(py: Python<'_>, mesh: &PyMesh, degree: usize) -> PyResult<Self> {
        let m = mesh.inner.clone();
        let d = py.detach(|| vmsns::Discretization::new(m, degree)).map_err(to_py)?;
        Ok(PyDiscretization { inner: Arc::new(d) })
    }

    #[getter]
    fn n_u(&self) -> usize {
        self.inner.n_u()
    }

    #[getter]
    fn n_p(&self) -> usize {
        self.inner.n_p()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    fn zero_state(&self) -> PyState {
        PyState {
            inner: self.inner.zero_state(),
        }
    }

    /// Initial projection of `"zero"`, `"vortex"` or `"manufactured"` data.
    #[pyo3(signature = (initial = "vortex"))]
    fn initialize(&self, py: Python<'_>, initial: &str) -> PyResult<PyState> {
        let ic = initial_from(initial)?;
        let d = self.inner.clone();
        let dim = d.velocity.dim();
        let (s, _) = py.detach(|| d.initialize(|x| ic.eval(dim, x))).map_err(to_py)?;
        Ok(PyState { inner: s })
    }

    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (state, nu, dt, t_final, forcing = "zero", forcing_value = [0.0, 0.0, 0.0], convection = true, snapshot_every = 1))]
    fn run(
        &self,
        py: Python<'_>,
        state: &PyState,
        nu: f64,
        dt: f64,
        t_final: f64,
        forcing: &str,
        forcing_value: [f64; 3],
        convection: bool,
        snapshot_every: usize,
    ) -> PyResult<PyRunResult> {
        let f = forcing_from(forcing, forcing_value, nu, convection)?;
        let params = StabParams::new(nu).map_err(to_py)?;
        let cfg = SolveConfig {
            dt,
            t_final,
            convection,
            ..SolveConfig::default()
        };
        let d = self.inner.clone();
        let s0 = state.inner.clone();
        let out = py
            .detach(|| {
                let load = assemble_load(&d.velocity, |x| f.eval(x));
                d.run(s0, &load, &cfg, &params, snapshot_every)
            })
            .map_err(to_py)?;
        Ok(PyRunResult { inner: out })
    }

    fn divergence_residual(&self, state: &PyState) -> f64 {
        self.inner.divergence_residual(&state.inner)
    }

    fn orthogonality_ratio(&self, state: &PyState) -> f64 {
        self.inner.projector.orthogonality_ratio(&state.inner.tilde.values)
    }

    fn write_vtk(&self, state: &PyState, path: PathBuf) -> PyResult<()> {
        vmsns::io::write_fields(&self.inner, &state.inner, &path).map_err(to_py)
    }
}

fn config_dict<'py>(py: Python<'py>, c: &ScenarioConfig) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("dim", c.dim)?;
    d.set_item("n", c.n)?;
    d.set_item("box_lo", c.domain.lo)?;
    d.set_item("box_hi", c.domain.hi)?;
    d.set_item("nu", c.nu)?;
    d.set_item("convection", c.convection)?;
    d.set_item("C_s", c.c_s)?;
    d.set_item("C_c", c.c_c)?;
    d.set_item("dt", c.dt)?;
    d.set_item("T", c.t_final)?;
    d.set_item("snapshot_every", c.snapshot_every)?;
    d.set_item("picard_tol", c.picard_tol)?;
    d.set_item("picard_max", c.picard_max)?;
    d.set_item("linear_tol", c.linear_tol)?;
    d.set_item("out_dir", c.out_dir.clone())?;
    Ok(d)
}

/// Parses a scenario file and returns its settings.
#[pyfunction]
fn load_config<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let c = parse_config(&path).map_err(to_py)?;
    config_dict(py, &c)
}

/// Builds and runs the scenario described by a config file.
#[pyfunction]
fn run_scenario(py: Python<'_>, path: PathBuf) -> PyResult<PyRunResult> {
    let cfg = parse_config(&path).map_err(to_py)?;
    let out = py
        .detach(|| Scenario::build(&cfg, cfg.n).and_then(|s| s.run(&cfg)))
        .map_err(to_py)?;
    Ok(PyRunResult { inner: out })
}

/// Re-checks a ledger file; returns `{"ok", "rows", "worst", "failures"}`.
#[pyfunction]
#[pyo3(signature = (path, tol = vmsns::io::ledger::CHECK_TOL))]
fn check_ledger_file<'py>(py: Python<'py>, path: PathBuf, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let rows = read_ledger(&path).map_err(to_py)?;
    let c = check_ledger(&rows, tol);
    let d = PyDict::new(py);
    d.set_item("ok", c.ok())?;
    d.set_item("rows", c.rows)?;
    d.set_item("worst", c.worst)?;
    d.set_item("failures", c.failures)?;
    Ok(d)
}

/// Spectral measurements on `levels` refinements; one dict per report row.
#[pyfunction]
#[pyo3(signature = (dim = 2, base_n = 4, levels = 3, seed = 7))]
fn spectra_suite<'py>(py: Python<'py>, dim: usize, base_n: usize, levels: usize, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rep = py
        .detach(|| vmsns::spectral::spectra_suite(dim, base_n, levels, seed))
        .map_err(to_py)?;
    rep.rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("lemma", &r.lemma)?;
            d.set_item("s", r.s)?;
            d.set_item("level", r.level)?;
            d.set_item("h", r.h)?;
            d.set_item("value", r.value)?;
            d.set_item("ratio_min", r.ratio_min)?;
            d.set_item("ratio_max", r.ratio_max)?;
            Ok(d)
        })
        .collect()
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let mut full = vec!["vmsns".to_string()];
    full.extend(args);
    py.detach(|| vmsns::io::run_cli(full))
}

#[pymodule]
fn vmsns_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyDiscretization>()?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(check_ledger_file, m)?)?;
    m.add_function(wrap_pyfunction!(spectra_suite, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
