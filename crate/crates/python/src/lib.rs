//! Python bindings: reference elements, operator pairs, stability scans and runs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use upwind_gsbp::experiments::{
    max_stable_dt, run_burgers_demo, run_convergence, run_manufactured, BurgersConfig,
    ConvergenceConfig, ScanSettings, SolutionKind, StabilityConfig,
};
use upwind_gsbp::problems::AdvDiffConfig;
use upwind_gsbp::{
    assemble_first_derivative, build_lgl, second_derivative, verify_axioms, BlockMatrix, GsbpError,
    Mesh1D, Topology,
};

fn err(e: GsbpError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &BlockMatrix) -> Vec<Vec<f64>> {
    let d = m.to_dense();
    (0..d.nrows())
        .map(|i| d.row(i).iter().copied().collect())
        .collect()
}

fn topology(name: &str) -> PyResult<Topology> {
    name.parse().map_err(PyValueError::new_err)
}

fn check_len(u: &[f64], n: usize) -> PyResult<()> {
    if u.len() == n {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!(
            "expected {n} values, got {}",
            u.len()
        )))
    }
}

/// Legendre-Gauss-Lobatto reference element on [-1, 1].
#[pyclass(name = "ReferenceElement")]
struct PyReferenceElement {
    inner: upwind_gsbp::ReferenceElement,
}

#[pymethods]
impl PyReferenceElement {
    #[new]
    fn new(degree: usize) -> PyResult<Self> {
        Ok(Self {
            inner: build_lgl(degree).map_err(err)?,
        })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn diff_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.inner.diff_matrix();
        (0..d.nrows())
            .map(|i| d.row(i).iter().copied().collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("ReferenceElement(degree={})", self.inner.degree())
    }
}

/// Global upwind operator pair `D⁻(θ)`, `D⁺(θ)` on a uniform mesh.
#[pyclass(name = "OperatorSet")]
struct PyOperatorSet {
    inner: upwind_gsbp::GlobalOperatorSet,
    x_a: f64,
    x_b: f64,
}

#[pymethods]
impl PyOperatorSet {
    #[new]
    #[pyo3(signature = (degree, cells, theta, topology = "periodic", x_a = -std::f64::consts::PI, x_b = std::f64::consts::PI))]
    fn new(
        degree: usize,
        cells: usize,
        theta: f64,
        topology: &str,
        x_a: f64,
        x_b: f64,
    ) -> PyResult<Self> {
        let topo = self::topology(topology)?;
        let elem = build_lgl(degree).map_err(err)?;
        let mesh = Mesh1D::uniform(x_a, x_b, cells).map_err(err)?;
        Ok(Self {
            inner: assemble_first_derivative(&elem, &mesh, theta, topo).map_err(err)?,
            x_a,
            x_b,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta()
    }

    #[getter]
    fn topology(&self) -> &'static str {
        self.inner.topology().as_str()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn norm(&self) -> Vec<f64> {
        self.inner.norm().to_vec()
    }

    fn d_minus(&self) -> Vec<Vec<f64>> {
        rows(self.inner.d_minus())
    }

    fn d_plus(&self) -> Vec<Vec<f64>> {
        rows(self.inner.d_plus())
    }

    fn dissipation(&self) -> Vec<Vec<f64>> {
        rows(self.inner.dissipation_matrix())
    }

    /// `D₂ = D⁻D⁺` built from this pair.
    fn second_derivative(&self) -> PyResult<Vec<Vec<f64>>> {
        let elem = build_lgl(self.inner.degree()).map_err(err)?;
        let mesh = Mesh1D::uniform(self.x_a, self.x_b, self.inner.num_cells()).map_err(err)?;
        let d2 = second_derivative(&elem, &mesh, self.inner.theta(), self.inner.topology())
            .map_err(err)?;
        Ok(rows(d2.matrix()))
    }

    fn apply_d_minus(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(&u, self.inner.dim())?;
        Ok(self.inner.d_minus().mul_vec(&u))
    }

    fn apply_d_plus(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len(&u, self.inner.dim())?;
        Ok(self.inner.d_plus().mul_vec(&u))
    }

    /// Discrete energy `uᵀMu`.
    fn energy(&self, u: Vec<f64>) -> PyResult<f64> {
        check_len(&u, self.inner.dim())?;
        Ok(self.inner.energy(&u))
    }

    /// Axiom residuals as a dict, with `passed` summarizing them.
    fn certify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = verify_axioms(&self.inner);
        let d = PyDict::new(py);
        d.set_item("accuracy_residual", r.accuracy_residual)?;
        d.set_item("interpolation_residual", r.interpolation_residual)?;
        d.set_item("sbp_residual", r.sbp_residual)?;
        d.set_item("dissipation_max_eigenvalue", r.dissipation_max_eigenvalue)?;
        d.set_item("second_derivative_residual", r.second_derivative_residual)?;
        d.set_item("passed", r.passed())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "OperatorSet(degree={}, cells={}, theta={}, topology='{}')",
            self.inner.degree(),
            self.inner.num_cells(),
            self.inner.theta(),
            self.inner.topology()
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn problem(
    a: f64,
    c: f64,
    theta_adv: f64,
    theta_diff: f64,
    degree: usize,
    cells: usize,
) -> AdvDiffConfig {
    AdvDiffConfig {
        a,
        c,
        theta_adv,
        theta_diff,
        degree,
        cells,
        ..Default::default()
    }
}

fn solution(name: &str) -> PyResult<SolutionKind> {
    name.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Largest energy-stable `τ = a²Δt/c`; `None` when stable up to `tau_cap`.
#[pyfunction]
#[pyo3(signature = (order, degree, cells, theta_adv, theta_diff, a = 0.1, c = 0.1, horizon = 100.0, tau_cap = 1e4))]
#[allow(clippy::too_many_arguments)]
fn max_stable_tau(
    order: u8,
    degree: usize,
    cells: usize,
    theta_adv: f64,
    theta_diff: f64,
    a: f64,
    c: f64,
    horizon: f64,
    tau_cap: f64,
) -> PyResult<Option<f64>> {
    let cfg = StabilityConfig {
        problem: problem(a, c, theta_adv, theta_diff, degree, cells),
        order,
        horizon,
    };
    let settings = ScanSettings {
        tau_cap,
        ..Default::default()
    };
    let r = max_stable_dt(&cfg, &settings).map_err(err)?;
    Ok(r.tau())
}

/// Convergence study; one dict per refinement, `l2_error` is `None` for unstable rows.
#[pyfunction]
#[pyo3(signature = (order, degree, theta_adv, theta_diff, mu, cells = vec![20, 40, 80, 160, 320], a = 0.1, c = 0.1, t_end = 10.0, solution = "decay"))]
#[allow(clippy::too_many_arguments)]
fn convergence<'py>(
    py: Python<'py>,
    order: u8,
    degree: usize,
    theta_adv: f64,
    theta_diff: f64,
    mu: f64,
    cells: Vec<usize>,
    a: f64,
    c: f64,
    t_end: f64,
    solution: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let first = *cells
        .first()
        .ok_or_else(|| PyValueError::new_err("empty cell list"))?;
    let cfg = ConvergenceConfig {
        problem: problem(a, c, theta_adv, theta_diff, degree, first),
        order,
        mu,
        t_end,
        solution: self::solution(solution)?,
        refinements: cells,
    };
    let rows = run_convergence(&cfg, 1).map_err(err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("cells", r.cells)?;
            d.set_item("dt", r.dt)?;
            d.set_item("l2_error", r.l2_error)?;
            d.set_item("eoc", r.eoc)?;
            Ok(d)
        })
        .collect()
}

/// Single manufactured-solution run.
#[pyfunction]
#[pyo3(signature = (order, degree, cells, theta_adv, theta_diff, dt, t_end, a = 0.1, c = 0.1, solution = "decay"))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    order: u8,
    degree: usize,
    cells: usize,
    theta_adv: f64,
    theta_diff: f64,
    dt: f64,
    t_end: f64,
    a: f64,
    c: f64,
    solution: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = problem(a, c, theta_adv, theta_diff, degree, cells);
    let sol = self::solution(solution)?.with(a, c);
    let run = run_manufactured(&cfg, order, sol, dt, t_end).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", run.discretization.nodes().to_vec())?;
    d.set_item("u", run.state.clone())?;
    d.set_item("t", run.t)?;
    d.set_item("l2_error", run.l2_error)?;
    d.set_item("energy", run.trace.energies().collect::<Vec<_>>())?;
    d.set_item("finite", run.finite)?;
    Ok(d)
}

/// Viscous Burgers run; `blowup_time` is `None` when the run completed.
#[pyfunction]
#[pyo3(signature = (theta_adv, theta_diff, cells = 50, degree = 2, dt = 0.1, t_end = 2.0, c = 0.1, order = 2))]
#[allow(clippy::too_many_arguments)]
fn burgers<'py>(
    py: Python<'py>,
    theta_adv: f64,
    theta_diff: f64,
    cells: usize,
    degree: usize,
    dt: f64,
    t_end: f64,
    c: f64,
    order: u8,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = BurgersConfig {
        theta_adv,
        theta_diff,
        degree,
        cells,
        c,
        dt,
        t_end,
        order,
        snapshot_times: vec![t_end],
        ..Default::default()
    };
    let run = run_burgers_demo(&cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("blowup_time", run.blowup_time)?;
    d.set_item("t_reached", run.t_reached)?;
    d.set_item("energy", run.trace.energies().collect::<Vec<_>>())?;
    if let Some(last) = run.snapshots.last() {
        d.set_item("x", last.x.clone())?;
        d.set_item("u", last.u.clone())?;
    }
    Ok(d)
}

#[pymodule]
fn gsbp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReferenceElement>()?;
    m.add_class::<PyOperatorSet>()?;
    m.add_function(wrap_pyfunction!(max_stable_tau, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(burgers, m)?)?;
    Ok(())
}
