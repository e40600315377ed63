//! Python bindings: grid domains, grid functions as flat lists of node
//! values, thresholds and the solvers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ccsolve::functional::{self, ProblemParams};
use ccsolve::grid::{self, GridDomain, GridFunction, NormKind};
use ccsolve::solver::{self, ConstraintSet, DescentOptions, MultiplicityOptions, SolveReport};
use ccsolve::threshold::{self, EmbeddingConstants, RadiusInterval};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Domain", frozen)]
struct PyDomain {
    inner: GridDomain,
}

#[pymethods]
impl PyDomain {
    #[new]
    fn new(dimension: usize, lengths: Vec<f64>, nodes: Vec<usize>) -> PyResult<Self> {
        Ok(PyDomain {
            inner: GridDomain::new(dimension, &lengths, &nodes).map_err(err)?,
        })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.inner.spacing().to_vec()
    }

    #[getter]
    fn nodes(&self) -> Vec<usize> {
        self.inner.nodes().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Coordinates of every interior node, in storage order.
    fn coordinates(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len())
            .map(|i| self.inner.coordinates(i)[..self.inner.dim()].to_vec())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Domain(dimension={}, lengths={:?}, nodes={:?})",
            self.inner.dim(),
            self.inner.lengths(),
            self.inner.nodes()
        )
    }
}

#[pyclass(name = "Params", frozen)]
struct PyParams {
    inner: ProblemParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (p, q, mu = 0.0))]
    fn new(p: f64, q: f64, mu: f64) -> PyResult<Self> {
        Ok(PyParams {
            inner: ProblemParams::new(p, q, mu).map_err(err)?,
        })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    fn with_mu(&self, mu: f64) -> PyResult<Self> {
        Ok(PyParams {
            inner: self.inner.with_mu(mu).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Params(p={}, q={}, mu={})", self.inner.p(), self.inner.q(), self.inner.mu())
    }
}

fn function(domain: &PyDomain, values: Vec<f64>) -> PyResult<GridFunction> {
    GridFunction::new(domain.inner, values).map_err(err)
}

#[pyfunction]
fn neg_laplacian(domain: &PyDomain, values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(grid::neg_laplacian(&function(domain, values)?).into_values())
}

#[pyfunction]
fn poisson_solve(domain: &PyDomain, values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(grid::poisson_solve(&function(domain, values)?)
        .map_err(err)?
        .into_values())
}

/// The `k` smallest eigenpairs as `(eigenvalue, values)` tuples.
#[pyfunction]
fn eigenpairs(domain: &PyDomain, k: usize) -> PyResult<Vec<(f64, Vec<f64>)>> {
    Ok(grid::eigenpairs(&domain.inner, k)
        .map_err(err)?
        .into_iter()
        .map(|p| (p.eigenvalue, p.eigenfunction.into_values()))
        .collect())
}

/// `kind` is `"h10"`, `"w2n"` or `"lt"` (with exponent `t`).
#[pyfunction]
#[pyo3(signature = (domain, values, kind, t = None))]
fn norm(domain: &PyDomain, values: Vec<f64>, kind: &str, t: Option<f64>) -> PyResult<f64> {
    let kind = match (kind, t) {
        ("h10", _) => NormKind::H10,
        ("w2n", _) => NormKind::W2n,
        ("lt", Some(t)) => NormKind::Lt(t),
        ("lt", None) => return Err(PyValueError::new_err("norm kind 'lt' needs t")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown norm kind {other:?}"))),
    };
    grid::norm(&function(domain, values)?, kind).map_err(err)
}

#[pyfunction]
fn energy(domain: &PyDomain, values: Vec<f64>, params: &PyParams) -> PyResult<f64> {
    Ok(functional::energy(&function(domain, values)?, &params.inner))
}

#[pyfunction]
fn nonlinearity(domain: &PyDomain, values: Vec<f64>, params: &PyParams) -> PyResult<Vec<f64>> {
    Ok(functional::nonlinearity(&function(domain, values)?, &params.inner).into_values())
}

#[pyfunction]
fn energy_gradient(domain: &PyDomain, values: Vec<f64>, params: &PyParams) -> PyResult<Vec<f64>> {
    Ok(functional::energy_gradient(&function(domain, values)?, &params.inner).into_values())
}

/// Thresholds for explicit `C1`, `C2`: a dict with `mu_star`, `r_star`,
/// `r1`, `r2` (`None` when the interval is empty).
#[pyfunction]
fn thresholds<'py>(
    py: Python<'py>,
    c1: f64,
    c2: f64,
    params: &PyParams,
) -> PyResult<Bound<'py, PyDict>> {
    let ec = EmbeddingConstants::from_c(c1, c2, &params.inner).map_err(err)?;
    threshold_dict(py, &ec, &params.inner)
}

fn threshold_dict<'py>(
    py: Python<'py>,
    ec: &EmbeddingConstants,
    params: &ProblemParams,
) -> PyResult<Bound<'py, PyDict>> {
    let t = threshold::mu_star(ec, params).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("d1", ec.d1)?;
    d.set_item("d2", ec.d2)?;
    d.set_item("c1", ec.c1)?;
    d.set_item("c2", ec.c2)?;
    d.set_item("mu_star", t.mu_star)?;
    d.set_item("r_star", t.r_star)?;
    d.set_item("r1", t.interval.r1())?;
    d.set_item("r2", t.interval.r2())?;
    d.set_item("degenerate", matches!(t.interval, RadiusInterval::Degenerate { .. }))?;
    Ok(d)
}

/// Estimates `d1`, `d2` on the grid and returns the same dict as
/// [`thresholds`].
#[pyfunction]
fn grid_thresholds<'py>(
    py: Python<'py>,
    domain: &PyDomain,
    params: &PyParams,
) -> PyResult<Bound<'py, PyDict>> {
    let ec = EmbeddingConstants::estimate(&domain.inner, &params.inner).map_err(err)?;
    threshold_dict(py, &ec, &params.inner)
}

fn report_dict<'py>(py: Python<'py>, r: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", &r.method)?;
    d.set_item("solution", r.solution.values().to_vec())?;
    d.set_item("residual_inf", r.residual_inf)?;
    d.set_item("energy", r.energy)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("w2n_norm", r.w2n_norm)?;
    d.set_item("radius", r.radius)?;
    d.set_item("in_ball", r.in_ball)?;
    d.set_item("min_value", r.min_value)?;
    d.set_item("certificate_slack", r.certificate_slack)?;
    d.set_item("certified", r.certified())?;
    Ok(d)
}

/// Positive solution in the nonnegative part of `K(radius)`;
/// `method` is `"minimize"` or `"fixed_point"`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (domain, params, radius, method = "minimize", tol = 1e-10, max_iter = 5000, seed = 0))]
fn solve_positive<'py>(
    py: Python<'py>,
    domain: &PyDomain,
    params: &PyParams,
    radius: f64,
    method: &str,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let k = ConstraintSet::new(radius, true);
    let report = match method {
        "minimize" => {
            let opts = DescentOptions { tol, max_iter, seed };
            solver::minimize_positive(&params.inner, &k, &domain.inner, None, &opts)
        }
        "fixed_point" => solver::positive_witness(&domain.inner, &params.inner, &k)
            .and_then(|(u0, _)| solver::fixed_point_solve(&u0, &params.inner, radius, tol, max_iter)),
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    }
    .map_err(err)?;
    report_dict(py, &report)
}

/// Distinct negative-energy solution pairs in `K(radius)`.
#[pyfunction]
#[pyo3(signature = (domain, params, radius, want, seed = 0))]
fn multiplicity<'py>(
    py: Python<'py>,
    domain: &PyDomain,
    params: &PyParams,
    radius: f64,
    want: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = MultiplicityOptions {
        seed,
        ..MultiplicityOptions::default()
    };
    let out = solver::multiplicity_search(
        &domain.inner,
        &params.inner,
        &ConstraintSet::new(radius, false),
        want,
        &opts,
    )
    .map_err(err)?;
    out.solutions.iter().map(|r| report_dict(py, r)).collect()
}

/// Residual, energy, ball membership and certificate of `values`.
#[pyfunction]
#[pyo3(signature = (domain, values, params, radius, seed = 0))]
fn verify<'py>(
    py: Python<'py>,
    domain: &PyDomain,
    values: Vec<f64>,
    params: &PyParams,
    radius: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let u = function(domain, values)?;
    let r = solver::verify_solution(&u, &params.inner, &ConstraintSet::new(radius, false), seed);
    report_dict(py, &r)
}

#[pymodule]
fn ccsolve_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(neg_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_solve, m)?)?;
    m.add_function(wrap_pyfunction!(eigenpairs, m)?)?;
    m.add_function(wrap_pyfunction!(norm, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(nonlinearity, m)?)?;
    m.add_function(wrap_pyfunction!(energy_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(grid_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(solve_positive, m)?)?;
    m.add_function(wrap_pyfunction!(multiplicity, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
