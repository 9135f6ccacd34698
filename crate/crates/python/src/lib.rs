//! Python bindings: objectives, constraint projection, return panels, AR(1)
//! models, the constant-weight solver and the functional ascent.

use funfolio::funopt::{self, AscentConfig, BaseRule, Variant};
use funfolio::resample::{ResampleKind, ResampleScheme};
use funfolio::{solvers, stats, ConditionalMoments, Setting};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: funfolio::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

#[pyclass(name = "ObjectiveSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyObjective(funfolio::ObjectiveSpec);

#[pymethods]
impl PyObjective {
    /// Parses `mv:lambda=z0.9`, `sharpe:r0=0`, `msd:lambda=0.128`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(err)
    }

    #[staticmethod]
    fn mv(lam: f64) -> PyResult<Self> {
        funfolio::ObjectiveSpec::mv(lam).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (r0 = 0.0))]
    fn sharpe(r0: f64) -> PyResult<Self> {
        funfolio::ObjectiveSpec::sharpe(r0).map(Self).map_err(err)
    }

    #[staticmethod]
    fn msd(lam: f64) -> PyResult<Self> {
        funfolio::ObjectiveSpec::msd(lam).map(Self).map_err(err)
    }

    fn eval(&self, u: f64, v: f64) -> PyResult<f64> {
        self.0.eval(u, v).map_err(err)
    }

    fn grad(&self, u: f64, v: f64) -> PyResult<(f64, f64)> {
        self.0.grad(u, v).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ObjectiveSpec('{}')", self.0)
    }
}

#[pyclass(name = "ReturnPanel", frozen, from_py_object)]
#[derive(Clone)]
struct PyPanel(funfolio::ReturnPanel);

#[pymethods]
impl PyPanel {
    /// Panel from a list of rows (one per period).
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        funfolio::ReturnPanel::with_default_labels(from_rows(&rows)?).map(Self).map_err(err)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        funfolio::ReturnPanel::read_csv_path(path).map(Self).map_err(err)
    }

    /// Simulated panel under `iid`, `ar` or `garch`.
    #[staticmethod]
    fn simulate(setting: &str, n: usize, p: usize, seed: u64) -> PyResult<Self> {
        let setting: Setting = setting.parse().map_err(err)?;
        funfolio::simulate(&funfolio::GeneratorConfig::for_setting(setting, n, p, seed)).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn asset_ids(&self) -> Vec<String> {
        self.0.asset_ids().to_vec()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        to_rows(self.0.values())
    }

    fn rows(&self, start: usize, end: usize) -> PyResult<Self> {
        self.0.rows(start, end).map(Self).map_err(err)
    }

    fn sample_mean(&self) -> Vec<f64> {
        to_vec(&self.0.sample_mean())
    }

    fn sample_second_moment(&self) -> Vec<Vec<f64>> {
        to_rows(&self.0.sample_second_moment())
    }

    fn __repr__(&self) -> String {
        format!("ReturnPanel(n={}, p={})", self.0.n(), self.0.p())
    }
}

#[pyclass(name = "MomentModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyModel(funfolio::MomentModel);

#[pymethods]
impl PyModel {
    /// Per-asset AR(1) fit.
    #[staticmethod]
    fn fit(panel: &PyPanel) -> PyResult<Self> {
        funfolio::fit_ar1(&panel.0).map(Self).map_err(err)
    }

    /// Model whose moments do not depend on the history.
    #[staticmethod]
    fn constant(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        funfolio::MomentModel::constant(DVector::from_vec(mean), from_rows(&cov)?).map(Self).map_err(err)
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        to_vec(&self.0.alpha)
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        to_vec(&self.0.beta)
    }

    fn cond_mean(&self, panel: &PyPanel) -> PyResult<Vec<f64>> {
        self.0.cond_mean(&panel.0).map(|m| to_vec(&m)).map_err(err)
    }

    fn cond_second_moment(&self, panel: &PyPanel) -> PyResult<Vec<Vec<f64>>> {
        self.0.cond_second_moment(&panel.0).map(|m| to_rows(&m)).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(json_err)
    }
}

#[pyclass(name = "FunctionalPolicy", frozen, from_py_object)]
#[derive(Clone)]
struct PyPolicy(funopt::FunctionalPolicy);

#[pymethods]
impl PyPolicy {
    #[getter]
    fn a(&self) -> Vec<f64> {
        self.0.a.clone()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.0.b.clone()
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        self.0.t.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    /// Weights of the learned rule on a history.
    fn evaluate(&self, panel: &PyPanel) -> PyResult<Vec<f64>> {
        funopt::evaluate_policy(&self.0, &panel.0).map(|w| to_vec(&w)).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let policy: funopt::FunctionalPolicy = serde_json::from_str(text).map_err(json_err)?;
        policy.validate().map_err(err)?;
        Ok(Self(policy))
    }

    fn __repr__(&self) -> String {
        format!("FunctionalPolicy(k={}, variant={})", self.0.k(), self.0.variant)
    }
}

fn omega(p: usize, lower_bound: Option<f64>) -> PyResult<funfolio::ConstraintSet> {
    funfolio::ConstraintSet::new(p, lower_bound.unwrap_or(f64::NEG_INFINITY)).map_err(err)
}

/// Euclidean projection onto `{sum(w) = 1, w >= lower_bound}`.
#[pyfunction]
#[pyo3(signature = (vector, lower_bound = None))]
fn project(vector: Vec<f64>, lower_bound: Option<f64>) -> PyResult<Vec<f64>> {
    let set = omega(vector.len(), lower_bound)?;
    funfolio::project(&set, &DVector::from_vec(vector)).map(|w| to_vec(&w)).map_err(err)
}

/// Constant weights maximizing the objective for given moments.
#[pyfunction]
#[pyo3(signature = (objective, mu, v, lower_bound = None))]
fn solve_constant(objective: &PyObjective, mu: Vec<f64>, v: Vec<Vec<f64>>, lower_bound: Option<f64>) -> PyResult<Vec<f64>> {
    let set = omega(mu.len(), lower_bound)?;
    solvers::solve_constant(objective.0, &DVector::from_vec(mu), &from_rows(&v)?, &set).map(|w| to_vec(&w)).map_err(err)
}

/// Learns a functional policy on `panel`. Returns the policy and a dict with
/// the `U`, `V`, `G` and `t` traces.
#[pyfunction]
#[pyo3(signature = (panel, objective, lower_bound = None, model = None, scheme = "dblock", b = 60, k = 50, variant = "projected", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_ascent<'py>(
    py: Python<'py>,
    panel: &PyPanel,
    objective: &PyObjective,
    lower_bound: Option<f64>,
    model: Option<&PyModel>,
    scheme: &str,
    b: usize,
    k: usize,
    variant: &str,
    seed: u64,
) -> PyResult<(PyPolicy, Bound<'py, PyDict>)> {
    let set = omega(panel.0.p(), lower_bound)?;
    let model = match model {
        Some(m) => m.0.clone(),
        None => funfolio::fit_ar1(&panel.0).map_err(err)?,
    };
    let kind: ResampleKind = scheme.parse().map_err(err)?;
    let variant: Variant = variant.parse().map_err(err)?;
    let cfg = AscentConfig { k, variant, ..Default::default() };
    let panel_ref = &panel.0;
    let out = py
        .detach(|| {
            funopt::run_ascent(panel_ref, &model, objective.0, &set, &BaseRule::PlugIn, &ResampleScheme::new(kind, b, seed), &cfg)
        })
        .map_err(err)?;
    let trace = PyDict::new(py);
    trace.set_item("U", out.trace.u.clone())?;
    trace.set_item("V", out.trace.v.clone())?;
    trace.set_item("G", out.trace.g.clone())?;
    trace.set_item("t", out.trace.t.clone())?;
    trace.set_item("stop_reason", format!("{:?}", out.trace.stop_reason))?;
    Ok((PyPolicy(out.policy), trace))
}

/// `F(mean r, mean r^2)` of realized portfolio returns.
#[pyfunction]
fn realized_objective(objective: &PyObjective, returns: Vec<f64>) -> PyResult<f64> {
    stats::realized_objective(objective.0, &returns).map_err(err)
}

/// One-sided paired t-test of `H0: E(x - y) <= 0`; returns `(t, p)`.
#[pyfunction]
fn paired_t_test(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    stats::paired_t_test(&x, &y).map(|r| (r.statistic, r.p_value)).map_err(err)
}

/// Ljung-Box portmanteau test; returns `(Q, p)`.
#[pyfunction]
fn ljung_box(series: Vec<f64>, h: usize) -> PyResult<(f64, f64)> {
    stats::ljung_box(&series, h).map(|r| (r.statistic, r.p_value)).map_err(err)
}

#[pymodule]
fn funfolio_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObjective>()?;
    m.add_class::<PyPanel>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(solve_constant, m)?)?;
    m.add_function(wrap_pyfunction!(run_ascent, m)?)?;
    m.add_function(wrap_pyfunction!(realized_objective, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(ljung_box, m)?)?;
    Ok(())
}
