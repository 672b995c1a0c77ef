//! Python bindings: sparse tensors, side matrices, coupled models, the
//! solvers, synthetic data and evaluation metrics.

use std::collections::HashMap;
use std::path::PathBuf;

use cutcd::io::{load_matrix, load_model, load_tensor, save_matrix, save_model, save_tensor};
use cutcd::{CoupledModel, CutoffRule, Factor, Matrix, SolverConfig, SolverKind, SparseTensor3, TestSet, ValueMode};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: cutcd::Error) -> PyErr {
    match e {
        cutcd::Error::Io(_) => PyIOError::new_err(e.to_string()),
        cutcd::Error::Numerical { .. } | cutcd::Error::NonFinite(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = cutcd::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Third-order sparse tensor of `(j, k, l, value)` entries.
#[pyclass(name = "SparseTensor", frozen)]
struct PySparseTensor {
    inner: SparseTensor3,
}

#[pymethods]
impl PySparseTensor {
    #[new]
    fn new(dims: (usize, usize, usize), entries: Vec<(usize, usize, usize, f64)>) -> PyResult<Self> {
        let inner = SparseTensor3::new(dims, entries).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = load_tensor(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_tensor(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn entries(&self) -> Vec<(usize, usize, usize, f64)> {
        self.inner.entries().collect()
    }

    fn norm_sq(&self) -> f64 {
        self.inner.norm_sq()
    }

    fn __len__(&self) -> usize {
        self.inner.nnz()
    }

    fn __repr__(&self) -> String {
        let (j, k, l) = self.inner.dims();
        format!("SparseTensor(dims=({j}, {k}, {l}), nnz={})", self.inner.nnz())
    }
}

/// Dense row-major matrix.
#[pyclass(name = "Matrix", frozen)]
struct PyMatrix {
    inner: Matrix,
}

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = Matrix::from_rows(&rows).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = load_matrix(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_matrix(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.inner.shape();
        format!("Matrix(shape=({r}, {c}))")
    }
}

/// Factors `U1 (J×R)`, `V (K×R)`, `W (L×R)` and `U2 (M×R)`.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: CoupledModel,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(u1: Vec<Vec<f64>>, v: Vec<Vec<f64>>, w: Vec<Vec<f64>>, u2: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = |rows: Vec<Vec<f64>>| Matrix::from_rows(&rows).map_err(to_py);
        let inner = CoupledModel::new(m(u1)?, m(v)?, m(w)?, m(u2)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let inner = load_model(dir).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        save_model(&self.inner, dir).map_err(to_py)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize, usize) {
        self.inner.dims()
    }

    /// Rows of the named factor: `u1`, `v`, `w` or `u2`.
    fn factor(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.factor(parse::<Factor>(name)?).to_rows())
    }

    fn predict(&self, j: usize, k: usize, l: usize) -> PyResult<f64> {
        let (jd, kd, ld, _) = self.inner.dims();
        if j >= jd || k >= kd || l >= ld {
            return Err(PyValueError::new_err(format!("index ({j}, {k}, {l}) out of range")));
        }
        Ok(self.inner.predict(j, k, l))
    }

    fn is_nonnegative(&self) -> bool {
        self.inner.is_nonnegative()
    }

    fn __repr__(&self) -> String {
        let (j, k, l, m) = self.inner.dims();
        format!("Model(dims=({j}, {k}, {l}, {m}), rank={})", self.inner.rank())
    }
}

/// A fitted model and its per-iteration trace; row 0 is the initial model.
#[pyclass(name = "FitResult", frozen)]
struct PyFitResult {
    fit: cutcd::Fit,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn model(&self) -> PyModel {
        PyModel {
            inner: self.fit.model.clone(),
        }
    }

    #[getter]
    fn objectives(&self) -> Vec<f64> {
        self.fit.traces.iter().map(|t| t.objective).collect()
    }

    #[getter]
    fn nrv(&self) -> f64 {
        self.fit.final_trace().nrv
    }

    #[getter]
    fn iters(&self) -> usize {
        self.fit.final_trace().iter
    }

    fn trace(&self) -> Vec<HashMap<&'static str, f64>> {
        self.fit
            .traces
            .iter()
            .map(|t| {
                HashMap::from([
                    ("iter", t.iter as f64),
                    ("objective", t.objective),
                    ("nrv", t.nrv),
                    ("wall_seconds", t.wall_seconds),
                    ("mttkrp_seconds", t.mttkrp_seconds),
                    ("update_seconds", t.update_seconds),
                    ("element_updates", t.element_updates as f64),
                    ("gradient_updates", t.gradient_updates as f64),
                ])
            })
            .collect()
    }
}

/// Micro-averaged top-N scores.
#[pyclass(name = "Scores", frozen, get_all)]
struct PyScores {
    precision: f64,
    recall: f64,
    f1: f64,
    users: usize,
    hits: usize,
    retrieved: usize,
    relevant: usize,
}

/// Fits `solver` (`cutcd`, `cutcd-sc`, `gcd`, `ccdpp` or `als`). `lam` is the
/// L2,1 weight of `cutcd-sc`; `init` replaces the random start.
#[pyfunction]
#[pyo3(signature = (
    solver, tensor, matrix, rank=10, max_iters=100, tol=1e-6, seed=0, cutoff="mean",
    lam=0.0, ccd_inner=1, gcd_max_inner=None, init_scale=1.0, init=None,
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    solver: &str,
    tensor: &PySparseTensor,
    matrix: &PyMatrix,
    rank: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
    cutoff: &str,
    lam: f64,
    ccd_inner: usize,
    gcd_max_inner: Option<usize>,
    init_scale: f64,
    init: Option<&PyModel>,
) -> PyResult<PyFitResult> {
    let kind: SolverKind = parse(solver)?;
    if lam != 0.0 && kind != SolverKind::CutCdSc {
        return Err(PyValueError::new_err(format!(
            "lam applies to cutcd-sc only, not {kind}"
        )));
    }
    let cfg = SolverConfig {
        rank,
        max_iters,
        tol,
        seed,
        cutoff_rule: parse::<CutoffRule>(cutoff)?,
        lambda: lam,
        ccd_inner_iters: ccd_inner,
        gcd_max_inner,
        init_scale,
    };
    let (x, y) = (&tensor.inner, &matrix.inner);
    let init = init.map(|m| m.inner.clone());
    let fit = py
        .detach(|| match init {
            Some(m) => cutcd::fit_from(kind, x, y, &cfg, m),
            None => cutcd::fit(kind, x, y, &cfg),
        })
        .map_err(to_py)?;
    Ok(PyFitResult { fit })
}

/// Synthetic `(tensor, matrix, truth)`; `truth` is `None` in random mode.
#[pyfunction]
#[pyo3(signature = (dims, density, mode="planted", rank=10, noise=0.0, seed=0))]
fn synth(
    dims: (usize, usize, usize, usize),
    density: f64,
    mode: &str,
    rank: usize,
    noise: f64,
    seed: u64,
) -> PyResult<(PySparseTensor, PyMatrix, Option<PyModel>)> {
    let data = cutcd::synth_generate(&cutcd::SynthSpec {
        mode_lengths: dims,
        density,
        rank,
        value_mode: parse::<ValueMode>(mode)?,
        noise_sigma: noise,
        seed,
    })
    .map_err(to_py)?;
    Ok((
        PySparseTensor { inner: data.tensor },
        PyMatrix { inner: data.matrix },
        data.planted.map(|inner| PyModel { inner }),
    ))
}

/// Random `(train, test)` partition of the observed entries.
#[pyfunction]
fn train_test_split(tensor: &PySparseTensor, fraction: f64, seed: u64) -> PyResult<(PySparseTensor, PySparseTensor)> {
    let (train, test) = cutcd::train_test_split(&tensor.inner, fraction, seed).map_err(to_py)?;
    let test = SparseTensor3::new(train.dims(), test.entries().to_vec()).map_err(to_py)?;
    Ok((PySparseTensor { inner: train }, PySparseTensor { inner: test }))
}

#[pyfunction]
fn objective(tensor: &PySparseTensor, matrix: &PyMatrix, model: &PyModel) -> PyResult<f64> {
    cutcd::objective(&tensor.inner, &matrix.inner, &model.inner).map_err(to_py)
}

#[pyfunction]
fn nrv(tensor: &PySparseTensor, model: &PyModel) -> PyResult<f64> {
    cutcd::nrv(&tensor.inner, &model.inner).map_err(to_py)
}

#[pyfunction]
fn rmse(test: &PySparseTensor, model: &PyModel) -> PyResult<f64> {
    cutcd::rmse(&TestSet::from_tensor(&test.inner), &model.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (train, test, model, top_n=10))]
fn precision_recall_f1(
    train: &PySparseTensor,
    test: &PySparseTensor,
    model: &PyModel,
    top_n: usize,
) -> PyResult<PyScores> {
    let s = cutcd::precision_recall_f1(&train.inner, &TestSet::from_tensor(&test.inner), &model.inner, top_n)
        .map_err(to_py)?;
    Ok(PyScores {
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        users: s.users,
        hits: s.hits,
        retrieved: s.retrieved,
        relevant: s.relevant,
    })
}

#[pyfunction]
#[pyo3(signature = (model, factor="w"))]
fn pattern_distinctiveness(model: &PyModel, factor: &str) -> PyResult<f64> {
    cutcd::pattern_distinctiveness(model.inner.factor(parse::<Factor>(factor)?)).map_err(to_py)
}

/// The `cutcd` Python module.
#[pymodule]
#[pyo3(name = "cutcd")]
pub fn cutcd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySparseTensor>()?;
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyScores>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train_test_split, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(nrv, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(precision_recall_f1, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_distinctiveness, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
