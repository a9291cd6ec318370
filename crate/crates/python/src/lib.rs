//! Python bindings. Matrices cross the boundary as lists of rows.
extern crate embed_infolab as core_lib;
use core_lib::covdist::{self, DistanceParams, Metric, SummaryMode};
use core_lib::entropy::{self, EmbeddingMatrix, EntropyParams};
use core_lib::infogain;
use core_lib::scaling_sim;
use core_lib::tensor_io::{self, DType, TensorFile};
use core_lib::{selftest, token_select, Error};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for core_lib::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_row_iterator(n, d, rows.into_iter().flatten()))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn embedding(z: Vec<Vec<f64>>, normalize: bool) -> PyResult<EmbeddingMatrix> {
    let m = matrix(z)?;
    if normalize {
        EmbeddingMatrix::normalized(m).py()
    } else {
        EmbeddingMatrix::new(m).py()
    }
}

/// Log-det entropy of the rows of `z`.
#[pyfunction]
#[pyo3(signature = (z, epsilon = 0.1, normalize = true))]
fn logdet_entropy(z: Vec<Vec<f64>>, epsilon: f64, normalize: bool) -> PyResult<f64> {
    let p = EntropyParams::new(epsilon).py()?;
    Ok(entropy::logdet_entropy(&embedding(z, normalize)?, p))
}

#[pyfunction]
#[pyo3(signature = (z, epsilon = 0.1))]
fn normalized_entropy(z: Vec<Vec<f64>>, epsilon: f64) -> PyResult<f64> {
    let p = EntropyParams::new(epsilon).py()?;
    entropy::normalized_entropy(&embedding(z, true)?, p).py()
}

#[pyfunction]
#[pyo3(signature = (r, d, epsilon = 0.1))]
fn closed_form_subspace(r: usize, d: usize, epsilon: f64) -> PyResult<f64> {
    entropy::closed_form_subspace(r, d, EntropyParams::new(epsilon).py()?).py()
}

/// Returns `(exponent, coefficient, r_squared)`.
#[pyfunction]
fn fit_power_law(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = entropy::fit_power_law(&xs, &ys).py()?;
    Ok((f.exponent, f.coefficient, f.r_squared))
}

#[pyclass(name = "SkillWorld", from_py_object)]
#[derive(Clone)]
struct PySkillWorld(scaling_sim::SkillWorld);

#[pymethods]
impl PySkillWorld {
    #[new]
    #[pyo3(signature = (alpha = 0.5, m = 1_000_000, b = 10.0, c = 1.0, delta = 1.0, neurons_per_skill = 1, a_const = 1.0, gamma_d = 0.3))]
    #[allow(clippy::too_many_arguments)]
    fn new(alpha: f64, m: u64, b: f64, c: f64, delta: f64, neurons_per_skill: u64, a_const: f64, gamma_d: f64) -> PyResult<Self> {
        let w = scaling_sim::SkillWorld {
            m,
            alpha,
            b,
            c,
            delta,
            neurons_per_skill,
            a_const,
            gamma_d,
        };
        w.validate().py()?;
        Ok(PySkillWorld(w))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn m(&self) -> u64 {
        self.0.m
    }

    fn conditional_entropy_after(&self, n: u64) -> PyResult<f64> {
        scaling_sim::conditional_entropy_after(&self.0, n).py()
    }

    fn flops_to_comprehend(&self, n: u64) -> PyResult<f64> {
        scaling_sim::flops_to_comprehend(&self.0, n).py()
    }

    fn entropy_vs_parameters(&self, counts: Vec<u64>) -> PyResult<Vec<(u64, f64)>> {
        scaling_sim::entropy_vs_parameters(&self.0, &counts).py()
    }

    fn entropy_vs_flops(&self, budgets: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        scaling_sim::entropy_vs_flops(&self.0, &budgets).py()
    }

    /// Returns `(size, alpha, entropy)` per dataset size.
    fn entropy_vs_dataset(&self, sizes: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
        let pts = scaling_sim::entropy_vs_dataset(&self.0, &sizes).py()?;
        Ok(pts.into_iter().map(|p| (p.size, p.alpha, p.entropy)).collect())
    }

    fn __repr__(&self) -> String {
        format!("SkillWorld(alpha={}, m={})", self.0.alpha, self.0.m)
    }
}

/// Incremental Gram-matrix factor over appended token representations.
#[pyclass(name = "KernelState")]
struct PyKernelState(infogain::KernelState);

#[pymethods]
impl PyKernelState {
    #[new]
    #[pyo3(signature = (dim, sigma2 = 1e-4))]
    fn new(dim: usize, sigma2: f64) -> PyResult<Self> {
        Ok(PyKernelState(infogain::KernelState::new(dim, sigma2).py()?))
    }

    fn push(&mut self, z: Vec<f64>) -> PyResult<()> {
        self.0.push(&DVector::from_vec(z)).py()
    }

    fn information_gain(&self) -> f64 {
        infogain::information_gain(&self.0)
    }

    fn posterior_variance(&self, z: Vec<f64>) -> PyResult<f64> {
        infogain::posterior_variance(&self.0, &DVector::from_vec(z)).py()
    }

    /// Returns `(increment, paper_increment, posterior_variance)` for `z`.
    fn increment(&self, z: Vec<f64>) -> PyResult<(f64, f64, f64)> {
        let g = infogain::info_gain_increment(&self.0, &DVector::from_vec(z)).py()?;
        Ok((g.increment, g.paper_increment, g.posterior_variance))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// One dict per token with the running gain and the token's increment.
#[pyfunction]
#[pyo3(signature = (z, sigma2 = 1e-4))]
fn gain_curve<'py>(py: Python<'py>, z: Vec<Vec<f64>>, sigma2: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let steps = infogain::gain_curve(&matrix(z)?, sigma2).py()?;
    steps
        .into_iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("t", s.t)?;
            d.set_item("info_gain", s.info_gain)?;
            d.set_item("normalized_gain", s.normalized_gain)?;
            d.set_item("increment", s.increment)?;
            d.set_item("paper_increment", s.paper_increment)?;
            d.set_item("posterior_variance", s.posterior_variance)?;
            Ok(d)
        })
        .collect()
}

/// Ridge weights for `target` on the regressors in `reps` (one per row).
#[pyfunction]
#[pyo3(signature = (reps, target, sigma2 = 1e-4))]
fn ridge_fit(reps: Vec<Vec<f64>>, target: Vec<f64>, sigma2: f64) -> PyResult<Vec<f64>> {
    let cols = matrix(reps)?.transpose();
    Ok(infogain::ridge_fit(&cols, &DVector::from_vec(target), sigma2).py()?.as_slice().to_vec())
}

/// Lasso weights for `target` on the regressors in `reps` (one per row).
#[pyfunction]
#[pyo3(signature = (reps, target, lam = 1e-4))]
fn lasso_fit<'py>(py: Python<'py>, reps: Vec<Vec<f64>>, target: Vec<f64>, lam: f64) -> PyResult<Bound<'py, PyDict>> {
    let cols = matrix(reps)?.transpose();
    let fit = token_select::lasso_fit(&cols, &DVector::from_vec(target), lam).py()?;
    let d = PyDict::new(py);
    d.set_item("beta", fit.beta.as_slice().to_vec())?;
    d.set_item("sweeps", fit.sweeps)?;
    d.set_item("kkt_residual", fit.kkt_residual)?;
    d.set_item("objective_history", fit.objective_history)?;
    Ok(d)
}

/// Indices whose weight magnitude reaches `threshold`.
#[pyfunction]
fn select_by_threshold(weights: Vec<f64>, threshold: f64) -> PyResult<Vec<usize>> {
    Ok(token_select::select_by_threshold(&weights, threshold).py()?.indices)
}

/// Pairwise distances between sentences given as token matrices.
#[pyfunction]
#[pyo3(signature = (sentences, mode = "mean", metric = None, gamma = 100.0, center = false, normalize = true))]
fn distance_matrix(
    sentences: Vec<Vec<Vec<f64>>>,
    mode: &str,
    metric: Option<&str>,
    gamma: f64,
    center: bool,
    normalize: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let mode: SummaryMode = mode.parse().py()?;
    let metric: Metric = match metric {
        Some(m) => m.parse().py()?,
        None if mode == SummaryMode::Covariance => Metric::Js,
        None => Metric::L2,
    };
    let summaries = sentences
        .into_iter()
        .map(|s| covdist::summarize(&embedding(s, normalize)?, mode, center).py())
        .collect::<PyResult<Vec<_>>>()?;
    Ok(rows(&covdist::distance_matrix(&summaries, metric, DistanceParams { gamma }).py()?))
}

#[pyfunction]
#[pyo3(signature = (points, k = 2))]
fn pca_project(points: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&covdist::pca_project(&matrix(points)?, k).py()?))
}

/// Returns `(shape, flat row-major data, dtype)`.
#[pyfunction]
fn read_tensor(path: &str) -> PyResult<(Vec<usize>, Vec<f64>, &'static str)> {
    let t = tensor_io::read_tensor(path).py()?;
    let dtype = match t.dtype {
        DType::F32 => "f32",
        DType::F64 => "f64",
    };
    Ok((t.shape, t.data, dtype))
}

#[pyfunction]
#[pyo3(signature = (path, shape, data, dtype = "f64"))]
fn write_tensor(path: &str, shape: Vec<usize>, data: Vec<f64>, dtype: &str) -> PyResult<()> {
    let dtype = match dtype {
        "f32" => DType::F32,
        "f64" => DType::F64,
        other => return Err(PyValueError::new_err(format!("unknown dtype `{other}`"))),
    };
    tensor_io::write_tensor(path, &TensorFile::new(dtype, shape, data).py()?).py()
}

/// Returns `(name, passed, detail)` per built-in check.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn run_selftest(seed: u64) -> Vec<(&'static str, bool, String)> {
    selftest::run(seed).into_iter().map(|c| (c.name, c.passed, c.detail)).collect()
}

#[pymodule]
fn embed_infolab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySkillWorld>()?;
    m.add_class::<PyKernelState>()?;
    m.add_function(wrap_pyfunction!(logdet_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_subspace, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(gain_curve, m)?)?;
    m.add_function(wrap_pyfunction!(ridge_fit, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_fit, m)?)?;
    m.add_function(wrap_pyfunction!(select_by_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(distance_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(pca_project, m)?)?;
    m.add_function(wrap_pyfunction!(read_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(write_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
