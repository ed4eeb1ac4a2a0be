//! Python bindings for the selection pipeline, the estimators, and the
//! benchmark harness. Matrices cross the boundary as nested lists of floats,
//! with optional imaginary parts for complex models.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use copra_core::bench::{run_benchmark, report_to_csv, ScenarioConfig, ScenarioId};
use copra_core::error::CopraError;
use copra_core::estimators::{rls_solve as core_rls, Method};
use copra_core::qam;
use copra_core::solver::{newton_solve, SolverConfig};
use copra_core::spectral::decompose;

fn to_py_err(e: CopraError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn build_matrix(re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>>) -> PyResult<DMatrix<Complex64>> {
    let m = re.len();
    if m == 0 {
        return Err(PyValueError::new_err("empty matrix"));
    }
    let n = re[0].len();
    if re.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    if let Some(im) = &im {
        if im.len() != m || im.iter().any(|row| row.len() != n) {
            return Err(PyValueError::new_err("imaginary part shape mismatch"));
        }
    }
    Ok(DMatrix::from_fn(m, n, |i, j| {
        Complex64::new(re[i][j], im.as_ref().map_or(0.0, |im| im[i][j]))
    }))
}

fn build_vector(re: Vec<f64>, im: Option<Vec<f64>>) -> PyResult<DVector<Complex64>> {
    if let Some(im) = &im {
        if im.len() != re.len() {
            return Err(PyValueError::new_err("imaginary part length mismatch"));
        }
    }
    Ok(DVector::from_fn(re.len(), |i, _| {
        Complex64::new(re[i], im.as_ref().map_or(0.0, |im| im[i]))
    }))
}

/// Solve for the regularizer of the model (H, y); returns a dict of
/// selection diagnostics.
#[pyfunction]
#[pyo3(signature = (h_re, y_re, h_im=None, y_im=None, rho=1e-9))]
fn select_gamma<'py>(
    py: Python<'py>,
    h_re: Vec<Vec<f64>>,
    y_re: Vec<f64>,
    h_im: Option<Vec<Vec<f64>>>,
    y_im: Option<Vec<f64>>,
    rho: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let h = build_matrix(h_re, h_im)?;
    let y = build_vector(y_re, y_im)?;
    let (_, data) = decompose(&h, &y, None).map_err(to_py_err)?;
    let cfg = SolverConfig {
        rho_rel: rho,
        ..SolverConfig::default()
    };
    let sel = newton_solve(&data, &cfg).map_err(to_py_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("gamma_tilde", sel.gamma_tilde)?;
    out.set_item("gamma", sel.gamma)?;
    out.set_item("iterations", sel.iterations)?;
    out.set_item("converged", sel.converged)?;
    out.set_item("fallback_used", sel.fallback_used)?;
    out.set_item("residual", sel.residual)?;
    Ok(out)
}

/// Regularized least squares: returns (x_re, x_im).
#[pyfunction]
#[pyo3(signature = (h_re, y_re, gamma, h_im=None, y_im=None))]
fn rls_solve(
    h_re: Vec<Vec<f64>>,
    y_re: Vec<f64>,
    gamma: f64,
    h_im: Option<Vec<Vec<f64>>>,
    y_im: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let h = build_matrix(h_re, h_im)?;
    let y = build_vector(y_re, y_im)?;
    let (dec, _) = decompose(&h, &y, None).map_err(to_py_err)?;
    let est = core_rls(&dec, &y, gamma).map_err(to_py_err)?;
    Ok((
        est.x_hat.iter().map(|c| c.re).collect(),
        est.x_hat.iter().map(|c| c.im).collect(),
    ))
}

/// End-to-end selection plus estimation: returns (x_re, x_im, diagnostics).
#[pyfunction]
#[pyo3(signature = (h_re, y_re, h_im=None, y_im=None, rho=1e-9))]
fn copra_estimate<'py>(
    py: Python<'py>,
    h_re: Vec<Vec<f64>>,
    y_re: Vec<f64>,
    h_im: Option<Vec<Vec<f64>>>,
    y_im: Option<Vec<f64>>,
    rho: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Bound<'py, PyDict>)> {
    let h = build_matrix(h_re, h_im)?;
    let y = build_vector(y_re, y_im)?;
    let cfg = SolverConfig {
        rho_rel: rho,
        ..SolverConfig::default()
    };
    let (est, sel) = copra_core::estimators::copra_estimate(&h, &y, &cfg).map_err(to_py_err)?;
    let diag = PyDict::new_bound(py);
    diag.set_item("gamma_tilde", sel.gamma_tilde)?;
    diag.set_item("gamma", sel.gamma)?;
    diag.set_item("iterations", sel.iterations)?;
    diag.set_item("converged", sel.converged)?;
    diag.set_item("fallback_used", sel.fallback_used)?;
    Ok((
        est.x_hat.iter().map(|c| c.re).collect(),
        est.x_hat.iter().map(|c| c.im).collect(),
        diag,
    ))
}

/// Gray-coded 8-QAM modulation: bits -> (re, im) symbol arrays.
#[pyfunction]
fn qam8_mod(bits: Vec<u8>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let symbols = qam::qam8_mod(&bits).map_err(to_py_err)?;
    Ok((
        symbols.iter().map(|c| c.re).collect(),
        symbols.iter().map(|c| c.im).collect(),
    ))
}

/// Nearest-neighbor 8-QAM demodulation: (re, im) -> bits.
#[pyfunction]
fn qam8_demod(re: Vec<f64>, im: Vec<f64>) -> PyResult<Vec<u8>> {
    if re.len() != im.len() {
        return Err(PyValueError::new_err("re/im length mismatch"));
    }
    let symbols: Vec<Complex64> = re
        .iter()
        .zip(&im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    Ok(qam::qam8_demod(&symbols))
}

/// Run a benchmark scenario and return the aggregated CSV text.
#[pyfunction]
#[pyo3(signature = (scenario, trials, seed, methods=None, sweep_db=None))]
fn run_bench(
    scenario: &str,
    trials: usize,
    seed: u64,
    methods: Option<Vec<String>>,
    sweep_db: Option<Vec<f64>>,
) -> PyResult<String> {
    let id = ScenarioId::parse(scenario).map_err(to_py_err)?;
    let mut cfg = ScenarioConfig::standard(id, trials, seed);
    if let Some(sweep) = sweep_db {
        cfg.sweep_db = sweep;
    }
    let methods: Vec<Method> = methods
        .unwrap_or_else(|| vec!["copra".into(), "ls".into(), "lmmse".into()])
        .iter()
        .map(|s| Method::parse(s))
        .collect::<Result<_, _>>()
        .map_err(to_py_err)?;
    let report = run_benchmark(&cfg, &methods).map_err(to_py_err)?;
    Ok(report_to_csv(&report.rows))
}

#[pymodule]
fn copra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(select_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(rls_solve, m)?)?;
    m.add_function(wrap_pyfunction!(copra_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(qam8_mod, m)?)?;
    m.add_function(wrap_pyfunction!(qam8_demod, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
