//! Python bindings for `phaseref`.
//!
//! Amplitudes are magnitudes with the optimal relative input phase; `eta` is
//! the per-arm power transmission. Configuration problems raise `ValueError`,
//! numerical failures `RuntimeError`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use phaseref::closed_form::{self, ClosedFormInputs};
use phaseref::estimation::CountingModel;
use phaseref::fock::CutoffPolicy;
use phaseref::interferometer::{basis_fisher, prepare, scalar_metric, Setup};
use phaseref::optics::GeneratorConvention;
use phaseref::scenario::{self, Model, ScenarioConfig};
use phaseref::states::InputParams;
use phaseref::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(m) => PyValueError::new_err(m),
        Error::InvalidParameter { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn convention(name: &str) -> PyResult<GeneratorConvention> {
    match name {
        "upper_only" | "i" => Ok(GeneratorConvention::UpperOnly),
        "symmetric" | "ii" => Ok(GeneratorConvention::Symmetric),
        "two_param" | "iii" => Ok(GeneratorConvention::TwoParam),
        _ => Err(PyValueError::new_err(format!("unknown convention {name:?}"))),
    }
}

fn inputs(alpha: f64, r: f64, tau: f64) -> PyResult<ClosedFormInputs> {
    ClosedFormInputs::new(alpha, r, tau).map_err(py_err)
}

fn setup(alpha: f64, r: f64, eta: f64, beta: Option<f64>, guard: usize) -> Setup {
    let mut params = InputParams::new(alpha, r);
    if let Some(b) = beta {
        params = params.with_beta(Complex64::new(b, 0.0));
    }
    let mut s = Setup::new(params).with_eta(eta);
    s.policy = CutoffPolicy::with_guard(guard);
    s
}

/// Closed-form QFI with the phase on the upper arm.
#[pyfunction]
fn fq_i(alpha: f64, r: f64, tau: f64) -> PyResult<f64> {
    Ok(closed_form::fq_i(&inputs(alpha, r, tau)?))
}

/// Closed-form QFI with the phase split symmetrically.
#[pyfunction]
fn fq_ii(alpha: f64, r: f64, tau: f64) -> PyResult<f64> {
    Ok(closed_form::fq_ii(&inputs(alpha, r, tau)?))
}

/// `|alpha|^2 e^{2r} + sinh^2 r`, the averaged-state QFI at a balanced splitter.
#[pyfunction]
fn fq_rho_balanced(alpha: f64, r: f64) -> PyResult<f64> {
    Ok(closed_form::fq_rho_balanced(&inputs(alpha, r, 0.5)?))
}

/// Two-phase QFI matrix in the (phi+, phi-) basis as nested lists.
#[pyfunction]
fn qfim_analytic(alpha: f64, r: f64, tau: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = closed_form::qfim_analytic(&inputs(alpha, r, tau)?);
    Ok((0..2).map(|i| (0..2).map(|j| m.get(i, j)).collect()).collect())
}

/// Numerical information for the phase difference.
///
/// `averaged` selects the common-phase-averaged state; `convention="two_param"`
/// returns `1 / (F^-1)_{--}`. With `beta` the reference beam is included.
#[pyfunction]
#[pyo3(signature = (alpha, r, tau, eta=1.0, convention="upper_only", averaged=true, beta=None, guard=5))]
#[allow(clippy::too_many_arguments)]
fn qfi(alpha: f64, r: f64, tau: f64, eta: f64, convention: &str, averaged: bool, beta: Option<f64>, guard: usize) -> PyResult<f64> {
    let conv = self::convention(convention)?;
    let input = prepare(&setup(alpha, r, eta, beta, guard)).map_err(py_err)?;
    let basis = basis_fisher(&input, averaged).map_err(py_err)?;
    scalar_metric(&basis.matrix, tau, conv).map_err(py_err)
}

/// Classical Fisher information of balanced photon counting at `phi`.
/// With `phi=None` returns `(phi*, F)` at the best operating point.
#[pyfunction]
#[pyo3(signature = (alpha, r, tau, phi=None, eta=1.0))]
fn counting_fisher(py: Python<'_>, alpha: f64, r: f64, tau: f64, phi: Option<f64>, eta: f64) -> PyResult<Py<PyAny>> {
    let model = CountingModel::new(&setup(alpha, r, eta, None, 5), tau, GeneratorConvention::UpperOnly).map_err(py_err)?;
    match phi {
        Some(p) => Ok(model.fisher(p).map_err(py_err)?.into_pyobject(py)?.into_any().unbind()),
        None => Ok(model.best_operating_point().map_err(py_err)?.into_pyobject(py)?.into_any().unbind()),
    }
}

fn config_from(text: &str) -> PyResult<ScenarioConfig> {
    ScenarioConfig::from_toml(text).map_err(py_err)
}

/// Optimal `(tau, squeezing fraction, metric)` for one model at `nbar`.
#[pyfunction]
#[pyo3(signature = (model, nbar, eta=1.0, beta=None))]
fn optimize<'py>(py: Python<'py>, model: &str, nbar: f64, eta: f64, beta: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let m = Model::from_name(model).ok_or_else(|| PyValueError::new_err(format!("unknown model {model:?}")))?;
    let mut cfg = ScenarioConfig::new(m, nbar);
    cfg.eta = eta;
    cfg.beta = beta;
    cfg.validate().map_err(py_err)?;
    let o = py.detach(|| scenario::optimize_inputs(&cfg, m, nbar)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("model", m.name())?;
    d.set_item("nbar", nbar)?;
    d.set_item("tau", o.tau)?;
    d.set_item("fraction", o.fraction)?;
    d.set_item("alpha_sq", o.alpha_sq())?;
    d.set_item("sinh2_r", o.sinh2_r())?;
    d.set_item("metric", o.metric)?;
    d.set_item("delta_phi", 1.0 / o.metric.sqrt())?;
    d.set_item("cutoff", o.cutoffs.pair)?;
    Ok(d)
}

/// Runs a sweep from TOML config text; one dict per row in CSV column order.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config_from(config)?;
    let result = py.detach(|| scenario::sweep(&cfg));
    result
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("model", r.model.name())?;
            d.set_item("nbar", r.nbar)?;
            d.set_item("tau", r.tau)?;
            d.set_item("alpha_sq", r.alpha_sq)?;
            d.set_item("sinh2_r", r.sinh2_r)?;
            d.set_item("metric", r.metric)?;
            d.set_item("delta_phi", r.delta_phi)?;
            d.set_item("eta", r.eta)?;
            d.set_item("beta", r.beta)?;
            d.set_item("cutoff", r.cutoff)?;
            d.set_item("truncation_deficit", r.truncation_deficit)?;
            d.set_item("wall_time_s", r.wall_time_s)?;
            d.set_item("status", &r.status)?;
            Ok(d)
        })
        .collect()
}

type Check = (String, f64, f64, f64, bool);

/// Oracle cross-check suite: list of `(name, value, expected, relative_error, passed)`.
#[pyfunction]
#[pyo3(signature = (guard=5))]
fn validate(py: Python<'_>, guard: usize) -> PyResult<Vec<Check>> {
    let checks = py.detach(|| scenario::validate(CutoffPolicy::with_guard(guard))).map_err(py_err)?;
    Ok(checks
        .into_iter()
        .map(|c| (c.name, c.value, c.expected, c.relative_error, c.passed))
        .collect())
}

#[pymodule]
#[pyo3(name = "phaseref")]
fn phaseref_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(fq_i, m)?)?;
    m.add_function(wrap_pyfunction!(fq_ii, m)?)?;
    m.add_function(wrap_pyfunction!(fq_rho_balanced, m)?)?;
    m.add_function(wrap_pyfunction!(qfim_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(qfi, m)?)?;
    m.add_function(wrap_pyfunction!(counting_fisher, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
