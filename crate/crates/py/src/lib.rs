//! Python bindings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::nonlocal_kpp as core;
use core::cli::{claims, scenario, verify};
use core::convolve::{Field, Grid};
use core::diagnostics::{fit_rate, DiagnosticsConfig, FitModel, Observable};
use core::error::Error;
use core::solver::{Advection, RunOutput, SimConfig, U0Spec};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Hypothesis(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: core::kernel::Kernel,
}

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn zero() -> Self {
        PyKernel { inner: core::kernel::Kernel::Zero }
    }

    #[staticmethod]
    fn keller_segel(chi: f64, d: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: core::kernel::Kernel::keller_segel(chi, d).map_err(py_err)? })
    }

    #[staticmethod]
    fn compact_bump(jump: f64, support_radius: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: core::kernel::Kernel::compact_bump(jump, support_radius).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (amplitude, alpha, sign = 1))]
    fn power_law(amplitude: f64, alpha: f64, sign: i8) -> PyResult<Self> {
        Ok(PyKernel { inner: core::kernel::Kernel::power_law(amplitude, alpha, sign).map_err(py_err)? })
    }

    #[staticmethod]
    fn step(k_inf: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: core::kernel::Kernel::step(k_inf).map_err(py_err)? })
    }

    /// Parse `family:name=value,...`, e.g. `keller-segel:chi=0.5,d=1`.
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        Ok(PyKernel { inner: scenario::parse_kernel_spec(spec).map_err(py_err)? })
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn facts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let f = self.inner.facts();
        let d = PyDict::new(py);
        d.set_item("jump", f.jump)?;
        d.set_item("l1_norm", f.l1_norm)?;
        d.set_item("kbar_l1", f.kbar_l1)?;
        d.set_item("k_inf", f.k_inf)?;
        d.set_item("linf_bound", core::bounds::linf_bound(f.jump))?;
        let (pu, pl) = core::bounds::plateau(&f);
        d.set_item("plateau_upper", pu)?;
        d.set_item("plateau_lower", pl)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Kernel({})", core::cli::kernel_label(&self.inner))
    }
}

/// Speed bound for an integrable kernel, or `None`.
#[pyfunction]
#[pyo3(signature = (kernel, u_inf = None))]
fn cstar<'py>(py: Python<'py>, kernel: &PyKernel, u_inf: Option<f64>) -> PyResult<Option<Bound<'py, PyDict>>> {
    let Some(r) = core::cli::bound_report(&kernel.inner, None, u_inf).map_err(py_err)? else {
        return Ok(None);
    };
    let d = PyDict::new(py);
    d.set_item("cstar", r.cstar)?;
    d.set_item("terms", r.cstar_terms.to_vec())?;
    d.set_item("eps_argmin", r.eps_argmin)?;
    d.set_item("linf_bound", r.linf_bound)?;
    Ok(Some(d))
}

/// `K*u` on the grid `x0 + i dx`.
#[pyfunction]
#[pyo3(signature = (kernel, values, dx, x0 = None))]
fn conv(kernel: &PyKernel, values: Vec<f64>, dx: f64, x0: Option<f64>) -> PyResult<Vec<f64>> {
    let n = values.len();
    let x0 = x0.unwrap_or(-0.5 * (n as f64 - 1.0) * dx);
    let field = Field::new(Grid::new(x0, dx, n).map_err(py_err)?, values, 0.0).map_err(py_err)?;
    Ok(core::convolve::conv(&kernel.inner, &field).map_err(py_err)?.values)
}

#[pyclass(name = "Run", frozen)]
struct PyRun {
    out: RunOutput,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.out.series.records.iter().map(|r| r.t).collect()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.out.series.records.iter().map(|r| r.mass).collect()
    }

    #[getter]
    fn u_max(&self) -> Vec<f64> {
        self.out.series.records.iter().map(|r| r.u_max).collect()
    }

    #[getter]
    fn front_right(&self) -> Vec<Option<f64>> {
        self.out.series.records.iter().map(|r| r.fronts[0].map(|f| f.1)).collect()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.out.field().grid.xs()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.out.field().values.clone()
    }

    fn csv(&self) -> String {
        self.out.series.to_csv()
    }

    /// Late-time fit: `observable` is `front` or `mass`; `model` is `linear`,
    /// `log-corrected`, `power` or `exponential`. Returns `(coefficient, r²)`.
    #[pyo3(signature = (observable, model, window = 0.5))]
    fn fit(&self, observable: &str, model: &str, window: f64) -> PyResult<(f64, f64)> {
        let obs = match observable {
            "front" => Observable::FrontRight { level: self.out.series.config.levels[0] },
            "mass" => Observable::Mass,
            _ => return Err(PyValueError::new_err(format!("unknown observable '{observable}'"))),
        };
        let model = match model {
            "linear" => FitModel::Linear,
            "log-corrected" => FitModel::LogCorrected,
            "power" => FitModel::Power,
            "exponential" => FitModel::Exponential,
            _ => return Err(PyValueError::new_err(format!("unknown model '{model}'"))),
        };
        let f = fit_rate(&self.out.series, obs, model, window).map_err(py_err)?;
        Ok((f.coefficient, f.r_squared))
    }
}

/// Simulate from the indicator of `[-a, a]`.
#[pyfunction]
#[pyo3(signature = (kernel, t_end, dx = 0.1, dt_max = 0.05, a = 1.0, record_every = 0.5, lagrangian = false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    kernel: &PyKernel,
    t_end: f64,
    dx: f64,
    dt_max: f64,
    a: f64,
    record_every: f64,
    lagrangian: bool,
) -> PyResult<PyRun> {
    let cfg = SimConfig {
        dx,
        dt_max,
        t_end,
        record_every,
        advection: if lagrangian { Advection::LagrangianUpwind } else { Advection::Upwind },
        ..SimConfig::default()
    };
    let k = kernel.inner.clone();
    let out = py
        .detach(move || core::solver::run(&k, &U0Spec::Indicator { a, height: 1.0 }, &cfg, &DiagnosticsConfig::default()))
        .map_err(|f| py_err(f.error))?;
    Ok(PyRun { out })
}

/// Run a preset or scenario file with `key=value` overrides, writing artifacts
/// to `out_dir`. Returns the run and the claim report lines.
#[pyfunction]
#[pyo3(signature = (source, overrides = Vec::new(), out_dir = "out".to_string()))]
fn run_scenario(py: Python<'_>, source: &str, overrides: Vec<String>, out_dir: String) -> PyResult<(PyRun, Vec<String>)> {
    let ov = overrides
        .iter()
        .map(|s| scenario::parse_override(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    let scn = scenario::load(source, &ov).map_err(py_err)?;
    let outcome = py
        .detach(move || core::cli::run_scenario(&scn, std::path::Path::new(&out_dir)))
        .map_err(py_err)?;
    let lines = outcome.claims.iter().map(claims::ClaimResult::line).collect();
    Ok((PyRun { out: outcome.output }, lines))
}

/// Run a certification suite; returns `(passed, report)`.
#[pyfunction(name = "verify")]
#[pyo3(signature = (target, seed = 7))]
fn verify_target(target: &str, seed: u64) -> PyResult<(bool, String)> {
    let t: verify::Target = target.parse().map_err(py_err)?;
    let r = verify::run_target(t, seed).map_err(py_err)?;
    Ok((r.pass(), r.text()))
}

#[pymodule]
#[pyo3(name = "nonlocal_kpp")]
fn nonlocal_kpp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(cstar, m)?)?;
    m.add_function(wrap_pyfunction!(conv, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify_target, m)?)?;
    Ok(())
}
