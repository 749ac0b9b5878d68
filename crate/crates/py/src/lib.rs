//! Python bindings: model parameters, gait inputs, apex states, the three
//! fixed-point pipelines, return maps, multi-hop runs and sweeps.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use aoa_hopper::controller::{solve_aoa_approx, solve_aoa_implicit};
use aoa_hopper::fixed_point::{
    closed_form_fixed_point, numeric_fixed_point, AnalyticMap, NewtonSettings, SimulatorMap,
};
use aoa_hopper::harness::{self, Config, GainStep, SweepConfig};
use aoa_hopper::sim::SimSettings;
use aoa_hopper::{analytic, sim, ApexState, ControlInputs, FixedPointResult, SlipParams};

create_exception!(
    aoa_hopper_py,
    HopperError,
    PyException,
    "Model, solver or gait failure."
);

fn err(e: aoa_hopper::Error) -> PyErr {
    HopperError::new_err(format!("{}: {e}", e.tag()))
}

#[pyclass(name = "SlipParams", module = "aoa_hopper_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PySlipParams(SlipParams);

#[pymethods]
impl PySlipParams {
    /// Defaults are the Penn Jerboa values.
    #[new]
    #[pyo3(signature = (m=3.3, k=4000.0, b=20.0, r0=0.2, g=9.81))]
    fn new(m: f64, k: f64, b: f64, r0: f64, g: f64) -> PyResult<Self> {
        SlipParams::new(m, k, b, r0, g).map(Self).map_err(err)
    }
    #[getter]
    fn m(&self) -> f64 {
        self.0.m
    }
    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }
    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }
    #[getter]
    fn r0(&self) -> f64 {
        self.0.r0
    }
    #[getter]
    fn g(&self) -> f64 {
        self.0.g
    }
    /// Gravity-loaded leg length.
    fn r_g(&self) -> f64 {
        self.0.r_g()
    }
    fn __repr__(&self) -> String {
        let p = self.0;
        format!("SlipParams(m={}, k={}, b={}, r0={}, g={})", p.m, p.k, p.b, p.r0, p.g)
    }
}

#[pyclass(name = "ControlInputs", module = "aoa_hopper_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyControlInputs(ControlInputs);

#[pymethods]
impl PyControlInputs {
    #[new]
    #[pyo3(signature = (p_bar, k_theta, kp=ControlInputs::DEFAULT_KP, ki=ControlInputs::DEFAULT_KI, kd=ControlInputs::DEFAULT_KD, tau_max=None))]
    fn new(p_bar: f64, k_theta: f64, kp: f64, ki: f64, kd: f64, tau_max: Option<f64>) -> PyResult<Self> {
        let c = ControlInputs::new(p_bar, k_theta)
            .with_gains(kp, ki, kd)
            .with_torque_limit(tau_max);
        c.validate().map_err(err)?;
        Ok(Self(c))
    }
    #[getter]
    fn p_bar(&self) -> f64 {
        self.0.p_bar
    }
    #[getter]
    fn k_theta(&self) -> f64 {
        self.0.k_theta
    }
    #[getter]
    fn gains(&self) -> (f64, f64, f64) {
        (self.0.kp, self.0.ki, self.0.kd)
    }
    #[getter]
    fn tau_max(&self) -> Option<f64> {
        self.0.tau_max
    }
    fn __repr__(&self) -> String {
        format!("ControlInputs(p_bar={}, k_theta={})", self.0.p_bar, self.0.k_theta)
    }
}

#[pyclass(name = "ApexState", module = "aoa_hopper_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyApexState(ApexState);

#[pymethods]
impl PyApexState {
    #[new]
    fn new(x_dot: f64, y: f64) -> PyResult<Self> {
        let a = ApexState::new(x_dot, y);
        a.validate().map_err(err)?;
        Ok(Self(a))
    }
    #[getter]
    fn x_dot(&self) -> f64 {
        self.0.x_dot
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }
    fn __repr__(&self) -> String {
        format!("ApexState(x_dot={}, y={})", self.0.x_dot, self.0.y)
    }
}

#[pyclass(name = "FixedPoint", module = "aoa_hopper_py", frozen)]
struct PyFixedPoint(FixedPointResult);

#[pymethods]
impl PyFixedPoint {
    #[getter]
    fn apex(&self) -> PyApexState {
        PyApexState(self.0.apex)
    }
    #[getter]
    fn spectral_radius(&self) -> f64 {
        self.0.spectral_radius
    }
    #[getter]
    fn stable(&self) -> bool {
        self.0.stable
    }
    #[getter]
    fn jacobian(&self) -> [[f64; 2]; 2] {
        self.0.jacobian
    }
    #[getter]
    fn provenance(&self) -> &'static str {
        self.0.provenance.as_str()
    }
    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }
    /// `(r_dot_td, theta_td, theta_dot_td)` for closed-form points, else None.
    #[getter]
    fn touchdown(&self) -> Option<(f64, f64, f64)> {
        self.0.touchdown.map(|t| (t.r_dot_td, t.theta_td, t.theta_dot_td))
    }
    fn __repr__(&self) -> String {
        format!(
            "FixedPoint(provenance={}, x_dot={}, y={}, spectral_radius={})",
            self.0.provenance.as_str(),
            self.0.apex.x_dot,
            self.0.apex.y,
            self.0.spectral_radius
        )
    }
}

fn params_or_default(p: Option<&PySlipParams>) -> SlipParams {
    p.map(|p| p.0).unwrap_or_default()
}

/// Fixed point of a gait by the named pipeline:
/// `closed-form`, `analytic-numeric` or `simulator-numeric`.
#[pyfunction]
#[pyo3(signature = (p_bar, k_theta, pipeline="closed-form", params=None, seed=None))]
fn fixed_point(
    p_bar: f64,
    k_theta: f64,
    pipeline: &str,
    params: Option<&PySlipParams>,
    seed: Option<&PyApexState>,
) -> PyResult<PyFixedPoint> {
    let params = params_or_default(params);
    let closed = closed_form_fixed_point(p_bar, k_theta, &params);
    let inputs = ControlInputs::new(p_bar, k_theta);
    let seed = seed
        .map(|s| s.0)
        .or_else(|| closed.as_ref().ok().map(|r| r.apex))
        .unwrap_or(ApexState::new(1.0, 0.22));
    let result = match pipeline {
        "closed-form" => closed,
        "analytic-numeric" => numeric_fixed_point(&AnalyticMap { inputs, params }, &seed, &NewtonSettings::analytic()),
        "simulator-numeric" => {
            let map = SimulatorMap {
                inputs,
                params,
                settings: SimSettings::default(),
            };
            numeric_fixed_point(&map, &seed, &NewtonSettings::simulator())
        }
        other => {
            return Err(pyo3::exceptions::PyValueError::new_err(format!(
                "unknown pipeline {other:?}"
            )))
        }
    };
    result.map(PyFixedPoint).map_err(err)
}

/// One apex-to-apex hop of the hybrid simulator.
#[pyfunction]
#[pyo3(signature = (apex, inputs, params=None))]
fn return_map_numeric(
    apex: &PyApexState,
    inputs: &PyControlInputs,
    params: Option<&PySlipParams>,
) -> PyResult<PyApexState> {
    sim::return_map_numeric(&apex.0, &inputs.0, &params_or_default(params))
        .map(PyApexState)
        .map_err(err)
}

/// One apex-to-apex hop of the closed-form approximate map.
#[pyfunction]
#[pyo3(signature = (apex, inputs, params=None))]
fn return_map_analytic(
    apex: &PyApexState,
    inputs: &PyControlInputs,
    params: Option<&PySlipParams>,
) -> PyResult<PyApexState> {
    analytic::return_map_analytic(&apex.0, &inputs.0, &params_or_default(params))
        .map(PyApexState)
        .map_err(err)
}

/// Angle of attack for a flight state; `method` is `implicit` or `approx`.
#[pyfunction]
#[pyo3(signature = (x_dot, e_v, k_theta, method="implicit", params=None))]
fn angle_of_attack(x_dot: f64, e_v: f64, k_theta: f64, method: &str, params: Option<&PySlipParams>) -> PyResult<f64> {
    let p = params_or_default(params);
    let sol = match method {
        "implicit" => solve_aoa_implicit(x_dot, e_v, k_theta, &p),
        "approx" => solve_aoa_approx(x_dot, e_v, k_theta, &p),
        other => {
            return Err(pyo3::exceptions::PyValueError::new_err(format!(
                "unknown method {other:?}"
            )))
        }
    };
    sol.map(|s| s.theta_aoa).map_err(err)
}

fn to_python<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HopperError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Chains simulator hops; returns `{"hops": [...], "failure": ...}`.
#[pyfunction]
#[pyo3(signature = (seed, inputs, n_hops, params=None, k_theta_step=None))]
fn run_single<'py>(
    py: Python<'py>,
    seed: &PyApexState,
    inputs: &PyControlInputs,
    n_hops: usize,
    params: Option<&PySlipParams>,
    k_theta_step: Option<(usize, f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let step = k_theta_step.map(|(hop, k_theta)| GainStep { hop, k_theta });
    let report = harness::run_single(
        &seed.0,
        &inputs.0,
        &params_or_default(params),
        &SimSettings::default(),
        n_hops,
        step,
    );
    to_python(py, &report)
}

/// Runs a sweep from an optional config file plus `key=value` overrides.
/// Writes the CSV/JSON outputs when `write` is true and returns the report.
#[pyfunction]
#[pyo3(signature = (config=None, overrides=Vec::new(), write=false))]
fn run_sweep<'py>(
    py: Python<'py>,
    config: Option<PathBuf>,
    overrides: Vec<String>,
    write: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match config {
        Some(path) => Config::load(&path, &overrides),
        None => Config::from_str_with("", &overrides),
    }
    .map_err(err)?;
    let sweep = SweepConfig::from_config(&cfg).map_err(err)?;
    let report = py.detach(|| harness::run_sweep(&sweep)).map_err(err)?;
    if write {
        harness::write_sweep_outputs(&report, &cfg.output_dir).map_err(|e| HopperError::new_err(e.to_string()))?;
    }
    to_python(py, &report)
}

/// Invariant suite; returns `[(name, passed, detail), ...]`.
#[pyfunction]
#[pyo3(signature = (params=None))]
fn validate(params: Option<&PySlipParams>) -> Vec<(&'static str, bool, String)> {
    harness::run_validation(&params_or_default(params))
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pymodule]
fn aoa_hopper_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HopperError", m.py().get_type::<HopperError>())?;
    m.add_class::<PySlipParams>()?;
    m.add_class::<PyControlInputs>()?;
    m.add_class::<PyApexState>()?;
    m.add_class::<PyFixedPoint>()?;
    m.add_function(wrap_pyfunction!(fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(return_map_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(return_map_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(angle_of_attack, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
