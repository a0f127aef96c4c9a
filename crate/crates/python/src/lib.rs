//! Python bindings: schedules, propagation, Berry phases, adiabaticity and
//! the retention test, plus the full experiment runner behind the CLI.

use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use adiaphase_core::adiabatic::{self, StepsRule, StudyOptions};
use adiaphase_core::cli::{self, ExperimentConfig, ExperimentReport};
use adiaphase_core::consistency;
use adiaphase_core::eigenflow::{self, Gauge, SpectralFlow};
use adiaphase_core::linalg::CMatrix;
use adiaphase_core::phases;
use adiaphase_core::propagator::{self, Integrator, UnitaryTrace};
use adiaphase_core::schedule::{self, HamiltonianSchedule, PrecessingSpinParams, ScheduleDescriptor};
use adiaphase_core::Error;

pyo3::create_exception!(adiaphase, DegeneracyError, PyRuntimeError, "Spectrum degenerate or level tracking lost.");
pyo3::create_exception!(
    adiaphase,
    InconclusiveError,
    PyRuntimeError,
    "Retention test refused: evolution not adiabatic enough."
);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err {
        Error::Degeneracy { .. } | Error::Tracking { .. } | Error::Gauge(_) => DegeneracyError::new_err(msg),
        Error::Inconclusive { .. } => InconclusiveError::new_err(msg),
        Error::IndexOutOfRange { .. } => PyIndexError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn parse_integrator(name: &str) -> PyResult<Integrator> {
    match name {
        "magnus4" => Ok(Integrator::Magnus4),
        "midpoint" => Ok(Integrator::Midpoint),
        other => Err(PyValueError::new_err(format!("unknown integrator `{other}`"))),
    }
}

fn parse_gauge(name: &str) -> PyResult<Gauge> {
    match name {
        "raw" => Ok(Gauge::Raw),
        "parallel" => Ok(Gauge::Parallel),
        "periodic" => Ok(Gauge::Periodic),
        other => Err(PyValueError::new_err(format!("unknown gauge `{other}`"))),
    }
}

fn rows_of(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_of(rows: &[Vec<Complex64>]) -> PyResult<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square and non-empty"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Time-dependent Hermitian matrix `H(t)` on `[0, duration]`.
#[pyclass(module = "adiaphase", frozen)]
struct Schedule {
    inner: HamiltonianSchedule,
}

#[pymethods]
impl Schedule {
    /// `H(t) = (omega0/2)[sinθ cos ωt σx + sinθ sin ωt σy + cosθ σz]` over one period.
    #[staticmethod]
    fn precessing_spin(omega0: f64, omega: f64, theta: f64) -> PyResult<Self> {
        let inner = schedule::make_precessing_spin(PrecessingSpinParams::new(omega0, omega, theta)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Piecewise-linear interpolation of `(time, matrix)` samples.
    #[staticmethod]
    #[pyo3(signature = (times, matrices, cyclic = false))]
    fn sampled(times: Vec<f64>, matrices: Vec<Vec<Vec<Complex64>>>, cyclic: bool) -> PyResult<Self> {
        if times.len() != matrices.len() {
            return Err(PyValueError::new_err("times and matrices differ in length"));
        }
        let samples = times
            .into_iter()
            .zip(&matrices)
            .map(|(t, m)| Ok((t, matrix_of(m)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = schedule::make_sampled_schedule(samples, cyclic).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Build from a JSON schedule descriptor.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let descriptor = ScheduleDescriptor::from_json(text).map_err(to_py)?;
        Ok(Self {
            inner: descriptor.build().map_err(to_py)?,
        })
    }

    fn at(&self, t: f64) -> Vec<Vec<Complex64>> {
        rows_of(&self.inner.at(t))
    }

    /// Same schedule with `c·I` added.
    fn shifted(&self, c: f64) -> Self {
        Self {
            inner: self.inner.shifted(c),
        }
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn cyclic(&self) -> bool {
        self.inner.is_cyclic()
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family_tag().to_owned()
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(family={:?}, dimension={}, duration={}, cyclic={})",
            self.inner.family_tag(),
            self.inner.dimension(),
            self.inner.duration(),
            if self.inner.is_cyclic() { "True" } else { "False" }
        )
    }
}

/// Cumulative propagators `U(t_k, 0)` on a uniform grid.
#[pyclass(module = "adiaphase", frozen)]
struct Trace {
    inner: UnitaryTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.clone()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.step_count
    }

    #[getter]
    fn unitarity_defect(&self) -> f64 {
        self.inner.unitarity_defect
    }

    fn unitary(&self, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        self.inner
            .cumulative
            .get(k)
            .map(rows_of)
            .ok_or_else(|| PyIndexError::new_err(format!("node {k} out of range")))
    }

    fn terminal(&self) -> Vec<Vec<Complex64>> {
        rows_of(self.inner.terminal())
    }

    /// `U(t_k, 0)·state`.
    fn apply(&self, k: usize, state: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let v = adiaphase_core::linalg::CVector::from_vec(state);
        let out = propagator::apply_state(&self.inner, k, &v).map_err(to_py)?;
        Ok(out.iter().copied().collect())
    }
}

#[pyfunction]
#[pyo3(signature = (schedule, steps = 8000, integrator = "magnus4"))]
fn evolve(py: Python<'_>, schedule: &Schedule, steps: usize, integrator: &str) -> PyResult<Trace> {
    let integrator = parse_integrator(integrator)?;
    let inner = py
        .detach(|| propagator::evolve_with(&schedule.inner, steps, integrator))
        .map_err(to_py)?;
    Ok(Trace { inner })
}

fn gauged_flow(schedule: &HamiltonianSchedule, steps: usize, gauge: Gauge) -> Result<SpectralFlow, Error> {
    let raw = eigenflow::track_flow(schedule, steps, None)?;
    adiabatic::apply_gauge(&raw, gauge)
}

fn level_or_top(schedule: &HamiltonianSchedule, level: Option<usize>) -> usize {
    level.unwrap_or(schedule.dimension() - 1)
}

/// Gauge-invariant cyclic Berry phase `(value, on_branch)`.
#[pyfunction]
#[pyo3(signature = (schedule, steps = 8000, level = None))]
fn berry_phase(py: Python<'_>, schedule: &Schedule, steps: usize, level: Option<usize>) -> PyResult<(f64, bool)> {
    let n = level_or_top(&schedule.inner, level);
    let gamma = py
        .detach(|| {
            let flow = eigenflow::track_flow(&schedule.inner, steps, None)?;
            phases::berry_phase_cyclic(&flow, n)
        })
        .map_err(to_py)?;
    Ok((gamma.value, gamma.on_branch))
}

/// Dynamical and geometric phase sequences of one level.
#[pyfunction]
#[pyo3(signature = (schedule, steps = 8000, level = None, gauge = "parallel"))]
fn phase_ledger<'py>(
    py: Python<'py>,
    schedule: &Schedule,
    steps: usize,
    level: Option<usize>,
    gauge: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let gauge = parse_gauge(gauge)?;
    let n = level_or_top(&schedule.inner, level);
    let ledger = py
        .detach(|| phases::phase_ledger(&gauged_flow(&schedule.inner, steps, gauge)?, n))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("grid", ledger.grid)?;
    out.set_item("dynamical", ledger.dynamical)?;
    out.set_item("geometric", ledger.geometric)?;
    Ok(out)
}

/// `max_t |⟨n|∂H/∂t|m⟩| / (E_n − E_m)²` and the time of the maximum.
#[pyfunction]
#[pyo3(signature = (schedule, steps = 8000, level = None))]
fn adiabatic_condition(py: Python<'_>, schedule: &Schedule, steps: usize, level: Option<usize>) -> PyResult<(f64, f64)> {
    let n = level_or_top(&schedule.inner, level);
    let report = py
        .detach(|| {
            let flow = eigenflow::track_flow(&schedule.inner, steps, None)?;
            adiabatic::adiabatic_condition(&flow, &schedule.inner, n)
        })
        .map_err(to_py)?;
    Ok((report.max_ratio, report.argmax_time))
}

/// Single- and double-counted cyclic overlap residuals against exact evolution.
#[pyfunction]
#[pyo3(signature = (schedule, steps = 8000, level = None))]
fn berry_retention<'py>(
    py: Python<'py>,
    schedule: &Schedule,
    steps: usize,
    level: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let n = level_or_top(&schedule.inner, level);
    let report = py
        .detach(|| {
            let s = &schedule.inner;
            let trace = propagator::evolve(s, steps)?;
            let flow = gauged_flow(s, steps, Gauge::Parallel)?;
            let ledger = phases::phase_ledger(&flow, n)?;
            let gamma = phases::berry_phase_cyclic(&flow, n)?;
            consistency::berry_retention_test(&trace, &flow, &ledger, n, gamma)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("r19", report.berry_residual_correct)?;
    out.set_item("r22", report.berry_residual_doublecount)?;
    out.set_item("gamma_c", report.gamma_c)?;
    out.set_item("phi_exact", report.phi_exact)?;
    out.set_item("dynamical_total", report.dynamical_total)?;
    out.set_item("overlap_defect", report.overlap_defect)?;
    out.set_item("tau", report.tau)?;
    out.set_item("on_branch", report.on_branch)?;
    Ok(out)
}

/// Remainder of the adiabatic approximant over a list of time scales.
#[pyfunction]
#[pyo3(signature = (schedule, tau_list, steps = 8000, level = None))]
fn tau_scaling_study<'py>(
    py: Python<'py>,
    schedule: &Schedule,
    tau_list: Vec<f64>,
    steps: usize,
    level: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let options = StudyOptions {
        steps_rule: StepsRule::Fixed(steps),
        level,
        ..StudyOptions::default()
    };
    let rows = py
        .detach(|| adiabatic::tau_scaling_study(&schedule.inner, &tau_list, &options))
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("tau", r.tau)?;
            d.set_item("omega", r.omega)?;
            d.set_item("condition_eq5", r.condition_eq5)?;
            d.set_item("infidelity", r.infidelity)?;
            d.set_item("overlap_defect", r.overlap_defect)?;
            d.set_item("phase_gap", r.phase_gap)?;
            d.set_item("infidelity_times_tau", r.infidelity_times_tau)?;
            Ok(d)
        })
        .collect()
}

/// Run a CLI experiment from a JSON config; returns the JSON report.
#[pyfunction]
fn run_experiment(py: Python<'_>, experiment: &str, config_json: &str) -> PyResult<String> {
    let experiment = experiment.parse().map_err(to_py)?;
    let config = ExperimentConfig::from_json(config_json)
        .and_then(|c| c.with_experiment(experiment))
        .map_err(to_py)?;
    let report = py.detach(|| cli::run(&config)).map_err(to_py)?;
    Ok(report.to_json())
}

/// CSV body of a JSON report.
#[pyfunction]
fn report_to_csv(report_json: &str) -> PyResult<String> {
    let report = ExperimentReport::from_json(report_json).map_err(to_py)?;
    Ok(cli::emit_csv(&report))
}

#[pymodule]
pub fn adiaphase(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cli::TOOL_VERSION)?;
    m.add("DegeneracyError", m.py().get_type::<DegeneracyError>())?;
    m.add("InconclusiveError", m.py().get_type::<InconclusiveError>())?;
    m.add_class::<Schedule>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(berry_phase, m)?)?;
    m.add_function(wrap_pyfunction!(phase_ledger, m)?)?;
    m.add_function(wrap_pyfunction!(adiabatic_condition, m)?)?;
    m.add_function(wrap_pyfunction!(berry_retention, m)?)?;
    m.add_function(wrap_pyfunction!(tau_scaling_study, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(report_to_csv, m)?)?;
    Ok(())
}
