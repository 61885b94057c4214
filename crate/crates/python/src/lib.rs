//! Python bindings. Frequencies are angular (rad/µs) and times are in µs,
//! as in the core crate; `mhz` converts from MHz.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rydsim::analysis::{self, unwrap_phase_with_gaps};
use rydsim::dynamics::{DecayRates, EvolutionTrace, PropagationOptions, SymmetricSector};
use rydsim::protocols::{self, phase_aligned_deviation};
use rydsim::statespace::{build_basis, expected_dimension, LevelScheme};
use rydsim::{SimError, StirapParams as CoreStirap};

create_exception!(rydsim_py, IntegrationError, PyRuntimeError);

fn to_py(err: SimError) -> PyErr {
    match err {
        SimError::IntegrationFailure { .. } | SimError::UndefinedPhase { .. } => IntegrationError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for rydsim::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Angular frequency for `nu` MHz.
#[pyfunction]
fn mhz(nu: f64) -> f64 {
    rydsim::mhz(nu)
}

#[pyclass(name = "StirapParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyStirap {
    #[pyo3(get, set)]
    omega1: f64,
    #[pyo3(get, set)]
    omega2: f64,
    #[pyo3(get, set)]
    t1: f64,
    #[pyo3(get, set)]
    t2: f64,
    #[pyo3(get, set)]
    tau: f64,
    #[pyo3(get, set)]
    delta: f64,
}

impl From<CoreStirap> for PyStirap {
    fn from(p: CoreStirap) -> Self {
        Self { omega1: p.omega1, omega2: p.omega2, t1: p.t1, t2: p.t2, tau: p.tau, delta: p.delta }
    }
}

impl PyStirap {
    fn core(&self) -> CoreStirap {
        CoreStirap { omega1: self.omega1, omega2: self.omega2, t1: self.t1, t2: self.t2, tau: self.tau, delta: self.delta }
    }
}

#[pymethods]
impl PyStirap {
    #[new]
    fn new(omega1: f64, omega2: f64, t1: f64, t2: f64, tau: f64, delta: f64) -> Self {
        Self { omega1, omega2, t1, t2, tau, delta }
    }

    /// Moderately detuned pair: 30 and 40 MHz peaks, δ/2π = 200 MHz.
    #[staticmethod]
    fn default_pair() -> Self {
        CoreStirap::fig2().into()
    }

    /// Fast far-detuned pair: 250 MHz peaks, δ/2π = 2 GHz.
    #[staticmethod]
    fn far_detuned() -> Self {
        CoreStirap::far_detuned().into()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

#[pyclass(name = "ArpParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyArp {
    #[pyo3(get, set)]
    omega0: f64,
    #[pyo3(get, set)]
    tau: f64,
    #[pyo3(get, set)]
    chirp_rate: f64,
    #[pyo3(get, set)]
    separation: f64,
}

impl PyArp {
    fn core(&self) -> rydsim::ArpParams {
        rydsim::ArpParams { omega0: self.omega0, tau: self.tau, chirp_rate: self.chirp_rate, separation: self.separation }
    }
}

#[pymethods]
impl PyArp {
    #[new]
    fn new(omega0: f64, tau: f64, chirp_rate: f64, separation: f64) -> Self {
        Self { omega0, tau, chirp_rate, separation }
    }

    #[staticmethod]
    fn default_pair() -> Self {
        let p = rydsim::ArpParams::fig2();
        Self { omega0: p.omega0, tau: p.tau, chirp_rate: p.chirp_rate, separation: p.separation }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

#[pyclass(name = "GateParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyGate {
    #[pyo3(get, set)]
    stirap: PyStirap,
    #[pyo3(get, set)]
    omega_r: f64,
    #[pyo3(get, set)]
    omega3: f64,
    #[pyo3(get, set)]
    gap: f64,
    #[pyo3(get, set)]
    switch_detuning: bool,
}

impl PyGate {
    fn core(&self) -> protocols::GateParams {
        protocols::GateParams {
            stirap: self.stirap.core(),
            omega_r: self.omega_r,
            omega3: self.omega3,
            gap: self.gap,
            switch_detuning: self.switch_detuning,
        }
    }
}

#[pymethods]
impl PyGate {
    #[new]
    #[pyo3(signature = (stirap=None, omega_r=None, omega3=None, gap=None, switch_detuning=true))]
    fn new(stirap: Option<PyStirap>, omega_r: Option<f64>, omega3: Option<f64>, gap: Option<f64>, switch_detuning: bool) -> Self {
        let d = protocols::GateParams::default();
        Self {
            stirap: stirap.unwrap_or_else(|| d.stirap.into()),
            omega_r: omega_r.unwrap_or(d.omega_r),
            omega3: omega3.unwrap_or(d.omega3),
            gap: gap.unwrap_or(d.gap),
            switch_detuning,
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

#[pyclass(name = "Options", from_py_object)]
#[derive(Clone)]
struct PyOptions {
    #[pyo3(get, set)]
    step_divisor: f64,
    #[pyo3(get, set)]
    min_steps: usize,
    #[pyo3(get, set)]
    snapshots: usize,
    #[pyo3(get, set)]
    use_symmetry: bool,
    #[pyo3(get, set)]
    norm_tolerance: f64,
}

impl PyOptions {
    fn core(&self) -> PropagationOptions {
        PropagationOptions {
            step_divisor: self.step_divisor,
            min_steps: self.min_steps,
            snapshots: self.snapshots,
            use_symmetry: self.use_symmetry,
            norm_tolerance: self.norm_tolerance,
            ..PropagationOptions::default()
        }
    }
}

#[pymethods]
impl PyOptions {
    #[new]
    #[pyo3(signature = (step_divisor=None, min_steps=None, snapshots=None, use_symmetry=None, norm_tolerance=None))]
    fn new(
        step_divisor: Option<f64>,
        min_steps: Option<usize>,
        snapshots: Option<usize>,
        use_symmetry: Option<bool>,
        norm_tolerance: Option<f64>,
    ) -> Self {
        let d = PropagationOptions::default();
        Self {
            step_divisor: step_divisor.unwrap_or(d.step_divisor),
            min_steps: min_steps.unwrap_or(d.min_steps),
            snapshots: snapshots.unwrap_or(d.snapshots),
            use_symmetry: use_symmetry.unwrap_or(d.use_symmetry),
            norm_tolerance: norm_tolerance.unwrap_or(d.norm_tolerance),
        }
    }
}

fn options(opts: Option<PyOptions>) -> PropagationOptions {
    opts.map(|o| o.core()).unwrap_or_default()
}

/// Sampled evolution: times, ground population, unwrapped ground phase (NaN
/// where undefined) and tracked populations.
#[pyclass(name = "Trace")]
struct PyTrace {
    #[pyo3(get)]
    times: Vec<f64>,
    #[pyo3(get)]
    ground_population: Vec<f64>,
    #[pyo3(get)]
    ground_phase: Vec<f64>,
    #[pyo3(get)]
    tracked: BTreeMap<String, Vec<f64>>,
    #[pyo3(get)]
    max_norm_drift: f64,
    #[pyo3(get)]
    steps: usize,
    #[pyo3(get)]
    step_size: f64,
}

impl From<&EvolutionTrace> for PyTrace {
    fn from(t: &EvolutionTrace) -> Self {
        Self {
            times: t.times.clone(),
            ground_population: t.ground_population.clone(),
            ground_phase: unwrap_phase_with_gaps(t).unwrap_or_else(|| vec![f64::NAN; t.times.len()]),
            tracked: t.tracked.iter().cloned().collect(),
            max_norm_drift: t.max_norm_drift,
            steps: t.steps,
            step_size: t.step_size,
        }
    }
}

#[pyclass(name = "SequenceRun")]
struct PySequenceRun {
    #[pyo3(get)]
    atoms: usize,
    #[pyo3(get)]
    final_ground_population: f64,
    #[pyo3(get)]
    final_ground_phase: f64,
    #[pyo3(get)]
    population_error: f64,
    #[pyo3(get)]
    trace: Py<PyTrace>,
}

impl PySequenceRun {
    fn wrap(py: Python<'_>, run: protocols::SequenceRun) -> PyResult<Self> {
        Ok(Self {
            atoms: run.atoms,
            final_ground_population: run.final_ground_population,
            final_ground_phase: run.final_ground_phase,
            population_error: run.population_error,
            trace: Py::new(py, PyTrace::from(&run.trace))?,
        })
    }
}

#[pymethods]
impl PySequenceRun {
    fn __repr__(&self) -> String {
        format!(
            "SequenceRun(atoms={}, final_ground_phase={:.3e}, population_error={:.3e})",
            self.atoms, self.final_ground_phase, self.population_error
        )
    }
}

type Matrix = Vec<Vec<C64>>;

fn rows(m: &ndarray::Array2<C64>) -> Matrix {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[pyclass(name = "GateReport")]
struct PyGateReport {
    #[pyo3(get)]
    logical_matrix: Matrix,
    #[pyo3(get)]
    target_matrix: Matrix,
    #[pyo3(get)]
    fidelity: f64,
    /// Largest elementwise deviation after removing a global phase.
    #[pyo3(get)]
    deviation: f64,
    #[pyo3(get)]
    output: Vec<C64>,
    #[pyo3(get)]
    state_fidelity: f64,
    #[pyo3(get)]
    ground_phase_final: Option<f64>,
    #[pyo3(get)]
    population_error: f64,
    #[pyo3(get)]
    chi: Vec<f64>,
    #[pyo3(get)]
    max_norm_drift: f64,
}

impl From<protocols::GateReport> for PyGateReport {
    fn from(r: protocols::GateReport) -> Self {
        Self {
            deviation: phase_aligned_deviation(&r.target_matrix, &r.logical_matrix),
            logical_matrix: rows(&r.logical_matrix),
            target_matrix: rows(&r.target_matrix),
            fidelity: r.fidelity,
            output: r.output,
            state_fidelity: r.state_fidelity,
            ground_phase_final: r.ground_phase_final,
            population_error: r.population_error,
            chi: r.chi,
            max_norm_drift: r.max_norm_drift,
        }
    }
}

#[pymethods]
impl PyGateReport {
    fn __repr__(&self) -> String {
        format!("GateReport(fidelity={:.6}, deviation={:.3e})", self.fidelity, self.deviation)
    }
}

fn scheme_named(name: &str) -> PyResult<LevelScheme> {
    match name {
        "stirap" => Ok(LevelScheme::stirap()),
        "arp" => Ok(LevelScheme::arp()),
        "gate" => Ok(LevelScheme::gate()),
        other => Err(PyValueError::new_err(format!("unknown level scheme '{other}' (stirap, arp, gate)"))),
    }
}

/// Blockaded basis for one or more ensembles.
#[pyclass(name = "Basis")]
struct PyBasis {
    inner: std::sync::Arc<rydsim::CollectiveBasis>,
}

#[pymethods]
impl PyBasis {
    #[new]
    fn new(scheme: &str, atoms: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: build_basis(scheme_named(scheme)?, &atoms).py()? })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn symmetric_dimension(&self) -> usize {
        SymmetricSector::new(&self.inner).dimension()
    }

    #[getter]
    fn expected_dimension(&self) -> usize {
        expected_dimension(self.inner.scheme(), self.inner.num_atoms())
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.scheme().labels().map(String::from).collect()
    }

    fn configurations(&self) -> Vec<String> {
        let scheme = self.inner.scheme();
        self.inner.configurations().iter().map(|c| c.display(scheme)).collect()
    }

    fn rydberg_counts(&self) -> Vec<usize> {
        let scheme = self.inner.scheme();
        self.inner.configurations().iter().map(|c| c.rydberg_count(scheme)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.dimension()
    }
}

fn stirap_or_default(p: Option<PyStirap>) -> CoreStirap {
    p.map(|p| p.core()).unwrap_or_else(CoreStirap::fig2)
}

fn arp_or_default(p: Option<PyArp>) -> rydsim::ArpParams {
    p.map(|p| p.core()).unwrap_or_else(rydsim::ArpParams::fig2)
}

fn gate_or_default(p: Option<PyGate>) -> protocols::GateParams {
    p.map(|p| p.core()).unwrap_or_default()
}

/// Two STIRAP round trips `0 → r → 0` on `n` atoms.
#[pyfunction]
#[pyo3(signature = (n, params=None, switch_detuning=true, ratio=1.0, options=None))]
fn double_stirap(
    py: Python<'_>,
    n: usize,
    params: Option<PyStirap>,
    switch_detuning: bool,
    ratio: f64,
    options: Option<PyOptions>,
) -> PyResult<PySequenceRun> {
    let params = stirap_or_default(params);
    let opts = self::options(options);
    let run = py.detach(|| protocols::run_double_stirap_with_ratio(n, &params, switch_detuning, ratio, &opts)).py()?;
    PySequenceRun::wrap(py, run)
}

/// Two chirped passages `0 → r → 0` on `n` atoms.
#[pyfunction]
#[pyo3(signature = (n, params=None, invert_phase=true, ratio=1.0, options=None))]
fn double_arp(
    py: Python<'_>,
    n: usize,
    params: Option<PyArp>,
    invert_phase: bool,
    ratio: f64,
    options: Option<PyOptions>,
) -> PyResult<PySequenceRun> {
    let params = arp_or_default(params);
    let opts = self::options(options);
    let run = py.detach(|| protocols::run_double_arp_with_ratio(n, &params, invert_phase, ratio, &opts)).py()?;
    PySequenceRun::wrap(py, run)
}

/// Final ground-phase error of a compensated double passage whose second
/// pass is scaled by `ratio`. `mechanism` is "stirap" or "arp".
#[pyfunction]
#[pyo3(signature = (n, ratio, mechanism="stirap", stirap=None, arp=None, options=None))]
fn phase_error_sweep(
    py: Python<'_>,
    n: usize,
    ratio: f64,
    mechanism: &str,
    stirap: Option<PyStirap>,
    arp: Option<PyArp>,
    options: Option<PyOptions>,
) -> PyResult<f64> {
    let passage = match mechanism {
        "stirap" => protocols::Passage::Stirap(stirap_or_default(stirap)),
        "arp" => protocols::Passage::Arp(arp_or_default(arp)),
        other => return Err(PyValueError::new_err(format!("unknown mechanism '{other}' (stirap, arp)"))),
    };
    let opts = self::options(options);
    py.detach(|| protocols::phase_error_sweep(n, ratio, &passage, &opts)).py()
}

#[pyfunction]
#[pyo3(signature = (n, params=None, options=None))]
fn single_stirap_error(py: Python<'_>, n: usize, params: Option<PyStirap>, options: Option<PyOptions>) -> PyResult<f64> {
    let params = stirap_or_default(params);
    let opts = self::options(options);
    py.detach(|| protocols::single_stirap_error(n, &params, &opts)).py()
}

/// Single STIRAP error under the master equation with decay rates in rad/µs.
#[pyfunction]
#[pyo3(signature = (n, params=None, gamma_e=None, gamma_r=None, options=None))]
fn single_stirap_error_with_decay(
    py: Python<'_>,
    n: usize,
    params: Option<PyStirap>,
    gamma_e: Option<f64>,
    gamma_r: Option<f64>,
    options: Option<PyOptions>,
) -> PyResult<f64> {
    let params = stirap_or_default(params);
    let d = DecayRates::rubidium_like();
    let rates = DecayRates::new(gamma_e.unwrap_or(d.gamma_e), gamma_r.unwrap_or(d.gamma_r)).py()?;
    let opts = self::options(options);
    py.detach(|| protocols::single_stirap_error_with_decay(n, &params, &rates, &opts)).py()
}

#[pyfunction]
#[pyo3(signature = (n, params=None, options=None))]
fn single_arp_error(py: Python<'_>, n: usize, params: Option<PyArp>, options: Option<PyOptions>) -> PyResult<f64> {
    let params = arp_or_default(params);
    let opts = self::options(options);
    py.detach(|| protocols::single_arp_error(n, &params, &opts)).py()
}

/// Transfer error of a resonant pulse whose area is tuned for `n_opt` atoms.
#[pyfunction]
#[pyo3(signature = (n, n_opt=5, omega=None, options=None))]
fn pi_pulse_baseline(py: Python<'_>, n: usize, n_opt: usize, omega: Option<f64>, options: Option<PyOptions>) -> PyResult<f64> {
    let omega = omega.unwrap_or_else(|| rydsim::mhz(2.0));
    let opts = self::options(options);
    py.detach(|| protocols::pi_pulse_baseline(n, n_opt, omega, &opts)).py()
}

#[pyfunction]
fn pi_pulse_closed_form(n: usize, n_opt: usize) -> f64 {
    protocols::pi_pulse_closed_form(n, n_opt)
}

/// Rotation `R(θ, φ)` of an `n`-atom ensemble qubit starting in `a|0⟩ + b|1⟩`.
#[pyfunction]
#[pyo3(signature = (n, theta, phi, input=(C64::new(1.0, 0.0), C64::new(0.0, 0.0)), params=None, options=None))]
fn single_qubit_gate(
    py: Python<'_>,
    n: usize,
    theta: f64,
    phi: f64,
    input: (C64, C64),
    params: Option<PyGate>,
    options: Option<PyOptions>,
) -> PyResult<PyGateReport> {
    let params = gate_or_default(params);
    let opts = self::options(options);
    let report = py.detach(|| protocols::single_qubit_gate(n, input, theta, phi, &params, &opts)).py()?;
    Ok(report.into())
}

/// CNOT between a control ensemble of `nc` atoms and a target of `nt` atoms.
/// `input` holds the amplitudes of |00⟩, |01⟩, |10⟩, |11⟩.
#[pyfunction]
#[pyo3(signature = (nc=1, nt=1, input=None, params=None, options=None))]
fn cnot(
    py: Python<'_>,
    nc: usize,
    nt: usize,
    input: Option<[C64; 4]>,
    params: Option<PyGate>,
    options: Option<PyOptions>,
) -> PyResult<PyGateReport> {
    let zero = C64::new(0.0, 0.0);
    let input = input.unwrap_or([C64::new(1.0, 0.0), zero, zero, zero]);
    let params = gate_or_default(params);
    let opts = self::options(options);
    let report = py.detach(|| protocols::cnot(nc, nt, input, &params, &opts)).py()?;
    Ok(report.into())
}

/// `P1` after two `π/2` rotations separated in carrier phase by each `φ`.
#[pyfunction]
#[pyo3(signature = (n, phis, params=None, options=None))]
fn ramsey_scan(
    py: Python<'_>,
    n: usize,
    phis: Vec<f64>,
    params: Option<PyGate>,
    options: Option<PyOptions>,
) -> PyResult<Vec<f64>> {
    let params = gate_or_default(params);
    let opts = self::options(options);
    py.detach(|| protocols::ramsey_scan(n, &phis, &params, &opts)).py()
}

#[pyfunction]
fn ramsey_reference(phi: f64) -> f64 {
    protocols::ramsey_reference(phi)
}

#[pyfunction]
fn poisson_loading(mean: f64, n: usize) -> PyResult<f64> {
    analysis::poisson_loading(mean, n).py()
}

/// Poisson-weighted average of `metric(n)` over `n = 1..=n_max`. Returns a
/// dict with the average, the captured weight and `P(0)`.
#[pyfunction]
#[pyo3(signature = (metric, mean=5.0, n_max=15))]
fn poisson_average(metric: &Bound<'_, PyAny>, mean: f64, n_max: usize) -> PyResult<BTreeMap<&'static str, f64>> {
    let mut raised: Option<PyErr> = None;
    let result = analysis::poisson_average(
        |n| match metric.call1((n,)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => Ok(v),
            Err(e) => {
                raised = Some(e);
                Err(SimError::InvalidArgument("metric callback raised".into()))
            }
        },
        mean,
        n_max,
    );
    if let Some(e) = raised {
        return Err(e);
    }
    let avg = result.py()?;
    Ok(BTreeMap::from([
        ("value", avg.value),
        ("weight", avg.weight),
        ("defect_probability", avg.defect_probability),
        ("mean", avg.mean),
        ("n_max", avg.n_max as f64),
    ]))
}

/// Blockade shift against the collective Rabi frequency, all in MHz.
#[pyfunction]
fn blockade_estimate(c6: f64, separation: f64, rabi_mhz: f64, atoms: usize) -> PyResult<BTreeMap<&'static str, f64>> {
    let b = analysis::blockade_estimate(c6, separation, rabi_mhz, atoms).py()?;
    Ok(BTreeMap::from([
        ("interaction", b.interaction),
        ("collective_rabi", b.collective_rabi),
        ("ratio", b.ratio),
    ]))
}

#[pymodule]
pub fn rydsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IntegrationError", m.py().get_type::<IntegrationError>())?;
    m.add_class::<PyStirap>()?;
    m.add_class::<PyArp>()?;
    m.add_class::<PyGate>()?;
    m.add_class::<PyOptions>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PySequenceRun>()?;
    m.add_class::<PyGateReport>()?;
    m.add_class::<PyBasis>()?;
    m.add_function(wrap_pyfunction!(mhz, m)?)?;
    m.add_function(wrap_pyfunction!(double_stirap, m)?)?;
    m.add_function(wrap_pyfunction!(double_arp, m)?)?;
    m.add_function(wrap_pyfunction!(phase_error_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(single_stirap_error, m)?)?;
    m.add_function(wrap_pyfunction!(single_stirap_error_with_decay, m)?)?;
    m.add_function(wrap_pyfunction!(single_arp_error, m)?)?;
    m.add_function(wrap_pyfunction!(pi_pulse_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(pi_pulse_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(single_qubit_gate, m)?)?;
    m.add_function(wrap_pyfunction!(cnot, m)?)?;
    m.add_function(wrap_pyfunction!(ramsey_scan, m)?)?;
    m.add_function(wrap_pyfunction!(ramsey_reference, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_loading, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_average, m)?)?;
    m.add_function(wrap_pyfunction!(blockade_estimate, m)?)?;
    Ok(())
}
