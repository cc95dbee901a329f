//! Python bindings.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::phonon_qc::analysis::em::default_init;
use ::phonon_qc::analysis::{classify_and_extract_period, em_fit, qpf_theoretical_distribution};
use ::phonon_qc::device::{DecoherenceModel, DeviceParams};
use ::phonon_qc::experiments::{
    self, parse_decoherence, parse_dephasing, ExperimentConfig, ExperimentKind, Shots, SpamMode,
};
use ::phonon_qc::gates::{solve_cphi, swap_time};
use ::phonon_qc::linalg::{CMatrix, SuperOperator};
use ::phonon_qc::tomography::{average_gate_fidelity, MisassignmentModel};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Device", module = "phonon_qc", from_py_object)]
#[derive(Clone)]
struct PyDevice {
    inner: DeviceParams,
}

#[pymethods]
impl PyDevice {
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => DeviceParams::from_json(text).map_err(err)?,
            None => DeviceParams::default_device(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Self::new(Some(&text))
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("device serializes")
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.modes.len()
    }

    /// Swap duration in seconds.
    #[getter]
    fn t_swap(&self) -> f64 {
        swap_time(self.inner.g_angular())
    }

    /// Mode frequency minus transmon rest frequency, rad/s.
    fn mode_offset(&self, mode: usize) -> PyResult<f64> {
        self.inner.mode_offset(mode).map_err(err)
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn __repr__(&self) -> String {
        format!("Device(g={} Hz, modes={})", self.inner.g, self.inner.modes.len())
    }
}

fn device_or_default(device: Option<PyDevice>) -> DeviceParams {
    device.map(|d| d.inner).unwrap_or_else(DeviceParams::default_device)
}

fn model(decoherence: &str) -> PyResult<DecoherenceModel> {
    Ok(DecoherenceModel {
        mode: parse_decoherence(decoherence).map_err(err)?,
        ..DecoherenceModel::default()
    })
}

/// Closed-form controlled-phase parameters as a dict-like tuple
/// `(delta, t_int, theta, phi1, phi2)`.
#[pyfunction]
#[pyo3(signature = (phi, device=None))]
fn cphi_parameters(phi: f64, device: Option<PyDevice>) -> PyResult<(f64, f64, f64, f64, f64)> {
    let d = device_or_default(device);
    let p = solve_cphi(phi, d.g_angular()).map_err(err)?;
    Ok((p.delta, p.t_int, p.theta, p.phi1, p.phi2))
}

/// No-SPAM average gate fidelity of one controlled-phase gate.
#[pyfunction]
#[pyo3(signature = (phi, mode=0, decoherence="full", device=None))]
fn cphi_fidelity(phi: f64, mode: usize, decoherence: &str, device: Option<PyDevice>) -> PyResult<f64> {
    let d = device_or_default(device);
    let e = experiments::cphi_no_spam(&d, mode, phi, model(decoherence)?).map_err(err)?;
    Ok(e.fidelity)
}

/// Exact output distribution of period finding, indexed by `y`.
#[pyfunction]
#[pyo3(signature = (period, decoherence="full", spam="ideal", device=None))]
fn qpf_distribution(period: u32, decoherence: &str, spam: &str, device: Option<PyDevice>) -> PyResult<Vec<f64>> {
    let d = device_or_default(device);
    let spam: SpamMode = spam.parse().map_err(err)?;
    experiments::qpf_distribution(&d, period, model(decoherence)?, spam).map_err(err)
}

#[pyfunction]
fn qpf_theory(truth_table: Vec<u8>) -> Vec<f64> {
    qpf_theoretical_distribution(&truth_table)
}

/// Period recovered from measured populations.
#[pyfunction]
fn extract_period(populations: Vec<f64>) -> PyResult<usize> {
    classify_and_extract_period(&populations).map(|r| r.period).map_err(err)
}

/// Two-component beta mixture: `[(alpha, beta, weight) x2]` (noise first) and
/// the log-likelihood.
#[pyfunction]
fn beta_mixture(populations: Vec<f64>) -> PyResult<(Vec<(f64, f64, f64)>, f64)> {
    let fit = em_fit(&populations, default_init()).map_err(err)?;
    let comps = fit.components.iter().map(|c| (c.alpha, c.beta, c.weight)).collect();
    Ok((comps, fit.log_likelihood))
}

/// Readout-corrected probabilities for an n-qubit outcome vector.
#[pyfunction]
#[pyo3(signature = (raw, f_g=0.88, f_e=0.85))]
fn correct_readout(raw: Vec<f64>, f_g: f64, f_e: f64) -> PyResult<Vec<f64>> {
    MisassignmentModel::new(f_g, f_e).map_err(err)?.correct(&raw).map_err(err)
}

fn to_matrix(rows: &[Vec<Complex64>]) -> PyResult<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Average gate fidelity of the unitary channel `actual` against `target`.
#[pyfunction]
fn unitary_fidelity(actual: Vec<Vec<Complex64>>, target: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let e = SuperOperator::from_unitary(&to_matrix(&actual)?);
    average_gate_fidelity(&e, &to_matrix(&target)?).map_err(err)
}

/// Runs a named experiment; returns the summary bundle as JSON text.
#[pyfunction]
#[pyo3(signature = (experiment, seed=0, decoherence="full", dephasing="standard", spam="ideal", shots="exact", period=None, phi=None, mode=0, device_path=None, out=None))]
#[allow(clippy::too_many_arguments)]
fn run(
    experiment: &str,
    seed: u64,
    decoherence: &str,
    dephasing: &str,
    spam: &str,
    shots: &str,
    period: Option<u32>,
    phi: Option<f64>,
    mode: usize,
    device_path: Option<String>,
    out: Option<String>,
) -> PyResult<String> {
    let kind: ExperimentKind = experiment.parse().map_err(err)?;
    let mut cfg = ExperimentConfig::new(kind);
    cfg.seed = seed;
    cfg.decoherence = parse_decoherence(decoherence).map_err(err)?;
    cfg.dephasing = parse_dephasing(dephasing).map_err(err)?;
    cfg.spam = spam.parse().map_err(err)?;
    cfg.shots = shots.parse::<Shots>().map_err(err)?;
    cfg.period = period;
    cfg.phi = phi;
    cfg.mode = mode;
    cfg.device_path = device_path.map(Into::into);
    cfg.out = out.map(Into::into);
    let bundle = experiments::run(&cfg).map_err(err)?;
    if let Some(dir) = &cfg.out {
        experiments::emit(&bundle, dir).map_err(err)?;
    }
    Ok(bundle.summary_json())
}

#[pymodule]
#[pyo3(name = "phonon_qc")]
fn phonon_qc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDevice>()?;
    m.add_function(wrap_pyfunction!(cphi_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(cphi_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(qpf_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(qpf_theory, m)?)?;
    m.add_function(wrap_pyfunction!(extract_period, m)?)?;
    m.add_function(wrap_pyfunction!(beta_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(correct_readout, m)?)?;
    m.add_function(wrap_pyfunction!(unitary_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
