//! Python bindings: networks, probes, closed-form statistics, Fisher
//! information and the estimation experiments.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hhmetro_core::estimator::{self, MleSettings, OutcomeBatch};
use hhmetro_core::fisher::{self, PhasePolicy, PhaseSchedule, QuadratureSign};
use hhmetro_core::gaussian::{self, GaussianModel};
use hhmetro_core::network::{self, ChannelDecomposition, NetworkSpec};
use hhmetro_core::{Error, RealMatrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Statistics = (Vec<f64>, Vec<Vec<f64>>, f64, Vec<Vec<f64>>);

fn rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn signs(values: Option<Vec<f64>>, modes: usize) -> PyResult<Vec<QuadratureSign>> {
    match values {
        None => Ok(vec![QuadratureSign::Plus; modes]),
        Some(v) => v.into_iter().map(|s| QuadratureSign::from_value(s).map_err(to_py)).collect(),
    }
}

#[pyclass(name = "ProbeSpec", frozen)]
struct PyProbe(gaussian::ProbeSpec);

#[pymethods]
impl PyProbe {
    #[new]
    fn new(total: f64, beta: f64) -> PyResult<Self> {
        gaussian::ProbeSpec::new(total, beta).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_squeezing(r: f64, d: f64) -> PyResult<Self> {
        gaussian::ProbeSpec::from_squeezing(r, d).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_photons(squeezed: f64, displaced: f64) -> PyResult<Self> {
        gaussian::ProbeSpec::from_photons(squeezed, displaced).map(Self).map_err(to_py)
    }

    #[getter]
    fn total(&self) -> f64 {
        self.0.total()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }
    #[getter]
    fn squeezed_photons(&self) -> f64 {
        self.0.squeezed_photons()
    }
    #[getter]
    fn displaced_photons(&self) -> f64 {
        self.0.displaced_photons()
    }
    #[getter]
    fn squeezing(&self) -> f64 {
        self.0.squeezing()
    }
    #[getter]
    fn displacement(&self) -> f64 {
        self.0.displacement()
    }

    fn __repr__(&self) -> String {
        format!("ProbeSpec(N_S={}, N_D={})", self.0.squeezed_photons(), self.0.displaced_photons())
    }
}

#[pyclass(name = "Network", frozen)]
struct PyNetwork(network::ParametrizedNetwork);

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn interpolated_random(modes: usize, seed: u64) -> PyResult<Self> {
        network::ParametrizedNetwork::interpolated_random(modes, seed).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (modes, phase_mode = 0))]
    fn diagonal_phase(modes: usize, phase_mode: usize) -> PyResult<Self> {
        network::ParametrizedNetwork::diagonal_phase(modes, phase_mode).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (modes, seed, phase_mode = 0))]
    fn random_mesh(modes: usize, seed: u64, phase_mode: usize) -> PyResult<Self> {
        network::ParametrizedNetwork::random_mesh(modes, phase_mode, seed).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (modes, phase_mode = 0))]
    fn mach_zehnder(modes: usize, phase_mode: usize) -> PyResult<Self> {
        network::ParametrizedNetwork::mach_zehnder(modes, phase_mode).map(Self).map_err(to_py)
    }

    /// Builds a network from the same JSON object the CLI accepts under `network`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: NetworkSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.build().map(Self).map_err(to_py)
    }

    #[getter]
    fn modes(&self) -> usize {
        self.0.modes()
    }

    fn evaluate(&self, phi: f64) -> PyResult<Vec<Vec<Complex64>>> {
        let u = self.0.evaluate(phi).map_err(to_py)?;
        Ok((0..u.nrows()).map(|i| u.row(i).iter().cloned().collect()).collect())
    }

    /// `(P, gamma_bar, gamma)` of the first row for oscillator phases `theta`.
    fn channels(&self, phi: f64, theta: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let ch = self.channel(phi, &theta)?;
        Ok((ch.probabilities, ch.network_phases, ch.relative_phases))
    }
}

impl PyNetwork {
    fn channel(&self, phi: f64, theta: &[f64]) -> PyResult<ChannelDecomposition> {
        let u = self.0.evaluate(phi).map_err(to_py)?;
        network::first_row_decomposition(&u, theta).map_err(to_py)
    }
}

/// Closed-form `(mean, covariance, determinant, cofactor)` at `phi`.
#[pyfunction]
fn statistics(
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi: f64,
) -> PyResult<Statistics> {
    let ch = net.channel(phi, &theta)?;
    Ok((
        gaussian::output_mean(&probe.0, &ch).iter().cloned().collect(),
        rows(&gaussian::output_covariance(&probe.0, &ch)),
        gaussian::covariance_determinant(&probe.0, &ch),
        rows(&gaussian::cofactor_matrix(&probe.0, &ch)),
    ))
}

#[pyfunction]
fn fisher_information<'py>(
    py: Python<'py>,
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let f = fisher::fisher_information(&net.0, &probe.0, &theta, phi).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("displacement_term", f.displacement_term)?;
    d.set_item("determinant_term", f.determinant_term)?;
    d.set_item("trace_term", f.trace_term)?;
    d.set_item("total", f.total)?;
    Ok(d)
}

/// Oscillator phases steering channel `i` to `sign_i pi/2 + k_i / N_S^alpha` at `phi`.
#[pyfunction]
#[pyo3(signature = (net, phi, squeezed_photons, k, alpha = 1.0, signs = None))]
fn heisenberg_schedule(
    net: PyRef<'_, PyNetwork>,
    phi: f64,
    squeezed_photons: f64,
    k: Vec<f64>,
    alpha: f64,
    signs: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let sched = PhaseSchedule::with_signs(k.clone(), alpha, self::signs(signs, k.len())?).map_err(to_py)?;
    let ch = net.channel(phi, &vec![0.0; net.0.modes()])?;
    fisher::heisenberg_schedule(&ch, squeezed_photons, &sched).map_err(to_py)
}

/// Large-`N` Fisher information at the phases actually realised by `theta`.
#[pyfunction]
fn asymptotic_fisher(
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi: f64,
) -> PyResult<f64> {
    let ch = network::channel_derivatives(&net.0, phi, &theta, network::default_step(phi)).map_err(to_py)?;
    let ns = probe.0.squeezed_photons();
    let sched = PhaseSchedule::effective(&ch, ns).map_err(to_py)?;
    fisher::asymptotic_fisher(&ch, &sched, ns, probe.0.displaced_photons()).map_err(to_py)
}

#[pyfunction]
fn rho(x: f64) -> f64 {
    fisher::rho(x)
}

#[pyfunction]
fn zeta(x: f64) -> f64 {
    fisher::zeta(x)
}

/// Monte-Carlo `(estimate, std_error)` of the Fisher information.
#[pyfunction]
#[pyo3(signature = (net, probe, theta, phi, samples = 100_000, seed = 0))]
fn mc_fisher(
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi: f64,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let est = fisher::mc_fisher_oracle(&net.0, &probe.0, &theta, phi, samples, seed, network::default_step(phi))
        .map_err(to_py)?;
    Ok((est.estimate, est.std_error))
}

fn policy(modes: usize, k: Option<Vec<f64>>, fixed_gamma: Option<Vec<f64>>) -> PyResult<PhasePolicy> {
    match (k, fixed_gamma) {
        (Some(_), Some(_)) => Err(PyValueError::new_err("give either k or fixed_gamma")),
        (_, Some(g)) => Ok(PhasePolicy::FixedRelative(g)),
        (k, None) => {
            let k = k.unwrap_or_else(|| vec![0.0; modes]);
            let signs = vec![QuadratureSign::Plus; k.len()];
            Ok(PhasePolicy::Schedule(PhaseSchedule::with_signs(k, 1.0, signs).map_err(to_py)?))
        }
    }
}

/// `(fisher_values, slope)` over `photons`, rescheduling the oscillators at each `N`.
#[pyfunction]
#[pyo3(signature = (net, beta, photons, phi, k = None, fixed_gamma = None))]
fn slope_experiment(
    net: PyRef<'_, PyNetwork>,
    beta: f64,
    photons: Vec<f64>,
    phi: f64,
    k: Option<Vec<f64>>,
    fixed_gamma: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, f64)> {
    let policy = policy(net.0.modes(), k, fixed_gamma)?;
    let fit = fisher::slope_experiment(&net.0, beta, &photons, &policy, phi).map_err(to_py)?;
    Ok((fit.fisher, fit.slope))
}

fn model(net: &PyNetwork, probe: &PyProbe, theta: &[f64], phi: f64) -> PyResult<GaussianModel> {
    gaussian::model_with_derivatives(&net.0, &probe.0, theta, phi, network::default_step(phi)).map_err(to_py)
}

/// `nu` simulated outcome vectors at `phi`.
#[pyfunction]
#[pyo3(signature = (net, probe, theta, phi, nu, seed = 0, stream = 0))]
fn sample_outcomes(
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi: f64,
    nu: usize,
    seed: u64,
    stream: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let m = model(&net, &probe, &theta, phi)?;
    Ok(estimator::sample_outcomes(&m, nu, seed, stream, phi).map_err(to_py)?.outcomes)
}

fn batch(outcomes: Vec<Vec<f64>>) -> PyResult<OutcomeBatch> {
    OutcomeBatch::from_outcomes(outcomes, 0, 0, f64::NAN).map_err(to_py)
}

#[pyfunction]
fn mle_score(
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi: f64,
    outcomes: Vec<Vec<f64>>,
) -> PyResult<f64> {
    estimator::mle_score(phi, &batch(outcomes)?, &net.0, &probe.0, &theta).map_err(to_py)
}

/// Maximum-likelihood estimate of `phi` inside `window`.
#[pyfunction]
#[pyo3(signature = (net, probe, theta, outcomes, window, grid = 64))]
fn mle_estimate<'py>(
    py: Python<'py>,
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    outcomes: Vec<Vec<f64>>,
    window: (f64, f64),
    grid: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = estimator::mle_estimate(&batch(outcomes)?, &net.0, &probe.0, &theta, window, grid).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("estimate", r.estimate)?;
    d.set_item("score_at_estimate", r.score_at_estimate)?;
    d.set_item("score_scale", r.score_scale)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("window", r.window)?;
    Ok(d)
}

/// Variance of repeated estimates against the Cramér-Rao bound.
#[pyfunction]
#[pyo3(signature = (net, probe, theta, phi_true, nu, trials, seed = 0, window = 1.0, grid = 64))]
#[allow(clippy::too_many_arguments)]
fn crb_experiment<'py>(
    py: Python<'py>,
    net: PyRef<'_, PyNetwork>,
    probe: PyRef<'_, PyProbe>,
    theta: Vec<f64>,
    phi_true: f64,
    nu: usize,
    trials: usize,
    seed: u64,
    window: f64,
    grid: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let settings = MleSettings { window_width: window, grid };
    let (net, probe) = (net.0.clone(), probe.0);
    let r = py
        .detach(|| estimator::crb_experiment(&net, &probe, &theta, phi_true, nu, trials, seed, &settings))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("variance", r.variance)?;
    d.set_item("crb", r.crb)?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("fisher", r.fisher)?;
    d.set_item("failures", r.failures)?;
    d.set_item("estimates", r.trials.iter().map(|t| t.estimate).collect::<Vec<_>>())?;
    Ok(d)
}

#[pymodule]
fn hhmetro(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProbe>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(statistics, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_information, m)?)?;
    m.add_function(wrap_pyfunction!(heisenberg_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_fisher, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(mc_fisher, m)?)?;
    m.add_function(wrap_pyfunction!(slope_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sample_outcomes, m)?)?;
    m.add_function(wrap_pyfunction!(mle_score, m)?)?;
    m.add_function(wrap_pyfunction!(mle_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(crb_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
