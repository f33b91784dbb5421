//! Python bindings: coefficients, the value network, a hand-steerable world,
//! and whole-scenario runs driven by JSON configs.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hamnet::harness::{self, ScenarioConfig, ScenarioKind};
use hamnet::neuralnet::{train_step, AdamState, NetParams, OutputActivation};
use hamnet::strategies::StrategyKind;
use hamnet::{dqn, geometry, hamiltonian, world};

fn to_py(err: hamnet::Error) -> PyErr {
    match err {
        hamnet::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr>(text: &str, what: &str) -> PyResult<T> {
    text.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown {what} '{text}'")))
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn activation(name: &str) -> PyResult<OutputActivation> {
    match name {
        "scaled-elu" => Ok(OutputActivation::ScaledElu),
        "elu" => Ok(OutputActivation::Elu),
        "linear" => Ok(OutputActivation::Linear),
        _ => Err(PyValueError::new_err(format!("unknown output activation '{name}'"))),
    }
}

#[pyclass(name = "Coefficients", from_py_object)]
#[derive(Clone, Copy)]
struct PyCoefficients(hamiltonian::Coefficients);

#[pymethods]
impl PyCoefficients {
    #[new]
    fn new(alpha1: f64, alpha2: f64, alpha3: f64, alpha4: f64) -> Self {
        Self(hamiltonian::Coefficients::new(alpha1, alpha2, alpha3, alpha4))
    }

    /// One of "static", "moving", "churn", "obstacles", "sweep".
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let c = match name {
            "static" => hamiltonian::Coefficients::STATIC,
            "moving" => hamiltonian::Coefficients::MOVING,
            "churn" | "obstacles" => hamiltonian::Coefficients::CHURN,
            "sweep" => hamiltonian::Coefficients::SWEEP,
            _ => return Err(PyValueError::new_err(format!("no preset named '{name}'"))),
        };
        Ok(Self(c))
    }

    fn as_list(&self) -> [f64; 4] {
        self.0.into()
    }

    fn __repr__(&self) -> String {
        let c = self.0;
        format!("Coefficients({}, {}, {}, {})", c.alpha1, c.alpha2, c.alpha3, c.alpha4)
    }
}

/// The 3-32-32-2 value network with its own Adam state.
#[pyclass(name = "Network")]
struct PyNetwork {
    params: NetParams,
    adam: AdamState,
}

impl PyNetwork {
    fn wrap(params: NetParams) -> Self {
        let adam = AdamState::new(&params);
        Self { params, adam }
    }
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (seed, output_activation = "scaled-elu"))]
    fn new(seed: u64, output_activation: &str) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::wrap(NetParams::init(&mut rng, activation(output_activation)?)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        NetParams::load(&path).map(Self::wrap).map_err(to_py)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        NetParams::from_text(text, Path::new("<string>"))
            .map(Self::wrap)
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.params.save(&path).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.params.to_text()
    }

    /// Q-values `(increase, decrease)` for one observation.
    fn forward(&self, features: [f64; 3]) -> PyResult<(f64, f64)> {
        let q = self.params.forward(&features).map_err(to_py)?;
        Ok((q[0], q[1]))
    }

    /// One Adam step on the squared error of the chosen action; returns the loss.
    fn train(&mut self, features: [f64; 3], action: usize, target: f64, lr: f64) -> PyResult<f64> {
        train_step(&mut self.params, &mut self.adam, &features, action, target, lr).map_err(to_py)
    }

    fn parameter_count(&self) -> usize {
        self.params.parameter_count()
    }
}

/// An open world of agents whose radii are set by hand.
#[pyclass(name = "World")]
struct PyWorld {
    world: world::World,
    rng: ChaCha8Rng,
}

impl PyWorld {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.world.bodies().len() {
            return Err(PyIndexError::new_err(format!("no agent {i}")));
        }
        Ok(())
    }
}

#[pymethods]
impl PyWorld {
    #[new]
    #[pyo3(signature = (side_length, n_agents, initial_radius = 1.0, seed = 0, dimension = 2))]
    fn new(side_length: f64, n_agents: usize, initial_radius: f64, seed: u64, dimension: usize) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = geometry::WorldConfig::open(dimension, side_length);
        let world = world::World::random(config, n_agents, initial_radius, &mut rng).map_err(to_py)?;
        Ok(Self { world, rng })
    }

    fn positions(&self) -> Vec<Vec<f64>> {
        self.world.bodies().iter().map(|b| b.position.clone()).collect()
    }

    fn radii(&self) -> Vec<f64> {
        self.world.bodies().iter().map(|b| b.radius).collect()
    }

    fn degrees(&self) -> Vec<usize> {
        (0..self.world.bodies().len()).map(|i| self.world.degree(i)).collect()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.world.adjacency().edges().collect()
    }

    fn n_active(&self) -> usize {
        self.world.n_active()
    }

    fn set_radius(&mut self, i: usize, radius: f64) -> PyResult<()> {
        self.check(i)?;
        self.world.set_radius(i, radius).map_err(to_py)
    }

    /// Change of the total Hamiltonian if agent `i` moved to `radius`.
    fn delta_h(&self, i: usize, radius: f64, coefficients: PyCoefficients) -> PyResult<f64> {
        self.check(i)?;
        self.world
            .radius_delta(i, radius, &coefficients.0, hamiltonian::RewardScope::GlobalExact)
            .map(|d| d.delta_h)
            .map_err(to_py)
    }

    fn total_hamiltonian(&self, coefficients: PyCoefficients) -> f64 {
        self.world.total_hamiltonian(&coefficients.0)
    }

    /// `(local_density_ratio, reduced_radius, degree_fraction)` of agent `i`.
    fn observe(&self, i: usize) -> PyResult<(f64, f64, f64)> {
        self.check(i)?;
        let o = dqn::observe(&self.world, i).map_err(to_py)?;
        Ok((o.local_density_ratio, o.reduced_radius, o.degree_fraction))
    }

    fn deactivate(&mut self, i: usize) -> PyResult<()> {
        self.check(i)?;
        self.world.deactivate(i);
        Ok(())
    }

    fn spawn(&mut self, radius: f64) -> usize {
        self.world.spawn(radius, &mut self.rng)
    }

    fn metrics<'py>(&self, py: Python<'py>, coefficients: PyCoefficients) -> PyResult<Bound<'py, PyAny>> {
        let m = self.world.metrics(0, &coefficients.0).map_err(to_py)?;
        json_to_py(py, &m)
    }
}

#[pyfunction]
fn epsilon(t: usize, t_max: usize) -> PyResult<f64> {
    if t_max == 0 {
        return Err(PyValueError::new_err("t_max must be positive"));
    }
    Ok(dqn::epsilon(t, t_max))
}

/// Receiver-side Hamiltonian change for accepting a link request.
#[pyfunction]
fn delta_h_request(k: usize, radius: f64, distance: f64, coefficients: PyCoefficients) -> PyResult<f64> {
    hamiltonian::delta_h_request(k, radius, distance, &coefficients.0).map_err(to_py)
}

/// JSON text of a reference scenario, ready to edit and pass back.
#[pyfunction]
#[pyo3(signature = (scenario, strategy = "cooperative"))]
fn preset_config(scenario: &str, strategy: &str) -> PyResult<String> {
    let kind = match scenario {
        "static" => ScenarioKind::Static,
        "moving" => ScenarioKind::Moving,
        "density-sweep" => ScenarioKind::DensitySweep,
        "churn" => ScenarioKind::Churn,
        "obstacles" => ScenarioKind::Obstacles,
        _ => return Err(PyValueError::new_err(format!("unknown scenario '{scenario}'"))),
    };
    let strategy: StrategyKind = parse(strategy, "strategy")?;
    serde_json::to_string_pretty(&ScenarioConfig::preset(kind, strategy)).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn pretrain(py: Python<'_>, config_json: &str) -> PyResult<PyNetwork> {
    let config = ScenarioConfig::from_json(config_json).map_err(to_py)?;
    let (params, _) = py
        .detach(|| harness::pretrain_scenario(&config))
        .map_err(to_py)?;
    Ok(PyNetwork::wrap(params))
}

/// One run; returns the per-step series, window means and churn log as plain Python data.
#[pyfunction]
#[pyo3(signature = (config_json, network = None))]
fn run<'py>(py: Python<'py>, config_json: &str, network: Option<PyRef<'_, PyNetwork>>) -> PyResult<Bound<'py, PyAny>> {
    let config = ScenarioConfig::from_json(config_json).map_err(to_py)?;
    let weights = network.map(|n| n.params.clone());
    let out = py
        .detach(|| harness::run_scenario(&config, weights.as_ref()))
        .map_err(to_py)?;
    let value = serde_json::json!({
        "seed": out.seed,
        "strategy": out.strategy,
        "series": out.series,
        "churn_events": out.churn_events,
        "window_means": out.window_means,
        "window_connectivity_std": out.window_connectivity_std,
    });
    json_to_py(py, &value)
}

/// Seeded ensemble; returns its summary (means and standard deviations).
#[pyfunction]
#[pyo3(signature = (config_json, runs, network = None))]
fn ensemble<'py>(
    py: Python<'py>,
    config_json: &str,
    runs: usize,
    network: Option<PyRef<'_, PyNetwork>>,
) -> PyResult<Bound<'py, PyAny>> {
    let config = ScenarioConfig::from_json(config_json).map_err(to_py)?;
    let weights = network.map(|n| n.params.clone());
    let result = py
        .detach(|| harness::ensemble(&config, weights.as_ref(), runs))
        .map_err(to_py)?;
    json_to_py(py, &result.summary)
}

#[pymodule]
#[pyo3(name = "hamnet")]
fn hamnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyWorld>()?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(delta_h_request, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(pretrain, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    Ok(())
}
