use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand_chacha::ChaCha8Rng;

use bfs3_core::agents::{Agent, Bfs3Agent as CoreBfs3};
use bfs3_core::fsss::{fsss_estimate as core_fsss, FsssParams};
use bfs3_core::harness::{self, ExperimentConfig};
use bfs3_core::mdp::{greedy_policy, random_tabular_mdp as core_random, value_iteration as core_vi};
use bfs3_core::priors::{FdmPrior, SuffStats as CoreStats};
use bfs3_core::{seeded_rng, GenerativeMdp, TabularMdp as CoreMdp};

fn py_err(e: bfs3_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Finite MDP with deterministic rewards.
#[pyclass(module = "bfs3")]
#[derive(Clone)]
struct TabularMdp {
    inner: CoreMdp,
}

#[pymethods]
impl TabularMdp {
    /// `rows[s*A + a]` is a list of `(next_state, prob)` pairs.
    #[new]
    #[pyo3(signature = (num_states, num_actions, rows, rewards, gamma, terminal=vec![], reward_bounds=None))]
    fn new(
        num_states: usize,
        num_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        rewards: Vec<f64>,
        gamma: f64,
        terminal: Vec<usize>,
        reward_bounds: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let bounds = reward_bounds.unwrap_or_else(|| {
            let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo.min(0.0), hi.max(0.0))
        });
        let inner = CoreMdp::new(num_states, num_actions, rows, rewards, gamma, &terminal, bounds).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        CoreMdp::from_text(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.inner.prob(s, a, next)
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.inner.reward(s, a)
    }

    /// One draw from the generative model: `(next_state, reward)`.
    fn sample(&self, s: usize, a: usize, seed: u64) -> (usize, f64) {
        let t = self.inner.sample(&s, a, &mut seeded_rng(seed, 0));
        (t.next_state, t.reward)
    }

    fn __repr__(&self) -> String {
        format!("TabularMdp(S={}, A={}, gamma={})", self.inner.num_states(), self.inner.num_actions(), self.inner.gamma())
    }
}

/// Optimal state values, to within `epsilon`.
#[pyfunction]
#[pyo3(signature = (mdp, epsilon=1e-8))]
fn value_iteration(mdp: &TabularMdp, epsilon: f64) -> PyResult<Vec<f64>> {
    core_vi(&mdp.inner, epsilon).map(|v| v.values().to_vec()).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (mdp, epsilon=1e-8))]
fn optimal_policy(mdp: &TabularMdp, epsilon: f64) -> PyResult<Vec<usize>> {
    let v = core_vi(&mdp.inner, epsilon).map_err(py_err)?;
    Ok(greedy_policy(&mdp.inner, &v))
}

#[pyfunction]
#[pyo3(signature = (num_states, num_actions, seed, sparsity=3))]
fn random_tabular_mdp(num_states: usize, num_actions: usize, seed: u64, sparsity: usize) -> PyResult<TabularMdp> {
    core_random(num_states, num_actions, seed, sparsity).map(|inner| TabularMdp { inner }).map_err(py_err)
}

/// FSSS value estimate: `(value, queries, tree_dump)`.
#[pyfunction]
#[pyo3(signature = (mdp, state, d, t, c, seed=0))]
fn fsss_estimate(mdp: &TabularMdp, state: usize, d: usize, t: usize, c: usize, seed: u64) -> PyResult<(f64, u64, String)> {
    let params = FsssParams::new(d, t, c).map_err(py_err)?;
    let est = core_fsss(&mdp.inner, state, params, &mut seeded_rng(seed, 0));
    Ok((est.value, est.tree.query_count(), est.tree.dump()))
}

/// Transition counts with a knownness cap.
#[pyclass(module = "bfs3")]
#[derive(Clone)]
struct SuffStats {
    inner: CoreStats,
}

#[pymethods]
impl SuffStats {
    #[new]
    fn new(num_states: usize, num_actions: usize, cap: u32) -> Self {
        Self { inner: CoreStats::new(num_states, num_actions, cap) }
    }

    /// A new statistic with the transition folded in.
    fn update(&self, s: usize, a: usize, next: usize, reward: f64) -> Self {
        Self { inner: self.inner.update(s, a, next, reward) }
    }

    fn count(&self, s: usize, a: usize, next: usize) -> u32 {
        self.inner.count(s, a, next)
    }

    fn total(&self, s: usize, a: usize) -> u32 {
        self.inner.total(s, a)
    }

    #[getter]
    fn discoveries(&self) -> u64 {
        self.inner.discoveries()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        CoreStats::from_text(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// BFS3 with a flat Dirichlet-multinomial prior over a tabular domain.
#[pyclass(module = "bfs3", unsendable)]
struct Bfs3Agent {
    inner: CoreBfs3<FdmPrior>,
    rng: ChaCha8Rng,
}

#[pymethods]
impl Bfs3Agent {
    #[new]
    #[pyo3(signature = (mdp, d, t, c, cap=20, alpha=None, seed=0))]
    fn new(mdp: &TabularMdp, d: usize, t: usize, c: usize, cap: u32, alpha: Option<f64>, seed: u64) -> PyResult<Self> {
        let alpha = alpha.unwrap_or(1.0 / mdp.inner.num_states() as f64);
        let prior = FdmPrior::for_mdp(&mdp.inner, alpha, cap, None).map_err(py_err)?;
        let params = FsssParams::new(d, t, c).map_err(py_err)?;
        Ok(Self { inner: CoreBfs3::new(prior, params), rng: seeded_rng(seed, 1) })
    }

    fn act(&mut self, state: usize) -> usize {
        self.inner.act(&state, &mut self.rng)
    }

    fn observe(&mut self, state: usize, action: usize, next: usize, reward: f64) {
        self.inner.observe(&state, action, &next, reward);
    }

    /// `(queries, cache_hit)` of the last decision.
    fn last_decision(&self) -> (u64, bool) {
        let d = self.inner.last_decision();
        (d.queries, d.cache_hit)
    }

    #[getter]
    fn discoveries(&self) -> u64 {
        self.inner.discoveries()
    }
}

/// Runs an experiment and returns the per-step CSV.
#[pyfunction]
#[pyo3(signature = (domain="grid5", agent="bfs3", d=5, t=20, c=2, n=20, gamma=None, runs=1, episodes=1, steps=200, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    domain: &str,
    agent: &str,
    d: usize,
    t: usize,
    c: usize,
    n: u32,
    gamma: Option<f64>,
    runs: usize,
    episodes: usize,
    steps: usize,
    seed: u64,
) -> PyResult<String> {
    let config = ExperimentConfig {
        domain: domain.into(),
        agent: agent.into(),
        depth: d,
        trajectories: t,
        width: c,
        cap: n,
        gamma,
        runs,
        episodes,
        steps,
        seed,
        ..Default::default()
    };
    let records = harness::run_experiment(&config).map_err(py_err)?;
    Ok(harness::to_csv_string(&records))
}

/// `(name, passed, detail)` for every selftest check.
#[pyfunction]
fn selftest() -> Vec<(String, bool, String)> {
    harness::selftest::run_selftest().checks.into_iter().map(|c| (c.name.to_string(), c.passed, c.detail)).collect()
}

#[pymodule]
fn bfs3(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TabularMdp>()?;
    m.add_class::<SuffStats>()?;
    m.add_class::<Bfs3Agent>()?;
    m.add_function(wrap_pyfunction!(value_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_policy, m)?)?;
    m.add_function(wrap_pyfunction!(random_tabular_mdp, m)?)?;
    m.add_function(wrap_pyfunction!(fsss_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
