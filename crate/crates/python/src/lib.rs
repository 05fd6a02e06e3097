//! Python bindings: maps, simulators, policies, roadmaps, queries and
//! execution. Long-running calls release the GIL.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use prmrl::config::ScenarioConfig;
use prmrl::connect::{rl_add_edge, sl_connect, EdgeEvalParams, EdgeEvalResult};
use prmrl::policy::{self, RewardConfig, TrainConfig};
use prmrl::roadmap::{self, EdgeWeight, Planner, QueryOptions, QueryResult};
use prmrl::runner::{self, TrajectoryRecord};
use prmrl::sim::{AerialSim, IndoorSim, Simulator, Task};
use prmrl::workspace::{self, maze, ConfigPoint, OccupancyGrid, DEFAULT_INFLATION_RADIUS};

fn py_err(e: prmrl::Error) -> PyErr {
    match e {
        prmrl::Error::Io(_) | prmrl::Error::Image { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for prmrl::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn point(task: Task, v: &[f64]) -> PyResult<ConfigPoint> {
    match (task, v) {
        (Task::Indoor, [x, y]) => Ok(ConfigPoint::planar(*x, *y)),
        (Task::Aerial, [x, y, z]) => Ok(ConfigPoint::spatial(*x, *y, *z)),
        (Task::Indoor, _) => Err(PyValueError::new_err("indoor points are (x, y)")),
        (Task::Aerial, _) => Err(PyValueError::new_err("aerial points are (x, y, z)")),
    }
}

fn coords(task: Task, p: &ConfigPoint) -> Vec<f64> {
    match task {
        Task::Indoor => vec![p.x, p.y],
        Task::Aerial => vec![p.x, p.y, p.z],
    }
}

fn parse_task(s: &str) -> PyResult<Task> {
    s.parse().map_err(py_err)
}

/// Occupancy grid with inflated obstacles.
#[pyclass(module = "prmrl", frozen)]
struct Grid {
    inner: OccupancyGrid,
}

#[pymethods]
impl Grid {
    /// Loads a graymap and its `.meta` sidecar.
    #[staticmethod]
    #[pyo3(signature = (path, inflation=None))]
    fn load(path: PathBuf, inflation: Option<f64>) -> PyResult<Self> {
        let (inner, _) = workspace::load_map(&path, inflation).py()?;
        Ok(Self { inner })
    }

    /// Procedural maze keyed by seed and dimensions.
    #[staticmethod]
    #[pyo3(signature = (seed, width=20.0, height=20.0, corridor=2.5, inflation=None))]
    fn maze(seed: u64, width: f64, height: f64, corridor: f64, inflation: Option<f64>) -> PyResult<Self> {
        let spec = maze::MazeSpec::new(seed, width, height, corridor);
        let raster = maze::generate(&spec).py()?;
        let inner = OccupancyGrid::load(&raster, spec.resolution, inflation.unwrap_or(DEFAULT_INFLATION_RADIUS)).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn extent(&self) -> (f64, f64) {
        self.inner.extent()
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution()
    }

    #[getter]
    fn free_area(&self) -> f64 {
        self.inner.free_area()
    }

    #[getter]
    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn is_free(&self, x: f64, y: f64) -> bool {
        self.inner.is_free(&ConfigPoint::planar(x, y))
    }
}

enum AnySim {
    Indoor(IndoorSim),
    Aerial(AerialSim),
}

macro_rules! dispatch {
    ($env:expr, |$sim:ident| $body:expr) => {
        match &$env.sim {
            AnySim::Indoor($sim) => $body,
            AnySim::Aerial($sim) => $body,
        }
    };
}

/// A grid paired with task dynamics.
#[pyclass(module = "prmrl", frozen)]
struct Environment {
    sim: AnySim,
    map_hash: String,
}

#[pymethods]
impl Environment {
    #[new]
    #[pyo3(signature = (grid, task="indoor", config=None))]
    fn new(grid: &Grid, task: &str, config: Option<PathBuf>) -> PyResult<Self> {
        let scenario = match config {
            Some(p) => ScenarioConfig::load(&p).py()?,
            None => ScenarioConfig::default(),
        };
        let g = grid.inner.clone();
        let sim = match parse_task(task)? {
            Task::Indoor => AnySim::Indoor(IndoorSim::new(g, scenario.indoor).py()?),
            Task::Aerial => AnySim::Aerial(AerialSim::new(g, scenario.aerial).py()?),
        };
        Ok(Self {
            sim,
            map_hash: grid.inner.content_hash(),
        })
    }

    #[getter]
    fn task(&self) -> String {
        self.task_kind().to_string()
    }

    #[getter]
    fn dt(&self) -> f64 {
        dispatch!(self, |s| s.dt())
    }

    fn is_free(&self, point: Vec<f64>) -> PyResult<bool> {
        let p = point_for(self, &point)?;
        Ok(dispatch!(self, |s| s.config_free(&p)))
    }

    /// Default edge parameters for this environment's speed and period.
    #[pyo3(signature = (radius=10.0))]
    fn edge_params(&self, radius: f64) -> EdgeParams {
        let inner = dispatch!(self, |s| EdgeEvalParams::for_simulator(s).with_radius(s, radius));
        EdgeParams { inner }
    }
}

impl Environment {
    fn task_kind(&self) -> Task {
        dispatch!(self, |s| s.task())
    }
}

fn point_for(env: &Environment, v: &[f64]) -> PyResult<ConfigPoint> {
    point(env.task_kind(), v)
}

/// Edge acceptance settings.
#[pyclass(module = "prmrl")]
struct EdgeParams {
    inner: EdgeEvalParams,
}

#[pymethods]
impl EdgeParams {
    #[new]
    #[pyo3(signature = (p_success=0.85, num_attempts=20, epsilon=0.5, max_steps=200, connection_radius=10.0))]
    fn new(p_success: f64, num_attempts: u32, epsilon: f64, max_steps: u64, connection_radius: f64) -> PyResult<Self> {
        let inner = EdgeEvalParams {
            p_success,
            num_attempts,
            epsilon,
            max_steps,
            connection_radius,
        };
        inner.validate().py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn p_success(&self) -> f64 {
        self.inner.p_success
    }

    #[getter]
    fn num_attempts(&self) -> u32 {
        self.inner.num_attempts
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn max_steps(&self) -> u64 {
        self.inner.max_steps
    }

    #[getter]
    fn connection_radius(&self) -> f64 {
        self.inner.connection_radius
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "EdgeParams(p_success={}, num_attempts={}, epsilon={}, max_steps={}, connection_radius={})",
            p.p_success, p.num_attempts, p.epsilon, p.max_steps, p.connection_radius
        )
    }
}

/// Navigation policy.
#[pyclass(module = "prmrl", frozen)]
struct Policy {
    inner: policy::Policy,
}

#[pymethods]
impl Policy {
    /// Hand-tuned starting controller for the environment's task.
    #[staticmethod]
    fn reference(env: &Environment) -> Self {
        let inner = match &env.sim {
            AnySim::Indoor(s) => policy::Policy::reference_indoor(s.params()),
            AnySim::Aerial(s) => policy::Policy::reference_aerial(s.params()),
        };
        Self { inner }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: policy::load_policy(&path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        policy::save_policy(&self.inner, &path).py()
    }

    /// Derivative-free search starting from `self`; returns the best candidate.
    #[pyo3(signature = (env, seed=0, population=24, iterations=20, episodes=64, max_steps=None, max_goal_distance=8.0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &self,
        py: Python<'_>,
        env: &Environment,
        seed: u64,
        population: usize,
        iterations: usize,
        episodes: usize,
        max_steps: Option<u64>,
        max_goal_distance: f64,
    ) -> PyResult<Self> {
        let initial = self.inner.clone();
        let out = py.detach(|| {
            dispatch!(env, |s| {
                let cfg = TrainConfig {
                    population,
                    iterations,
                    episodes,
                    max_steps: max_steps.unwrap_or_else(|| policy::episode_horizon(s, max_goal_distance)),
                    max_goal_distance,
                    seed,
                    ..TrainConfig::default()
                };
                policy::train_policy_search(s, &initial, &cfg, &RewardConfig::default(), |_, _| {})
            })
        });
        Ok(Self { inner: out.py()?.policy })
    }

    #[getter]
    fn task(&self) -> String {
        self.inner.task().to_string()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    /// `(success_rate, mean_return)` recorded by training, if any.
    #[getter]
    fn fitness(&self) -> Option<(f64, f64)> {
        self.inner.fitness.map(|f| (f.success_rate, f.mean_return))
    }
}

/// Outcome of one edge evaluation.
#[pyclass(module = "prmrl", frozen, get_all)]
struct EdgeResult {
    accepted: bool,
    success_rate: f64,
    mean_length: f64,
    mean_steps: f64,
    collision_checks: u64,
    trials: u32,
    successes: u32,
    early_terminated: bool,
}

impl From<EdgeEvalResult> for EdgeResult {
    fn from(r: EdgeEvalResult) -> Self {
        Self {
            accepted: r.accepted,
            success_rate: r.success_rate,
            mean_length: r.mean_length,
            mean_steps: r.mean_steps,
            collision_checks: r.collision_checks_used,
            trials: r.trials,
            successes: r.successes,
            early_terminated: r.early_terminated,
        }
    }
}

/// Evaluates one edge with rollouts of `policy`, or by line of sight when
/// no policy is given.
#[pyfunction]
#[pyo3(signature = (env, start, goal, params, policy=None, seed=0))]
fn evaluate_edge(
    py: Python<'_>,
    env: &Environment,
    start: Vec<f64>,
    goal: Vec<f64>,
    params: &EdgeParams,
    policy: Option<&Policy>,
    seed: u64,
) -> PyResult<EdgeResult> {
    let (s, g) = (point_for(env, &start)?, point_for(env, &goal)?);
    let p = params.inner;
    let r = py.detach(|| {
        dispatch!(env, |sim| match policy {
            Some(pol) => rl_add_edge(sim, &pol.inner, &s, &g, &p, seed),
            None => sl_connect(sim, &s, &g, &p),
        })
    });
    Ok(r.py()?.into())
}

fn planner<'a>(rm: &roadmap::Roadmap, policy: Option<&'a Policy>) -> PyResult<Planner<'a>> {
    match (rm.meta.planner, policy) {
        (roadmap::PlannerKind::StraightLine, _) => Ok(Planner::StraightLine),
        (roadmap::PlannerKind::Rollout, Some(p)) => Ok(Planner::Rollout(&p.inner)),
        (roadmap::PlannerKind::Rollout, None) => Err(PyValueError::new_err("rl roadmap requires a policy")),
    }
}

/// A roadmap: sampled nodes plus accepted directed edges.
#[pyclass(module = "prmrl", frozen)]
struct Roadmap {
    inner: roadmap::Roadmap,
}

#[pymethods]
impl Roadmap {
    /// Builds a straight-line roadmap, or a rollout roadmap when `policy` is given.
    #[staticmethod]
    #[pyo3(signature = (env, density, params, policy=None, seed=0))]
    fn build(
        py: Python<'_>,
        env: &Environment,
        density: f64,
        params: &EdgeParams,
        policy: Option<&Policy>,
        seed: u64,
    ) -> PyResult<Self> {
        let planner = match policy {
            Some(p) => Planner::Rollout(&p.inner),
            None => Planner::StraightLine,
        };
        let p = params.inner;
        let inner = py.detach(|| dispatch!(env, |s| roadmap::build(s, density, &planner, &p, seed, &env.map_hash)));
        Ok(Self { inner: inner.py()? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: roadmap::load_roadmap(&path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        roadmap::save_roadmap(&self.inner, &path).py()
    }

    #[getter]
    fn planner(&self) -> String {
        self.inner.meta.planner.to_string()
    }

    #[getter]
    fn collision_checks(&self) -> u64 {
        self.inner.meta.collision_checks
    }

    #[getter]
    fn nodes(&self) -> Vec<Vec<f64>> {
        let t = self.inner.meta.task;
        self.inner.nodes.iter().map(|p| coords(t, p)).collect()
    }

    /// `(from, to, success_rate, mean_length, mean_steps)` tuples.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64, f64, f64)> {
        self.inner
            .edges
            .iter()
            .map(|e| (e.from, e.to, e.success_rate, e.mean_length, e.mean_steps))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    /// Plans from `start` to `goal`; `None` when they are not connected.
    #[pyo3(signature = (env, start, goal, policy=None, weight="length", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn query(
        &self,
        py: Python<'_>,
        env: &Environment,
        start: Vec<f64>,
        goal: Vec<f64>,
        policy: Option<&Policy>,
        weight: &str,
        seed: u64,
    ) -> PyResult<Option<Plan>> {
        let (s, g) = (point_for(env, &start)?, point_for(env, &goal)?);
        let weight = match weight {
            "length" => EdgeWeight::Length,
            "neg-log-success" => EdgeWeight::NegLogSuccess,
            other => return Err(PyValueError::new_err(format!("unknown weight `{other}`"))),
        };
        let planner = planner(&self.inner, policy)?;
        let options = QueryOptions {
            weight,
            ..QueryOptions::default()
        };
        let rm = &self.inner;
        let r = py.detach(|| dispatch!(env, |sim| roadmap::query(rm, sim, &planner, &s, &g, &options, seed)));
        Ok(r.py()?.map(|inner| Plan {
            inner,
            params: rm.meta.params,
        }))
    }
}

/// A waypoint plan returned by a query.
#[pyclass(module = "prmrl", frozen)]
struct Plan {
    inner: QueryResult,
    params: EdgeEvalParams,
}

#[pymethods]
impl Plan {
    #[getter]
    fn waypoints(&self) -> Vec<(f64, f64, f64)> {
        self.inner.waypoints.iter().map(|p| (p.x, p.y, p.z)).collect()
    }

    #[getter]
    fn n_w(&self) -> usize {
        self.inner.n_w()
    }

    #[getter]
    fn expected_success(&self) -> f64 {
        self.inner.expected_success
    }

    #[getter]
    fn expected_length(&self) -> f64 {
        self.inner.expected_length
    }

    #[getter]
    fn success_lower_bound(&self) -> f64 {
        roadmap::success_lower_bound(self.params.p_success, self.inner.n_w() as f64)
    }

    /// Drives `policy` along the plan with the roadmap's tolerance and step cap.
    #[pyo3(signature = (env, policy, seed=0))]
    fn execute(&self, py: Python<'_>, env: &Environment, policy: &Policy, seed: u64) -> PyResult<Trajectory> {
        let p = self.params;
        let r = py.detach(|| {
            dispatch!(env, |sim| runner::execute(sim, &policy.inner, &self.inner, p.epsilon, p.max_steps, seed))
        });
        Ok(Trajectory { inner: r.py()? })
    }
}

/// An executed trajectory.
#[pyclass(module = "prmrl", frozen)]
struct Trajectory {
    inner: TrajectoryRecord,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn success(&self) -> bool {
        self.inner.success
    }

    #[getter]
    fn termination(&self) -> String {
        format!("{:?}", self.inner.termination).to_lowercase()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[getter]
    fn positions(&self) -> Vec<(f64, f64, f64)> {
        std::iter::once(self.inner.start)
            .chain(self.inner.steps.iter().map(|s| s.position))
            .map(|p| (p.x, p.y, p.z))
            .collect()
    }

    #[getter]
    fn max_displacement(&self) -> Option<f64> {
        self.inner.max_displacement()
    }

    fn __len__(&self) -> usize {
        self.inner.step_count()
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        runner::export_trajectory(&self.inner, &path).py()
    }
}

/// `p_success ** n_w`, the plan success bound for `n_w` accepted edges.
#[pyfunction]
fn success_lower_bound(p_success: f64, n_w: f64) -> f64 {
    roadmap::success_lower_bound(p_success, n_w)
}

#[pymodule]
#[pyo3(name = "prmrl")]
fn prmrl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<Environment>()?;
    m.add_class::<EdgeParams>()?;
    m.add_class::<Policy>()?;
    m.add_class::<EdgeResult>()?;
    m.add_class::<Roadmap>()?;
    m.add_class::<Plan>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(evaluate_edge, m)?)?;
    m.add_function(wrap_pyfunction!(success_lower_bound, m)?)?;
    Ok(())
}
