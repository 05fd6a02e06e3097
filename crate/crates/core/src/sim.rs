//! Task simulators: the generative model a policy is rolled through.
//!
//! A [`Simulator`] bundles the workspace, the dynamics and the sensing for
//! one task and exposes the pieces the rollout planner needs: state
//! sampling around a configuration, observation, one control step, the
//! projection onto configuration space and the task predicate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dynamics::{
    diffdrive_step, observe_indoor, quadload_step, Action, AerialParams, DiffDriveState, IndoorObservation,
    IndoorParams, NoiseModel, QuadLoadState,
};
use crate::error::{Error, Result};
use crate::policy::RewardConfig;
use crate::seed::SimRng;
use crate::workspace::{interpolate_check, CellLabel, ConfigPoint, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Indoor,
    Aerial,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Indoor => "indoor",
            Task::Aerial => "aerial",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(Task::Indoor),
            "aerial" => Ok(Task::Aerial),
            other => Err(Error::InvalidParameter(format!("unknown task `{other}`"))),
        }
    }
}

/// What a policy sees.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Indoor(IndoorObservation),
    /// Full vehicle/load state plus the active goal.
    Aerial { state: QuadLoadState, goal: ConfigPoint },
}

/// Outcome of the task predicate on a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateCheck {
    Valid,
    /// Obstacle, inflated band, or outside the map.
    Collision,
    /// Collision-free but a task constraint (load displacement) is violated.
    Constraint,
}

/// A task simulator. Implementations are immutable and shareable across
/// threads; all randomness comes from the caller's generator.
pub trait Simulator: Sync {
    type State: Clone + fmt::Debug + Send + Sync;

    fn task(&self) -> Task;

    /// Control period, seconds.
    fn dt(&self) -> f64;

    /// Nominal top speed, used to size default step budgets.
    fn nominal_speed(&self) -> f64;

    /// Projection of a state onto configuration space.
    fn project(&self, state: &Self::State) -> ConfigPoint;

    /// Task predicate together with the C-free test.
    fn check(&self, state: &Self::State) -> StateCheck;

    fn predicate(&self, state: &Self::State) -> bool {
        self.check(state) == StateCheck::Valid
    }

    fn config_free(&self, c: &ConfigPoint) -> bool;

    fn sample_free(&self, rng: &mut SimRng) -> Result<ConfigPoint>;

    /// Area used to turn a node density into a node count, square metres.
    fn sampling_area(&self) -> f64;

    /// Samples a full state whose projection is exactly `c`.
    fn sample_state(&self, c: &ConfigPoint, rng: &mut SimRng) -> Result<Self::State>;

    fn observe(&self, state: &Self::State, goal: &ConfigPoint, rng: &mut SimRng) -> Result<Observation>;

    fn step(&self, state: &Self::State, action: &Action) -> Result<Self::State>;

    fn reward(&self, state: &Self::State, obs: &Observation, goal: &ConfigPoint, tolerance: f64, cfg: &RewardConfig)
        -> f64;

    /// Straight-line collision check between configurations, returning the
    /// verdict and the number of point checks.
    fn segment_check(&self, a: &ConfigPoint, b: &ConfigPoint) -> (bool, u64);

    /// Whether the system is close enough to rest to switch waypoints.
    fn at_rest(&self, _state: &Self::State) -> bool {
        true
    }

    /// Load displacement in radians, for tasks that have one.
    fn displacement(&self, _state: &Self::State) -> Option<f64> {
        None
    }

    fn state_vector(&self, state: &Self::State) -> Vec<f64>;
}

/// Differential-drive robot in an occupancy grid with a noisy LIDAR.
#[derive(Debug, Clone)]
pub struct IndoorSim {
    grid: OccupancyGrid,
    params: IndoorParams,
    noise: NoiseModel,
}

impl IndoorSim {
    pub fn new(grid: OccupancyGrid, params: IndoorParams) -> Result<Self> {
        params.validate()?;
        let noise = NoiseModel::new(params.sensor_sigma)?;
        Ok(Self { grid, params, noise })
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn params(&self) -> &IndoorParams {
        &self.params
    }

    fn require_free(&self, c: &ConfigPoint) -> Result<()> {
        if self.grid.is_free(c) {
            Ok(())
        } else {
            Err(Error::NotFree { x: c.x, y: c.y, z: c.z })
        }
    }
}

impl Simulator for IndoorSim {
    type State = DiffDriveState;

    fn task(&self) -> Task {
        Task::Indoor
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn nominal_speed(&self) -> f64 {
        self.params.v_max
    }

    fn project(&self, s: &DiffDriveState) -> ConfigPoint {
        s.position()
    }

    fn check(&self, s: &DiffDriveState) -> StateCheck {
        if self.grid.is_free(&s.position()) {
            StateCheck::Valid
        } else {
            StateCheck::Collision
        }
    }

    fn config_free(&self, c: &ConfigPoint) -> bool {
        self.grid.is_free(c)
    }

    fn sample_free(&self, rng: &mut SimRng) -> Result<ConfigPoint> {
        self.grid.sample_free(rng)
    }

    fn sampling_area(&self) -> f64 {
        self.grid.free_area()
    }

    fn sample_state(&self, c: &ConfigPoint, rng: &mut SimRng) -> Result<DiffDriveState> {
        self.require_free(c)?;
        // Uniform on (-pi, pi].
        let heading = PI - rng.random::<f64>() * 2.0 * PI;
        Ok(DiffDriveState { x: c.x, y: c.y, heading })
    }

    fn observe(&self, s: &DiffDriveState, goal: &ConfigPoint, rng: &mut SimRng) -> Result<Observation> {
        observe_indoor(&self.grid, s, goal, &self.noise, rng).map(Observation::Indoor)
    }

    fn step(&self, s: &DiffDriveState, action: &Action) -> Result<DiffDriveState> {
        match *action {
            Action::Wheels { left, right } => diffdrive_step(s, left, right, self.params.dt, &self.params),
            Action::Accel(_) => Err(Error::DimensionMismatch("indoor simulator expects wheel speeds".into())),
        }
    }

    fn reward(&self, s: &DiffDriveState, obs: &Observation, goal: &ConfigPoint, tolerance: f64, cfg: &RewardConfig) -> f64 {
        let clearance = match obs {
            Observation::Indoor(o) => o.min_range(),
            Observation::Aerial { .. } => 0.0,
        };
        cfg.indoor(s.position().distance(goal), tolerance, clearance)
    }

    fn segment_check(&self, a: &ConfigPoint, b: &ConfigPoint) -> (bool, u64) {
        let step = self.grid.resolution() / 2.0;
        interpolate_check(a, b, step, |p| self.grid.is_free(p))
    }

    fn state_vector(&self, s: &DiffDriveState) -> Vec<f64> {
        vec![s.x, s.y, s.heading]
    }
}

/// Quadrotor with a suspended load flying over extruded 2D obstacles.
///
/// A position is free when it lies over the map footprint, between floor and
/// ceiling, and either above `obstacle_height` or over a free cell.
#[derive(Debug, Clone)]
pub struct AerialSim {
    grid: OccupancyGrid,
    params: AerialParams,
}

/// Half-width of the uniform load-angle perturbation when sampling states.
pub const LOAD_ANGLE_SPREAD: f64 = 5.0 * PI / 180.0;

impl AerialSim {
    pub fn new(grid: OccupancyGrid, params: AerialParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { grid, params })
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn params(&self) -> &AerialParams {
        &self.params
    }

    pub fn position_free(&self, p: &ConfigPoint) -> bool {
        if !(p.z >= self.params.floor && p.z <= self.params.ceiling) {
            return false;
        }
        match self.grid.label_at(p) {
            None => false,
            Some(CellLabel::Free) => true,
            Some(_) => p.z > self.params.obstacle_height,
        }
    }
}

impl Simulator for AerialSim {
    type State = QuadLoadState;

    fn task(&self) -> Task {
        Task::Aerial
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn nominal_speed(&self) -> f64 {
        crate::policy::AERIAL_CRUISE_SPEED
    }

    fn project(&self, s: &QuadLoadState) -> ConfigPoint {
        s.position_point()
    }

    fn check(&self, s: &QuadLoadState) -> StateCheck {
        if !self.position_free(&s.position_point()) {
            StateCheck::Collision
        } else if !(s.displacement() < self.params.displacement_bound) {
            StateCheck::Constraint
        } else {
            StateCheck::Valid
        }
    }

    fn config_free(&self, c: &ConfigPoint) -> bool {
        self.position_free(c)
    }

    fn sample_free(&self, rng: &mut SimRng) -> Result<ConfigPoint> {
        let (w, h) = self.grid.extent();
        let (ox, oy) = self.grid.origin();
        for _ in 0..100_000 {
            let p = ConfigPoint::spatial(
                ox + rng.random::<f64>() * w,
                oy + rng.random::<f64>() * h,
                self.params.floor + rng.random::<f64>() * (self.params.ceiling - self.params.floor),
            );
            if self.position_free(&p) {
                return Ok(p);
            }
        }
        Err(Error::NoFreeSpace)
    }

    fn sampling_area(&self) -> f64 {
        let (w, h) = self.grid.extent();
        w * h
    }

    fn sample_state(&self, c: &ConfigPoint, rng: &mut SimRng) -> Result<QuadLoadState> {
        if !self.position_free(c) {
            return Err(Error::NotFree { x: c.x, y: c.y, z: c.z });
        }
        let mut s = QuadLoadState::at_rest(*c);
        s.eta = [
            (2.0 * rng.random::<f64>() - 1.0) * LOAD_ANGLE_SPREAD,
            (2.0 * rng.random::<f64>() - 1.0) * LOAD_ANGLE_SPREAD,
        ];
        Ok(s)
    }

    fn observe(&self, s: &QuadLoadState, goal: &ConfigPoint, _rng: &mut SimRng) -> Result<Observation> {
        Ok(Observation::Aerial { state: *s, goal: *goal })
    }

    fn step(&self, s: &QuadLoadState, action: &Action) -> Result<QuadLoadState> {
        match *action {
            Action::Accel(a) => quadload_step(s, a, self.params.dt, &self.params),
            Action::Wheels { .. } => Err(Error::DimensionMismatch("aerial simulator expects an acceleration".into())),
        }
    }

    fn reward(&self, s: &QuadLoadState, _obs: &Observation, goal: &ConfigPoint, tolerance: f64, cfg: &RewardConfig) -> f64 {
        cfg.aerial(s.position_point().distance(goal), tolerance, s.displacement())
    }

    fn segment_check(&self, a: &ConfigPoint, b: &ConfigPoint) -> (bool, u64) {
        let step = self.grid.resolution() / 2.0;
        interpolate_check(a, b, step, |p| self.position_free(p))
    }

    fn at_rest(&self, s: &QuadLoadState) -> bool {
        s.speed() < AERIAL_REST_SPEED && s.eta_dot[0].hypot(s.eta_dot[1]) < AERIAL_REST_SWING_RATE
    }

    fn displacement(&self, s: &QuadLoadState) -> Option<f64> {
        Some(s.displacement())
    }

    fn state_vector(&self, s: &QuadLoadState) -> Vec<f64> {
        s.to_vector().to_vec()
    }
}

/// Vehicle speed below which the aerial system counts as at rest, m/s.
pub const AERIAL_REST_SPEED: f64 = 0.1;
/// Load angular rate below which the aerial system counts as at rest, rad/s.
pub const AERIAL_REST_SWING_RATE: f64 = 0.2;
