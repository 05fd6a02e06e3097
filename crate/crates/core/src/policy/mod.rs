//! Closed-loop navigation policies and the train-and-select procedure that
//! produces them.
//!
//! Both policy families are small reactive controllers over hand-chosen
//! features with a real-valued parameter vector, so any derivative-free
//! optimiser can search them.
//!
//! The indoor controller picks a travel direction among a fan of candidate
//! headings: the one best aligned with the goal whose swept corridor is
//! clear of scan returns for a look-ahead distance. A clear line to the goal
//! short-cuts the search. Parameters, in order:
//!
//! | idx | meaning |
//! |-----|---------|
//! | 0 | turn gain on the chosen direction |
//! | 1 | speed gain on goal range (through `tanh`) |
//! | 2 | exponent on `max(0, cos error)` speed alignment |
//! | 3 | corridor half-width, metres |
//! | 4 | look-ahead a candidate corridor must clear, metres |
//! | 5 | preference for the current heading |
//! | 6 | preference for longer clear corridors |
//! | 7 | centring turn gain on left/right clearance |
//! | 8 | frontal stop distance, metres |
//! | 9 | frontal slow-down span, metres |
//!
//! Aerial parameters: position gain, cruise speed cap, velocity gain,
//! acceleration cap, swing-rate damping, swing-angle feedback.

mod io;
mod reward;
mod rollout;
mod train;

pub use io::{load_policy, parse_policy, render_policy, save_policy};
pub use reward::RewardConfig;
pub use rollout::{evaluate_policy, rollout_episode, EpisodeOutcome, Episodes, PolicyEpisodes, PolicyStats, Termination};
pub use train::{episode_horizon, train_policy_search, CandidateRecord, Fitness, TrainConfig, TrainOutcome};

use crate::dynamics::{
    ray_offset, wrap_angle, Action, AerialParams, IndoorObservation, IndoorParams, QuadLoadState, SCAN_MAX_RANGE, SCAN_RAYS,
};
use crate::error::{Error, Result};
use crate::sim::{Observation, Task};
use crate::workspace::ConfigPoint;

/// Maps an observation to a bounded action.
pub trait Controller: Sync {
    fn act(&self, obs: &Observation) -> Result<Action>;
}

impl<C: Controller + ?Sized> Controller for &C {
    fn act(&self, obs: &Observation) -> Result<Action> {
        (**self).act(obs)
    }
}

/// Candidate travel directions, spread evenly over `[-CANDIDATE_SPAN, CANDIDATE_SPAN]`.
pub const CANDIDATE_DIRECTIONS: usize = 37;
/// Candidates stay well inside the scan so corridors are fully observed.
pub const CANDIDATE_SPAN: f64 = std::f64::consts::FRAC_PI_2;
pub const INDOOR_PARAM_COUNT: usize = 10;
pub const AERIAL_PARAM_COUNT: usize = 6;
/// Cruise speed the reference aerial controller is tuned around, m/s.
pub const AERIAL_CRUISE_SPEED: f64 = 1.0;

/// Task-specific constants the policy needs to turn features into actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Features {
    Indoor { track_width: f64 },
    Aerial { pendulum_length: f64, gravity: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    task: Task,
    params: Vec<f64>,
    /// Wheel speed bound (indoor) or per-axis acceleration bound (aerial).
    limit: f64,
    features: Features,
    pub training_seed: Option<u64>,
    pub fitness: Option<Fitness>,
}

impl Policy {
    pub fn new(task: Task, params: Vec<f64>, limit: f64, features: Features) -> Result<Self> {
        let expected = match task {
            Task::Indoor => INDOOR_PARAM_COUNT,
            Task::Aerial => AERIAL_PARAM_COUNT,
        };
        if params.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{task} policy takes {expected} parameters, got {}",
                params.len()
            )));
        }
        if !(limit > 0.0) || !limit.is_finite() {
            return Err(Error::InvalidParameter("actuator limit must be positive".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("policy parameters must be finite".into()));
        }
        match (task, features) {
            (Task::Indoor, Features::Indoor { .. }) | (Task::Aerial, Features::Aerial { .. }) => {}
            _ => return Err(Error::InvalidParameter("features do not match task".into())),
        }
        Ok(Self {
            task,
            params,
            limit,
            features,
            training_seed: None,
            fitness: None,
        })
    }

    /// Hand-tuned starting point for indoor search.
    pub fn reference_indoor(params: &IndoorParams) -> Self {
        Self::new(
            Task::Indoor,
            vec![2.0, 1.2, 2.0, 0.5, 1.5, 0.3, 0.2, 0.3, 0.3, 0.9],
            params.v_max,
            Features::Indoor {
                track_width: params.track_width,
            },
        )
        .expect("reference indoor policy is valid")
    }

    /// Hand-tuned starting point for aerial search.
    pub fn reference_aerial(params: &AerialParams) -> Self {
        Self::new(
            Task::Aerial,
            vec![0.6, AERIAL_CRUISE_SPEED, 1.2, 0.8, 2.0, 0.0],
            params.a_max,
            Features::Aerial {
                pendulum_length: params.pendulum_length,
                gravity: params.gravity,
            },
        )
        .expect("reference aerial policy is valid")
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn features(&self) -> Features {
        self.features
    }

    /// Same features and bounds, different parameters.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::new(self.task, params, self.limit, self.features)
    }

    fn act_indoor(&self, o: &IndoorObservation, track_width: f64) -> Result<Action> {
        if o.scan.len() != SCAN_RAYS {
            return Err(Error::DimensionMismatch(format!(
                "indoor observation needs {SCAN_RAYS} rays, got {}",
                o.scan.len()
            )));
        }
        let p = &self.params;
        let v_max = self.limit;
        let (k_turn, k_speed, align) = (p[0], p[1].abs(), p[2].abs());
        let (half_width, look) = (p[3].abs(), p[4].abs().max(1e-3));
        let (w_heading, w_clear, k_center) = (p[5], p[6], p[7]);
        let (stop, slow) = (p[8].abs(), p[9].abs().max(1e-3));

        let hits = scan_hits(&o.scan);
        let bearing = wrap_angle(sanitize(o.goal_bearing, 0.0));
        let range = sanitize(o.goal_range, 0.0).max(0.0);
        let need = range.min(look);

        let direction = if bearing.abs() > CANDIDATE_SPAN
            || corridor_length(&hits, bearing, half_width, need) >= need
        {
            bearing
        } else {
            let mut best = (f64::NEG_INFINITY, bearing);
            let mut longest = (f64::NEG_INFINITY, bearing);
            for k in 0..CANDIDATE_DIRECTIONS {
                let theta = -CANDIDATE_SPAN + 2.0 * CANDIDATE_SPAN * k as f64 / (CANDIDATE_DIRECTIONS - 1) as f64;
                let len = corridor_length(&hits, theta, half_width, look);
                if len > longest.0 {
                    longest = (len, theta);
                }
                if len >= need {
                    let score = (theta - bearing).cos() + w_heading * theta.cos() + w_clear * len / look;
                    if score > best.0 {
                        best = (score, theta);
                    }
                }
            }
            if best.0.is_finite() {
                best.1
            } else {
                longest.1
            }
        };

        let (left, right) = side_clearance(&hits, half_width + look);
        let omega = k_turn * direction + k_center * (left - right) / look;
        let omega_max = 2.0 * v_max / track_width;
        let omega = sanitize(omega, 0.0).clamp(-omega_max, omega_max);

        let alignment = direction.cos().max(0.0).powf(align);
        let front = corridor_length(&hits, 0.0, half_width, stop + slow);
        let brake = ((front - stop) / slow).clamp(0.0, 1.0);
        let half = omega * track_width / 2.0;
        let v = (v_max * (k_speed * range).tanh() * alignment * brake).min(v_max - half.abs());
        let v = sanitize(v, 0.0).max(0.0);

        Ok(Action::Wheels {
            left: sanitize(v - half, 0.0).clamp(-v_max, v_max),
            right: sanitize(v + half, 0.0).clamp(-v_max, v_max),
        })
    }

    fn act_aerial(&self, s: &QuadLoadState, goal: &ConfigPoint, length: f64, gravity: f64) -> Result<Action> {
        let p = &self.params;
        let (kp, v_cap, kv) = (p[0].abs(), p[1].abs(), p[2].abs());
        let a_cap = p[3].abs().min(self.limit);
        let (damp, swing) = (p[4], p[5]);

        let err = [goal.x - s.position[0], goal.y - s.position[1], goal.z - s.position[2]];
        let mut v_des = err.map(|e| kp * e);
        scale_to_norm(&mut v_des, v_cap);
        let mut a = [0.0; 3];
        for i in 0..3 {
            a[i] = kv * (v_des[i] - s.velocity[i]);
        }
        // Cable x offset follows phi, y offset follows psi.
        a[0] += length * damp * s.eta_dot[1] + gravity * swing * s.eta[1];
        a[1] += length * damp * s.eta_dot[0] + gravity * swing * s.eta[0];
        let mut a = a.map(|c| sanitize(c, 0.0));
        scale_to_norm(&mut a, a_cap);
        Ok(Action::Accel(a.map(|c| c.clamp(-self.limit, self.limit))))
    }
}

impl Controller for Policy {
    fn act(&self, obs: &Observation) -> Result<Action> {
        match (obs, self.features) {
            (Observation::Indoor(o), Features::Indoor { track_width }) => self.act_indoor(o, track_width),
            (
                Observation::Aerial { state, goal },
                Features::Aerial {
                    pendulum_length,
                    gravity,
                },
            ) => self.act_aerial(state, goal, pendulum_length, gravity),
            _ => Err(Error::DimensionMismatch(format!(
                "{} policy cannot act on this observation",
                self.task
            ))),
        }
    }
}

fn sanitize(v: f64, fallback: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        fallback
    }
}

fn scale_to_norm(v: &mut [f64; 3], cap: f64) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > cap && n > 0.0 {
        let k = cap / n;
        v.iter_mut().for_each(|c| *c *= k);
    }
}

/// Scan returns as points in the robot frame. Rays that reach the sensor
/// span, or read non-finite, saw nothing.
fn scan_hits(scan: &[f64]) -> Vec<(f64, f64)> {
    scan.iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite() && **r < NO_RETURN_RANGE)
        .map(|(i, r)| {
            let r = r.max(0.0);
            let a = ray_offset(i);
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Readings this close to the sensor span are treated as open space.
const NO_RETURN_RANGE: f64 = 0.95 * SCAN_MAX_RANGE;

/// How far a strip of the given half-width can sweep along `theta` before
/// touching a return, capped at `cap`.
fn corridor_length(hits: &[(f64, f64)], theta: f64, half_width: f64, cap: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let mut len = cap;
    for &(x, y) in hits {
        let along = x * c + y * s;
        let lateral = (y * c - x * s).abs();
        if along >= 0.0 && lateral < half_width {
            len = len.min((along - (half_width * half_width - lateral * lateral).sqrt()).max(0.0));
        }
    }
    len
}

/// Nearest return on each side of the heading within `cap`, left then right.
fn side_clearance(hits: &[(f64, f64)], cap: f64) -> (f64, f64) {
    let (mut left, mut right) = (cap, cap);
    for &(x, y) in hits {
        if x.abs() < cap {
            if y > 0.0 {
                left = left.min(y);
            } else {
                right = right.min(-y);
            }
        }
    }
    (left, right)
}
