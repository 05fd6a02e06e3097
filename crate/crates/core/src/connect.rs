//! Local planners deciding whether two configurations can be joined by an
//! edge: straight-line interpolation and Monte Carlo policy rollouts.
//!
//! The rollout connector runs up to `num_attempts` trials. Each trial samples
//! full states around both endpoints, drives the policy from one to the
//! other, and succeeds if it ends within `epsilon` of the goal configuration
//! without violating the task predicate. With `needed = p_success *
//! num_attempts`, the evaluation stops early (rejecting the edge) as soon as
//! `needed > successes` after more than `needed` trials. An edge is accepted
//! only if `successes / trials > p_success`.

use crate::error::{Error, Result};
use crate::policy::{rollout_episode, Controller, RewardConfig};
use crate::seed::{self, SimRng};
use crate::sim::Simulator;
use crate::workspace::ConfigPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvalParams {
    pub p_success: f64,
    pub num_attempts: u32,
    /// Goal tolerance, metres.
    pub epsilon: f64,
    pub max_steps: u64,
    /// Neighbour radius used by roadmap construction, metres.
    pub connection_radius: f64,
}

impl Default for EdgeEvalParams {
    fn default() -> Self {
        Self {
            p_success: 0.85,
            num_attempts: 20,
            epsilon: 0.5,
            max_steps: default_max_steps(10.0, 1.0, 0.2),
            connection_radius: 10.0,
        }
    }
}

/// `ceil(4 * radius / (speed * dt))`: four times the steps needed to cover
/// the connection radius in a straight line at top speed.
pub fn default_max_steps(connection_radius: f64, speed: f64, dt: f64) -> u64 {
    (4.0 * connection_radius / (speed * dt)).ceil().max(1.0) as u64
}

impl EdgeEvalParams {
    /// Defaults with `max_steps` sized for the simulator's speed and period.
    pub fn for_simulator<S: Simulator>(sim: &S) -> Self {
        let d = Self::default();
        Self {
            max_steps: default_max_steps(d.connection_radius, sim.nominal_speed(), sim.dt()),
            ..d
        }
    }

    /// Recomputes `max_steps` after changing the radius.
    pub fn with_radius<S: Simulator>(self, sim: &S, connection_radius: f64) -> Self {
        Self {
            connection_radius,
            max_steps: default_max_steps(connection_radius, sim.nominal_speed(), sim.dt()),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_success) {
            return Err(Error::InvalidParameter(format!(
                "p_success must lie in [0, 1], got {}",
                self.p_success
            )));
        }
        if self.num_attempts == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter("num_attempts and max_steps must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.connection_radius > 0.0) {
            return Err(Error::InvalidParameter("connection radius must be positive".into()));
        }
        Ok(())
    }

    /// Upper bound on collision checks for one rollout evaluation.
    pub fn check_budget(&self) -> u64 {
        self.max_steps * self.num_attempts as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvalResult {
    pub accepted: bool,
    pub success_rate: f64,
    /// Mean over successful trials, metres. NaN when no trial succeeded;
    /// 0 for early-terminated evaluations.
    pub mean_length: f64,
    pub mean_steps: f64,
    pub collision_checks_used: u64,
    /// Trials actually run.
    pub trials: u32,
    pub successes: u32,
    pub early_terminated: bool,
}

/// Result of one rollout trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    pub steps: u64,
    /// Path length including the terminal remainder to the goal.
    pub length: f64,
}

/// Runs trial `index` of an edge. Implementations must be pure functions of
/// the index so trials can be replayed in any order.
pub trait TrialRunner: Sync {
    fn run_trial(&self, index: u32) -> Result<TrialOutcome>;
}

/// The acceptance bookkeeping over sequential trials.
pub fn evaluate_trials<R: TrialRunner + ?Sized>(runner: &R, params: &EdgeEvalParams) -> Result<EdgeEvalResult> {
    params.validate()?;
    let needed = params.p_success * params.num_attempts as f64;
    let mut successes = 0u32;
    let mut length = 0.0;
    let mut steps = 0u64;
    let mut checks = 0u64;
    let mut i = 0u32;
    while i < params.num_attempts {
        let trial = runner.run_trial(i)?;
        i += 1;
        checks += trial.steps.min(params.max_steps);
        if trial.success {
            successes += 1;
            length += trial.length;
            steps += trial.steps;
        }
        if needed > successes as f64 && i as f64 > needed {
            return Ok(EdgeEvalResult {
                accepted: false,
                success_rate: 0.0,
                mean_length: 0.0,
                mean_steps: 0.0,
                collision_checks_used: checks,
                trials: i,
                successes,
                early_terminated: true,
            });
        }
    }
    let success_rate = successes as f64 / i as f64;
    let (mean_length, mean_steps) = if successes == 0 {
        (f64::NAN, f64::NAN)
    } else {
        (length / successes as f64, steps as f64 / successes as f64)
    };
    Ok(EdgeEvalResult {
        accepted: success_rate > params.p_success,
        success_rate,
        mean_length,
        mean_steps,
        collision_checks_used: checks,
        trials: i,
        successes,
        early_terminated: false,
    })
}

/// Samples a full state whose configuration is exactly `c`.
pub fn sample_state_space<S: Simulator>(sim: &S, c: &ConfigPoint, rng: &mut SimRng) -> Result<S::State> {
    sim.sample_state(c, rng)
}

fn require_free<S: Simulator>(sim: &S, c: &ConfigPoint) -> Result<()> {
    if sim.config_free(c) {
        Ok(())
    } else {
        Err(Error::NotFree { x: c.x, y: c.y, z: c.z })
    }
}

/// Straight-line baseline: a single deterministic trial.
pub fn sl_connect<S: Simulator>(sim: &S, s: &ConfigPoint, g: &ConfigPoint, params: &EdgeEvalParams) -> Result<EdgeEvalResult> {
    params.validate()?;
    require_free(sim, s)?;
    require_free(sim, g)?;
    let (free, checks) = sim.segment_check(s, g);
    let d = s.distance(g);
    Ok(EdgeEvalResult {
        accepted: free,
        success_rate: if free { 1.0 } else { 0.0 },
        mean_length: if free { d } else { f64::NAN },
        mean_steps: if free { (d / (sim.nominal_speed() * sim.dt())).ceil() } else { f64::NAN },
        collision_checks_used: checks,
        trials: 1,
        successes: free as u32,
        early_terminated: false,
    })
}

/// Policy rollouts between two fixed configurations.
pub struct RolloutTrials<'a, S: Simulator, C: Controller + ?Sized> {
    pub sim: &'a S,
    pub policy: &'a C,
    pub start: ConfigPoint,
    pub goal: ConfigPoint,
    pub epsilon: f64,
    pub max_steps: u64,
    pub edge_seed: u64,
}

impl<S: Simulator, C: Controller + ?Sized> TrialRunner for RolloutTrials<'_, S, C> {
    fn run_trial(&self, index: u32) -> Result<TrialOutcome> {
        let mut rng = seed::rng(seed::derive(self.edge_seed, index as u64));
        let s_start = sample_state_space(self.sim, &self.start, &mut rng)?;
        let s_goal = sample_state_space(self.sim, &self.goal, &mut rng)?;
        let goal = self.sim.project(&s_goal);
        let out = match rollout_episode(
            self.sim,
            self.policy,
            &s_start,
            &goal,
            self.max_steps,
            self.epsilon,
            &RewardConfig::default(),
            &mut rng,
        ) {
            Ok(out) => out,
            Err(Error::InvalidStart) => {
                return Ok(TrialOutcome {
                    success: false,
                    steps: 0,
                    length: 0.0,
                })
            }
            Err(e) => return Err(e),
        };
        Ok(TrialOutcome {
            success: out.success,
            steps: out.steps,
            length: out.length + out.final_distance,
        })
    }
}

/// Monte Carlo rollout connector. Trial `i` draws from a generator seeded by
/// `(edge_seed, i)`.
pub fn rl_add_edge<S: Simulator, C: Controller + ?Sized>(
    sim: &S,
    policy: &C,
    s: &ConfigPoint,
    g: &ConfigPoint,
    params: &EdgeEvalParams,
    edge_seed: u64,
) -> Result<EdgeEvalResult> {
    params.validate()?;
    require_free(sim, s)?;
    require_free(sim, g)?;
    let trials = RolloutTrials {
        sim,
        policy,
        start: *s,
        goal: *g,
        epsilon: params.epsilon,
        max_steps: params.max_steps,
        edge_seed,
    };
    evaluate_trials(&trials, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::IndoorParams;
    use crate::policy::Policy;
    use crate::sim::IndoorSim;
    use crate::workspace::OccupancyGrid;
    use proptest::prelude::*;

    /// Replays a fixed success pattern.
    struct Script(Vec<bool>);
    impl TrialRunner for Script {
        fn run_trial(&self, index: u32) -> Result<TrialOutcome> {
            let success = self.0[index as usize];
            Ok(TrialOutcome {
                success,
                steps: if success { 10 } else { 200 },
                length: 2.0,
            })
        }
    }

    fn pattern(successes_first: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| i < successes_first).collect()
    }

    #[test]
    fn eighteen_of_twenty_accepts() {
        let r = evaluate_trials(&Script(pattern(18, 20)), &EdgeEvalParams::default()).unwrap();
        assert!(r.accepted);
        assert_eq!(r.success_rate, 0.9);
        assert_eq!(r.trials, 20);
        assert_eq!(r.mean_length, 2.0);
    }

    #[test]
    fn seventeen_of_twenty_rejects_without_early_exit() {
        let r = evaluate_trials(&Script(pattern(17, 20)), &EdgeEvalParams::default()).unwrap();
        assert!(!r.accepted);
        assert!(!r.early_terminated);
        assert_eq!(r.success_rate, 0.85);
    }

    #[test]
    fn early_exit_happens_at_trial_eighteen() {
        let r = evaluate_trials(&Script(vec![false; 20]), &EdgeEvalParams::default()).unwrap();
        assert!(r.early_terminated);
        assert_eq!(r.trials, 18);
        assert_eq!((r.success_rate, r.mean_length, r.mean_steps), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fractional_needed_can_exit_before_a_higher_threshold() {
        // needed = 0.2: one early failure already stops the evaluation,
        // while needed = 1 keeps going and accepts.
        let mut seq = vec![true; 20];
        seq[0] = false;
        let at = |p: f64| evaluate_trials(&Script(seq.clone()), &EdgeEvalParams { p_success: p, ..EdgeEvalParams::default() }).unwrap();
        assert!(at(0.01).early_terminated);
        assert!(at(0.05).accepted);
    }

    #[test]
    fn needed_is_the_exact_product() {
        assert_eq!(0.85 * 20.0, 17.0);
    }

    fn open_sim(w: usize, h: usize) -> IndoorSim {
        let grid = OccupancyGrid::from_obstacles(w, h, 0.1, (0.0, 0.0), 0.35, &vec![false; w * h]).unwrap();
        IndoorSim::new(grid, IndoorParams::default()).unwrap()
    }

    #[test]
    fn sl_counts_interpolation_points() {
        let sim = open_sim(100, 100);
        let (a, b) = (ConfigPoint::planar(2.0, 2.0), ConfigPoint::planar(5.0, 2.0));
        let r = sl_connect(&sim, &a, &b, &EdgeEvalParams::default()).unwrap();
        assert!(r.accepted);
        assert_eq!(r.mean_length, 3.0);
        assert_eq!(r.collision_checks_used, (3.0f64 / 0.05).ceil() as u64 + 1);
    }

    #[test]
    fn endpoints_within_tolerance_succeed_immediately() {
        let sim = open_sim(100, 100);
        let pi = Policy::reference_indoor(sim.params());
        let (a, b) = (ConfigPoint::planar(5.0, 5.0), ConfigPoint::planar(5.3, 5.0));
        let r = rl_add_edge(&sim, &pi, &a, &b, &EdgeEvalParams::default(), 3).unwrap();
        assert!(r.accepted);
        assert_eq!(r.success_rate, 1.0);
        assert_eq!(r.collision_checks_used, 0);
        assert!((r.mean_length - 0.3).abs() < 1e-12);
    }

    #[test]
    fn blocked_endpoint_is_an_error() {
        let mut mask = vec![false; 10000];
        mask[50 * 100 + 50] = true;
        let grid = OccupancyGrid::from_obstacles(100, 100, 0.1, (0.0, 0.0), 0.0, &mask).unwrap();
        let sim = IndoorSim::new(grid, IndoorParams::default()).unwrap();
        let blocked = ConfigPoint::planar(5.05, 5.05);
        let free = ConfigPoint::planar(2.0, 2.0);
        assert!(sl_connect(&sim, &blocked, &free, &EdgeEvalParams::default()).is_err());
        let pi = Policy::reference_indoor(sim.params());
        assert!(rl_add_edge(&sim, &pi, &free, &blocked, &EdgeEvalParams::default(), 0).is_err());
    }

    #[test]
    fn rollout_edge_is_seed_deterministic() {
        let sim = open_sim(100, 100);
        let pi = Policy::reference_indoor(sim.params());
        let (a, b) = (ConfigPoint::planar(2.0, 2.0), ConfigPoint::planar(6.0, 7.0));
        let p = EdgeEvalParams::for_simulator(&sim);
        let r1 = rl_add_edge(&sim, &pi, &a, &b, &p, 11).unwrap();
        let r2 = rl_add_edge(&sim, &pi, &a, &b, &p, 11).unwrap();
        assert_eq!(format!("{r1:?}"), format!("{r2:?}"));
        assert!(r1.collision_checks_used <= p.check_budget());
    }

    proptest! {
        #[test]
        fn bookkeeping_invariants(outcomes in prop::collection::vec(any::<bool>(), 20), p in 0.0f64..1.0) {
            let params = EdgeEvalParams { p_success: p, ..EdgeEvalParams::default() };
            let r = evaluate_trials(&Script(outcomes.clone()), &params).unwrap();
            prop_assert!(r.collision_checks_used <= params.check_budget());
            let needed = p * 20.0;
            if r.early_terminated {
                prop_assert!(!r.accepted);
                prop_assert!(r.trials as f64 > needed);
                prop_assert!((r.successes as f64) < needed);
            } else {
                prop_assert_eq!(r.trials, 20);
                let k = outcomes.iter().filter(|&&s| s).count() as f64;
                prop_assert_eq!(r.accepted, k / 20.0 > p);
            }
        }

        #[test]
        fn raising_threshold_never_accepts_more(outcomes in prop::collection::vec(any::<bool>(), 20), a in 0u32..=20, b in 0u32..=20) {
            // Thresholds with an integral `needed`, as with the 0.85 / 20 defaults.
            let (lo, hi) = (a.min(b) as f64 / 20.0, a.max(b) as f64 / 20.0);
            let r_lo = evaluate_trials(&Script(outcomes.clone()), &EdgeEvalParams { p_success: lo, ..EdgeEvalParams::default() }).unwrap();
            let r_hi = evaluate_trials(&Script(outcomes), &EdgeEvalParams { p_success: hi, ..EdgeEvalParams::default() }).unwrap();
            prop_assert!(!r_hi.accepted || r_lo.accepted);
        }
    }
}
