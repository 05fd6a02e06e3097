//! Single closed-loop episodes and Monte Carlo policy statistics.

use rayon::prelude::*;

use super::{Controller, RewardConfig};
use crate::error::{Error, Result};
use crate::seed::{self, SimRng};
use crate::sim::{Simulator, StateCheck};
use crate::workspace::ConfigPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Reached,
    Collision,
    Constraint,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub steps: u64,
    /// Sum of per-step displacements in configuration space, metres.
    pub length: f64,
    pub discounted_return: f64,
    /// Distance from the final projection to the goal.
    pub final_distance: f64,
    pub termination: Termination,
}

/// Runs `controller` from `start` towards `goal` until the goal is within
/// `tolerance`, the task predicate fails, or `max_steps` elapse.
///
/// Every state produced by the simulator costs one collision check, so the
/// returned `steps` is also the collision-check count.
#[allow(clippy::too_many_arguments)]
pub fn rollout_episode<S: Simulator, C: Controller + ?Sized>(
    sim: &S,
    controller: &C,
    start: &S::State,
    goal: &ConfigPoint,
    max_steps: u64,
    tolerance: f64,
    reward: &RewardConfig,
    rng: &mut SimRng,
) -> Result<EpisodeOutcome> {
    if !sim.predicate(start) {
        return Err(Error::InvalidStart);
    }
    let mut state = start.clone();
    let mut pos = sim.project(&state);
    let mut check = StateCheck::Valid;
    let mut steps = 0u64;
    let mut length = 0.0;
    let mut ret = 0.0;
    let mut discount = 1.0;
    while check == StateCheck::Valid && steps < max_steps && pos.distance(goal) > tolerance {
        let obs = sim.observe(&state, goal, rng)?;
        let action = controller.act(&obs)?;
        let next = sim.step(&state, &action)?;
        steps += 1;
        let next_pos = sim.project(&next);
        length += next_pos.distance(&pos);
        ret += discount * sim.reward(&next, &obs, goal, tolerance, reward);
        discount *= reward.discount;
        check = sim.check(&next);
        state = next;
        pos = next_pos;
    }
    let final_distance = pos.distance(goal);
    let termination = match check {
        StateCheck::Collision => Termination::Collision,
        StateCheck::Constraint => Termination::Constraint,
        StateCheck::Valid if final_distance <= tolerance => Termination::Reached,
        StateCheck::Valid => Termination::Timeout,
    };
    Ok(EpisodeOutcome {
        success: termination == Termination::Reached,
        steps,
        length,
        discounted_return: ret,
        final_distance,
        termination,
    })
}

/// A source of independent randomized episodes.
pub trait Episodes: Sync {
    fn run(&self, rng: &mut SimRng) -> Result<EpisodeOutcome>;
}

/// Random start/goal pairs in a simulator's free space, goal no further
/// than `max_goal_distance` from the start.
pub struct PolicyEpisodes<'a, S: Simulator, C: Controller + ?Sized> {
    pub sim: &'a S,
    pub controller: &'a C,
    pub max_steps: u64,
    pub tolerance: f64,
    pub max_goal_distance: f64,
    pub reward: RewardConfig,
}

impl<S: Simulator, C: Controller + ?Sized> PolicyEpisodes<'_, S, C> {
    /// Draws a start configuration and a goal within range of it.
    pub fn sample_pair(&self, rng: &mut SimRng) -> Result<(ConfigPoint, ConfigPoint)> {
        let start = self.sim.sample_free(rng)?;
        for _ in 0..10_000 {
            let goal = self.sim.sample_free(rng)?;
            let d = goal.distance(&start);
            if d > self.tolerance && d <= self.max_goal_distance {
                return Ok((start, goal));
            }
        }
        Err(Error::InvalidParameter(
            "could not find a goal within range of the start".into(),
        ))
    }
}

impl<S: Simulator, C: Controller + ?Sized> Episodes for PolicyEpisodes<'_, S, C> {
    fn run(&self, rng: &mut SimRng) -> Result<EpisodeOutcome> {
        let (start, goal) = self.sample_pair(rng)?;
        let state = self.sim.sample_state(&start, rng)?;
        rollout_episode(
            self.sim,
            self.controller,
            &state,
            &goal,
            self.max_steps,
            self.tolerance,
            &self.reward,
            rng,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStats {
    pub episodes: usize,
    pub success_rate: f64,
    /// Over successful episodes; NaN when none succeeded.
    pub mean_length: f64,
    /// Over successful episodes; NaN when none succeeded.
    pub mean_steps: f64,
    pub mean_return: f64,
}

/// Monte Carlo statistics over `episodes` seeded episodes. Episode `i` uses
/// a generator derived from `(seed, i)`, so the result is independent of
/// the worker count.
pub fn evaluate_policy<E: Episodes + ?Sized>(source: &E, episodes: usize, seed: u64) -> Result<PolicyStats> {
    if episodes == 0 {
        return Err(Error::InvalidParameter("need at least one episode".into()));
    }
    let outcomes = (0..episodes)
        .into_par_iter()
        .map(|i| source.run(&mut seed::rng(seed::derive(seed, i as u64))))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&outcomes))
}

pub(crate) fn summarize(outcomes: &[EpisodeOutcome]) -> PolicyStats {
    let n = outcomes.len();
    let successes: Vec<_> = outcomes.iter().filter(|o| o.success).collect();
    let k = successes.len();
    let mean = |f: &dyn Fn(&EpisodeOutcome) -> f64| {
        if k == 0 {
            f64::NAN
        } else {
            successes.iter().map(|o| f(o)).sum::<f64>() / k as f64
        }
    };
    PolicyStats {
        episodes: n,
        success_rate: k as f64 / n.max(1) as f64,
        mean_length: mean(&|o| o.length),
        mean_steps: mean(&|o| o.steps as f64),
        mean_return: outcomes.iter().map(|o| o.discounted_return).sum::<f64>() / n.max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DiffDriveState, IndoorParams};
    use crate::policy::Policy;
    use crate::sim::IndoorSim;
    use crate::workspace::OccupancyGrid;

    fn corridor() -> IndoorSim {
        // 20 m x 3 m corridor with walls along the long sides.
        let (w, h) = (200, 30);
        let mut mask = vec![false; w * h];
        for x in 0..w {
            mask[x] = true;
            mask[(h - 1) * w + x] = true;
        }
        let grid = OccupancyGrid::from_obstacles(w, h, 0.1, (0.0, 0.0), 0.35, &mask).unwrap();
        IndoorSim::new(grid, IndoorParams::default()).unwrap()
    }

    #[test]
    fn start_within_tolerance_succeeds_immediately() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let s = DiffDriveState::new(5.0, 1.5, 0.0);
        let out = rollout_episode(&sim, &pi, &s, &ConfigPoint::planar(5.3, 1.5), 100, 0.5, &RewardConfig::default(), &mut seed::rng(0)).unwrap();
        assert!(out.success);
        assert_eq!(out.steps, 0);
        assert_eq!(out.length, 0.0);
    }

    #[test]
    fn straight_corridor_length_close_to_distance() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let s = DiffDriveState::new(2.0, 1.5, 0.0);
        let goal = ConfigPoint::planar(10.0, 1.5);
        let out = rollout_episode(&sim, &pi, &s, &goal, 200, 0.5, &RewardConfig::default(), &mut seed::rng(1)).unwrap();
        assert!(out.success, "{out:?}");
        // The episode stops at the tolerance ring, 7.5 m from the start.
        let straight = 8.0 - 0.5;
        assert!((out.length - straight).abs() <= 0.1 * straight, "{}", out.length);
    }

    #[test]
    fn start_in_inflated_band_is_invalid() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let s = DiffDriveState::new(5.0, 0.2, 0.0);
        let r = rollout_episode(&sim, &pi, &s, &ConfigPoint::planar(8.0, 1.5), 100, 0.5, &RewardConfig::default(), &mut seed::rng(0));
        assert!(matches!(r, Err(Error::InvalidStart)));
    }

    #[test]
    fn steps_never_exceed_cap() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let episodes = PolicyEpisodes {
            sim: &sim,
            controller: &pi,
            max_steps: 7,
            tolerance: 0.5,
            max_goal_distance: 15.0,
            reward: RewardConfig::default(),
        };
        for i in 0..50 {
            let out = episodes.run(&mut seed::rng(i)).unwrap();
            assert!(out.steps <= 7);
        }
    }

    struct Fixed(bool);
    impl Episodes for Fixed {
        fn run(&self, _rng: &mut SimRng) -> Result<EpisodeOutcome> {
            Ok(EpisodeOutcome {
                success: self.0,
                steps: 1,
                length: 1.0,
                discounted_return: 0.0,
                final_distance: if self.0 { 0.0 } else { 1.0 },
                termination: if self.0 { Termination::Reached } else { Termination::Collision },
            })
        }
    }

    #[test]
    fn stub_extremes() {
        assert_eq!(evaluate_policy(&Fixed(false), 50, 3).unwrap().success_rate, 0.0);
        assert!(evaluate_policy(&Fixed(false), 50, 3).unwrap().mean_length.is_nan());
        assert_eq!(evaluate_policy(&Fixed(true), 50, 3).unwrap().success_rate, 1.0);
        assert!(evaluate_policy(&Fixed(true), 0, 3).is_err());
    }
}
