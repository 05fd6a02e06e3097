//! Executing roadmap plans with a policy, and batch experiments.

mod experiment;
mod trajectory;

pub use experiment::{
    format_report_csv, run_experiment, Experiment, ExperimentReport, FailureCounts, MapCase, QueryRecord, ReportRow,
    Summary,
};
pub use trajectory::{export_trajectory, read_trajectory_csv, trajectory_csv, CsvTotals};

use crate::dynamics::Action;
use crate::error::{Error, Result};
use crate::policy::{Controller, Termination};
use crate::roadmap::QueryResult;
use crate::seed;
use crate::sim::{Simulator, StateCheck, Task};
use crate::workspace::ConfigPoint;

/// One simulator step: the state reached at time `t` and the action that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub position: ConfigPoint,
    /// Full state vector after the step.
    pub state: Vec<f64>,
    pub action: Action,
    /// Index of the waypoint being driven to.
    pub waypoint: usize,
    /// Load displacement, radians, for aerial runs.
    pub displacement: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointOutcome {
    pub reached: bool,
    /// Steps spent on this leg.
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub task: Task,
    pub dt: f64,
    pub start: ConfigPoint,
    pub initial_state: Vec<f64>,
    pub initial_displacement: Option<f64>,
    pub goal: ConfigPoint,
    pub steps: Vec<StepRecord>,
    pub waypoints: Vec<WaypointOutcome>,
    pub success: bool,
    /// Why the run stopped; `Reached` on success.
    pub termination: Termination,
    /// Sum of per-step configuration displacements, metres.
    pub length: f64,
    /// `steps * dt`, seconds.
    pub duration: f64,
    pub n_w: usize,
}

impl TrajectoryRecord {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn final_position(&self) -> ConfigPoint {
        self.steps.last().map_or(self.start, |s| s.position)
    }

    pub fn max_displacement(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.displacement)
            .fold(None, |m, d| Some(m.map_or(d, |m: f64| m.max(d))))
    }
}

/// Drives `policy` along the plan's waypoints.
///
/// The goal switches to the next waypoint as soon as the current one is
/// within `epsilon`. Tasks whose simulator reports a rest condition (the
/// aerial task) must also be at rest before switching. The run fails on a
/// predicate violation or when a leg exceeds `max_steps_per_edge` steps.
pub fn execute<S: Simulator, C: Controller + ?Sized>(
    sim: &S,
    policy: &C,
    plan: &QueryResult,
    epsilon: f64,
    max_steps_per_edge: u64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    if !(epsilon > 0.0) || max_steps_per_edge == 0 {
        return Err(Error::InvalidParameter("epsilon and step cap must be positive".into()));
    }
    if plan.waypoints.is_empty() && plan.start.distance(&plan.goal()) > epsilon {
        return Err(Error::InvalidPlan("empty plan with start outside goal tolerance".into()));
    }
    if plan.waypoints.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidPlan("non-finite waypoint".into()));
    }
    let mut rng = seed::rng(seed::derive(seed, seed::STREAM_EXEC));
    let mut state = sim.sample_state(&plan.start, &mut rng)?;
    let mut record = TrajectoryRecord {
        task: sim.task(),
        dt: sim.dt(),
        start: plan.start,
        initial_state: sim.state_vector(&state),
        initial_displacement: sim.displacement(&state),
        goal: plan.goal(),
        steps: Vec::new(),
        waypoints: Vec::with_capacity(plan.waypoints.len()),
        success: false,
        termination: Termination::Reached,
        length: 0.0,
        duration: 0.0,
        n_w: plan.n_w(),
    };
    if !sim.predicate(&state) {
        record.termination = Termination::Collision;
        return Ok(record);
    }
    let mut pos = sim.project(&state);
    let mut step_count = 0u64;

    for (k, wp) in plan.waypoints.iter().enumerate() {
        let mut leg = 0u64;
        loop {
            if pos.distance(wp) <= epsilon && sim.at_rest(&state) {
                record.waypoints.push(WaypointOutcome { reached: true, steps: leg });
                break;
            }
            if leg >= max_steps_per_edge {
                record.waypoints.push(WaypointOutcome { reached: false, steps: leg });
                record.termination = Termination::Timeout;
                return Ok(finish(record, step_count));
            }
            let obs = sim.observe(&state, wp, &mut rng)?;
            let action = policy.act(&obs)?;
            let next = sim.step(&state, &action)?;
            leg += 1;
            step_count += 1;
            let next_pos = sim.project(&next);
            record.length += next_pos.distance(&pos);
            record.steps.push(StepRecord {
                t: step_count as f64 * sim.dt(),
                position: next_pos,
                state: sim.state_vector(&next),
                action,
                waypoint: k,
                displacement: sim.displacement(&next),
            });
            state = next;
            pos = next_pos;
            let violation = match sim.check(&state) {
                StateCheck::Valid => continue,
                StateCheck::Collision => Termination::Collision,
                StateCheck::Constraint => Termination::Constraint,
            };
            record.termination = violation;
            record.waypoints.push(WaypointOutcome { reached: false, steps: leg });
            return Ok(finish(record, step_count));
        }
    }
    record.success = pos.distance(&record.goal) <= epsilon;
    if !record.success {
        record.termination = Termination::Timeout;
    }
    Ok(finish(record, step_count))
}

fn finish(mut record: TrajectoryRecord, steps: u64) -> TrajectoryRecord {
    record.duration = steps as f64 * record.dt;
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::IndoorParams;
    use crate::policy::Policy;
    use crate::roadmap::Edge;
    use crate::sim::IndoorSim;
    use crate::workspace::OccupancyGrid;

    fn corridor() -> IndoorSim {
        let (w, h) = (200, 30);
        let mut mask = vec![false; w * h];
        for x in 0..w {
            mask[x] = true;
            mask[(h - 1) * w + x] = true;
        }
        let grid = OccupancyGrid::from_obstacles(w, h, 0.1, (0.0, 0.0), 0.35, &mask).unwrap();
        IndoorSim::new(grid, IndoorParams::default()).unwrap()
    }

    fn plan(start: ConfigPoint, wps: &[ConfigPoint]) -> QueryResult {
        let mut prev = start;
        let edges: Vec<Edge> = wps
            .iter()
            .map(|w| {
                let e = Edge {
                    from: 0,
                    to: 0,
                    success_rate: 1.0,
                    mean_length: prev.distance(w),
                    mean_steps: 0.0,
                };
                prev = *w;
                e
            })
            .collect();
        QueryResult {
            start,
            waypoints: wps.to_vec(),
            nodes: vec![None; wps.len()],
            expected_success: 1.0,
            expected_length: edges.iter().map(|e| e.mean_length).sum(),
            expected_steps: 0.0,
            edges,
        }
    }

    #[test]
    fn waypoint_at_start_succeeds_in_zero_steps() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let s = ConfigPoint::planar(3.0, 1.5);
        let r = execute(&sim, &pi, &plan(s, &[ConfigPoint::planar(3.2, 1.5)]), 0.5, 100, 0).unwrap();
        assert!(r.success);
        assert_eq!(r.step_count(), 0);
        assert_eq!(r.duration, 0.0);
    }

    #[test]
    fn corridor_plan_switches_waypoints() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let wps = [ConfigPoint::planar(6.0, 1.5), ConfigPoint::planar(10.0, 1.5), ConfigPoint::planar(14.0, 1.5)];
        let p = plan(ConfigPoint::planar(2.0, 1.5), &wps);
        let r = execute(&sim, &pi, &p, 0.5, 200, 3).unwrap();
        assert!(r.success, "{:?}", r.termination);
        assert_eq!(r.waypoints.len(), 3);
        assert!(r.final_position().distance(&wps[2]) <= 0.5);
        let sum: f64 = r.steps.windows(2).map(|w| w[1].position.distance(&w[0].position)).sum::<f64>()
            + r.steps[0].position.distance(&r.start);
        assert!((sum - r.length).abs() < 1e-9);
        assert!((r.duration - r.step_count() as f64 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn step_cap_times_out() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let p = plan(ConfigPoint::planar(2.0, 1.5), &[ConfigPoint::planar(15.0, 1.5)]);
        let r = execute(&sim, &pi, &p, 0.5, 5, 3).unwrap();
        assert!(!r.success);
        assert_eq!(r.termination, Termination::Timeout);
        assert_eq!(r.step_count(), 5);
    }

    #[test]
    fn invalid_plan_is_rejected() {
        let sim = corridor();
        let pi = Policy::reference_indoor(sim.params());
        let mut p = plan(ConfigPoint::planar(2.0, 1.5), &[]);
        p.waypoints.clear();
        assert!(execute(&sim, &pi, &p, 0.5, 5, 0).unwrap().success);
        p.waypoints.push(ConfigPoint::planar(f64::NAN, 1.0));
        assert!(matches!(execute(&sim, &pi, &p, 0.5, 5, 0), Err(Error::InvalidPlan(_))));
    }
}
