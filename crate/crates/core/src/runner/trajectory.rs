//! Trajectory CSV export.
//!
//! Indoor: `t,x,y,heading,v_l,v_r,waypoint`.
//! Aerial: `t,x,y,z,displacement,a_x,a_y,a_z,waypoint`.
//!
//! A non-empty trajectory starts with the initial state at `t = 0` and a zero
//! action; each following row is the state after one step. Summing the
//! distances between consecutive rows reproduces the recorded length.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TrajectoryRecord;
use crate::dynamics::Action;
use crate::error::{Error, Result};
use crate::sim::Task;
use crate::workspace::ConfigPoint;

const INDOOR_HEADER: &str = "t,x,y,heading,v_l,v_r,waypoint";
const AERIAL_HEADER: &str = "t,x,y,z,displacement,a_x,a_y,a_z,waypoint";

fn row(s: &mut String, task: Task, t: f64, p: &ConfigPoint, state: &[f64], disp: Option<f64>, a: &Action, wp: usize) {
    match (task, a) {
        (Task::Indoor, Action::Wheels { left, right }) => {
            let heading = state.get(2).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{t},{},{},{heading},{left},{right},{wp}", p.x, p.y);
        }
        (Task::Aerial, Action::Accel([ax, ay, az])) => {
            let d = disp.unwrap_or(0.0);
            let _ = writeln!(s, "{t},{},{},{},{d},{ax},{ay},{az},{wp}", p.x, p.y, p.z);
        }
        _ => unreachable!("action kind always matches the task"),
    }
}

pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut s = String::new();
    s.push_str(match record.task {
        Task::Indoor => INDOOR_HEADER,
        Task::Aerial => AERIAL_HEADER,
    });
    s.push('\n');
    if record.steps.is_empty() {
        return s;
    }
    let zero = match record.task {
        Task::Indoor => Action::Wheels { left: 0.0, right: 0.0 },
        Task::Aerial => Action::Accel([0.0; 3]),
    };
    row(
        &mut s,
        record.task,
        0.0,
        &record.start,
        &record.initial_state,
        record.initial_displacement,
        &zero,
        0,
    );
    for st in &record.steps {
        row(&mut s, record.task, st.t, &st.position, &st.state, st.displacement, &st.action, st.waypoint);
    }
    s
}

pub fn export_trajectory(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    fs::write(path, trajectory_csv(record))?;
    Ok(())
}

/// Totals recomputed from an exported CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvTotals {
    pub columns: usize,
    pub steps: usize,
    pub length: f64,
    pub duration: f64,
}

pub fn read_trajectory_csv(path: &Path) -> Result<CsvTotals> {
    let text = fs::read_to_string(path)?;
    let source = path.display().to_string();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(&source, 1, "missing header"))?;
    let (columns, has_z) = match header {
        INDOOR_HEADER => (7, false),
        AERIAL_HEADER => (9, true),
        _ => return Err(Error::parse(&source, 1, "unrecognised header")),
    };
    let mut prev: Option<ConfigPoint> = None;
    let mut totals = CsvTotals {
        columns,
        steps: 0,
        length: 0.0,
        duration: 0.0,
    };
    for (i, line) in lines.enumerate() {
        let no = i + 2;
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(&source, no, format!("bad number `{v}`"))))
            .collect::<Result<_>>()?;
        if f.len() != columns {
            return Err(Error::parse(&source, no, format!("expected {columns} columns, got {}", f.len())));
        }
        let p = ConfigPoint {
            x: f[1],
            y: f[2],
            z: if has_z { f[3] } else { 0.0 },
        };
        if let Some(q) = prev {
            totals.length += p.distance(&q);
            totals.steps += 1;
        }
        totals.duration = f[0];
        prev = Some(p);
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Termination;
    use crate::runner::StepRecord;

    fn record(task: Task, steps: usize) -> TrajectoryRecord {
        let action = match task {
            Task::Indoor => Action::Wheels { left: 0.5, right: 0.7 },
            Task::Aerial => Action::Accel([0.1, -0.2, 0.3]),
        };
        let dt = 0.2;
        let mut length = 0.0;
        let mut prev = ConfigPoint::spatial(1.0, 1.0, if task == Task::Aerial { 2.0 } else { 0.0 });
        let start = prev;
        let steps: Vec<StepRecord> = (1..=steps)
            .map(|k| {
                let p = ConfigPoint {
                    x: prev.x + 0.13 * k as f64,
                    y: prev.y + 0.07,
                    z: prev.z,
                };
                length += p.distance(&prev);
                prev = p;
                StepRecord {
                    t: k as f64 * dt,
                    position: p,
                    state: vec![p.x, p.y, 0.3],
                    action,
                    waypoint: k / 3,
                    displacement: (task == Task::Aerial).then_some(0.01),
                }
            })
            .collect();
        TrajectoryRecord {
            task,
            dt,
            start,
            initial_state: vec![start.x, start.y, 0.0],
            initial_displacement: None,
            goal: prev,
            n_w: 2,
            duration: steps.len() as f64 * dt,
            steps,
            waypoints: Vec::new(),
            success: true,
            termination: Termination::Reached,
            length,
        }
    }

    #[test]
    fn zero_steps_is_header_only() {
        assert_eq!(trajectory_csv(&record(Task::Indoor, 0)), format!("{INDOOR_HEADER}\n"));
    }

    #[test]
    fn column_counts() {
        for (task, cols) in [(Task::Indoor, 7), (Task::Aerial, 9)] {
            let csv = trajectory_csv(&record(task, 4));
            assert!(csv.lines().all(|l| l.split(',').count() == cols));
            assert_eq!(csv.lines().count(), 6);
        }
    }

    #[test]
    fn reimport_reproduces_totals() {
        let dir = tempfile::tempdir().unwrap();
        for task in [Task::Indoor, Task::Aerial] {
            let r = record(task, 37);
            let path = dir.path().join(format!("{task}.csv"));
            export_trajectory(&r, &path).unwrap();
            let t = read_trajectory_csv(&path).unwrap();
            assert_eq!(t.steps, 37);
            assert_eq!(t.length, r.length);
            assert_eq!(t.duration, r.duration);
        }
    }
}
