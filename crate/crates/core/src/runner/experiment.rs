//! Batch experiments: build roadmaps for every (map, density, planner)
//! combination, run random queries through them, and tabulate planned
//! versus executed statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{execute, export_trajectory, TrajectoryRecord};
use crate::connect::EdgeEvalParams;
use crate::error::Result;
use crate::policy::{Policy, Termination};
use crate::roadmap::{build_on_nodes, query, sample_nodes, save_roadmap, Planner, QueryOptions, Roadmap};
use crate::seed;
use crate::sim::Simulator;
use crate::workspace::ConfigPoint;

pub struct MapCase<'a, S> {
    pub name: String,
    pub map_hash: String,
    pub sim: &'a S,
}

pub struct Experiment<'a, S> {
    pub maps: Vec<MapCase<'a, S>>,
    pub densities: Vec<f64>,
    pub planners: Vec<Planner<'a>>,
    /// Policy that executes every plan, whichever planner produced it.
    pub executor: &'a Policy,
    pub params: EdgeEvalParams,
    pub query_options: QueryOptions,
    pub n_queries: usize,
    pub seed: u64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { count: n, mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FailureCounts {
    /// Obstacle contact, inflated band entry, or leaving the map.
    pub collision: usize,
    pub constraint: usize,
    pub timeout: usize,
    pub no_path: usize,
}

impl FailureCounts {
    /// All execution and planning failures together.
    pub fn total(&self) -> usize {
        self.collision + self.constraint + self.timeout + self.no_path
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub index: usize,
    pub start: ConfigPoint,
    pub goal: ConfigPoint,
    pub found: bool,
    pub expected_success: f64,
    pub n_w: usize,
    pub expected_length: f64,
    pub expected_duration: f64,
    pub success: bool,
    /// `None` when no path was found.
    pub termination: Option<Termination>,
    pub length: f64,
    pub duration: f64,
    pub max_displacement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub map: String,
    pub density: f64,
    pub planner: String,
    pub nodes: usize,
    pub edges: usize,
    pub pairs_evaluated: u64,
    pub collision_checks: u64,
    pub queries: usize,
    pub paths_found: usize,
    pub successes: usize,
    pub failures: FailureCounts,
    /// Over queries with a path.
    pub expected_success: Summary,
    pub expected_waypoints: Summary,
    pub expected_length: Summary,
    pub expected_duration: Summary,
    /// Over successful executions.
    pub actual_waypoints: Summary,
    pub actual_length: Summary,
    pub actual_duration: Summary,
    pub records: Vec<QueryRecord>,
}

impl ReportRow {
    /// Successful executions over all queries (planning failures count).
    pub fn query_success_rate(&self) -> f64 {
        ratio(self.successes, self.queries)
    }

    /// Successful executions over queries that returned a path.
    pub fn execution_success_rate(&self) -> f64 {
        ratio(self.successes, self.paths_found)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

fn run_queries<S: Simulator>(
    sim: &S,
    roadmap: &Roadmap,
    planner: &Planner,
    executor: &Policy,
    pairs: &[(ConfigPoint, ConfigPoint)],
    options: &QueryOptions,
    base: u64,
) -> Result<Vec<(QueryRecord, Option<TrajectoryRecord>)>> {
    let params = &roadmap.meta.params;
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, (s, g))| {
            let q_seed = seed::derive_path(base, &[seed::STREAM_QUERY, i as u64]);
            let e_seed = seed::derive_path(base, &[seed::STREAM_EXEC, i as u64]);
            let mut rec = QueryRecord {
                index: i,
                start: *s,
                goal: *g,
                found: false,
                expected_success: f64::NAN,
                n_w: 0,
                expected_length: f64::NAN,
                expected_duration: f64::NAN,
                success: false,
                termination: None,
                length: f64::NAN,
                duration: f64::NAN,
                max_displacement: None,
            };
            let Some(plan) = query(roadmap, sim, planner, s, g, options, q_seed)? else {
                return Ok((rec, None));
            };
            let traj = execute(sim, executor, &plan, params.epsilon, params.max_steps, e_seed)?;
            rec.found = true;
            rec.expected_success = plan.expected_success;
            rec.n_w = plan.n_w();
            rec.expected_length = plan.expected_length;
            rec.expected_duration = plan.expected_steps * sim.dt();
            rec.success = traj.success;
            rec.termination = Some(traj.termination);
            rec.length = traj.length;
            rec.duration = traj.duration;
            rec.max_displacement = traj.max_displacement();
            Ok((rec, Some(traj)))
        })
        .collect()
}

fn tabulate(map: &str, roadmap: &Roadmap, records: Vec<QueryRecord>) -> ReportRow {
    let found: Vec<&QueryRecord> = records.iter().filter(|r| r.found).collect();
    let ok: Vec<&QueryRecord> = found.iter().copied().filter(|r| r.success).collect();
    let mut failures = FailureCounts::default();
    for r in &records {
        match r.termination {
            None => failures.no_path += 1,
            Some(Termination::Collision) => failures.collision += 1,
            Some(Termination::Constraint) => failures.constraint += 1,
            Some(Termination::Timeout) => failures.timeout += 1,
            Some(Termination::Reached) => {}
        }
    }
    let over = |rs: &[&QueryRecord], f: fn(&QueryRecord) -> f64| Summary::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
    ReportRow {
        map: map.to_string(),
        density: roadmap.meta.density,
        planner: roadmap.meta.planner.to_string(),
        nodes: roadmap.node_count(),
        edges: roadmap.edge_count(),
        pairs_evaluated: roadmap.meta.pairs_evaluated,
        collision_checks: roadmap.meta.collision_checks,
        queries: records.len(),
        paths_found: found.len(),
        successes: ok.len(),
        failures,
        expected_success: over(&found, |r| r.expected_success),
        expected_waypoints: over(&found, |r| r.n_w as f64),
        expected_length: over(&found, |r| r.expected_length),
        expected_duration: over(&found, |r| r.expected_duration),
        actual_waypoints: over(&ok, |r| r.n_w as f64),
        actual_length: over(&ok, |r| r.length),
        actual_duration: over(&ok, |r| r.duration),
        records,
    }
}

/// Runs every combination. With `out_dir`, writes `report.csv`,
/// `queries.csv`, one roadmap file per combination and, if
/// `write_trajectories`, one CSV per executed query.
pub fn run_experiment<S: Simulator>(
    exp: &Experiment<S>,
    out_dir: Option<&Path>,
    write_trajectories: bool,
) -> Result<ExperimentReport> {
    exp.params.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    for (m, case) in exp.maps.iter().enumerate() {
        let sim = case.sim;
        let mut qrng = seed::rng(seed::derive_path(exp.seed, &[seed::STREAM_QUERY, m as u64]));
        let pairs = (0..exp.n_queries)
            .map(|_| Ok((sim.sample_free(&mut qrng)?, sim.sample_free(&mut qrng)?)))
            .collect::<Result<Vec<_>>>()?;
        for (d, &density) in exp.densities.iter().enumerate() {
            let build_seed = seed::derive_path(exp.seed, &[m as u64, d as u64]);
            let nodes = sample_nodes(sim, density, build_seed)?;
            for planner in &exp.planners {
                let roadmap = build_on_nodes(sim, nodes.clone(), planner, &exp.params, build_seed, &case.map_hash, density)?;
                let tag = format!("{}_{}_{}", case.name, density, planner.kind());
                let results = run_queries(sim, &roadmap, planner, exp.executor, &pairs, &exp.query_options, build_seed)?;
                if let Some(dir) = out_dir {
                    save_roadmap(&roadmap, &dir.join(format!("roadmap_{tag}.txt")))?;
                    if write_trajectories {
                        for (rec, traj) in &results {
                            if let Some(t) = traj {
                                export_trajectory(t, &dir.join(format!("traj_{tag}_q{:04}.csv", rec.index)))?;
                            }
                        }
                    }
                }
                let records = results.into_iter().map(|(r, _)| r).collect();
                rows.push(tabulate(&case.name, &roadmap, records));
            }
        }
    }
    let report = ExperimentReport { rows };
    if let Some(dir) = out_dir {
        let (summary, queries) = format_report_csv(&report);
        fs::write(dir.join("report.csv"), summary)?;
        fs::write(dir.join("queries.csv"), queries)?;
    }
    Ok(report)
}

fn f(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// Renders the summary table and the per-query table.
pub fn format_report_csv(report: &ExperimentReport) -> (String, String) {
    let mut s = String::from(
        "map,density,planner,nodes,edges,pairs_evaluated,collision_checks,queries,paths_found,successes,\
         query_success_rate,execution_success_rate,expected_success_mean,\
         fail_collision,fail_constraint,fail_timeout,fail_no_path,fail_total,\
         expected_waypoints_mean,expected_waypoints_std,actual_waypoints_mean,actual_waypoints_std,\
         expected_length_mean,expected_length_std,actual_length_mean,actual_length_std,\
         expected_duration_mean,expected_duration_std,actual_duration_mean,actual_duration_std\n",
    );
    let mut q = String::from(
        "map,density,planner,query,start_x,start_y,start_z,goal_x,goal_y,goal_z,found,n_w,expected_success,\
         expected_length,expected_duration,success,outcome,length,duration,max_displacement\n",
    );
    for r in &report.rows {
        let fc = &r.failures;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.map,
            r.density,
            r.planner,
            r.nodes,
            r.edges,
            r.pairs_evaluated,
            r.collision_checks,
            r.queries,
            r.paths_found,
            r.successes,
            f(r.query_success_rate()),
            f(r.execution_success_rate()),
            f(r.expected_success.mean),
            fc.collision,
            fc.constraint,
            fc.timeout,
            fc.no_path,
            fc.total(),
            f(r.expected_waypoints.mean),
            f(r.expected_waypoints.std),
            f(r.actual_waypoints.mean),
            f(r.actual_waypoints.std),
            f(r.expected_length.mean),
            f(r.expected_length.std),
            f(r.actual_length.mean),
            f(r.actual_length.std),
            f(r.expected_duration.mean),
            f(r.expected_duration.std),
            f(r.actual_duration.mean),
            f(r.actual_duration.std),
        );
        for x in &r.records {
            let outcome = match x.termination {
                None => "no_path",
                Some(Termination::Reached) => "success",
                Some(Termination::Collision) => "collision",
                Some(Termination::Constraint) => "constraint",
                Some(Termination::Timeout) => "timeout",
            };
            let _ = writeln!(
                q,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.map,
                r.density,
                r.planner,
                x.index,
                f(x.start.x),
                f(x.start.y),
                f(x.start.z),
                f(x.goal.x),
                f(x.goal.y),
                f(x.goal.z),
                x.found as u8,
                x.n_w,
                f(x.expected_success),
                f(x.expected_length),
                f(x.expected_duration),
                x.success as u8,
                outcome,
                f(x.length),
                f(x.duration),
                f(x.max_displacement.unwrap_or(f64::NAN)),
            );
        }
    }
    (s, q)
}
