//! Probabilistic roadmaps over a simulator's free space.
//!
//! Nodes are drawn before any edge is evaluated, from a stream that depends
//! only on the seed, so the node set is the same whichever local planner
//! builds the edges. Rollout edges are directed; straight-line edges are
//! checked once per unordered pair and stored in both directions.

mod io;
mod query;

pub use io::{load_roadmap, parse_roadmap, render_roadmap, save_roadmap};
pub use query::{query, shortest_path, EdgeWeight, GraphPath, QueryOptions, QueryResult};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::connect::{rl_add_edge, sl_connect, EdgeEvalParams, EdgeEvalResult};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::seed;
use crate::sim::{Simulator, Task};
use crate::workspace::ConfigPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    StraightLine,
    Rollout,
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::StraightLine => "sl",
            PlannerKind::Rollout => "rl",
        })
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sl" => Ok(PlannerKind::StraightLine),
            "rl" => Ok(PlannerKind::Rollout),
            other => Err(Error::InvalidParameter(format!("unknown planner `{other}` (expected sl or rl)"))),
        }
    }
}

/// A local planner ready to evaluate edges.
#[derive(Debug, Clone, Copy)]
pub enum Planner<'a> {
    StraightLine,
    Rollout(&'a Policy),
}

impl Planner<'_> {
    pub fn kind(&self) -> PlannerKind {
        match self {
            Planner::StraightLine => PlannerKind::StraightLine,
            Planner::Rollout(_) => PlannerKind::Rollout,
        }
    }

    pub fn evaluate<S: Simulator>(
        &self,
        sim: &S,
        a: &ConfigPoint,
        b: &ConfigPoint,
        params: &EdgeEvalParams,
        edge_seed: u64,
    ) -> Result<EdgeEvalResult> {
        match self {
            Planner::StraightLine => sl_connect(sim, a, b, params),
            Planner::Rollout(policy) => {
                if policy.task() != sim.task() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} policy cannot plan in a {} simulator",
                        policy.task(),
                        sim.task()
                    )));
                }
                rl_add_edge(sim, *policy, a, b, params, edge_seed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub success_rate: f64,
    pub mean_length: f64,
    pub mean_steps: f64,
}

impl Edge {
    fn from_result(from: usize, to: usize, r: &EdgeEvalResult) -> Self {
        Self {
            from,
            to,
            success_rate: r.success_rate,
            mean_length: r.mean_length,
            mean_steps: r.mean_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildMeta {
    pub task: Task,
    /// Content hash of the occupancy grid.
    pub map_hash: String,
    /// Nodes per square metre.
    pub density: f64,
    /// Area the density was applied to, square metres (free area indoors,
    /// footprint area aloft).
    pub sampling_area: f64,
    pub planner: PlannerKind,
    pub params: EdgeEvalParams,
    pub seed: u64,
    /// Directed (rollout) or unordered (straight-line) pairs evaluated.
    pub pairs_evaluated: u64,
    /// Sum of collision checks over every evaluated pair, accepted or not.
    pub collision_checks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roadmap {
    pub nodes: Vec<ConfigPoint>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<Edge>,
    pub meta: BuildMeta,
}

impl Roadmap {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edges
            .binary_search_by(|e| (e.from, e.to).cmp(&(from, to)))
            .ok()
            .map(|i| &self.edges[i])
    }

    /// Outgoing edges per node, in `to` order.
    pub fn adjacency(&self) -> Vec<Vec<&Edge>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push(e);
        }
        adj
    }

    /// Checks structural invariants: endpoints valid, no self loops, sorted
    /// unique edges, rates above the build threshold, positive lengths.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for w in self.edges.windows(2) {
            if (w[0].from, w[0].to) >= (w[1].from, w[1].to) {
                return Err(Error::InvalidParameter("edges must be sorted and unique".into()));
            }
        }
        for e in &self.edges {
            if e.from >= n || e.to >= n || e.from == e.to {
                return Err(Error::InvalidParameter(format!("edge {} -> {} has invalid endpoints", e.from, e.to)));
            }
            if !(e.success_rate > self.meta.params.p_success) || e.success_rate > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "edge {} -> {} rate {} not above threshold {}",
                    e.from, e.to, e.success_rate, self.meta.params.p_success
                )));
            }
            if !(e.mean_length >= 0.0) || !e.mean_length.is_finite() {
                return Err(Error::InvalidParameter(format!("edge {} -> {} has invalid length", e.from, e.to)));
            }
        }
        Ok(())
    }
}

/// `round(density * area)`.
pub fn node_count(density: f64, area: f64) -> usize {
    (density * area).round() as usize
}

/// Samples roadmap nodes. Depends only on the simulator's free space,
/// `density`, and `seed`.
pub fn sample_nodes<S: Simulator>(sim: &S, density: f64, seed: u64) -> Result<Vec<ConfigPoint>> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
    }
    let mut rng = seed::rng(seed::derive(seed, seed::STREAM_NODES));
    // Fails on maps without free space even when the count rounds to zero.
    let first = sim.sample_free(&mut rng)?;
    let n = node_count(density, sim.sampling_area());
    let mut nodes = Vec::with_capacity(n);
    if n > 0 {
        nodes.push(first);
    }
    while nodes.len() < n {
        nodes.push(sim.sample_free(&mut rng)?);
    }
    Ok(nodes)
}

/// Seed for the evaluation of the directed pair `(from, to)`.
pub fn edge_seed(build_seed: u64, from: usize, to: usize) -> u64 {
    seed::derive_path(build_seed, &[seed::STREAM_EDGES, from as u64, to as u64])
}

/// Candidate pairs within `radius`: ordered pairs for rollouts, `i < j` for
/// straight lines.
pub fn candidate_pairs(nodes: &[ConfigPoint], radius: f64, directed: bool) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate() {
            if i == j || (!directed && j < i) {
                continue;
            }
            if a.distance(b) <= radius {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Builds a roadmap on a given node set.
pub fn build_on_nodes<S: Simulator>(
    sim: &S,
    nodes: Vec<ConfigPoint>,
    planner: &Planner,
    params: &EdgeEvalParams,
    seed: u64,
    map_hash: &str,
    density: f64,
) -> Result<Roadmap> {
    params.validate()?;
    let directed = planner.kind() == PlannerKind::Rollout;
    let pairs = candidate_pairs(&nodes, params.connection_radius, directed);
    let results: Vec<EdgeEvalResult> = pairs
        .par_iter()
        .map(|&(i, j)| planner.evaluate(sim, &nodes[i], &nodes[j], params, edge_seed(seed, i, j)))
        .collect::<Result<_>>()?;

    let mut edges = Vec::new();
    let mut checks = 0u64;
    for (&(i, j), r) in pairs.iter().zip(&results) {
        checks += r.collision_checks_used;
        if r.accepted {
            edges.push(Edge::from_result(i, j, r));
            if !directed {
                edges.push(Edge::from_result(j, i, r));
            }
        }
    }
    edges.sort_by_key(|e| (e.from, e.to));

    Ok(Roadmap {
        nodes,
        edges,
        meta: BuildMeta {
            task: sim.task(),
            map_hash: map_hash.to_string(),
            density,
            sampling_area: sim.sampling_area(),
            planner: planner.kind(),
            params: *params,
            seed,
            pairs_evaluated: pairs.len() as u64,
            collision_checks: checks,
        },
    })
}

/// Samples `round(density * area)` nodes and connects every pair within the
/// connection radius that the planner accepts.
pub fn build<S: Simulator>(
    sim: &S,
    density: f64,
    planner: &Planner,
    params: &EdgeEvalParams,
    seed: u64,
    map_hash: &str,
) -> Result<Roadmap> {
    params.validate()?;
    let nodes = sample_nodes(sim, density, seed)?;
    build_on_nodes(sim, nodes, planner, params, seed, map_hash, density)
}

/// `p_success ^ n_w`, the success probability guaranteed by a plan of `n_w`
/// edges each accepted at threshold `p_success`.
pub fn success_lower_bound(p_success: f64, n_w: f64) -> f64 {
    p_success.powf(n_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::IndoorParams;
    use crate::sim::IndoorSim;
    use crate::workspace::OccupancyGrid;

    fn open_sim(w: usize, h: usize) -> IndoorSim {
        let grid = OccupancyGrid::from_obstacles(w, h, 0.1, (0.0, 0.0), 0.0, &vec![false; w * h]).unwrap();
        IndoorSim::new(grid, IndoorParams::default()).unwrap()
    }

    #[test]
    fn lower_bound_values() {
        assert!((success_lower_bound(0.85, 6.05) - 0.37).abs() <= 0.005);
        assert!((success_lower_bound(0.85, 12.65) - 0.13).abs() <= 0.005);
        assert_eq!(success_lower_bound(0.85, 0.0), 1.0);
    }

    #[test]
    fn open_map_sl_is_complete_within_radius() {
        let sim = open_sim(100, 100);
        let rm = build(&sim, 0.4, &Planner::StraightLine, &EdgeEvalParams::default(), 1, "h").unwrap();
        assert_eq!(rm.node_count(), 40);
        let mut expected = 0;
        for (i, a) in rm.nodes.iter().enumerate() {
            for (j, b) in rm.nodes.iter().enumerate() {
                if i != j && a.distance(b) <= 10.0 {
                    expected += 1;
                    assert!(rm.edge(i, j).is_some());
                }
            }
        }
        assert_eq!(rm.edge_count(), expected);
        rm.validate().unwrap();
    }

    #[test]
    fn node_set_is_planner_independent() {
        let sim = open_sim(60, 60);
        let pi = Policy::reference_indoor(sim.params());
        let params = EdgeEvalParams {
            connection_radius: 2.0,
            ..EdgeEvalParams::for_simulator(&sim)
        };
        let sl = build(&sim, 0.3, &Planner::StraightLine, &params, 4, "h").unwrap();
        let rl = build(&sim, 0.3, &Planner::Rollout(&pi), &params, 4, "h").unwrap();
        assert_eq!(sl.nodes, rl.nodes);
    }

    #[test]
    fn collision_total_is_sum_over_pairs() {
        let sim = open_sim(50, 50);
        let params = EdgeEvalParams::default();
        let rm = build(&sim, 0.5, &Planner::StraightLine, &params, 2, "h").unwrap();
        let pairs = candidate_pairs(&rm.nodes, params.connection_radius, false);
        let total: u64 = pairs
            .iter()
            .map(|&(i, j)| sl_connect(&sim, &rm.nodes[i], &rm.nodes[j], &params).unwrap().collision_checks_used)
            .sum();
        assert_eq!(rm.meta.collision_checks, total);
        assert_eq!(rm.meta.pairs_evaluated, pairs.len() as u64);
    }

    #[test]
    fn blocked_map_and_bad_density_error() {
        let grid = OccupancyGrid::from_obstacles(10, 10, 0.1, (0.0, 0.0), 0.0, &[true; 100]).unwrap();
        let sim = IndoorSim::new(grid, IndoorParams::default()).unwrap();
        assert!(matches!(
            build(&sim, 0.4, &Planner::StraightLine, &EdgeEvalParams::default(), 0, "h"),
            Err(Error::NoFreeSpace)
        ));
        assert!(build(&open_sim(10, 10), 0.0, &Planner::StraightLine, &EdgeEvalParams::default(), 0, "h").is_err());
    }
}
