use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{Edge, Planner, Roadmap};
use crate::connect::EdgeEvalResult;
use crate::error::{Error, Result};
use crate::seed;
use crate::sim::Simulator;
use crate::workspace::ConfigPoint;

/// Shortest-path objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeWeight {
    /// Minimise expected length.
    #[default]
    Length,
    /// Maximise the product of edge success rates.
    NegLogSuccess,
}

impl EdgeWeight {
    fn cost(self, e: &Edge) -> f64 {
        match self {
            EdgeWeight::Length => e.mean_length,
            EdgeWeight::NegLogSuccess => -e.success_rate.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOptions {
    pub weight: EdgeWeight,
    /// Roadmap nodes tried when attaching the start and the goal.
    pub attach_k: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            weight: EdgeWeight::Length,
            attach_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphPath {
    pub nodes: Vec<usize>,
    pub cost: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Dijkstra over `node_count` nodes. Weights must be nonnegative; ties go to
/// the lower node index.
pub fn shortest_path(node_count: usize, edges: &[Edge], from: usize, to: usize, weight: EdgeWeight) -> Option<GraphPath> {
    if from >= node_count || to >= node_count {
        return None;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
    for e in edges {
        adj[e.from].push((e.to, weight.cost(e).max(0.0)));
    }
    let mut dist = vec![f64::INFINITY; node_count];
    let mut prev = vec![usize::MAX; node_count];
    let mut done = vec![false; node_count];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Reverse((Cost(0.0), from)));
    while let Some(Reverse((Cost(d), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == to {
            break;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((Cost(nd), v)));
            }
        }
    }
    if !dist[to].is_finite() {
        return None;
    }
    let mut nodes = vec![to];
    while *nodes.last().unwrap() != from {
        nodes.push(prev[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    Some(GraphPath { nodes, cost: dist[to] })
}

/// A plan from a start configuration through roadmap nodes to a goal.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub start: ConfigPoint,
    /// Configurations to drive to in order; the last is the goal.
    pub waypoints: Vec<ConfigPoint>,
    /// Roadmap node index for each waypoint, `None` for the goal.
    pub nodes: Vec<Option<usize>>,
    /// Per-edge statistics, one entry per waypoint.
    pub edges: Vec<Edge>,
    /// Product of edge success rates.
    pub expected_success: f64,
    pub expected_length: f64,
    pub expected_steps: f64,
}

impl QueryResult {
    /// Number of plan edges (waypoints after the start).
    pub fn n_w(&self) -> usize {
        self.waypoints.len()
    }

    pub fn goal(&self) -> ConfigPoint {
        self.waypoints.last().copied().unwrap_or(self.start)
    }

    fn trivial(start: ConfigPoint) -> Self {
        Self {
            start,
            waypoints: Vec::new(),
            nodes: Vec::new(),
            edges: Vec::new(),
            expected_success: 1.0,
            expected_length: 0.0,
            expected_steps: 0.0,
        }
    }
}

fn nearest(nodes: &[ConfigPoint], p: &ConfigPoint, radius: f64, k: usize) -> Vec<usize> {
    let mut near: Vec<(f64, usize)> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.distance(p), i))
        .filter(|(d, _)| *d <= radius)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(k);
    near.into_iter().map(|(_, i)| i).collect()
}

/// Connects `start` and `goal` to the roadmap with `planner` (the one the
/// roadmap was built with) and returns the best path, or `None` when they
/// are not connected.
pub fn query<S: Simulator>(
    roadmap: &Roadmap,
    sim: &S,
    planner: &Planner,
    start: &ConfigPoint,
    goal: &ConfigPoint,
    options: &QueryOptions,
    seed: u64,
) -> Result<Option<QueryResult>> {
    for c in [start, goal] {
        if !sim.config_free(c) {
            return Err(Error::NotFree { x: c.x, y: c.y, z: c.z });
        }
    }
    if planner.kind() != roadmap.meta.planner {
        return Err(Error::InvalidPlan(format!(
            "roadmap was built with the {} planner, query uses {}",
            roadmap.meta.planner,
            planner.kind()
        )));
    }
    let params = &roadmap.meta.params;
    if start.distance(goal) <= params.epsilon {
        return Ok(Some(QueryResult::trivial(*start)));
    }

    let n = roadmap.node_count();
    let (s_idx, g_idx) = (n, n + 1);
    let radius = params.connection_radius;
    let mut jobs: Vec<(usize, usize, ConfigPoint, ConfigPoint, u64)> = Vec::new();
    for i in nearest(&roadmap.nodes, start, radius, options.attach_k) {
        jobs.push((s_idx, i, *start, roadmap.nodes[i], seed::derive_path(seed, &[seed::STREAM_QUERY, 0, i as u64])));
    }
    for i in nearest(&roadmap.nodes, goal, radius, options.attach_k) {
        jobs.push((i, g_idx, roadmap.nodes[i], *goal, seed::derive_path(seed, &[seed::STREAM_QUERY, 1, i as u64])));
    }
    if start.distance(goal) <= radius {
        jobs.push((s_idx, g_idx, *start, *goal, seed::derive_path(seed, &[seed::STREAM_QUERY, 2])));
    }
    let results: Vec<EdgeEvalResult> = jobs
        .par_iter()
        .map(|(_, _, a, b, s)| planner.evaluate(sim, a, b, params, *s))
        .collect::<Result<_>>()?;

    let mut edges = roadmap.edges.clone();
    for ((from, to, ..), r) in jobs.iter().zip(&results) {
        if r.accepted {
            edges.push(Edge {
                from: *from,
                to: *to,
                success_rate: r.success_rate,
                mean_length: r.mean_length,
                mean_steps: r.mean_steps,
            });
        }
    }

    let Some(path) = shortest_path(n + 2, &edges, s_idx, g_idx, options.weight) else {
        return Ok(None);
    };
    let lookup = |a: usize, b: usize| -> Edge {
        *edges
            .iter()
            .filter(|e| e.from == a && e.to == b)
            .min_by(|x, y| options.weight.cost(x).total_cmp(&options.weight.cost(y)))
            .expect("path edges exist")
    };
    let mut out = QueryResult::trivial(*start);
    for w in path.nodes.windows(2) {
        let e = lookup(w[0], w[1]);
        out.edges.push(e);
        if w[1] == g_idx {
            out.waypoints.push(*goal);
            out.nodes.push(None);
        } else {
            out.waypoints.push(roadmap.nodes[w[1]]);
            out.nodes.push(Some(w[1]));
        }
    }
    out.expected_success = out.edges.iter().map(|e| e.success_rate).product();
    out.expected_length = out.edges.iter().map(|e| e.mean_length).sum();
    out.expected_steps = out.edges.iter().map(|e| e.mean_steps).sum();
    Ok(Some(out))
}
