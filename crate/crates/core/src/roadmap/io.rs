//! Roadmap files.
//!
//! ```text
//! prmrl-roadmap 1
//! task indoor
//! map_hash 3f9a...
//! density 0.4
//! sampling_area 161.2        # free area (indoor) or footprint (aerial), m^2
//! planner rl
//! p_success 0.85
//! num_attempts 20
//! epsilon 0.5
//! max_steps 200
//! connection_radius 10
//! seed 7
//! pairs_evaluated 1640
//! collision_checks 2203114
//! nodes 64
//! edges 212
//! N 0 3.21 4.5
//! ...
//! E 0 5 0.95 4.87 26.1
//! ```
//!
//! Node lines are `N idx x y` (indoor) or `N idx x y z` (aerial). Edge lines
//! are `E from to success_rate mean_length mean_steps`. Floats use shortest
//! round-trip formatting, so equal roadmaps render to equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BuildMeta, Edge, PlannerKind, Roadmap};
use crate::connect::EdgeEvalParams;
use crate::error::{Error, Result};
use crate::sim::Task;
use crate::workspace::ConfigPoint;

const MAGIC: &str = "prmrl-roadmap";
const VERSION: u32 = 1;

pub fn render_roadmap(rm: &Roadmap) -> String {
    let m = &rm.meta;
    let p = &m.params;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "task {}", m.task);
    let _ = writeln!(s, "map_hash {}", m.map_hash);
    let _ = writeln!(s, "density {}", m.density);
    let _ = writeln!(s, "sampling_area {}", m.sampling_area);
    let _ = writeln!(s, "planner {}", m.planner);
    let _ = writeln!(s, "p_success {}", p.p_success);
    let _ = writeln!(s, "num_attempts {}", p.num_attempts);
    let _ = writeln!(s, "epsilon {}", p.epsilon);
    let _ = writeln!(s, "max_steps {}", p.max_steps);
    let _ = writeln!(s, "connection_radius {}", p.connection_radius);
    let _ = writeln!(s, "seed {}", m.seed);
    let _ = writeln!(s, "pairs_evaluated {}", m.pairs_evaluated);
    let _ = writeln!(s, "collision_checks {}", m.collision_checks);
    let _ = writeln!(s, "nodes {}", rm.nodes.len());
    let _ = writeln!(s, "edges {}", rm.edges.len());
    for (i, n) in rm.nodes.iter().enumerate() {
        match m.task {
            Task::Indoor => {
                let _ = writeln!(s, "N {i} {} {}", n.x, n.y);
            }
            Task::Aerial => {
                let _ = writeln!(s, "N {i} {} {} {}", n.x, n.y, n.z);
            }
        }
    }
    for e in &rm.edges {
        let _ = writeln!(s, "E {} {} {} {} {}", e.from, e.to, e.success_rate, e.mean_length, e.mean_steps);
    }
    s
}

struct Lines<'a> {
    source: &'a str,
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.source, line, msg)
    }

    /// Next line as whitespace-separated tokens, with its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        let line = self.pos + 1;
        let raw = self
            .lines
            .get(self.pos)
            .ok_or_else(|| self.err(line, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok((line, raw.split_whitespace().collect()))
    }

    fn header(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, toks) = self.next(&format!("`{key}`"))?;
        match toks.as_slice() {
            [k, v] if *k == key => Ok((line, *v)),
            _ => Err(self.err(line, format!("expected `{key} <value>`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, v) = self.header(key)?;
        v.parse().map_err(|_| self.err(line, format!("`{key}`: cannot parse `{v}`")))
    }
}

fn num<T: std::str::FromStr>(l: &Lines, line: usize, v: &str) -> Result<T> {
    v.parse().map_err(|_| l.err(line, format!("cannot parse `{v}`")))
}

pub fn parse_roadmap(text: &str, source: &str) -> Result<Roadmap> {
    let mut l = Lines {
        source,
        lines: text.lines().collect(),
        pos: 0,
    };
    let (line, toks) = l.next("header")?;
    match toks.as_slice() {
        [MAGIC, v] => {
            if *v != VERSION.to_string() {
                return Err(Error::VersionMismatch {
                    kind: "roadmap",
                    found: v.to_string(),
                    expected: VERSION,
                });
            }
        }
        _ => return Err(l.err(line, format!("expected `{MAGIC} {VERSION}` header"))),
    }
    let (line, t) = l.header("task")?;
    let task: Task = t.parse().map_err(|e: Error| l.err(line, e.to_string()))?;
    let map_hash = l.header("map_hash")?.1.to_string();
    let density = l.parse("density")?;
    let sampling_area = l.parse("sampling_area")?;
    let (line, p) = l.header("planner")?;
    let planner: PlannerKind = p.parse().map_err(|e: Error| l.err(line, e.to_string()))?;
    let params = EdgeEvalParams {
        p_success: l.parse("p_success")?,
        num_attempts: l.parse("num_attempts")?,
        epsilon: l.parse("epsilon")?,
        max_steps: l.parse("max_steps")?,
        connection_radius: l.parse("connection_radius")?,
    };
    let seed = l.parse("seed")?;
    let pairs_evaluated = l.parse("pairs_evaluated")?;
    let collision_checks = l.parse("collision_checks")?;
    let n_nodes: usize = l.parse("nodes")?;
    let n_edges: usize = l.parse("edges")?;

    let coords = match task {
        Task::Indoor => 2,
        Task::Aerial => 3,
    };
    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let (line, toks) = l.next("node line")?;
        if toks.len() != 2 + coords || toks[0] != "N" {
            return Err(l.err(line, format!("expected `N idx` and {coords} coordinates")));
        }
        let idx: usize = num(&l, line, toks[1])?;
        if idx != i {
            return Err(l.err(line, format!("node index {idx} out of order (expected {i})")));
        }
        let x = num(&l, line, toks[2])?;
        let y = num(&l, line, toks[3])?;
        let z = if coords == 3 { num(&l, line, toks[4])? } else { 0.0 };
        nodes.push(ConfigPoint { x, y, z });
    }
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (line, toks) = l.next("edge line")?;
        if toks.len() != 6 || toks[0] != "E" {
            return Err(l.err(line, "expected `E from to success_rate mean_length mean_steps`"));
        }
        let e = Edge {
            from: num(&l, line, toks[1])?,
            to: num(&l, line, toks[2])?,
            success_rate: num(&l, line, toks[3])?,
            mean_length: num(&l, line, toks[4])?,
            mean_steps: num(&l, line, toks[5])?,
        };
        if e.from >= n_nodes || e.to >= n_nodes {
            return Err(l.err(line, format!("edge endpoint out of range ({} nodes)", n_nodes)));
        }
        edges.push(e);
    }
    if let Some(extra) = l.lines[l.pos..].iter().position(|s| !s.trim().is_empty()) {
        return Err(l.err(l.pos + extra + 1, "unexpected trailing content"));
    }
    Ok(Roadmap {
        nodes,
        edges,
        meta: BuildMeta {
            task,
            map_hash,
            density,
            sampling_area,
            planner,
            params,
            seed,
            pairs_evaluated,
            collision_checks,
        },
    })
}

pub fn save_roadmap(rm: &Roadmap, path: &Path) -> Result<()> {
    fs::write(path, render_roadmap(rm))?;
    Ok(())
}

pub fn load_roadmap(path: &Path) -> Result<Roadmap> {
    let text = fs::read_to_string(path)?;
    parse_roadmap(&text, &path.display().to_string())
}
