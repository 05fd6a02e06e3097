//! Procedural maze rasters.
//!
//! A perfect maze is carved on a lattice of `corridor_width` square cells by
//! randomized depth-first search, then a fraction of the remaining interior
//! walls is knocked out to create loops.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::Raster;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeSpec {
    pub seed: u64,
    /// Metres.
    pub width: f64,
    /// Metres.
    pub height: f64,
    /// Metres between wall centre lines.
    pub corridor_width: f64,
    pub resolution: f64,
    pub wall_thickness: f64,
    /// Probability of removing each interior wall left by the carve.
    pub loop_fraction: f64,
}

impl MazeSpec {
    pub fn new(seed: u64, width: f64, height: f64, corridor_width: f64) -> Self {
        Self {
            seed,
            width,
            height,
            corridor_width,
            resolution: 0.1,
            wall_thickness: 0.2,
            loop_fraction: 0.15,
        }
    }
}

const FREE: u8 = 255;
const WALL: u8 = 0;

pub fn generate(spec: &MazeSpec) -> Result<Raster> {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !positive(spec.width) || !positive(spec.height) || !positive(spec.corridor_width) || !positive(spec.resolution) {
        return Err(Error::InvalidParameter("maze dimensions must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.loop_fraction) || !(spec.wall_thickness >= 0.0) {
        return Err(Error::InvalidParameter("invalid maze wall settings".into()));
    }
    let cols = (spec.width / spec.corridor_width).floor() as usize;
    let rows = (spec.height / spec.corridor_width).floor() as usize;
    if cols == 0 || rows == 0 {
        return Err(Error::InvalidParameter("corridor wider than maze".into()));
    }
    let px_w = (spec.width / spec.resolution).round() as usize;
    let px_h = (spec.height / spec.resolution).round() as usize;

    // east[r][c]: wall between (c, r) and (c + 1, r); north likewise upwards.
    let mut east = vec![vec![true; cols]; rows];
    let mut north = vec![vec![true; cols]; rows];
    let mut rng = seed::rng(spec.seed);
    let mut visited = vec![vec![false; cols]; rows];
    let mut stack = vec![(0usize, 0usize)];
    visited[0][0] = true;
    while let Some(&(c, r)) = stack.last() {
        let mut nbrs = Vec::with_capacity(4);
        if c + 1 < cols && !visited[r][c + 1] {
            nbrs.push((c + 1, r));
        }
        if c > 0 && !visited[r][c - 1] {
            nbrs.push((c - 1, r));
        }
        if r + 1 < rows && !visited[r + 1][c] {
            nbrs.push((c, r + 1));
        }
        if r > 0 && !visited[r - 1][c] {
            nbrs.push((c, r - 1));
        }
        let Some(&(nc, nr)) = nbrs.choose(&mut rng) else {
            stack.pop();
            continue;
        };
        match (nc as isize - c as isize, nr as isize - r as isize) {
            (1, 0) => east[r][c] = false,
            (-1, 0) => east[r][nc] = false,
            (0, 1) => north[r][c] = false,
            _ => north[nr][c] = false,
        }
        visited[nr][nc] = true;
        stack.push((nc, nr));
    }
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols && east[r][c] && rng.random::<f64>() < spec.loop_fraction {
                east[r][c] = false;
            }
            if r + 1 < rows && north[r][c] && rng.random::<f64>() < spec.loop_fraction {
                north[r][c] = false;
            }
        }
    }

    let mut raster = Raster::filled(px_w, px_h, FREE)?;
    let half = spec.wall_thickness / 2.0;
    let cw = spec.corridor_width;
    // Fill world rectangle [x0,x1]x[y0,y1] (y up).
    let mut fill = |x0: f64, x1: f64, y0: f64, y1: f64| {
        let to_px = |v: f64| (v / spec.resolution).round().max(0.0) as usize;
        let (c0, c1) = (to_px(x0), to_px(x1).min(px_w));
        let (r0, r1) = (to_px(y0), to_px(y1).min(px_h));
        for y in r0..r1 {
            for x in c0..c1 {
                raster.set(x, px_h - 1 - y, WALL);
            }
        }
    };
    let (w, h) = (spec.width, spec.height);
    let t = spec.wall_thickness.max(spec.resolution);
    fill(0.0, w, 0.0, t);
    fill(0.0, w, h - t, h);
    fill(0.0, t, 0.0, h);
    fill(w - t, w, 0.0, h);
    for r in 0..rows {
        for c in 0..cols {
            let (x0, y0) = (c as f64 * cw, r as f64 * cw);
            if c + 1 < cols && east[r][c] {
                let x = x0 + cw;
                fill(x - half, x + half, y0 - half, y0 + cw + half);
            }
            if r + 1 < rows && north[r][c] {
                let y = y0 + cw;
                fill(x0 - half, x0 + cw + half, y - half, y + half);
            }
        }
    }
    Ok(raster)
}
