//! Occupancy-grid workspace: collision predicates, free-space sampling and
//! ray casting.
//!
//! Cells are labelled [`CellLabel::Free`], [`CellLabel::Obstacle`] or
//! [`CellLabel::Inflated`]. Only `Free` cells belong to C-free; `Inflated`
//! cells form the termination band around obstacles. Rays pass through the
//! band and stop at `Obstacle` cells or the map edge.
//!
//! Cell `(0, 0)` is the bottom-left cell; its lower-left corner sits at the
//! grid origin. Raster row 0 is the top of the image.

mod io;
pub mod maze;

pub use io::{load_map, save_map, MapMeta};

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Robot body radius used for the default inflation band.
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.25;

/// Default inflation radius: robot radius plus 0.1 m clearance.
pub const DEFAULT_INFLATION_RADIUS: f64 = DEFAULT_ROBOT_RADIUS + 0.1;

/// A point in configuration space. Planar tasks keep `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfigPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ConfigPoint {
    pub const fn planar(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub const fn spatial(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &ConfigPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(&self, other: &ConfigPoint, t: f64) -> ConfigPoint {
        ConfigPoint {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
            z: self.z + (other.z - self.z) * t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellLabel {
    Free = 0,
    Obstacle = 1,
    Inflated = 2,
}

/// 8-bit grayscale raster, rows stored top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.is_empty() {
            return Err(Error::EmptyRaster);
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "raster has {} pixels, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn pixel(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }
}

/// Luminance below one half marks an obstacle.
#[inline]
pub fn is_dark(pixel: u8) -> bool {
    (pixel as f64) / 255.0 < 0.5
}

/// Immutable occupancy grid.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    inflation_radius: f64,
    cells: Vec<CellLabel>,
    free_cells: Vec<u32>,
}

impl OccupancyGrid {
    /// Builds a grid from a raster. Dark pixels become obstacles, cells whose
    /// centre lies within `inflation_radius` of an obstacle centre become
    /// inflated, the rest are free.
    pub fn load(raster: &Raster, resolution: f64, inflation_radius: f64) -> Result<Self> {
        Self::load_with_origin(raster, resolution, inflation_radius, (0.0, 0.0))
    }

    pub fn load_with_origin(
        raster: &Raster,
        resolution: f64,
        inflation_radius: f64,
        origin: (f64, f64),
    ) -> Result<Self> {
        if raster.width == 0 || raster.height == 0 || raster.pixels.is_empty() {
            return Err(Error::EmptyRaster);
        }
        let (w, h) = (raster.width, raster.height);
        let mut obstacles = vec![false; w * h];
        for row in 0..h {
            let y = h - 1 - row;
            for x in 0..w {
                obstacles[y * w + x] = is_dark(raster.pixel(x, row));
            }
        }
        Self::from_obstacles(w, h, resolution, origin, inflation_radius, &obstacles)
    }

    /// Builds a grid from a row-major obstacle mask indexed `y * width + x`
    /// with `y = 0` at the bottom.
    pub fn from_obstacles(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        inflation_radius: f64,
        obstacles: &[bool],
    ) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster);
        }
        if obstacles.len() != width * height {
            return Err(Error::InvalidParameter("obstacle mask size mismatch".into()));
        }
        if !(inflation_radius >= 0.0) || !inflation_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inflation radius must be non-negative, got {inflation_radius}"
            )));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }

        let mut cells: Vec<CellLabel> = obstacles
            .iter()
            .map(|&o| if o { CellLabel::Obstacle } else { CellLabel::Free })
            .collect();

        // Stamp a disk of offsets around every obstacle cell on the obstacle
        // boundary; interior obstacle cells cannot reach further than it.
        let reach = (inflation_radius / resolution + 1e-9).floor() as isize;
        let r2 = (inflation_radius / resolution).powi(2) + 1e-9;
        let mut disk = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if (dx * dx + dy * dy) as f64 <= r2 && (dx, dy) != (0, 0) {
                    disk.push((dx, dy));
                }
            }
        }
        if !disk.is_empty() {
            let (wi, hi) = (width as isize, height as isize);
            for y in 0..hi {
                for x in 0..wi {
                    if !obstacles[(y * wi + x) as usize] {
                        continue;
                    }
                    let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx < 0 || ny < 0 || nx >= wi || ny >= hi || !obstacles[(ny * wi + nx) as usize]
                    });
                    if !boundary {
                        continue;
                    }
                    for &(dx, dy) in &disk {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= wi || ny >= hi {
                            continue;
                        }
                        let c = &mut cells[(ny * wi + nx) as usize];
                        if *c == CellLabel::Free {
                            *c = CellLabel::Inflated;
                        }
                    }
                }
            }
        }

        let free_cells = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == CellLabel::Free)
            .map(|(i, _)| i as u32)
            .collect();

        Ok(Self {
            width,
            height,
            resolution,
            origin,
            inflation_radius,
            cells,
            free_cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn inflation_radius(&self) -> f64 {
        self.inflation_radius
    }

    /// World extent `(width_m, height_m)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn cells(&self) -> &[CellLabel] {
        &self.cells
    }

    pub fn label(&self, cx: usize, cy: usize) -> CellLabel {
        self.cells[cy * self.width + cx]
    }

    pub fn free_cell_count(&self) -> usize {
        self.free_cells.len()
    }

    /// Free area in square metres.
    pub fn free_area(&self) -> f64 {
        self.free_cells.len() as f64 * self.resolution * self.resolution
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.cells.iter().filter(|c| **c == label).count()
    }

    /// Cell containing a world point, if it is inside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin.0) / self.resolution;
        let fy = (y - self.origin.1) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (cx, cy) = (fx.floor() as usize, fy.floor() as usize);
        (cx < self.width && cy < self.height).then_some((cx, cy))
    }

    /// World coordinates of a cell centre.
    pub fn cell_center(&self, cx: usize, cy: usize) -> ConfigPoint {
        ConfigPoint::planar(
            self.origin.0 + (cx as f64 + 0.5) * self.resolution,
            self.origin.1 + (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, p: &ConfigPoint) -> bool {
        self.world_to_cell(p.x, p.y).is_some()
    }

    pub fn label_at(&self, p: &ConfigPoint) -> Option<CellLabel> {
        self.world_to_cell(p.x, p.y).map(|(cx, cy)| self.label(cx, cy))
    }

    /// True iff `p` falls in a free cell. Points outside the grid are not free.
    pub fn is_free(&self, p: &ConfigPoint) -> bool {
        self.label_at(p) == Some(CellLabel::Free)
    }

    /// Straight-line check at interpolation spacing no larger than `step`,
    /// endpoints included.
    pub fn segment_free(&self, a: &ConfigPoint, b: &ConfigPoint, step: f64) -> Result<bool> {
        self.segment_check(a, b, step).map(|(free, _)| free)
    }

    /// Like [`segment_free`](Self::segment_free) but also returns the number
    /// of point checks performed.
    pub fn segment_check(&self, a: &ConfigPoint, b: &ConfigPoint, step: f64) -> Result<(bool, u64)> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "segment step must be positive, got {step}"
            )));
        }
        if step > self.resolution / 2.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "segment step {step} exceeds half the grid resolution"
            )));
        }
        Ok(interpolate_check(a, b, step, |p| self.is_free(p)))
    }

    /// Distance along `bearing` to the first obstacle cell or map edge,
    /// clamped to `max_range`. Inflated cells do not stop the ray.
    pub fn raycast(&self, origin: &ConfigPoint, bearing: f64, max_range: f64) -> Result<f64> {
        let Some((cx, cy)) = self.world_to_cell(origin.x, origin.y) else {
            return Err(Error::OutOfBounds {
                x: origin.x,
                y: origin.y,
            });
        };
        Ok(self.raycast_from_cell(origin, (cx, cy), bearing, max_range))
    }

    pub(crate) fn raycast_from_cell(
        &self,
        origin: &ConfigPoint,
        cell: (usize, usize),
        bearing: f64,
        max_range: f64,
    ) -> f64 {
        if max_range <= 0.0 {
            return 0.0;
        }
        let (mut cx, mut cy) = (cell.0 as isize, cell.1 as isize);
        if self.cells[cy as usize * self.width + cx as usize] == CellLabel::Obstacle {
            return 0.0;
        }
        let (dx, dy) = (bearing.cos(), bearing.sin());
        let res = self.resolution;
        // Position in cell units relative to the grid origin.
        let px = (origin.x - self.origin.0) / res;
        let py = (origin.y - self.origin.1) / res;

        let (step_x, mut t_max_x, t_delta_x) = axis_setup(px, cx, dx);
        let (step_y, mut t_max_y, t_delta_y) = axis_setup(py, cy, dy);
        let limit = max_range / res;
        let (w, h) = (self.width as isize, self.height as isize);

        loop {
            let t = if t_max_x < t_max_y {
                cx += step_x;
                let t = t_max_x;
                t_max_x += t_delta_x;
                t
            } else {
                cy += step_y;
                let t = t_max_y;
                t_max_y += t_delta_y;
                t
            };
            if t >= limit {
                return max_range;
            }
            if cx < 0 || cy < 0 || cx >= w || cy >= h {
                return t * res;
            }
            if self.cells[(cy * w + cx) as usize] == CellLabel::Obstacle {
                return t * res;
            }
        }
    }

    /// Uniform sample over the free area.
    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ConfigPoint> {
        if self.free_cells.is_empty() {
            return Err(Error::NoFreeSpace);
        }
        let idx = self.free_cells[rng.random_range(0..self.free_cells.len())] as usize;
        let (cx, cy) = (idx % self.width, idx / self.width);
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Ok(ConfigPoint::planar(
            self.origin.0 + (cx as f64 + u) * self.resolution,
            self.origin.1 + (cy as f64 + v) * self.resolution,
        ))
    }

    /// SHA-256 over dimensions, resolution, origin and labels.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update((self.height as u64).to_le_bytes());
        hasher.update(self.resolution.to_le_bytes());
        hasher.update(self.origin.0.to_le_bytes());
        hasher.update(self.origin.1.to_le_bytes());
        let labels: Vec<u8> = self.cells.iter().map(|c| *c as u8).collect();
        hasher.update(&labels);
        hex::encode(hasher.finalize())
    }
}

fn axis_setup(p: f64, cell: isize, d: f64) -> (isize, f64, f64) {
    if d > 0.0 {
        (1, ((cell + 1) as f64 - p) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (cell as f64 - p) / d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Checks evenly spaced points along `[a, b]` at spacing at most `step`.
/// Endpoints are put in a canonical order first so the check is symmetric.
pub(crate) fn interpolate_check(
    a: &ConfigPoint,
    b: &ConfigPoint,
    step: f64,
    mut free: impl FnMut(&ConfigPoint) -> bool,
) -> (bool, u64) {
    let (a, b) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) {
        (a, b)
    } else {
        (b, a)
    };
    let len = a.distance(b);
    let n = (len / step).ceil() as u64;
    let mut checks = 0;
    for i in 0..=n {
        let p = if n == 0 {
            *a
        } else if i == n {
            *b
        } else {
            a.lerp(b, i as f64 / n as f64)
        };
        checks += 1;
        if !free(&p) {
            return (false, checks);
        }
    }
    (true, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn open(w: usize, h: usize, res: f64) -> OccupancyGrid {
        OccupancyGrid::from_obstacles(w, h, res, (0.0, 0.0), 0.0, &vec![false; w * h]).unwrap()
    }

    #[test]
    fn white_raster_is_all_free() {
        let r = Raster::filled(10, 10, 255).unwrap();
        let g = OccupancyGrid::load(&r, 0.1, 0.0).unwrap();
        assert_eq!(g.count(CellLabel::Free), 100);
    }

    #[test]
    fn black_raster_has_no_free_space() {
        let r = Raster::filled(4, 4, 0).unwrap();
        let g = OccupancyGrid::load(&r, 0.5, 0.3).unwrap();
        assert_eq!(g.free_cell_count(), 0);
        assert!(matches!(
            g.sample_free(&mut seed::rng(1)),
            Err(Error::NoFreeSpace)
        ));
    }

    #[test]
    fn rejects_bad_resolution_and_empty_raster() {
        let r = Raster::filled(2, 2, 255).unwrap();
        assert!(OccupancyGrid::load(&r, 0.0, 0.0).is_err());
        assert!(OccupancyGrid::load(&r, -1.0, 0.0).is_err());
        assert!(matches!(Raster::new(0, 0, vec![]), Err(Error::EmptyRaster)));
    }

    #[test]
    fn threshold_is_half_luminance() {
        assert!(is_dark(127));
        assert!(!is_dark(128));
    }

    #[test]
    fn raster_rows_are_flipped() {
        let mut r = Raster::filled(3, 2, 255).unwrap();
        r.set(0, 0, 0); // top-left pixel
        let g = OccupancyGrid::load(&r, 1.0, 0.0).unwrap();
        assert_eq!(g.label(0, 1), CellLabel::Obstacle);
        assert_eq!(g.label(0, 0), CellLabel::Free);
    }

    #[test]
    fn single_obstacle_inflation_matches_distance_scan() {
        let mut mask = vec![false; 9 * 9];
        mask[4 * 9 + 4] = true;
        let g = OccupancyGrid::from_obstacles(9, 9, 1.0, (0.0, 0.0), 1.5, &mask).unwrap();
        let mut expected = 0;
        for y in 0..9 {
            for x in 0..9 {
                let d = (((x as f64) - 4.0).powi(2) + ((y as f64) - 4.0).powi(2)).sqrt();
                let want = if (x, y) == (4, 4) {
                    CellLabel::Obstacle
                } else if d <= 1.5 {
                    expected += 1;
                    CellLabel::Inflated
                } else {
                    CellLabel::Free
                };
                assert_eq!(g.label(x, y), want, "cell ({x},{y})");
            }
        }
        assert_eq!(expected, 8);
        assert_eq!(g.count(CellLabel::Inflated), 8);
    }

    #[test]
    fn is_free_cases() {
        let mut mask = vec![false; 20 * 20];
        mask[10 * 20 + 10] = true;
        let g = OccupancyGrid::from_obstacles(20, 20, 0.1, (0.0, 0.0), 0.15, &mask).unwrap();
        assert!(g.is_free(&ConfigPoint::planar(0.05, 0.05)));
        // Neighbour of the obstacle is inflated.
        assert!(!g.is_free(&ConfigPoint::planar(1.15, 1.05)));
        assert!(!g.is_free(&ConfigPoint::planar(-0.01, 0.5)));
        assert!(!g.is_free(&ConfigPoint::planar(0.5, 2.0)));
        assert!(!g.is_free(&ConfigPoint::planar(f64::NAN, 0.5)));
    }

    #[test]
    fn world_cell_round_trip_inside_cells() {
        let g = OccupancyGrid::from_obstacles(7, 5, 0.3, (-1.0, 2.0), 0.0, &[false; 35]).unwrap();
        for cy in 0..5 {
            for cx in 0..7 {
                let c = g.cell_center(cx, cy);
                assert_eq!(g.world_to_cell(c.x, c.y), Some((cx, cy)));
            }
        }
    }

    #[test]
    fn segment_cases() {
        let mut mask = vec![false; 40 * 10];
        mask[5 * 40 + 20] = true;
        let g = OccupancyGrid::from_obstacles(40, 10, 0.1, (0.0, 0.0), 0.0, &mask).unwrap();
        let a = ConfigPoint::planar(0.55, 0.55);
        assert!(g.segment_free(&a, &a, 0.05).unwrap());
        let b = ConfigPoint::planar(3.55, 0.55);
        assert!(!g.segment_free(&a, &b, 0.05).unwrap());
        assert!(g.segment_free(&a, &ConfigPoint::planar(3.55, 0.15), 0.05).unwrap());
        assert!(g.segment_free(&a, &b, 0.0).is_err());
        assert!(g.segment_free(&a, &b, 0.2).is_err());
    }

    #[test]
    fn raycast_empty_map_returns_max_range() {
        let g = open(300, 300, 0.1);
        let c = ConfigPoint::planar(15.0, 15.0);
        for k in 0..16 {
            let b = k as f64 * std::f64::consts::TAU / 16.0;
            assert_eq!(g.raycast(&c, b, 5.0).unwrap(), 5.0);
        }
    }

    #[test]
    fn raycast_hits_edges_and_rejects_outside_origin() {
        let g = open(20, 20, 0.1);
        let d = g.raycast(&ConfigPoint::planar(0.5, 1.0), std::f64::consts::PI, 5.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(g.raycast(&ConfigPoint::planar(-1.0, 1.0), 0.0, 5.0).is_err());
    }

    #[test]
    fn raycast_ignores_inflated_band() {
        let mut mask = vec![false; 100 * 10];
        for y in 0..10 {
            mask[y * 100 + 60] = true;
        }
        let g = OccupancyGrid::from_obstacles(100, 10, 0.1, (0.0, 0.0), 0.5, &mask).unwrap();
        let o = ConfigPoint::planar(3.0, 0.55);
        let d = g.raycast(&o, 0.0, 5.0).unwrap();
        assert!((d - 3.0).abs() < 1e-9, "{d}");
    }
}
