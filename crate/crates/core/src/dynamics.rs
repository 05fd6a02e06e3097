//! Generative motion and sensing models.
//!
//! * Differential drive: unicycle kinematics integrated along exact arcs,
//!   observed through a 64-ray LIDAR spanning 220 degrees with Gaussian range
//!   noise.
//! * Quadrotor with suspended load: the vehicle is a kinematic double
//!   integrator on commanded acceleration; the load is a spherical pendulum
//!   hanging from the vehicle and driven by its acceleration.
//!
//! Load angles `(psi, phi)` place the unit cable vector at
//! `u = (cos psi sin phi, sin psi, -cos psi cos phi)`, so `(0, 0)` hangs
//! straight down and the chart is regular around it.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::workspace::{ConfigPoint, OccupancyGrid};

pub const SCAN_RAYS: usize = 64;
pub const SCAN_FOV: f64 = 220.0 * PI / 180.0;
pub const SCAN_MAX_RANGE: f64 = 5.0;
/// Goal polar pair plus the scan.
pub const INDOOR_OBS_DIM: usize = 2 + SCAN_RAYS;
pub const AERIAL_STATE_DIM: usize = 10;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r == -PI {
        r = PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndoorParams {
    /// Control period (5 Hz).
    pub dt: f64,
    pub v_max: f64,
    pub track_width: f64,
    pub sensor_sigma: f64,
}

impl Default for IndoorParams {
    fn default() -> Self {
        Self {
            dt: 0.2,
            v_max: 1.0,
            track_width: 0.5,
            sensor_sigma: 0.1,
        }
    }
}

impl IndoorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.v_max > 0.0) || !(self.track_width > 0.0) {
            return Err(Error::InvalidParameter(
                "dt, v_max and track_width must be positive".into(),
            ));
        }
        if !(self.sensor_sigma >= 0.0) {
            return Err(Error::InvalidParameter("sensor_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AerialParams {
    /// Control period (50 Hz).
    pub dt: f64,
    pub a_max: f64,
    pub pendulum_length: f64,
    pub gravity: f64,
    /// Load displacement bound, radians.
    pub displacement_bound: f64,
    /// Height of extruded obstacle footprints.
    pub obstacle_height: f64,
    pub floor: f64,
    pub ceiling: f64,
}

impl Default for AerialParams {
    fn default() -> Self {
        Self {
            dt: 0.02,
            a_max: 5.0,
            pendulum_length: 0.62,
            gravity: 9.81,
            displacement_bound: 45f64.to_radians(),
            obstacle_height: 3.0,
            floor: 0.5,
            ceiling: 6.0,
        }
    }
}

impl AerialParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.dt) || !pos(self.a_max) || !pos(self.pendulum_length) || !pos(self.gravity) {
            return Err(Error::InvalidParameter(
                "aerial dt, a_max, pendulum_length and gravity must be positive".into(),
            ));
        }
        if !(self.displacement_bound > 0.0 && self.displacement_bound <= PI) {
            return Err(Error::InvalidParameter("displacement bound must lie in (0, 180] degrees".into()));
        }
        if !(self.ceiling > self.floor) {
            return Err(Error::InvalidParameter("ceiling must exceed floor".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffDriveState {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-pi, pi]`.
    pub heading: f64,
}

impl DiffDriveState {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> ConfigPoint {
        ConfigPoint::planar(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadLoadState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Load angles `(psi, phi)`.
    pub eta: [f64; 2],
    pub eta_dot: [f64; 2],
}

impl QuadLoadState {
    pub fn at_rest(p: ConfigPoint) -> Self {
        Self {
            position: [p.x, p.y, p.z],
            ..Default::default()
        }
    }

    pub fn position_point(&self) -> ConfigPoint {
        ConfigPoint::spatial(self.position[0], self.position[1], self.position[2])
    }

    /// Unit vector from vehicle to load.
    pub fn cable_direction(&self) -> [f64; 3] {
        let (psi, phi) = (self.eta[0], self.eta[1]);
        [psi.cos() * phi.sin(), psi.sin(), -psi.cos() * phi.cos()]
    }

    /// Angle between the cable and straight down, in `[0, pi]`.
    pub fn displacement(&self) -> f64 {
        let c = (self.eta[0].cos() * self.eta[1].cos()).clamp(-1.0, 1.0);
        c.acos()
    }

    pub fn speed(&self) -> f64 {
        let v = self.velocity;
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    pub fn to_vector(&self) -> [f64; AERIAL_STATE_DIM] {
        let (p, v, e, ed) = (self.position, self.velocity, self.eta, self.eta_dot);
        [p[0], p[1], p[2], v[0], v[1], v[2], e[0], e[1], ed[0], ed[1]]
    }

    /// Pendulum energy per unit load mass in the vehicle frame,
    /// relative to the hanging rest position.
    pub fn pendulum_energy(&self, length: f64, gravity: f64) -> f64 {
        let (psi, phi) = (self.eta[0], self.eta[1]);
        let kinetic = 0.5 * length * length * (self.eta_dot[0].powi(2) + psi.cos().powi(2) * self.eta_dot[1].powi(2));
        let potential = gravity * length * (1.0 - psi.cos() * phi.cos());
        kinetic + potential
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    /// Left and right wheel speeds, m/s.
    Wheels { left: f64, right: f64 },
    /// Vehicle acceleration, m/s^2.
    Accel([f64; 3]),
}

impl Action {
    pub fn magnitude(&self) -> f64 {
        match *self {
            Action::Wheels { left, right } => left.hypot(right),
            Action::Accel(a) => (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt(),
        }
    }
}

/// Unicycle update along an exact arc with `v = (l + r) / 2` and
/// `omega = (r - l) / track`. Wheel speeds are clamped to `v_max`.
pub fn diffdrive_step(
    state: &DiffDriveState,
    left: f64,
    right: f64,
    dt: f64,
    params: &IndoorParams,
) -> Result<DiffDriveState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let left = left.clamp(-params.v_max, params.v_max);
    let right = right.clamp(-params.v_max, params.v_max);
    let v = 0.5 * (left + right);
    let omega = (right - left) / params.track_width;
    let h0 = state.heading;
    let h1 = h0 + omega * dt;
    let (x, y) = if (omega * dt).abs() < 1e-12 {
        (state.x + v * dt * h0.cos(), state.y + v * dt * h0.sin())
    } else {
        let radius = v / omega;
        (
            state.x + radius * (h1.sin() - h0.sin()),
            state.y - radius * (h1.cos() - h0.cos()),
        )
    };
    Ok(DiffDriveState {
        x,
        y,
        heading: wrap_angle(h1),
    })
}

/// Internal sub-steps per control period for the load pendulum.
pub const PENDULUM_SUBSTEPS: usize = 8;

/// One control period of the vehicle/load model under constant commanded
/// acceleration. The vehicle position uses the exact constant-acceleration
/// update; the pendulum uses classic Runge-Kutta over
/// [`PENDULUM_SUBSTEPS`] sub-steps.
pub fn quadload_step(
    state: &QuadLoadState,
    accel: [f64; 3],
    dt: f64,
    params: &AerialParams,
) -> Result<QuadLoadState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let a = accel.map(|c| c.clamp(-params.a_max, params.a_max));
    let mut next = *state;
    for i in 0..3 {
        next.position[i] = state.position[i] + state.velocity[i] * dt + 0.5 * a[i] * dt * dt;
        next.velocity[i] = state.velocity[i] + a[i] * dt;
    }
    let h = dt / PENDULUM_SUBSTEPS as f64;
    let (mut eta, mut eta_dot) = (state.eta, state.eta_dot);
    let deriv = |e: [f64; 2], ed: [f64; 2]| (ed, pendulum_acceleration(e, ed, a, params));
    let shift = |v: [f64; 2], d: [f64; 2], k: f64| [v[0] + k * d[0], v[1] + k * d[1]];
    for _ in 0..PENDULUM_SUBSTEPS {
        let (k1e, k1d) = deriv(eta, eta_dot);
        let (k2e, k2d) = deriv(shift(eta, k1e, h / 2.0), shift(eta_dot, k1d, h / 2.0));
        let (k3e, k3d) = deriv(shift(eta, k2e, h / 2.0), shift(eta_dot, k2d, h / 2.0));
        let (k4e, k4d) = deriv(shift(eta, k3e, h), shift(eta_dot, k3d, h));
        for i in 0..2 {
            eta[i] += h / 6.0 * (k1e[i] + 2.0 * k2e[i] + 2.0 * k3e[i] + k4e[i]);
            eta_dot[i] += h / 6.0 * (k1d[i] + 2.0 * k2d[i] + 2.0 * k3d[i] + k4d[i]);
        }
    }
    next.eta = [wrap_angle(eta[0]), wrap_angle(eta[1])];
    next.eta_dot = eta_dot;
    Ok(next)
}

/// Angular accelerations of the load for a pivot accelerating at `accel`.
pub fn pendulum_acceleration(eta: [f64; 2], eta_dot: [f64; 2], accel: [f64; 3], params: &AerialParams) -> [f64; 2] {
    let (psi, phi) = (eta[0], eta[1]);
    let (sp, cp) = psi.sin_cos();
    let (sf, cf) = phi.sin_cos();
    let l = params.pendulum_length;
    // Apparent gravity in the vehicle frame.
    let g_eff = [-accel[0], -accel[1], -params.gravity - accel[2]];
    let du_dpsi = [-sp * sf, cp, sp * cf];
    let du_dphi = [cp * cf, 0.0, cp * sf];
    let dot = |u: [f64; 3]| u[0] * g_eff[0] + u[1] * g_eff[1] + u[2] * g_eff[2];
    let psi_dd = -sp * cp * eta_dot[1] * eta_dot[1] + dot(du_dpsi) / l;
    let cp2 = (cp * cp).max(1e-9);
    let phi_dd = 2.0 * (sp / cp) * eta_dot[0] * eta_dot[1] + dot(du_dphi) / (l * cp2);
    [psi_dd, phi_dd]
}

/// Goal in robot-frame polar coordinates plus a 64-ray range scan.
#[derive(Debug, Clone, PartialEq)]
pub struct IndoorObservation {
    pub goal_range: f64,
    pub goal_bearing: f64,
    pub scan: Vec<f64>,
}

impl IndoorObservation {
    pub fn dim(&self) -> usize {
        2 + self.scan.len()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.goal_range);
        v.push(self.goal_bearing);
        v.extend_from_slice(&self.scan);
        v
    }

    pub fn min_range(&self) -> f64 {
        self.scan.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Bearing of ray `i` relative to the robot heading; ray 0 is rightmost.
pub fn ray_offset(i: usize) -> f64 {
    -SCAN_FOV / 2.0 + SCAN_FOV * i as f64 / (SCAN_RAYS - 1) as f64
}

/// Gaussian LIDAR range noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sensor_sigma: f64,
}

impl NoiseModel {
    pub fn new(sensor_sigma: f64) -> Result<Self> {
        if !(sensor_sigma >= 0.0) || !sensor_sigma.is_finite() {
            return Err(Error::InvalidParameter("sensor_sigma must be non-negative".into()));
        }
        Ok(Self { sensor_sigma })
    }

    /// Clamps the true range to the sensor span, then adds zero-mean noise.
    /// The noisy reading is left unclamped so its mean stays unbiased.
    pub fn perturb<R: Rng + ?Sized>(&self, range: f64, rng: &mut R) -> f64 {
        let range = range.clamp(0.0, SCAN_MAX_RANGE);
        if self.sensor_sigma == 0.0 {
            return range;
        }
        let n = Normal::new(0.0, self.sensor_sigma).expect("validated sigma");
        range + n.sample(rng)
    }
}

pub fn observe_indoor<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    state: &DiffDriveState,
    goal: &ConfigPoint,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<IndoorObservation> {
    let origin = state.position();
    let Some(cell) = grid.world_to_cell(origin.x, origin.y) else {
        return Err(Error::OutOfBounds {
            x: origin.x,
            y: origin.y,
        });
    };
    let scan = (0..SCAN_RAYS)
        .map(|i| {
            let truth = grid.raycast_from_cell(&origin, cell, state.heading + ray_offset(i), SCAN_MAX_RANGE);
            noise.perturb(truth, rng)
        })
        .collect();
    let (dx, dy) = (goal.x - state.x, goal.y - state.y);
    Ok(IndoorObservation {
        goal_range: dx.hypot(dy),
        goal_bearing: wrap_angle(dy.atan2(dx) - state.heading),
        scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indoor() -> IndoorParams {
        IndoorParams::default()
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(10.0) - (10.0 - 4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn straight_motion() {
        let s = DiffDriveState::new(0.0, 0.0, 0.0);
        let n = diffdrive_step(&s, 1.0, 1.0, 0.2, &indoor()).unwrap();
        assert!((n.x - 0.2).abs() < 1e-15);
        assert_eq!(n.y, 0.0);
        assert_eq!(n.heading, 0.0);
    }

    #[test]
    fn spin_in_place() {
        let s = DiffDriveState::new(1.0, 2.0, 0.3);
        let n = diffdrive_step(&s, -0.4, 0.4, 0.2, &indoor()).unwrap();
        assert!((n.x - 1.0).abs() < 1e-15 && (n.y - 2.0).abs() < 1e-15);
        assert!((n.heading - (0.3 + 2.0 * 0.4 * 0.2 / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_dt_rejected() {
        let s = DiffDriveState::new(0.0, 0.0, 0.0);
        assert!(diffdrive_step(&s, 1.0, 1.0, 0.0, &indoor()).is_err());
        assert!(quadload_step(&QuadLoadState::default(), [0.0; 3], -0.1, &AerialParams::default()).is_err());
    }

    #[test]
    fn wheel_speeds_are_clamped() {
        let s = DiffDriveState::new(0.0, 0.0, 0.0);
        let n = diffdrive_step(&s, 5.0, 5.0, 0.2, &indoor()).unwrap();
        assert!((n.x - 0.2).abs() < 1e-15);
    }

    #[test]
    fn quad_equilibrium_is_fixed_point() {
        let s = QuadLoadState::at_rest(ConfigPoint::spatial(1.0, 2.0, 3.0));
        let n = quadload_step(&s, [0.0; 3], 0.02, &AerialParams::default()).unwrap();
        assert_eq!(n, s);
    }

    #[test]
    fn vertical_double_integrator() {
        let p = AerialParams::default();
        let mut s = QuadLoadState::default();
        for _ in 0..50 {
            s = quadload_step(&s, [0.0, 0.0, 1.0], 0.02, &p).unwrap();
        }
        assert!((s.position[2] - 0.5).abs() < 1e-9);
        assert!((s.velocity[2] - 1.0).abs() < 1e-9);
        // Vertical acceleration does not swing the load.
        assert_eq!(s.displacement(), 0.0);
    }

    #[test]
    fn displacement_matches_cable_vector() {
        let s = QuadLoadState {
            eta: [0.3, -0.4],
            ..Default::default()
        };
        let u = s.cable_direction();
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((s.displacement() - (-u[2]).acos()).abs() < 1e-12);
    }

    #[test]
    fn horizontal_acceleration_swings_load_backwards() {
        let p = AerialParams::default();
        let mut s = QuadLoadState::default();
        for _ in 0..5 {
            s = quadload_step(&s, [1.0, 0.0, 0.0], 0.02, &p).unwrap();
        }
        // Accelerating along +x leaves the load trailing towards -x.
        assert!(s.cable_direction()[0] < 0.0);
        assert!(s.displacement() > 0.0);
    }

    #[test]
    fn observation_dimension() {
        let g = OccupancyGrid::from_obstacles(200, 200, 0.1, (0.0, 0.0), 0.0, &vec![false; 40000]).unwrap();
        let s = DiffDriveState::new(10.0, 10.0, 0.0);
        let o = observe_indoor(&g, &s, &ConfigPoint::planar(12.0, 10.0), &NoiseModel::new(0.0).unwrap(), &mut crate::seed::rng(0)).unwrap();
        assert_eq!(o.dim(), INDOOR_OBS_DIM);
        assert_eq!(o.to_vector().len(), 66);
        assert!((o.goal_range - 2.0).abs() < 1e-12);
        assert_eq!(o.goal_bearing, 0.0);
        assert!(o.scan.iter().all(|&r| r == SCAN_MAX_RANGE));
    }

    #[test]
    fn observe_outside_grid_errors() {
        let g = OccupancyGrid::from_obstacles(10, 10, 0.1, (0.0, 0.0), 0.0, &[false; 100]).unwrap();
        let s = DiffDriveState::new(5.0, 5.0, 0.0);
        let r = observe_indoor(&g, &s, &ConfigPoint::planar(0.0, 0.0), &NoiseModel::new(0.1).unwrap(), &mut crate::seed::rng(0));
        assert!(r.is_err());
    }

    #[test]
    fn ray_layout_spans_fov() {
        assert!((ray_offset(0) + SCAN_FOV / 2.0).abs() < 1e-15);
        assert!((ray_offset(SCAN_RAYS - 1) - SCAN_FOV / 2.0).abs() < 1e-15);
    }
}
