//! PRM-RL: probabilistic roadmaps whose edges are accepted only when a
//! closed-loop navigation policy reliably drives between their endpoints in
//! a noisy simulator.
//!
//! - [`workspace`]: occupancy grids, collision checks, ray casting, mazes.
//! - [`dynamics`] and [`sim`]: differential-drive robot with a noisy LIDAR,
//!   quadrotor with a suspended load.
//! - [`policy`]: reactive controllers and the search that trains them.
//! - [`connect`]: straight-line and Monte Carlo rollout local planners.
//! - [`roadmap`]: construction, persistence, shortest-path queries.
//! - [`runner`]: plan execution, trajectory export, batch experiments.

pub mod config;
pub mod connect;
pub mod dynamics;
pub mod error;
pub mod policy;
pub mod roadmap;
pub mod runner;
pub mod seed;
pub mod sim;
pub mod workspace;

pub use error::{Error, Result};
