//! Collision-free trajectory generation for serial robots: per-link neural
//! signed-distance fields composed through forward kinematics, a sampling
//! trajectory optimizer over a Gaussian-process prior, and a time-optimal
//! path parameterizer.

pub mod error;
pub mod gp;
pub mod mesh;
pub mod nn;
pub mod planner;
pub mod robot;
pub mod scenes;
pub mod time_param;
pub mod trajectory;
pub mod transform;

pub use error::{Error, Result};
pub use trajectory::Trajectory;
