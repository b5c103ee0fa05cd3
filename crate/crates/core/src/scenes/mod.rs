//! Obstacle scenes: planar maps of analytic primitives for point-mass
//! planning, and sphere sets for arm planning.

mod scene2d;
mod scene3d;

pub use scene2d::{Bounds2, Primitive2, Scene2D, SCENE2D_FORMAT};
pub use scene3d::{ArmChecker, BoxObstacle, Scene3D, Sphere, SCENE3D_FORMAT};
