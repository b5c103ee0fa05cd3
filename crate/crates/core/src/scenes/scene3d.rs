use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{sphere_clearance, RobotSdf};
use crate::planner::DistanceChecker;
use crate::robot::RobotModel;

pub const SCENE3D_FORMAT: &str = "linksdf-scene3d";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Axis-aligned box, replaced at load by spheres of `sphere_radius` whose
/// centers cover its faces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub sphere_radius: f64,
}

impl BoxObstacle {
    /// Sphere centers on a boundary lattice with spacing at most `r·√2`, so
    /// every face point lies within `r` of some center.
    pub fn to_spheres(&self) -> Vec<Sphere> {
        let r = self.sphere_radius;
        let spacing = r * std::f64::consts::SQRT_2;
        let n: Vec<usize> = self
            .half_extents
            .iter()
            .map(|h| ((2.0 * h / spacing).ceil() as usize).max(1) + 1)
            .collect();
        let coord = |axis: usize, i: usize| {
            let h = self.half_extents[axis];
            self.center[axis] - h + 2.0 * h * i as f64 / (n[axis] - 1) as f64
        };
        let mut out = Vec::new();
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let on_face = i == 0 || i == n[0] - 1 || j == 0 || j == n[1] - 1 || k == 0 || k == n[2] - 1;
                    if on_face {
                        out.push(Sphere {
                            center: [coord(0, i), coord(1, j), coord(2, k)],
                            radius: r,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Arm scene: obstacle spheres (boxes are decomposed on load) plus start and
/// goal joint vectors.
///
/// ```toml
/// format = "linksdf-scene3d"
/// version = 1
/// name = "shelf"
/// start_q = [0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.8]
/// goal_q = [1.2, -0.3, 0.0, -2.2, 0.0, 2.0, 0.8]
/// z_floor = 0.02
///
/// [[spheres]]
/// center = [0.5, 0.0, 0.4]
/// radius = 0.05
///
/// [[boxes]]
/// center = [0.5, 0.3, 0.2]
/// half_extents = [0.1, 0.1, 0.2]
/// sphere_radius = 0.03
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene3D {
    #[serde(default = "scene3d_format")]
    pub format: String,
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    pub start_q: Vec<f64>,
    pub goal_q: Vec<f64>,
    #[serde(default = "default_z_floor")]
    pub z_floor: f64,
    #[serde(default)]
    pub spheres: Vec<Sphere>,
    #[serde(default)]
    pub boxes: Vec<BoxObstacle>,
}

fn scene3d_format() -> String {
    SCENE3D_FORMAT.into()
}

fn default_z_floor() -> f64 {
    0.02
}

impl Scene3D {
    pub fn validate(&self) -> Result<()> {
        if self.format != SCENE3D_FORMAT || self.version != 1 {
            return Err(Error::Format(format!(
                "expected {SCENE3D_FORMAT} version 1, got {} version {}",
                self.format, self.version
            )));
        }
        if self.start_q.len() != self.goal_q.len() {
            return Err(Error::DimensionMismatch {
                expected: self.start_q.len(),
                got: self.goal_q.len(),
            });
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !finite(&self.start_q) || !finite(&self.goal_q) || !self.z_floor.is_finite() {
            return Err(Error::InvalidConfig("scene values must be finite".into()));
        }
        if self.spheres.iter().any(|s| !(s.radius > 0.0) || !finite(&s.center)) {
            return Err(Error::InvalidConfig("obstacle spheres need a positive radius".into()));
        }
        let bad_box = |b: &BoxObstacle| {
            !(b.sphere_radius > 0.0) || !finite(&b.center) || b.half_extents.iter().any(|h| !(*h > 0.0))
        };
        if self.boxes.iter().any(bad_box) {
            return Err(Error::InvalidConfig("boxes need positive extents and sphere radius".into()));
        }
        Ok(())
    }

    /// Checks the joint vectors against a robot's dimension and limits.
    pub fn validate_for(&self, model: &RobotModel) -> Result<()> {
        for q in [&self.start_q, &self.goal_q] {
            if q.len() != model.n_dof() {
                return Err(Error::DimensionMismatch {
                    expected: model.n_dof(),
                    got: q.len(),
                });
            }
        }
        if !model.within_limits(&self.goal_q) || !model.within_limits(&self.start_q) {
            return Err(Error::InvalidConfig("start or goal violates the joint limits".into()));
        }
        Ok(())
    }

    /// Explicit spheres followed by the decomposition of every box.
    pub fn obstacle_spheres(&self) -> Vec<Sphere> {
        let mut out = self.spheres.clone();
        for b in &self.boxes {
            out.extend(b.to_spheres());
        }
        out
    }

    pub fn from_toml_str(text: &str, context: &str) -> Result<Self> {
        let scene: Self = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn start_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.start_q)
    }

    pub fn goal_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.goal_q)
    }
}

/// Joint-space clearance `d(q) = min_j (composite(q, c_j) − r_j)`.
pub struct ArmChecker<'a> {
    sdf: &'a dyn RobotSdf,
    centers: Vec<Vector3<f64>>,
    radii: Vec<f64>,
}

impl<'a> ArmChecker<'a> {
    pub fn new(sdf: &'a dyn RobotSdf, spheres: &[Sphere]) -> Self {
        Self {
            sdf,
            centers: spheres.iter().map(|s| Vector3::from(s.center)).collect(),
            radii: spheres.iter().map(|s| s.radius).collect(),
        }
    }

    pub fn for_scene(sdf: &'a dyn RobotSdf, scene: &Scene3D) -> Self {
        Self::new(sdf, &scene.obstacle_spheres())
    }

    pub fn n_spheres(&self) -> usize {
        self.centers.len()
    }

    fn clearance(&self, states: &[DVector<f64>], cutoff: Option<f64>) -> Result<Vec<f64>> {
        let model = self.sdf.model();
        let poses = states
            .iter()
            .map(|q| model.forward_kinematics(q.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        sphere_clearance(self.sdf, &poses, &self.centers, &self.radii, cutoff)
    }
}

impl DistanceChecker for ArmChecker<'_> {
    fn distances(&self, states: &[DVector<f64>]) -> Result<Vec<f64>> {
        self.clearance(states, None)
    }

    fn within(&self, states: &[DVector<f64>], eps: f64) -> Result<Vec<bool>> {
        Ok(self.clearance(states, Some(eps))?.into_iter().map(|d| d <= eps).collect())
    }
}
