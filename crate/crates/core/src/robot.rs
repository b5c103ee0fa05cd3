//! Serial kinematic chains and forward kinematics.
//!
//! A robot is described by a small TOML document listing its links in chain
//! order. Every link carries the joint that connects it to its parent (the
//! first link's joint connects it to the world):
//!
//! ```toml
//! format = "linksdf-robot"
//! version = 1
//! name = "two-link"
//!
//! [[links]]
//! name = "upper"
//! mesh = "meshes/upper.obj"      # optional, relative to this file
//! [links.joint]
//! kind = "revolute"              # revolute | prismatic | fixed
//! axis = [0.0, 0.0, 1.0]
//! origin = { xyz = [0.0, 0.0, 0.0], rpy = [0.0, 0.0, 0.0] }
//! limits = [-3.14, 3.14]
//! vel_limit = 2.0
//! acc_limit = 10.0
//! ```
//!
//! `origin` also accepts an explicit `rotation` (row-major 3×3) in place of
//! `rpy`. Optional top-level `timing_limit_scale` scales the velocity and
//! acceleration limits handed to time parameterization.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::Rigid;

pub const ROBOT_FORMAT: &str = "linksdf-robot";
pub const ROBOT_VERSION: u32 = 1;

const AXIS_TOL: f64 = 1e-9;
const ROTATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub kind: JointKind,
    pub axis: Unit<Vector3<f64>>,
    pub origin: Rigid,
    pub limits: [f64; 2],
    pub vel_limit: f64,
    pub acc_limit: f64,
}

impl JointSpec {
    pub fn fixed(origin: Rigid) -> Self {
        Self {
            kind: JointKind::Fixed,
            axis: Vector3::z_axis(),
            origin,
            limits: [0.0, 0.0],
            vel_limit: 1.0,
            acc_limit: 1.0,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.kind != JointKind::Fixed
    }

    fn motion(&self, value: f64) -> Rigid {
        match self.kind {
            JointKind::Revolute => Rigid::rotation_about(&self.axis, value),
            JointKind::Prismatic => Rigid::from_translation(self.axis.into_inner() * value),
            JointKind::Fixed => Rigid::identity(),
        }
    }

    /// Parent-from-child transform at joint value `value`.
    pub fn transform(&self, value: f64) -> Rigid {
        match self.kind {
            JointKind::Fixed => self.origin,
            _ => self.origin.compose(&self.motion(value)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: String,
    pub joint: JointSpec,
    pub mesh: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub name: String,
    links: Vec<Link>,
    /// For each link, the index into q of its joint (None for fixed joints).
    dof_index: Vec<Option<usize>>,
    n_dof: usize,
    timing_limit_scale: f64,
    base_dir: PathBuf,
}

/// World-from-link transforms for every link, in chain order.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkPoseSet {
    pub poses: Vec<Rigid>,
    /// Bit `i` set when joint coordinate `i` is outside its limits.
    pub limit_flags: u64,
}

impl LinkPoseSet {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn out_of_limits(&self) -> bool {
        self.limit_flags != 0
    }

    /// Map a batch of world points into the canonical frame of link `k`.
    pub fn world_to_link(&self, k: usize, points: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
        let pose = self.poses.get(k).ok_or(Error::LinkIndex {
            index: k,
            count: self.poses.len(),
        })?;
        Ok(points.iter().map(|p| pose.apply_inverse(p)).collect())
    }
}

impl RobotModel {
    pub fn new(name: impl Into<String>, links: Vec<Link>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidRobot("robot has no links".into()));
        }
        let mut dof_index = Vec::with_capacity(links.len());
        let mut n_dof = 0;
        for link in &links {
            validate_joint(&link.name, &link.joint)?;
            if link.joint.is_moving() {
                dof_index.push(Some(n_dof));
                n_dof += 1;
            } else {
                dof_index.push(None);
            }
        }
        if n_dof > 64 {
            return Err(Error::InvalidRobot(format!("{n_dof} joints exceed the supported 64")));
        }
        Ok(Self {
            name: name.into(),
            links,
            dof_index,
            n_dof,
            timing_limit_scale: 1.0,
            base_dir: PathBuf::new(),
        })
    }

    pub fn with_timing_limit_scale(mut self, scale: f64) -> Self {
        self.timing_limit_scale = scale;
        self
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Mesh path of link `k`, resolved against the description's directory.
    pub fn mesh_path(&self, k: usize) -> Option<PathBuf> {
        let mesh = self.links.get(k)?.mesh.as_ref()?;
        Some(if mesh.is_absolute() {
            mesh.clone()
        } else {
            self.base_dir.join(mesh)
        })
    }

    pub fn moving_joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.links.iter().map(|l| &l.joint).filter(|j| j.is_moving())
    }

    pub fn joint_limits(&self) -> Vec<[f64; 2]> {
        self.moving_joints().map(|j| j.limits).collect()
    }

    pub fn timing_limit_scale(&self) -> f64 {
        self.timing_limit_scale
    }

    pub fn velocity_limits(&self) -> Vec<f64> {
        self.moving_joints()
            .map(|j| j.vel_limit * self.timing_limit_scale)
            .collect()
    }

    pub fn acceleration_limits(&self) -> Vec<f64> {
        self.moving_joints()
            .map(|j| j.acc_limit * self.timing_limit_scale)
            .collect()
    }

    /// Index of the first link whose pose depends on a joint value.
    pub fn first_moving_link(&self) -> Option<usize> {
        self.dof_index.iter().position(Option::is_some)
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.n_dof
            && self
                .moving_joints()
                .zip(q)
                .all(|(j, &v)| v >= j.limits[0] && v <= j.limits[1])
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n_dof {
            return Err(Error::DimensionMismatch {
                expected: self.n_dof,
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<LinkPoseSet> {
        self.check_dim(q)?;
        let mut poses = Vec::with_capacity(self.links.len());
        let mut limit_flags = 0u64;
        let mut current = Rigid::identity();
        for (link, dof) in self.links.iter().zip(&self.dof_index) {
            let value = match dof {
                Some(i) => {
                    let v = q[*i];
                    let [lo, hi] = link.joint.limits;
                    if v < lo || v > hi {
                        limit_flags |= 1 << i;
                    }
                    v
                }
                None => 0.0,
            };
            current = current.compose(&link.joint.transform(value));
            poses.push(current);
        }
        Ok(LinkPoseSet { poses, limit_flags })
    }

    /// Transform from link `from` to link `to` (`to` downstream of `from`).
    pub fn relative_transform(&self, q: &[f64], from: usize, to: usize) -> Result<Rigid> {
        self.check_dim(q)?;
        let count = self.links.len();
        for index in [from, to] {
            if index >= count {
                return Err(Error::LinkIndex { index, count });
            }
        }
        if to < from {
            return Err(Error::InvalidRobot(format!("link {to} is upstream of link {from}")));
        }
        let mut t = Rigid::identity();
        for k in from + 1..=to {
            let value = self.dof_index[k].map_or(0.0, |i| q[i]);
            t = t.compose(&self.links[k].joint.transform(value));
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut model = Self::from_toml_str(&text, &path.display().to_string())?;
        model.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(model)
    }

    pub fn from_toml_str(text: &str, context: &str) -> Result<Self> {
        let doc: RobotDoc = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        if doc.format.as_deref().is_some_and(|f| f != ROBOT_FORMAT) {
            return Err(Error::Format(format!("{context}: not a {ROBOT_FORMAT} document")));
        }
        if doc.version != ROBOT_VERSION {
            return Err(Error::Format(format!(
                "{context}: robot description version {} (supported: {ROBOT_VERSION})",
                doc.version
            )));
        }
        let links = doc
            .links
            .into_iter()
            .map(|l| l.into_link())
            .collect::<Result<Vec<_>>>()?;
        let scale = doc.timing_limit_scale.unwrap_or(1.0);
        if !(scale > 0.0) {
            return Err(Error::InvalidRobot("timing_limit_scale must be positive".into()));
        }
        Ok(Self::new(doc.name, links)?.with_timing_limit_scale(scale))
    }

    pub fn to_toml_string(&self) -> String {
        let doc = RobotDoc {
            format: Some(ROBOT_FORMAT.into()),
            version: ROBOT_VERSION,
            name: self.name.clone(),
            timing_limit_scale: Some(self.timing_limit_scale),
            links: self.links.iter().map(LinkDoc::from_link).collect(),
        };
        toml::to_string(&doc).expect("robot description serializes")
    }
}

fn validate_joint(name: &str, joint: &JointSpec) -> Result<()> {
    if (joint.axis.norm() - 1.0).abs() > AXIS_TOL {
        return Err(Error::InvalidAxis {
            joint: name.into(),
            axis: joint.axis.into_inner().into(),
        });
    }
    if !joint.origin.is_rigid(ROTATION_TOL) {
        return Err(Error::InvalidRobot(format!(
            "joint `{name}` origin rotation is not orthonormal"
        )));
    }
    let [lo, hi] = joint.limits;
    if lo > hi {
        return Err(Error::LimitInversion {
            joint: name.into(),
            lo,
            hi,
        });
    }
    if joint.is_moving() && !(joint.vel_limit > 0.0 && joint.acc_limit > 0.0) {
        return Err(Error::InvalidRobot(format!(
            "joint `{name}` needs positive velocity and acceleration limits"
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    #[serde(default)]
    format: Option<String>,
    version: u32,
    name: String,
    #[serde(default)]
    timing_limit_scale: Option<f64>,
    links: Vec<LinkDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh: Option<PathBuf>,
    joint: JointDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    kind: JointKind,
    #[serde(default = "default_axis")]
    axis: [f64; 3],
    #[serde(default)]
    origin: OriginDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limits: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vel_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    acc_limit: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OriginDoc {
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rpy: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<[[f64; 3]; 3]>,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl LinkDoc {
    fn into_link(self) -> Result<Link> {
        let LinkDoc { name, mesh, joint } = self;
        let axis = Vector3::from(joint.axis);
        let norm = axis.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(Error::InvalidAxis {
                joint: name,
                axis: joint.axis,
            });
        }
        let origin = match (joint.origin.rpy, joint.origin.rotation) {
            (Some(_), Some(_)) => {
                return Err(Error::parse(
                    format!("link `{name}` origin"),
                    "give either rpy or rotation, not both",
                ))
            }
            (_, Some(rows)) => Rigid::new(
                Matrix3::from_fn(|r, c| rows[r][c]),
                Vector3::from(joint.origin.xyz),
            ),
            (rpy, None) => Rigid::from_xyz_rpy(joint.origin.xyz, rpy.unwrap_or_default()),
        };
        let spec = match joint.kind {
            JointKind::Fixed => JointSpec {
                axis: Unit::new_normalize(axis),
                ..JointSpec::fixed(origin)
            },
            kind => {
                let missing = |field: &str| {
                    Error::parse(format!("link `{name}` joint"), format!("missing field `{field}`"))
                };
                JointSpec {
                    kind,
                    axis: Unit::new_normalize(axis),
                    origin,
                    limits: joint.limits.ok_or_else(|| missing("limits"))?,
                    vel_limit: joint.vel_limit.ok_or_else(|| missing("vel_limit"))?,
                    acc_limit: joint.acc_limit.ok_or_else(|| missing("acc_limit"))?,
                }
            }
        };
        Ok(Link {
            name,
            joint: spec,
            mesh,
        })
    }

    fn from_link(link: &Link) -> Self {
        let j = &link.joint;
        let rows = j.origin.rotation;
        let moving = j.is_moving();
        LinkDoc {
            name: link.name.clone(),
            mesh: link.mesh.clone(),
            joint: JointDoc {
                kind: j.kind,
                axis: j.axis.into_inner().into(),
                origin: OriginDoc {
                    xyz: j.origin.translation.into(),
                    rpy: None,
                    rotation: Some(std::array::from_fn(|r| std::array::from_fn(|c| rows[(r, c)]))),
                },
                limits: moving.then_some(j.limits),
                vel_limit: moving.then_some(j.vel_limit),
                acc_limit: moving.then_some(j.acc_limit),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn revolute(origin: Rigid) -> JointSpec {
        JointSpec {
            kind: JointKind::Revolute,
            axis: Vector3::z_axis(),
            origin,
            limits: [-3.0, 3.0],
            vel_limit: 1.0,
            acc_limit: 1.0,
        }
    }

    fn link(name: &str, joint: JointSpec) -> Link {
        Link {
            name: name.into(),
            joint,
            mesh: None,
        }
    }

    fn planar_two_link() -> RobotModel {
        RobotModel::new(
            "planar",
            vec![
                link("l1", revolute(Rigid::identity())),
                link("l2", revolute(Rigid::from_translation(Vector3::x()))),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_revolute_at_zero_is_identity() {
        let model = RobotModel::new("one", vec![link("l", revolute(Rigid::identity()))]).unwrap();
        let poses = model.forward_kinematics(&[0.0]).unwrap();
        assert_eq!(poses.poses[0], Rigid::identity());
    }

    #[test]
    fn planar_two_link_quarter_turn() {
        let model = planar_two_link();
        let poses = model.forward_kinematics(&[FRAC_PI_2, 0.0]).unwrap();
        let origin = poses.poses[1].translation;
        assert!((origin - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = planar_two_link();
        assert!(matches!(
            model.forward_kinematics(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn out_of_limits_is_flagged_not_rejected() {
        let model = planar_two_link();
        let poses = model.forward_kinematics(&[0.0, 4.0]).unwrap();
        assert_eq!(poses.limit_flags, 0b10);
        assert!(!model.within_limits(&[0.0, 4.0]));
    }

    #[test]
    fn world_to_link_inverse_rotation() {
        let set = LinkPoseSet {
            poses: vec![Rigid::rotation_about(&Vector3::z_axis(), FRAC_PI_2)],
            limit_flags: 0,
        };
        let p = set.world_to_link(0, &[Vector3::new(1.0, 0.0, 0.0)]).unwrap();
        assert!((p[0] - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(set.world_to_link(1, &[]), Err(Error::LinkIndex { .. })));
    }

    #[test]
    fn single_fixed_link_has_no_dof() {
        let doc = r#"
            version = 1
            name = "post"
            [[links]]
            name = "base"
            joint = { kind = "fixed" }
        "#;
        let model = RobotModel::from_toml_str(doc, "inline").unwrap();
        assert_eq!(model.n_dof(), 0);
        assert_eq!(model.forward_kinematics(&[]).unwrap().len(), 1);
    }

    #[test]
    fn zero_axis_is_rejected() {
        let doc = r#"
            version = 1
            name = "bad"
            [[links]]
            name = "l"
            joint = { kind = "revolute", axis = [0.0, 0.0, 0.0], limits = [-1.0, 1.0], vel_limit = 1.0, acc_limit = 1.0 }
        "#;
        assert!(matches!(
            RobotModel::from_toml_str(doc, "inline"),
            Err(Error::InvalidAxis { .. })
        ));
    }

    #[test]
    fn inverted_limits_are_rejected() {
        let doc = r#"
            version = 1
            name = "bad"
            [[links]]
            name = "l"
            joint = { kind = "prismatic", axis = [1.0, 0.0, 0.0], limits = [1.0, -1.0], vel_limit = 1.0, acc_limit = 1.0 }
        "#;
        assert!(matches!(
            RobotModel::from_toml_str(doc, "inline"),
            Err(Error::LimitInversion { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_location() {
        let doc = "version = 1\nname = \"x\"\n[[links]]\nname = 3\n";
        let err = RobotModel::from_toml_str(doc, "robot.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("robot.toml"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn description_round_trips() {
        let model = planar_two_link().with_timing_limit_scale(0.1);
        let text = model.to_toml_string();
        let back = RobotModel::from_toml_str(&text, "rt").unwrap();
        assert_eq!(back.links(), model.links());
        assert_eq!(back.velocity_limits(), vec![0.1, 0.1]);
    }
}
