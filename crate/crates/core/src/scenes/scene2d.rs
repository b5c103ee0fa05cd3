use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::DistanceChecker;

pub const SCENE2D_FORMAT: &str = "linksdf-scene2d";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive2 {
    Circle { center: [f64; 2], radius: f64 },
    Box { center: [f64; 2], half_extents: [f64; 2] },
    /// Closed vertex loop in either winding; may be concave.
    Polygon { vertices: Vec<[f64; 2]> },
}

fn v2(a: [f64; 2]) -> Vector2<f64> {
    Vector2::new(a[0], a[1])
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Winding number of the loop around `p`; nonzero means inside.
fn winding_number(p: &Vector2<f64>, verts: &[[f64; 2]]) -> i32 {
    let mut w = 0;
    for i in 0..verts.len() {
        let a = v2(verts[i]);
        let b = v2(verts[(i + 1) % verts.len()]);
        let cross = (b - a).perp(&(p - a));
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

impl Primitive2 {
    /// Signed distance, negative inside.
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        match self {
            Primitive2::Circle { center, radius } => (p - v2(*center)).norm() - radius,
            Primitive2::Box { center, half_extents } => {
                let q = (p - v2(*center)).abs() - v2(*half_extents);
                q.sup(&Vector2::zeros()).norm() + q.x.max(q.y).min(0.0)
            }
            Primitive2::Polygon { vertices } => {
                let n = vertices.len();
                let d = (0..n)
                    .map(|i| segment_distance(p, &v2(vertices[i]), &v2(vertices[(i + 1) % n])))
                    .fold(f64::INFINITY, f64::min);
                if winding_number(p, vertices) != 0 {
                    -d
                } else {
                    d
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            Primitive2::Circle { center, radius } => finite(center) && *radius > 0.0 && radius.is_finite(),
            Primitive2::Box { center, half_extents } => {
                finite(center) && half_extents.iter().all(|h| *h > 0.0 && h.is_finite())
            }
            Primitive2::Polygon { vertices } => {
                vertices.len() >= 3
                    && vertices.iter().all(|v| finite(v))
                    && (0..vertices.len()).all(|i| vertices[i] != vertices[(i + 1) % vertices.len()])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid obstacle {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds2 {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// A planar map of analytic obstacles with a start and goal.
///
/// ```toml
/// format = "linksdf-scene2d"
/// version = 1
/// name = "gap"
/// bounds = { min = [0.0, 0.0], max = [1.0, 1.0] }
/// start = [0.1, 0.5]
/// goal = [0.9, 0.5]
///
/// [[obstacles]]
/// kind = "box"            # circle | box | polygon
/// center = [0.5, 0.8]
/// half_extents = [0.05, 0.25]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene2D {
    #[serde(default = "scene2d_format")]
    pub format: String,
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    pub bounds: Bounds2,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    #[serde(default)]
    pub obstacles: Vec<Primitive2>,
}

fn scene2d_format() -> String {
    SCENE2D_FORMAT.into()
}

impl Scene2D {
    pub fn new(name: impl Into<String>, bounds: Bounds2, start: [f64; 2], goal: [f64; 2], obstacles: Vec<Primitive2>) -> Result<Self> {
        let scene = Self {
            format: SCENE2D_FORMAT.into(),
            version: 1,
            name: name.into(),
            note: String::new(),
            bounds,
            start,
            goal,
            obstacles,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != SCENE2D_FORMAT || self.version != 1 {
            return Err(Error::Format(format!(
                "expected {SCENE2D_FORMAT} version 1, got {} version {}",
                self.format, self.version
            )));
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        if !(0..2).all(|i| self.bounds.min[i] < self.bounds.max[i]) {
            return Err(Error::InvalidConfig("scene bounds are empty".into()));
        }
        for (what, p) in [("start", self.start), ("goal", self.goal)] {
            if !self.bounds.contains(p) {
                return Err(Error::InvalidConfig(format!("{what} {p:?} lies outside the scene bounds")));
            }
            if self.distance(p) <= 0.0 {
                return Err(Error::InvalidConfig(format!("{what} {p:?} is inside an obstacle")));
            }
        }
        Ok(())
    }

    /// Minimum signed distance over all obstacles (infinite for an empty map).
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let p = v2(p);
        self.obstacles
            .iter()
            .map(|o| o.distance(&p))
            .fold(f64::INFINITY, f64::min)
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
        DVector::from_column_slice(&self.start)
    }

    pub fn goal_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.goal)
    }
}

impl DistanceChecker for Scene2D {
    fn distances(&self, states: &[DVector<f64>]) -> Result<Vec<f64>> {
        states
            .iter()
            .map(|s| {
                if s.len() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: s.len(),
                    });
                }
                Ok(self.distance([s[0], s[1]]))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_bounds() -> Bounds2 {
        Bounds2 {
            min: [-1.0, -1.0],
            max: [1.0, 1.0],
        }
    }

    fn u_shape() -> Primitive2 {
        // opening upward, pocket around (0, 0.1)
        Primitive2::Polygon {
            vertices: vec![
                [-0.3, -0.2],
                [0.3, -0.2],
                [0.3, 0.3],
                [0.2, 0.3],
                [0.2, -0.1],
                [-0.2, -0.1],
                [-0.2, 0.3],
                [-0.3, 0.3],
            ],
        }
    }

    /// Unsigned distance to the boundary from dense samples along it.
    fn sampled_boundary(o: &Primitive2, n: usize) -> Vec<Vector2<f64>> {
        match o {
            Primitive2::Circle { center, radius } => (0..n)
                .map(|i| {
                    let a = i as f64 / n as f64 * std::f64::consts::TAU;
                    v2(*center) + Vector2::new(a.cos(), a.sin()) * *radius
                })
                .collect(),
            Primitive2::Box { center, half_extents } => {
                let (c, h) = (v2(*center), v2(*half_extents));
                let corners = [
                    [c.x - h.x, c.y - h.y],
                    [c.x + h.x, c.y - h.y],
                    [c.x + h.x, c.y + h.y],
                    [c.x - h.x, c.y + h.y],
                ];
                sampled_boundary(&Primitive2::Polygon { vertices: corners.to_vec() }, n)
            }
            Primitive2::Polygon { vertices } => {
                let m = vertices.len();
                let per = n / m;
                (0..m)
                    .flat_map(|i| {
                        let a = v2(vertices[i]);
                        let b = v2(vertices[(i + 1) % m]);
                        (0..per).map(move |k| a + (b - a) * (k as f64 / per as f64))
                    })
                    .collect()
            }
        }
    }

    #[test]
    fn analytic_examples() {
        let c = Primitive2::Circle {
            center: [0.0, 0.0],
            radius: 0.1,
        };
        assert!((c.distance(&Vector2::new(0.3, 0.0)) - 0.2).abs() < 1e-15);
        let b = Primitive2::Box {
            center: [0.0, 0.0],
            half_extents: [0.2, 0.1],
        };
        assert!((b.distance(&Vector2::new(0.15, 0.0)) + 0.05).abs() < 1e-15);
        assert!((b.distance(&Vector2::new(0.0, 0.02)) + 0.08).abs() < 1e-15);
        let u = u_shape();
        assert!(u.distance(&Vector2::new(0.0, 0.1)) > 0.0);
        assert!(u.distance(&Vector2::new(0.25, 0.0)) < 0.0);
    }

    #[test]
    fn winding_sign_ignores_orientation() {
        let u = u_shape();
        let mut rev = u.clone();
        if let Primitive2::Polygon { vertices } = &mut rev {
            vertices.reverse();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let p = Vector2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let (a, b) = (u.distance(&p), rev.distance(&p));
            assert!(a.signum() == b.signum() && (a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_boundary_sampling() {
        let shapes = [
            Primitive2::Circle {
                center: [0.1, -0.2],
                radius: 0.15,
            },
            Primitive2::Box {
                center: [-0.3, 0.2],
                half_extents: [0.1, 0.25],
            },
            u_shape(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for o in &shapes {
            let boundary = sampled_boundary(o, 100_000);
            for _ in 0..200 {
                let p = Vector2::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
                let brute = boundary.iter().map(|b| (p - b).norm()).fold(f64::INFINITY, f64::min);
                assert!((o.distance(&p).abs() - brute).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn validation_and_round_trip() {
        let scene = Scene2D::new("t", unit_bounds(), [-0.9, 0.0], [0.9, 0.0], vec![u_shape()]).unwrap();
        let text = scene.to_toml_string();
        assert_eq!(Scene2D::from_toml_str(&text, "t").unwrap(), scene);
        // start in the U wall
        assert!(Scene2D::new("t", unit_bounds(), [0.25, 0.0], [0.9, 0.0], vec![u_shape()]).is_err());
        assert!(Scene2D::new("t", unit_bounds(), [-1.5, 0.0], [0.9, 0.0], vec![]).is_err());
        let bad = Primitive2::Circle {
            center: [0.0, 0.0],
            radius: -1.0,
        };
        assert!(Scene2D::new("t", unit_bounds(), [-0.9, 0.0], [0.9, 0.0], vec![bad]).is_err());
    }
}
