use nalgebra::Vector3;
use rayon::prelude::*;

use super::{Bvh, TriMesh};

/// Result of an exact signed-distance query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfQuery {
    /// Negative inside the mesh.
    pub distance: f64,
    /// Unit gradient of the distance field (points away from the surface
    /// outside, towards it inside).
    pub normal: Vector3<f64>,
    pub closest: Vector3<f64>,
    pub triangle: u32,
}

/// Brute-force-exact signed distance to a watertight mesh, accelerated by a
/// triangle BVH. Sign comes from a majority vote over three ray-parity tests.
#[derive(Clone, Debug)]
pub struct MeshSdf {
    mesh: TriMesh,
    bvh: Bvh,
}

const SIGN_RAYS: [[f64; 3]; 3] = [
    [0.421_713_9, 0.556_287_1, 0.716_093_3],
    [-0.623_714_2, 0.217_108_6, -0.750_937_4],
    [0.133_229_5, -0.971_161_8, 0.198_355_2],
];

impl MeshSdf {
    pub fn new(mesh: TriMesh) -> Self {
        let bvh = Bvh::build(&mesh.vertices, &mesh.triangles);
        Self { mesh, bvh }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    fn triangle(&self, t: u32) -> [Vector3<f64>; 3] {
        self.mesh.triangles[t as usize].map(|i| self.mesh.vertices[i as usize])
    }

    /// Nearest surface point, its squared distance and triangle.
    pub fn closest_point(&self, p: &Vector3<f64>) -> (Vector3<f64>, f64, u32) {
        let mut best = (Vector3::zeros(), f64::INFINITY, 0u32);
        self.bvh.nearest(p, |t| {
            let [a, b, c] = self.triangle(t);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (p - q).norm_squared();
            // ties go to the lower triangle index so results do not depend
            // on traversal order
            if d2 < best.1 || (d2 == best.1 && t < best.2) {
                best = (q, d2, t);
            }
            best.1
        });
        best
    }

    pub fn is_inside(&self, p: &Vector3<f64>) -> bool {
        let votes = SIGN_RAYS
            .iter()
            .filter(|dir| self.crossings(p, &Vector3::from(**dir)) % 2 == 1)
            .count();
        votes >= 2
    }

    fn crossings(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> usize {
        let mut hits = 0;
        self.bvh.along_ray(origin, dir, |t| {
            let [a, b, c] = self.triangle(t);
            if ray_hits_triangle(origin, dir, &a, &b, &c) {
                hits += 1;
            }
        });
        hits
    }

    pub fn query(&self, p: &Vector3<f64>) -> SdfQuery {
        let (closest, d2, triangle) = self.closest_point(p);
        let unsigned = d2.sqrt();
        if unsigned == 0.0 {
            return SdfQuery {
                distance: 0.0,
                normal: self.mesh.face_normal(triangle as usize),
                closest,
                triangle,
            };
        }
        let sign = if self.is_inside(p) { -1.0 } else { 1.0 };
        let offset = p - closest;
        let normal = if unsigned > 1e-12 {
            offset * (sign / unsigned)
        } else {
            self.mesh.face_normal(triangle as usize)
        };
        SdfQuery {
            distance: sign * unsigned,
            normal,
            closest,
            triangle,
        }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.query(p).distance
    }

    pub fn query_batch(&self, points: &[Vector3<f64>]) -> Vec<SdfQuery> {
        points.par_iter().map(|p| self.query(p)).collect()
    }

    /// Signed distances and unit normals for a batch of points.
    pub fn exact_signed_distance(&self, points: &[Vector3<f64>]) -> (Vec<f64>, Vec<Vector3<f64>>) {
        self.query_batch(points)
            .into_iter()
            .map(|q| (q.distance, q.normal))
            .unzip()
    }
}

fn ray_hits_triangle(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-300 {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    inv * e2.dot(&q) > 0.0
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
