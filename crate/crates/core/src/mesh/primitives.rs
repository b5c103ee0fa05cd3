//! Procedural watertight meshes used for fixtures and tests.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::TriMesh;

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    oriented(TriMesh::new(vertices, faces).expect("icosphere is non-degenerate"))
}

/// Axis-aligned box centred at the origin, two triangles per face.
pub fn cuboid(half_extents: Vector3<f64>) -> TriMesh {
    tessellated_box(half_extents, [1, 1, 1])
}

/// Axis-aligned box with each face split into a grid of `cells` quads per axis.
pub fn tessellated_box(half_extents: Vector3<f64>, cells: [usize; 3]) -> TriMesh {
    let mut builder = Welder::default();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [-1.0, 1.0] {
            let (nu, nv) = (cells[u].max(1), cells[v].max(1));
            let mut ids = vec![vec![0u32; nv + 1]; nu + 1];
            for (i, row) in ids.iter_mut().enumerate() {
                for (j, id) in row.iter_mut().enumerate() {
                    let mut p = Vector3::zeros();
                    p[axis] = side * half_extents[axis];
                    p[u] = -half_extents[u] + 2.0 * half_extents[u] * i as f64 / nu as f64;
                    p[v] = -half_extents[v] + 2.0 * half_extents[v] * j as f64 / nv as f64;
                    *id = builder.vertex(p);
                }
            }
            for i in 0..nu {
                for j in 0..nv {
                    let (a, b, c, d) = (ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
                    if side > 0.0 {
                        builder.faces.extend([[a, b, c], [a, c, d]]);
                    } else {
                        builder.faces.extend([[a, c, b], [a, d, c]]);
                    }
                }
            }
        }
    }
    oriented(builder.finish())
}

/// Tube of constant radius swept along a polyline whose interior corners are
/// rounded with `fillet` radius, closed by hemispherical caps.
///
/// `segments` is the number of vertices per ring. The result is watertight
/// and, for bent paths, non-convex.
pub fn tube(path: &[Vector3<f64>], radius: f64, fillet: f64, segments: usize) -> TriMesh {
    assert!(path.len() >= 2, "tube path needs two points");
    let centerline = filleted_polyline(path, fillet, radius * 0.5);
    let tangents: Vec<Vector3<f64>> = (0..centerline.len())
        .map(|i| {
            let prev = centerline[i.saturating_sub(1)];
            let next = centerline[(i + 1).min(centerline.len() - 1)];
            (next - prev).normalize()
        })
        .collect();
    // parallel-transported ring frame
    let mut normal = any_perpendicular(&tangents[0]);
    let mut frames = Vec::with_capacity(centerline.len());
    for (i, t) in tangents.iter().enumerate() {
        if i > 0 {
            normal = (normal - t * normal.dot(t)).normalize();
        }
        frames.push((normal, t.cross(&normal)));
    }

    let mut vertices = Vec::new();
    let mut rings: Vec<u32> = Vec::new();
    let ring = |vertices: &mut Vec<Vector3<f64>>, c: Vector3<f64>, (n, b): (Vector3<f64>, Vector3<f64>), r: f64| {
        let start = vertices.len() as u32;
        for k in 0..segments {
            let a = std::f64::consts::TAU * k as f64 / segments as f64;
            vertices.push(c + (n * a.cos() + b * a.sin()) * r);
        }
        start
    };
    let cap_rings = (segments / 4).max(2);
    let first = centerline[0];
    let last = *centerline.last().unwrap();
    let (t0, tn) = (tangents[0], *tangents.last().unwrap());
    vertices.push(first - t0 * radius);
    let south = 0u32;
    for k in 1..cap_rings {
        let alpha = std::f64::consts::FRAC_PI_2 * k as f64 / cap_rings as f64;
        rings.push(ring(&mut vertices, first - t0 * radius * alpha.cos(), frames[0], radius * alpha.sin()));
    }
    for (c, f) in centerline.iter().zip(&frames) {
        rings.push(ring(&mut vertices, *c, *f, radius));
    }
    let fl = *frames.last().unwrap();
    for k in (1..cap_rings).rev() {
        let alpha = std::f64::consts::FRAC_PI_2 * k as f64 / cap_rings as f64;
        rings.push(ring(&mut vertices, last + tn * radius * alpha.cos(), fl, radius * alpha.sin()));
    }
    vertices.push(last + tn * radius);
    let north = vertices.len() as u32 - 1;

    let s = segments as u32;
    let mut faces = Vec::new();
    let r0 = rings[0];
    for k in 0..s {
        faces.push([south, r0 + (k + 1) % s, r0 + k]);
    }
    for w in rings.windows(2) {
        let (a, b) = (w[0], w[1]);
        for k in 0..s {
            let k1 = (k + 1) % s;
            faces.push([a + k, a + k1, b + k1]);
            faces.push([a + k, b + k1, b + k]);
        }
    }
    let rl = *rings.last().unwrap();
    for k in 0..s {
        faces.push([north, rl + k, rl + (k + 1) % s]);
    }
    oriented(TriMesh::new(vertices, faces).expect("tube is non-degenerate"))
}

fn any_perpendicular(t: &Vector3<f64>) -> Vector3<f64> {
    let helper = if t.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (helper - t * helper.dot(t)).normalize()
}

/// Polyline with corners replaced by circular arcs, resampled at `step`.
fn filleted_polyline(path: &[Vector3<f64>], fillet: f64, step: f64) -> Vec<Vector3<f64>> {
    let mut pts = vec![path[0]];
    for i in 1..path.len() - 1 {
        let (a, b, c) = (path[i - 1], path[i], path[i + 1]);
        let (d0, d1) = ((b - a).normalize(), (c - b).normalize());
        let turn = d0.dot(&d1).clamp(-1.0, 1.0).acos();
        if turn < 1e-6 || fillet <= 0.0 {
            pts.push(b);
            continue;
        }
        let setback = (fillet * (turn / 2.0).tan())
            .min(0.5 * (b - a).norm())
            .min(0.5 * (c - b).norm());
        let rho = setback / (turn / 2.0).tan();
        let p0 = b - d0 * setback;
        let inward = (d1 - d0 * d0.dot(&d1)).normalize();
        let center = p0 + inward * rho;
        let arc = (rho * turn / step).ceil().max(2.0) as usize;
        for k in 0..=arc {
            let theta = turn * k as f64 / arc as f64;
            pts.push(center + (-inward * theta.cos() + d0 * theta.sin()) * rho);
        }
    }
    pts.push(*path.last().unwrap());
    // resample straight runs so ring spacing stays near `step`
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let len = (w[1] - w[0]).norm();
        if len < 1e-12 {
            continue;
        }
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    out
}

fn oriented(mut mesh: TriMesh) -> TriMesh {
    if mesh.signed_volume() < 0.0 {
        mesh.flip_winding();
    }
    mesh
}

#[derive(Default)]
struct Welder {
    index: HashMap<[i64; 3], u32>,
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[u32; 3]>,
}

impl Welder {
    fn vertex(&mut self, p: Vector3<f64>) -> u32 {
        let key = [p.x, p.y, p.z].map(|c| (c * 1e9).round() as i64);
        let verts = &mut self.vertices;
        *self.index.entry(key).or_insert_with(|| {
            verts.push(p);
            verts.len() as u32 - 1
        })
    }

    fn finish(self) -> TriMesh {
        TriMesh::new(self.vertices, self.faces).expect("welded mesh is non-degenerate")
    }
}
