//! Triangle meshes, the exact signed-distance oracle and training-set synthesis.
//!
//! Meshes are read and written as a subset of Wavefront OBJ: `v x y z` and
//! `f i j k ...` records (1-based, negative indices and `i/t/n` forms
//! accepted, polygons fan-triangulated). Files written by this crate start
//! with the comment `# linksdf-mesh v1`.

mod bvh;
mod dataset;
mod oracle;
pub mod primitives;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use bvh::{Aabb, Bvh};
pub use dataset::{
    synthesize_dataset, DatasetProvenance, LinkDataset, SamplingParams, SdfSample, SynthesisStats, DEFAULT_OFFSETS,
};
pub use oracle::{closest_point_on_triangle, MeshSdf, SdfQuery};

pub const MESH_HEADER: &str = "# linksdf-mesh v1";

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub vertex_normals: Vec<Vector3<f64>>,
}

/// What `TriMesh::cleaned` had to fix.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CleanupReport {
    pub degenerate_triangles: usize,
    pub pruned_vertices: usize,
    pub watertight: bool,
}

impl TriMesh {
    /// Builds a cleaned mesh: drops zero-area triangles, prunes unreferenced
    /// vertices and recomputes area-weighted vertex normals.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        Ok(Self::cleaned(vertices, triangles)?.0)
    }

    pub fn cleaned(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<(Self, CleanupReport)> {
        let n = vertices.len();
        if let Some(bad) = triangles.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(Error::parse("mesh", format!("triangle index {bad} out of range ({n} vertices)")));
        }
        let mut report = CleanupReport::default();
        let triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                let ok = (b - a).cross(&(c - a)).norm() > 0.0;
                if !ok {
                    report.degenerate_triangles += 1;
                }
                ok
            })
            .collect();
        if triangles.is_empty() {
            return Err(Error::EmptyMesh("no non-degenerate triangles".into()));
        }
        let mut remap = vec![u32::MAX; n];
        let mut kept = Vec::with_capacity(n);
        for &i in triangles.iter().flatten() {
            if remap[i as usize] == u32::MAX {
                remap[i as usize] = kept.len() as u32;
                kept.push(i as usize);
            }
        }
        // preserve original vertex order among survivors
        kept.sort_unstable();
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new as u32;
        }
        report.pruned_vertices = n - kept.len();
        if report.pruned_vertices > 0 {
            log::warn!("pruned {} unreferenced mesh vertices", report.pruned_vertices);
        }
        if report.degenerate_triangles > 0 {
            log::warn!("dropped {} degenerate triangles", report.degenerate_triangles);
        }
        let vertices: Vec<_> = kept.iter().map(|&i| vertices[i]).collect();
        let triangles: Vec<_> = triangles
            .into_iter()
            .map(|t| t.map(|i| remap[i as usize]))
            .collect();
        let mut mesh = TriMesh {
            vertex_normals: Vec::new(),
            vertices,
            triangles,
        };
        mesh.recompute_normals();
        report.watertight = mesh.is_watertight();
        Ok((mesh, report))
    }

    pub fn recompute_normals(&mut self) {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            // cross product norm is twice the area: area weighting for free
            let n = (b - a).cross(&(c - a));
            for &i in t {
                normals[i as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        self.vertex_normals = normals;
    }

    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Every undirected edge shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().all(|&c| c == 2)
    }

    /// Signed volume; positive for outward-facing counter-clockwise winding.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn flip_winding(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
        self.recompute_normals();
    }

    /// Radius of the smallest origin-centred ball containing the mesh.
    pub fn bound_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                nbrs[a as usize].push(b);
                nbrs[b as usize].push(a);
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MeshNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mesh = Self::from_obj_str(&text, &path.display().to_string())?;
        if !mesh.is_watertight() {
            log::warn!("{} is not watertight; signs may be unreliable", path.display());
        }
        Ok(mesh)
    }

    pub fn from_obj_str(text: &str, context: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let ctx = || format!("{context}:{}", lineno + 1);
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("v") => {
                    let coords: Vec<f64> = fields
                        .take(3)
                        .map(|f| f.parse::<f64>().map_err(|e| Error::parse(ctx(), e)))
                        .collect::<Result<_>>()?;
                    if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                        return Err(Error::parse(ctx(), "vertex needs three finite coordinates"));
                    }
                    vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = fields
                        .map(|f| parse_face_index(f, vertices.len()).ok_or_else(|| Error::parse(ctx(), format!("bad face index `{f}`"))))
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(Error::parse(ctx(), "face needs at least three vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::EmptyMesh(context.into()));
        }
        Self::new(vertices, triangles)
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::with_capacity(48 * (self.vertices.len() + self.triangles.len()));
        out.push_str(MESH_HEADER);
        out.push('\n');
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::io(path, e))
    }
}

fn parse_face_index(field: &str, n_vertices: usize) -> Option<u32> {
    let raw: i64 = field.split('/').next()?.parse().ok()?;
    let idx = match raw {
        0 => return None,
        r if r > 0 => r - 1,
        r => n_vertices as i64 + r,
    };
    (idx >= 0 && (idx as usize) < n_vertices).then_some(idx as u32)
}
