//! Training-set synthesis: offset every mesh vertex along its normal and
//! keep candidates whose nearest surface point traces back to that vertex.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MeshSdf, TriMesh};
use crate::error::{Error, Result};

/// Default offsets (m), denser near the surface.
pub const DEFAULT_OFFSETS: [f64; 13] = [
    -0.01, -0.005, -0.002, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.2,
];

pub const DATASET_FORMAT: &str = "linksdf-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfSample {
    pub p: Vector3<f64>,
    pub d: f64,
    pub n: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub offsets: Vec<f64>,
    pub max_samples: usize,
    pub seed: u64,
    /// Minimum dot product between a vertex normal and each neighbour's.
    pub normal_consistency: f64,
    /// Re-projection radius as a multiple of the vertex's mean edge length.
    pub reprojection_factor: f64,
}

impl SamplingParams {
    pub fn new(offsets: Vec<f64>, max_samples: usize, seed: u64) -> Self {
        Self {
            offsets,
            max_samples,
            seed,
            normal_consistency: 0.7,
            reprojection_factor: 1.5,
        }
    }

    pub fn default_offsets() -> Vec<f64> {
        DEFAULT_OFFSETS.to_vec()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub candidates: usize,
    pub rejected_normal: usize,
    pub rejected_reprojection: usize,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub link: usize,
    pub params: SamplingParams,
    pub mesh_bound_radius: f64,
    pub stats: SynthesisStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkDataset {
    pub provenance: DatasetProvenance,
    pub samples: Vec<SdfSample>,
}

/// Samples `v + δ·n_v` for every vertex and offset δ.
///
/// A vertex is skipped when its normal disagrees with any neighbour's. A
/// candidate is kept when its exact distance has the sign of δ and its
/// nearest surface point lies within the re-projection radius of the
/// generating vertex. Stored distances and normals come from the oracle.
pub fn synthesize_dataset(
    mesh: &TriMesh,
    link: usize,
    params: &SamplingParams,
) -> Result<LinkDataset> {
    if params.max_samples == 0 {
        return Err(Error::InvalidConfig("max_samples must be positive".into()));
    }
    if params.offsets.is_empty() {
        return Err(Error::InvalidConfig("no sampling offsets".into()));
    }
    let neighbors = mesh.vertex_neighbors();
    let sdf = MeshSdf::new(mesh.clone());
    let n_off = params.offsets.len();

    let per_vertex: Vec<(Vec<SdfSample>, usize, usize)> = (0..mesh.vertices.len())
        .into_par_iter()
        .map(|vi| {
            let v = mesh.vertices[vi];
            let nv = mesh.vertex_normals[vi];
            let nbrs = &neighbors[vi];
            let consistent = nbrs
                .iter()
                .all(|&j| nv.dot(&mesh.vertex_normals[j as usize]) >= params.normal_consistency);
            if !consistent || nbrs.is_empty() {
                return (Vec::new(), n_off, 0);
            }
            let mean_edge = nbrs
                .iter()
                .map(|&j| (mesh.vertices[j as usize] - v).norm())
                .sum::<f64>()
                / nbrs.len() as f64;
            let radius = params.reprojection_factor * mean_edge;
            let mut kept = Vec::with_capacity(n_off);
            let mut rejected = 0;
            for &delta in &params.offsets {
                let p = v + nv * delta;
                let q = sdf.query(&p);
                let sign_ok = delta == 0.0 || (q.distance * delta > 0.0);
                if sign_ok && (q.closest - v).norm() <= radius {
                    kept.push(SdfSample {
                        p,
                        d: q.distance,
                        n: q.normal,
                    });
                } else {
                    rejected += 1;
                }
            }
            (kept, 0, rejected)
        })
        .collect();

    let mut stats = SynthesisStats {
        candidates: mesh.vertices.len() * n_off,
        ..Default::default()
    };
    let mut samples = Vec::new();
    for (kept, rn, rr) in per_vertex {
        stats.rejected_normal += rn;
        stats.rejected_reprojection += rr;
        samples.extend(kept);
    }
    stats.accepted = samples.len();
    if samples.is_empty() {
        return Err(Error::EmptyDataset {
            candidates: stats.candidates,
            rejected_normal: stats.rejected_normal,
            rejected_reprojection: stats.rejected_reprojection,
        });
    }
    if samples.len() > params.max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut picked = index::sample(&mut rng, samples.len(), params.max_samples).into_vec();
        picked.sort_unstable();
        samples = picked.into_iter().map(|i| samples[i]).collect();
    }
    Ok(LinkDataset {
        provenance: DatasetProvenance {
            link,
            params: params.clone(),
            mesh_bound_radius: mesh.bound_radius(),
            stats,
        },
        samples,
    })
}

impl LinkDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Text serialization: a format line, a JSON provenance line, a column
    /// header and one whitespace-separated row per sample. Numbers use the
    /// shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 140);
        let _ = writeln!(out, "{DATASET_FORMAT} {DATASET_VERSION}");
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(&self.provenance).expect("provenance serializes")
        );
        out.push_str("px py pz d nx ny nz\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                s.p.x, s.p.y, s.p.z, s.d, s.n.x, s.n.y, s.n.z
            );
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), &path.display().to_string())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes(), "dataset")
    }

    fn from_reader(reader: impl BufRead, context: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::parse(format!("{context}:{}", i + 1), e)),
                None => Err(Error::parse(context, format!("missing {what}"))),
            }
        };
        let (_, magic) = next("format line")?;
        let mut parts = magic.split_whitespace();
        if parts.next() != Some(DATASET_FORMAT) {
            return Err(Error::Format(format!("{context}: not a {DATASET_FORMAT} file")));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(context, "missing version"))?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("{context}: dataset version {version}")));
        }
        let (ln, prov) = next("provenance")?;
        let provenance: DatasetProvenance =
            serde_json::from_str(&prov).map_err(|e| Error::parse(format!("{context}:{ln}"), e))?;
        next("column header")?;
        let mut samples = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::parse(format!("{context}:{}", i + 1), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(format!("{context}:{}", i + 1), e))?;
            if vals.len() != 7 {
                return Err(Error::parse(format!("{context}:{}", i + 1), "expected 7 columns"));
            }
            samples.push(SdfSample {
                p: Vector3::new(vals[0], vals[1], vals[2]),
                d: vals[3],
                n: Vector3::new(vals[4], vals[5], vals[6]),
            });
        }
        Ok(Self {
            provenance,
            samples,
        })
    }

    /// SHA-256 of the text serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
