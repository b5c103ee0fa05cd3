use nalgebra::Vector3;

use super::mlp::MlpSdf;
use crate::error::{Error, Result};
use crate::mesh::{MeshSdf, TriMesh};
use crate::robot::{LinkPoseSet, RobotModel};

/// Whole-robot minimum distance for a batch of world points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompositeQuery {
    pub distance: Vec<f64>,
    /// Index of the link attaining the minimum; ties go to the lower index.
    pub link: Vec<usize>,
}

impl CompositeQuery {
    pub fn min(&self) -> f64 {
        self.distance.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A robot-wide signed distance: learned or exact.
///
/// Queries are pruned with per-link lower bounds `‖p‖ − bound`; a link is
/// evaluated for a point only if its bound does not already exceed the best
/// value found, so pruned and exhaustive evaluation agree exactly.
pub trait RobotSdf: Send + Sync {
    fn model(&self) -> &RobotModel;

    /// Distances for points already expressed in link `k`'s frame.
    fn link_query(&self, k: usize, local: &[Vector3<f64>]) -> Vec<f64>;

    /// A value never above `link_query` at `local`.
    fn link_lower_bound(&self, k: usize, local: &Vector3<f64>) -> f64;

    fn link_distance(&self, poses: &LinkPoseSet, k: usize, points: &[Vector3<f64>]) -> Result<Vec<f64>> {
        Ok(self.link_query(k, &poses.world_to_link(k, points)?))
    }

    /// Minimum over links with a single forward-kinematics evaluation.
    fn min_distance(&self, q: &[f64], points: &[Vector3<f64>]) -> Result<CompositeQuery> {
        let poses = self.model().forward_kinematics(q)?;
        self.min_distance_posed(&poses, points)
    }

    fn min_distance_posed(&self, poses: &LinkPoseSet, points: &[Vector3<f64>]) -> Result<CompositeQuery> {
        let n_links = self.model().n_links();
        let n = points.len();
        let local: Vec<Vec<Vector3<f64>>> = (0..n_links)
            .map(|k| poses.world_to_link(k, points))
            .collect::<Result<_>>()?;
        let bounds: Vec<Vec<f64>> = (0..n_links)
            .map(|k| local[k].iter().map(|p| self.link_lower_bound(k, p)).collect())
            .collect();
        let mut out = CompositeQuery {
            distance: vec![f64::INFINITY; n],
            link: vec![0; n],
        };
        // seed every point with its most promising link
        let first: Vec<usize> = (0..n)
            .map(|i| (0..n_links).min_by(|&a, &b| bounds[a][i].total_cmp(&bounds[b][i])).unwrap_or(0))
            .collect();
        let update = |k: usize, idx: &[usize], out: &mut CompositeQuery| {
            if idx.is_empty() {
                return;
            }
            let pts: Vec<_> = idx.iter().map(|&i| local[k][i]).collect();
            for (&i, v) in idx.iter().zip(self.link_query(k, &pts)) {
                if v < out.distance[i] || (v == out.distance[i] && k < out.link[i]) {
                    out.distance[i] = v;
                    out.link[i] = k;
                }
            }
        };
        for k in 0..n_links {
            let idx: Vec<usize> = (0..n).filter(|&i| first[i] == k).collect();
            update(k, &idx, &mut out);
        }
        for k in 0..n_links {
            let idx: Vec<usize> = (0..n)
                .filter(|&i| first[i] != k && bounds[k][i] <= out.distance[i])
                .collect();
            update(k, &idx, &mut out);
        }
        Ok(out)
    }
}

/// Obstacle clearance for many robot poses: for each pose, the minimum over
/// spheres `(c_j, r_j)` of the composite distance to `c_j` minus `r_j`.
///
/// With `cutoff = Some(ε)` only the comparison with ε is exact: the search
/// stops at the first pair within ε, and clear states report some value
/// above ε.
pub fn sphere_clearance(
    sdf: &dyn RobotSdf,
    poses: &[LinkPoseSet],
    centers: &[Vector3<f64>],
    radii: &[f64],
    cutoff: Option<f64>,
) -> Result<Vec<f64>> {
    let n_links = sdf.model().n_links();
    let m = centers.len();
    let n_states = poses.len();
    if m == 0 {
        return Ok(vec![f64::INFINITY; n_states]);
    }
    // pair index: (state, sphere) -> state * m + j
    let mut local = vec![Vec::with_capacity(n_states * m); n_links];
    let mut bounds = vec![Vec::with_capacity(n_states * m); n_links];
    for pose in poses {
        for k in 0..n_links {
            let pts = pose.world_to_link(k, centers)?;
            for (j, p) in pts.iter().enumerate() {
                bounds[k].push(sdf.link_lower_bound(k, p) - radii[j]);
            }
            local[k].extend(pts);
        }
    }
    let mut best = vec![f64::INFINITY; n_states];
    let mut floor = vec![f64::INFINITY; n_states];
    for k in 0..n_links {
        for (pair, b) in bounds[k].iter().enumerate() {
            floor[pair / m] = floor[pair / m].min(*b);
        }
    }
    let evaluate = |k: usize, pairs: &[usize], best: &mut [f64]| {
        if pairs.is_empty() {
            return;
        }
        let pts: Vec<_> = pairs.iter().map(|&p| local[k][p]).collect();
        for (&pair, v) in pairs.iter().zip(sdf.link_query(k, &pts)) {
            let s = pair / m;
            best[s] = best[s].min(v - radii[pair % m]);
        }
    };
    match cutoff {
        None => {
            // seed each state with its smallest-bound pair
            let mut seed: Vec<(usize, usize, f64)> = vec![(0, 0, f64::INFINITY); n_states];
            for k in 0..n_links {
                for (pair, &b) in bounds[k].iter().enumerate() {
                    if b < seed[pair / m].2 {
                        seed[pair / m] = (k, pair, b);
                    }
                }
            }
            for k in 0..n_links {
                let pairs: Vec<usize> = seed.iter().filter(|s| s.0 == k).map(|s| s.1).collect();
                evaluate(k, &pairs, &mut best);
            }
            for k in 0..n_links {
                let pairs: Vec<usize> = (0..n_states * m)
                    .filter(|&p| bounds[k][p] <= best[p / m])
                    .collect();
                evaluate(k, &pairs, &mut best);
            }
            Ok(best)
        }
        Some(eps) => {
            for k in 0..n_links {
                let pairs: Vec<usize> = (0..n_states * m)
                    .filter(|&p| bounds[k][p] <= eps && best[p / m] > eps)
                    .collect();
                evaluate(k, &pairs, &mut best);
            }
            Ok(best
                .iter()
                .zip(&floor)
                .map(|(&b, &f)| if b.is_finite() { b } else { f })
                .collect())
        }
    }
}

/// One network per link, queried in the link frame.
#[derive(Clone, Debug)]
pub struct CompositeSdf {
    model: RobotModel,
    nets: Vec<MlpSdf>,
}

impl CompositeSdf {
    pub fn new(model: RobotModel, nets: Vec<MlpSdf>) -> Result<Self> {
        if nets.len() != model.n_links() {
            return Err(Error::DimensionMismatch {
                expected: model.n_links(),
                got: nets.len(),
            });
        }
        Ok(Self { model, nets })
    }

    pub fn nets(&self) -> &[MlpSdf] {
        &self.nets
    }

    pub fn composite_min_distance(&self, q: &[f64], points: &[Vector3<f64>]) -> Result<CompositeQuery> {
        self.min_distance(q, points)
    }
}

impl RobotSdf for CompositeSdf {
    fn model(&self) -> &RobotModel {
        &self.model
    }

    fn link_query(&self, k: usize, local: &[Vector3<f64>]) -> Vec<f64> {
        self.nets[k].query(local, false).distance
    }

    fn link_lower_bound(&self, k: usize, local: &Vector3<f64>) -> f64 {
        self.nets[k].lower_bound(local)
    }
}

/// Mesh-oracle counterpart of [`CompositeSdf`].
#[derive(Clone, Debug)]
pub struct ExactCompositeSdf {
    model: RobotModel,
    oracles: Vec<MeshSdf>,
    bound_radii: Vec<f64>,
}

impl ExactCompositeSdf {
    pub fn new(model: RobotModel, meshes: Vec<Option<TriMesh>>) -> Result<Self> {
        if meshes.len() != model.n_links() {
            return Err(Error::DimensionMismatch {
                expected: model.n_links(),
                got: meshes.len(),
            });
        }
        let oracles: Vec<MeshSdf> = meshes
            .into_iter()
            .enumerate()
            .map(|(k, m)| m.map(MeshSdf::new).ok_or(Error::MissingMesh(k)))
            .collect::<Result<_>>()?;
        let bound_radii = oracles.iter().map(|o| o.mesh().bound_radius()).collect();
        Ok(Self {
            model,
            oracles,
            bound_radii,
        })
    }

    /// Loads every link mesh referenced by the robot description.
    pub fn from_model(model: RobotModel) -> Result<Self> {
        let meshes = (0..model.n_links())
            .map(|k| match model.mesh_path(k) {
                Some(p) => TriMesh::load(p).map(Some),
                None => Err(Error::MissingMesh(k)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, meshes)
    }

    pub fn oracle(&self, k: usize) -> &MeshSdf {
        &self.oracles[k]
    }

    pub fn exact_composite_min_distance(&self, q: &[f64], points: &[Vector3<f64>]) -> Result<CompositeQuery> {
        self.min_distance(q, points)
    }
}

impl RobotSdf for ExactCompositeSdf {
    fn model(&self) -> &RobotModel {
        &self.model
    }

    fn link_query(&self, k: usize, local: &[Vector3<f64>]) -> Vec<f64> {
        self.oracles[k].exact_signed_distance(local).0
    }

    fn link_lower_bound(&self, k: usize, local: &Vector3<f64>) -> f64 {
        // margin covers rounding in the oracle's distance
        local.norm() - self.bound_radii[k] - 1e-9
    }
}
