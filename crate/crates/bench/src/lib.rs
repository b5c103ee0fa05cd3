//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use linksdf::mesh::{primitives, MeshSdf};
use linksdf::nn::{CompositeSdf, MlpSdf, LINK_ARCHITECTURE};
use linksdf::robot::{JointKind, JointSpec, Link, RobotModel};
use linksdf::transform::Rigid;
use nalgebra::{Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The committed network of the bent fixture link, or a randomly
/// initialised one when fixtures are absent (latency does not depend on
/// the weights).
pub fn link_net() -> MlpSdf {
    MlpSdf::load(fixtures_dir().join("robot/nets/link3.net")).unwrap_or_else(|_| {
        let mut net = MlpSdf::init(&LINK_ARCHITECTURE, 7);
        net.bound_radius = 0.21;
        net.trust_radius = 1.41;
        net
    })
}

/// One revolute link carrying `net`.
pub fn single_link_sdf(net: MlpSdf) -> CompositeSdf {
    let joint = JointSpec {
        kind: JointKind::Revolute,
        axis: Unit::new_normalize(Vector3::z()),
        origin: Rigid::identity(),
        limits: [-3.0, 3.0],
        vel_limit: 1.0,
        acc_limit: 1.0,
    };
    let model = RobotModel::new(
        "one",
        vec![Link {
            name: "link".into(),
            joint,
            mesh: None,
        }],
    )
    .expect("valid model");
    CompositeSdf::new(model, vec![net]).expect("one net per link")
}

/// Uniform points in a cube of half-width `half` around the origin.
pub fn random_points(n: usize, half: f64, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-half..half)))
        .collect()
}

pub fn tube_oracle() -> MeshSdf {
    let path = [Vector3::new(0.0, 0.0, -0.15), Vector3::zeros(), Vector3::new(0.0825, 0.0, 0.0)];
    MeshSdf::new(primitives::tube(&path, 0.06, 0.04, 24))
}
