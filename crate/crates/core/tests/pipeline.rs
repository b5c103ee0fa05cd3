//! Mesh to dataset to network to composite, on a two-link toy arm.

use linksdf::mesh::{primitives, synthesize_dataset, SamplingParams};
use linksdf::nn::{train_link_sdf, CompositeSdf, ExactCompositeSdf, RobotSdf, TrainConfig};
use linksdf::robot::{JointKind, JointSpec, Link, RobotModel};
use linksdf::transform::Rigid;
use nalgebra::{Unit, Vector3};

fn toy_arm() -> RobotModel {
    let joint = |x: f64| JointSpec {
        kind: JointKind::Revolute,
        axis: Unit::new_normalize(Vector3::z()),
        origin: Rigid::from_translation(Vector3::new(x, 0.0, 0.0)),
        limits: [-3.0, 3.0],
        vel_limit: 1.0,
        acc_limit: 1.0,
    };
    let link = |name: &str, x: f64| Link {
        name: name.into(),
        joint: joint(x),
        mesh: None,
    };
    RobotModel::new("toy", vec![link("a", 0.0), link("b", 0.4)]).unwrap()
}

#[test]
fn trained_composite_tracks_exact_composite() {
    let mesh = primitives::icosphere(0.08, 2);
    let params = SamplingParams::new(SamplingParams::default_offsets(), 3000, 1);
    let data = synthesize_dataset(&mesh, 0, &params).unwrap();
    assert!(data.len() <= 3000 && data.len() > 500);
    let cfg = TrainConfig {
        epochs: 150,
        batch_size: 256,
        lambda_n: 1e-4,
        lr_step_epochs: 60,
        seed: 2,
        ..Default::default()
    };
    let (net, report) = train_link_sdf(&data, &cfg).unwrap();
    assert!(report.last().distance_rmsd < report.epochs[0].distance_rmsd);

    let model = toy_arm();
    let learned = CompositeSdf::new(model.clone(), vec![net.clone(), net]).unwrap();
    let exact = ExactCompositeSdf::new(model, vec![Some(mesh.clone()), Some(mesh)]).unwrap();
    let pts: Vec<Vector3<f64>> = (0..200)
        .map(|i| {
            let a = i as f64 * 0.37;
            Vector3::new(0.3 + 0.4 * a.cos(), 0.4 * a.sin(), 0.2 * (3.0 * a).sin())
        })
        .collect();
    for q in [[0.0, 0.0], [0.7, -1.2], [-2.0, 2.5]] {
        let l = learned.min_distance(&q, &pts).unwrap();
        let e = exact.min_distance(&q, &pts).unwrap();
        let rmsd = (l.distance.iter().zip(&e.distance).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
        assert!(rmsd < 0.02, "q {q:?}: rmsd {rmsd}");
    }
}
