use linksdf::gp::{GpHyper, GpPrior};
use linksdf::mesh::{primitives, MeshSdf};
use linksdf::nn::{CompositeSdf, MlpSdf, RobotSdf, LINK_ARCHITECTURE};
use linksdf::planner::{sample_weights, update_sigma_f};
use linksdf::robot::RobotModel;
use linksdf::time_param::{fit_spline, time_parameterize};
use linksdf::transform::Rigid;
use linksdf::Trajectory;
use nalgebra::{DVector, Vector3};
use proptest::prelude::*;
use std::sync::OnceLock;

fn robot() -> &'static RobotModel {
    static R: OnceLock<RobotModel> = OnceLock::new();
    R.get_or_init(|| {
        RobotModel::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/robot/panda_like.toml")).unwrap()
    })
}

fn sphere() -> &'static MeshSdf {
    static S: OnceLock<MeshSdf> = OnceLock::new();
    S.get_or_init(|| MeshSdf::new(primitives::icosphere(0.1, 3)))
}

fn q_in_limits() -> impl Strategy<Value = Vec<f64>> {
    let limits = robot().joint_limits();
    limits.into_iter().map(|[lo, hi]| lo..=hi).collect::<Vec<_>>()
}

fn point(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fk_poses_are_rigid_and_chain_consistently(q in q_in_limits(), from in 0usize..9, span in 0usize..9) {
        let model = robot();
        let poses = model.forward_kinematics(&q).unwrap();
        prop_assert_eq!(poses.limit_flags, 0);
        for p in &poses.poses {
            prop_assert!(p.is_rigid(1e-9));
        }
        let to = (from + span).min(model.n_links() - 1);
        let rel = model.relative_transform(&q, from, to).unwrap();
        let expect = poses.poses[from].inverse().compose(&poses.poses[to]);
        prop_assert!((rel.rotation - expect.rotation).amax() < 1e-12);
        prop_assert!((rel.translation - expect.translation).amax() < 1e-12);
    }

    #[test]
    fn rigid_inverse_round_trips(xyz in prop::array::uniform3(-2.0..2.0f64), rpy in prop::array::uniform3(-3.0..3.0f64), p in point(1.0)) {
        let t = Rigid::from_xyz_rpy(xyz, rpy);
        prop_assert!((t.apply_inverse(&t.apply(&p)) - p).norm() < 1e-12);
        prop_assert!((t.inverse().apply(&p) - t.apply_inverse(&p)).norm() < 1e-12);
    }

    #[test]
    fn sphere_oracle_tracks_analytic_distance(p in point(0.5)) {
        // chordal error of a 3-times subdivided icosphere of radius 0.1 stays under 2 mm
        let d = sphere().signed_distance(&p);
        prop_assert!((d - (p.norm() - 0.1)).abs() < 2e-3, "{} vs {}", d, p.norm() - 0.1);
    }

    #[test]
    fn gp_samples_pin_endpoints(sigma in 0.01..2.0f64, h in 0.05..1.0f64, seed in any::<u64>(), a in point(1.0), b in point(1.0)) {
        let (start, goal) = (DVector::from_column_slice(a.as_slice()), DVector::from_column_slice(b.as_slice()));
        let prior = GpPrior::condition_on_endpoints(&start, &goal, 12, GpHyper::new(sigma, h).unwrap()).unwrap();
        for s in prior.sample_trajectories(4, seed) {
            prop_assert_eq!(s.start(), &start);
            prop_assert_eq!(s.goal(), &goal);
            prop_assert!(s.is_finite());
        }
    }

    #[test]
    fn weights_are_a_distribution(l in prop::collection::vec(0.0..1.0f64, 1..50)) {
        let totals: Vec<f64> = l.iter().map(|x| -x.max(1e-300).ln()).collect();
        let (w, _) = sample_weights(&l, &totals);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn sigma_never_grows_or_drops_below_floor(sigma in 0.001..1.0f64, cost in 0.0..3.0f64, eta in 0.5..0.99f64) {
        let floor = 0.0005;
        let cost = cost.floor();
        let next = update_sigma_f(sigma, cost, eta, floor);
        prop_assert!(next <= sigma);
        prop_assert!(next >= floor.min(sigma));
        if cost > 0.0 {
            prop_assert_eq!(next, sigma);
        }
    }

    #[test]
    fn trajectory_text_round_trips(xs in prop::collection::vec(prop::array::uniform2(-1e3..1e3f64), 3..12)) {
        let t = Trajectory::new(xs.iter().map(|x| DVector::from_column_slice(x)).collect()).unwrap();
        prop_assert_eq!(Trajectory::from_text(&t.to_text()).unwrap(), t.clone());
        let dense = Trajectory { states: t.densified(3) };
        prop_assert!((dense.length() - t.length()).abs() <= 1e-9 * t.length().max(1.0));
    }

    #[test]
    fn timing_respects_limits(xs in prop::collection::vec(prop::array::uniform2(-1.0..1.0f64), 3..8)) {
        let t = Trajectory::new(xs.iter().map(|x| DVector::from_column_slice(x)).collect()).unwrap();
        let path = fit_spline(&t).unwrap();
        let timed = time_parameterize(&path, &[0.7, 1.3], &[2.0, 0.9], 256).unwrap();
        let (v, a) = timed.utilization(&[0.7, 1.3], &[2.0, 0.9]);
        prop_assert!(v <= 1.01 && a <= 1.01, "{} {}", v, a);
        prop_assert!(timed.duration().is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pruned_composite_equals_exhaustive(q in q_in_limits(), seed in 0u64..1000) {
        let model = robot().clone();
        let nets: Vec<MlpSdf> = (0..model.n_links()).map(|k| MlpSdf::init(&LINK_ARCHITECTURE, seed + k as u64)).collect();
        let sdf = CompositeSdf::new(model.clone(), nets).unwrap();
        let pts: Vec<Vector3<f64>> = (0..40).map(|i| {
            let a = i as f64 * 0.7 + seed as f64;
            Vector3::new(a.sin(), a.cos(), 0.3 * (2.0 * a).sin() + 0.4)
        }).collect();
        let got = sdf.composite_min_distance(&q, &pts).unwrap();
        let poses = model.forward_kinematics(&q).unwrap();
        let per_link: Vec<Vec<f64>> = (0..model.n_links()).map(|k| sdf.link_distance(&poses, k, &pts).unwrap()).collect();
        for i in 0..pts.len() {
            let best = per_link.iter().map(|d| d[i]).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(got.distance[i], best);
        }
    }
}
