use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot::RobotModel;
use crate::trajectory::Trajectory;

/// Signed clearance of a state (2D position or joint vector) from the scene.
pub trait DistanceChecker: Sync {
    fn distances(&self, states: &[DVector<f64>]) -> Result<Vec<f64>>;

    /// Whether each state lies within `eps` of an obstacle. Implementations
    /// may answer this faster than computing full distances.
    fn within(&self, states: &[DVector<f64>], eps: f64) -> Result<Vec<bool>> {
        Ok(self.distances(states)?.into_iter().map(|d| d <= eps).collect())
    }
}

/// Adapts a closure to [`DistanceChecker`].
pub struct FnChecker<F>(pub F);

impl<F: Fn(&DVector<f64>) -> f64 + Sync> DistanceChecker for FnChecker<F> {
    fn distances(&self, states: &[DVector<f64>]) -> Result<Vec<f64>> {
        Ok(states.iter().map(|s| (self.0)(s)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleCostSpec {
    /// Clearance threshold (m); states with d ≤ epsilon count as violations.
    pub epsilon: f64,
    /// Linear interpolants inserted per segment before checking.
    pub interp_points: usize,
    pub weight: f64,
}

impl Default for ObstacleCostSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            interp_points: 5,
            weight: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthCostSpec {
    pub weight: f64,
}

impl Default for LengthCostSpec {
    fn default() -> Self {
        Self { weight: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryCostSpec {
    pub z_floor: f64,
    pub weight: f64,
    pub enabled: bool,
}

impl Default for BoundaryCostSpec {
    fn default() -> Self {
        Self {
            z_floor: 0.02,
            weight: 1.0,
            enabled: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSpec {
    pub obstacle: ObstacleCostSpec,
    pub length: LengthCostSpec,
    pub boundary: BoundaryCostSpec,
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.obstacle.epsilon >= 0.0
            && self.obstacle.weight >= 0.0
            && self.length.weight >= 0.0
            && self.boundary.weight >= 0.0
            && self.boundary.z_floor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("cost thresholds and weights must be nonnegative".into()))
        }
    }
}

/// Unweighted cost terms of one trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub obstacle: f64,
    pub length: f64,
    pub boundary: f64,
}

/// Number of densified states with clearance at most `epsilon`.
pub fn obstacle_cost(traj: &Trajectory, checker: &dyn DistanceChecker, spec: &ObstacleCostSpec) -> Result<f64> {
    let states = traj.densified(spec.interp_points);
    let hits = checker.within(&states, spec.epsilon)?;
    Ok(hits.into_iter().filter(|&h| h).count() as f64)
}

pub fn length_cost(traj: &Trajectory) -> f64 {
    traj.length()
}

/// Number of (waypoint, link) pairs whose link-frame origin lies strictly
/// below `z_floor`. Links ahead of the first moving joint never move and
/// are skipped.
pub fn boundary_cost(traj: &Trajectory, model: &RobotModel, z_floor: f64) -> Result<f64> {
    let first = model.first_moving_link().unwrap_or(model.n_links());
    let mut count = 0usize;
    for q in &traj.states {
        let poses = model.forward_kinematics(q.as_slice())?;
        count += poses.poses[first..]
            .iter()
            .filter(|t| t.translation.z < z_floor)
            .count();
    }
    Ok(count as f64)
}

pub fn evaluate_costs(
    traj: &Trajectory,
    checker: &dyn DistanceChecker,
    robot: Option<&RobotModel>,
    spec: &CostSpec,
) -> Result<CostTerms> {
    let boundary = match robot {
        Some(model) if spec.boundary.enabled => boundary_cost(traj, model, spec.boundary.z_floor)?,
        _ => 0.0,
    };
    Ok(CostTerms {
        obstacle: obstacle_cost(traj, checker, &spec.obstacle)?,
        length: length_cost(traj),
        boundary,
    })
}

/// Weighted total and the likelihood `exp(−total / 2)`.
pub fn cost_likelihood(terms: &CostTerms, spec: &CostSpec) -> (f64, f64) {
    let mut total = spec.obstacle.weight * terms.obstacle + spec.length.weight * terms.length;
    if spec.boundary.enabled {
        total += spec.boundary.weight * terms.boundary;
    }
    (total, (-0.5 * total).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{JointKind, JointSpec, Link};
    use crate::transform::Rigid;
    use nalgebra::{Unit, Vector3};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    struct Wall;

    impl DistanceChecker for Wall {
        // thin wall at x = 0.5, |y| < 1, 0.01 thick
        fn distances(&self, states: &[DVector<f64>]) -> Result<Vec<f64>> {
            Ok(states
                .iter()
                .map(|s| {
                    let dx = (s[0] - 0.5).abs() - 0.005;
                    let dy = s[1].abs() - 1.0;
                    dx.max(dy)
                })
                .collect())
        }
    }

    #[test]
    fn free_trajectory_costs_nothing() {
        let t = Trajectory::straight_line(&v(&[0.0, 2.0]), &v(&[1.0, 2.0]), 20);
        let spec = ObstacleCostSpec::default();
        assert_eq!(obstacle_cost(&t, &Wall, &spec).unwrap(), 0.0);
    }

    #[test]
    fn buried_waypoints_each_count() {
        let t = Trajectory::new(vec![v(&[0.5, 0.0]); 21]).unwrap();
        let spec = ObstacleCostSpec {
            interp_points: 0,
            ..Default::default()
        };
        assert_eq!(obstacle_cost(&t, &Wall, &spec).unwrap(), 21.0);
    }

    #[test]
    fn interpolants_catch_thin_wall() {
        let t = Trajectory::new(vec![v(&[0.0, 0.0]), v(&[0.2, 0.0]), v(&[0.8, 0.0]), v(&[1.0, 0.0])]).unwrap();
        let coarse = ObstacleCostSpec {
            interp_points: 0,
            ..Default::default()
        };
        let fine = ObstacleCostSpec {
            interp_points: 5,
            ..Default::default()
        };
        assert_eq!(obstacle_cost(&t, &Wall, &coarse).unwrap(), 0.0);
        assert!(obstacle_cost(&t, &Wall, &fine).unwrap() > 0.0);
    }

    #[test]
    fn likelihood_values() {
        let spec = CostSpec::default();
        let (total, l) = cost_likelihood(&CostTerms::default(), &spec);
        assert_eq!((total, l), (0.0, 1.0));
        let terms = CostTerms {
            obstacle: 2.0 * 2f64.ln(),
            ..Default::default()
        };
        assert!((cost_likelihood(&terms, &spec).1 - 0.5).abs() < 1e-15);
        let mut heavier = spec.clone();
        heavier.obstacle.weight *= 2.0;
        assert!(cost_likelihood(&terms, &heavier).1 < 0.5);
    }

    #[test]
    fn boundary_counts_strictly_below_floor() {
        // base plus one prismatic link along z
        let lift = JointSpec {
            kind: JointKind::Prismatic,
            axis: Unit::new_normalize(Vector3::z()),
            origin: Rigid::identity(),
            limits: [-1.0, 1.0],
            vel_limit: 1.0,
            acc_limit: 1.0,
        };
        let model = RobotModel::new(
            "lift",
            vec![
                Link {
                    name: "base".into(),
                    joint: JointSpec::fixed(Rigid::identity()),
                    mesh: None,
                },
                Link {
                    name: "slider".into(),
                    joint: lift,
                    mesh: None,
                },
            ],
        )
        .unwrap();
        let up = Trajectory::new(vec![v(&[0.5]); 3]).unwrap();
        assert_eq!(boundary_cost(&up, &model, 0.02).unwrap(), 0.0);
        let one = Trajectory::new(vec![v(&[0.5]), v(&[0.0]), v(&[0.5])]).unwrap();
        assert_eq!(boundary_cost(&one, &model, 0.02).unwrap(), 1.0);
        let touching = Trajectory::new(vec![v(&[0.5]), v(&[0.02]), v(&[0.5])]).unwrap();
        assert_eq!(boundary_cost(&touching, &model, 0.02).unwrap(), 0.0);
    }
}
