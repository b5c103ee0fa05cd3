use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

/// Rigid transform stored as rotation matrix + translation.
///
/// The inverse is a transpose-and-negate, so mapping world points into a
/// link frame costs one matrix-vector product per point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Rigid {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rigid {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// URDF convention: fixed-axis roll, pitch, yaw (R = Rz(yaw) Ry(pitch) Rx(roll)).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let rot = Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]);
        Self {
            rotation: *rot.matrix(),
            translation: Vector3::from(xyz),
        }
    }

    pub fn rotation_about(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self {
            rotation: *Rotation3::from_axis_angle(axis, angle).matrix(),
            translation: Vector3::zeros(),
        }
    }

    pub fn compose(&self, other: &Rigid) -> Rigid {
        Rigid {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Rigid {
        let rt = self.rotation.transpose();
        Rigid {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_inverse(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(p - self.translation))
    }

    /// Max deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(rotation: &Matrix3<f64>) -> f64 {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        let det = (rotation.determinant() - 1.0).abs();
        gram.amax().max(det)
    }

    pub fn is_rigid(&self, tol: f64) -> bool {
        Self::orthonormality_error(&self.rotation) <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn inverse_of_translation() {
        let t = Rigid::from_translation(Vector3::new(0.0, 0.0, 0.5));
        let p = t.apply_inverse(&Vector3::new(0.0, 0.0, 0.5));
        assert_eq!(p, Vector3::zeros());
    }

    #[test]
    fn rpy_matches_urdf_convention() {
        // yaw of +90° maps x onto y
        let t = Rigid::from_xyz_rpy([0.0; 3], [0.0, 0.0, FRAC_PI_2]);
        let p = t.apply(&Vector3::x());
        assert!((p - Vector3::y()).norm() < 1e-15);
        // roll of -90° maps y onto -z
        let t = Rigid::from_xyz_rpy([0.0; 3], [-FRAC_PI_2, 0.0, 0.0]);
        let p = t.apply(&Vector3::y());
        assert!((p + Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = Rigid::from_xyz_rpy([0.3, -0.2, 0.1], [0.4, -1.1, 2.0]);
        let i = t.compose(&t.inverse());
        assert!((i.rotation - Matrix3::identity()).amax() < 1e-14);
        assert!(i.translation.norm() < 1e-14);
        assert!(t.is_rigid(1e-12));
    }
}
