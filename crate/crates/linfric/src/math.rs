//! Small shared math aliases and helpers on top of nalgebra.

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Rotation matrix for a right-handed rotation of `angle` radians about `axis`.
///
/// The axis need not be normalized; it must be nonzero.
#[must_use]
pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    let unit = nalgebra::Unit::new_normalize(*axis);
    *nalgebra::Rotation3::from_axis_angle(&unit, angle).matrix()
}

/// True when every component is finite.
#[must_use]
pub fn vec_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Signed angle of `v` measured in the right-handed plane basis (`e1`, `e2`),
/// in (−π, π]. The out-of-plane component of `v` is ignored.
#[must_use]
pub fn plane_angle(v: &Vec3, e1: &Vec3, e2: &Vec3) -> f64 {
    f64::atan2(v.dot(e2), v.dot(e1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotation_about_z_quarter_turn_maps_x_to_y() {
        let r = rotation_about(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        let y = r * Vec3::x();
        assert_relative_eq!(y, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let r = rotation_about(&Vec3::new(1.0, -2.0, 0.5), 0.83);
        let should_be_identity = r.transpose() * r;
        assert_relative_eq!(should_be_identity, Mat3::identity(), epsilon = 1e-14);
    }

    #[test]
    fn plane_angle_quadrants() {
        let e1 = Vec3::x();
        let e2 = Vec3::y();
        assert_relative_eq!(plane_angle(&Vec3::new(1.0, 1.0, 9.0), &e1, &e2), std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(plane_angle(&Vec3::new(0.0, -2.0, 0.0), &e1, &e2), -std::f64::consts::FRAC_PI_2);
    }
}
