//! Rigid transforms and small geometric helpers shared by every module.

use nalgebra::{Matrix3, Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};

/// Rotation plus translation, mapping `p` to `R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -(inv * self.translation))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Quaternion with non-negative scalar part, so that equal rotations print equal.
    pub fn canonical(&self) -> RigidTransform {
        RigidTransform::new(canonical_quaternion(&self.rotation), self.translation)
    }
}

pub fn canonical_quaternion(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        *q
    }
}

/// Builds a unit quaternion from `(w, x, y, z)`, rejecting norms further than
/// `tol` from one.
pub fn unit_quaternion_checked(w: f64, x: f64, y: f64, z: f64, tol: f64) -> Option<UnitQuaternion<f64>> {
    let q = Quaternion::new(w, x, y, z);
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > tol {
        return None;
    }
    Some(UnitQuaternion::from_quaternion(q))
}

/// Rotation whose columns are the given orthonormal right-handed axes.
pub fn rotation_from_axes(x: &Vector3<f64>, y: &Vector3<f64>, z: &Vector3<f64>) -> UnitQuaternion<f64> {
    let m = Matrix3::from_columns(&[*x, *y, *z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Angle of the relative rotation between two orientations, in radians.
pub fn rotation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.angle_to(b)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Least-squares rigid fit (Kabsch) of `src` onto `dst`: returns `X` minimizing
/// `sum |X(src_i) - dst_i|^2`. `None` when fewer than three points or the
/// source set is collinear.
pub fn fit_rigid(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Option<RigidTransform> {
    if src.len() != dst.len() || src.len() < 3 {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let sv = svd.singular_values;
    let smax = sv.max();
    if !(smax > 0.0) {
        return None;
    }
    // second singular value vanishes only for collinear sources
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if sorted[1] <= 1e-12 * smax {
        return None;
    }
    let v = v_t.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = v * fix * u.transpose();
    }
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let t = cd - rot * cs;
    Some(RigidTransform::new(rot, t))
}

/// Largest residual `|X(src_i) - dst_i|` of a fitted transform.
pub fn fit_residual(x: &RigidTransform, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(s, d)| (x.apply_point(s) - d).norm())
        .fold(0.0, f64::max)
}

/// Component of `v` orthogonal to the unit vector `axis`.
pub fn reject(v: &Vector3<f64>, axis: &Vector3<f64>) -> Vector3<f64> {
    v - axis * axis.dot(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_and_inverse_are_group_operations() {
        let a = RigidTransform::new(
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let b = RigidTransform::new(
            UnitQuaternion::from_euler_angles(-1.0, 0.5, 0.1),
            Vector3::new(-4.0, 0.5, 9.0),
        );
        let p = Point3::new(0.7, -3.0, 12.0);
        let ab = a.compose(&b);
        assert!((ab.apply_point(&p) - a.apply_point(&b.apply_point(&p))).norm() < 1e-12);
        let id = a.compose(&a.inverse());
        assert!(id.translation.norm() < 1e-12);
        assert!(id.rotation.angle() < 1e-12);
    }

    #[test]
    fn kabsch_recovers_known_transform() {
        let x = RigidTransform::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vector3::new(5.0, -1.0, 2.0),
        );
        let src = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(90.0, 0.0, 0.0),
            Point3::new(80.0, 30.0, 0.0),
            Point3::new(30.0, -20.0, 5.0),
        ];
        let dst: Vec<_> = src.iter().map(|p| x.apply_point(p)).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        assert!(fit.rotation.angle_to(&x.rotation) < 1e-12);
        assert!((fit.translation - x.translation).norm() < 1e-12);
    }

    #[test]
    fn kabsch_rejects_collinear() {
        let src = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        assert!(fit_rigid(&src, &src).is_none());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(4.0) - (4.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }
}
