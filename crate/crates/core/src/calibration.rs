//! Tracker-to-camera calibration.
//!
//! Sensor positions in the tracker frame are paired with the pixels where the
//! sensor shows up in the depth image, and a perspective-n-point solve gives
//! the rigid transform between the two frames. The solver is a normalized
//! direct linear transform for initialization followed by damped
//! Gauss–Newton on the pixel reprojection error, with the rotation updated on
//! its manifold. No lens distortion is modeled.

use nalgebra::{DMatrix, Matrix3, Matrix6, Point2, Point3, Rotation3, UnitQuaternion, Vector3, Vector6};

use crate::geometry::RigidTransform;
use crate::hand::{Frame, Skeleton};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point at depth {0} mm is not in front of the camera")]
    BehindCamera(f64),
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewCorrespondences { needed: usize, got: usize },
    #[error("non-finite correspondence at index {0}")]
    NonFinite(usize),
    #[error("degenerate correspondence configuration: 3D points span rank {rank}")]
    RankDeficient { rank: usize },
    #[error("no convergence after {iterations} iterations (best RMS {rms:.6} px)")]
    NotConverged {
        iterations: usize,
        rms: f64,
        best: RigidTransform,
    },
    #[error("skeleton is in the {found} frame, expected {expected}")]
    FrameMismatch { expected: Frame, found: Frame },
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            fx: 475.0,
            fy: 475.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(CalibrationError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        if !(self.cx >= 0.0 && self.cx <= self.width as f64 && self.cy >= 0.0 && self.cy <= self.height as f64) {
            return Err(CalibrationError::InvalidIntrinsics(
                "principal point outside the image".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, px: &Point2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// A tracker-frame 3D point and its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub tracker_point: Point3<f64>,
    pub pixel: Point2<f64>,
}

pub fn project(p: &Point3<f64>, k: &CameraIntrinsics) -> Result<Point2<f64>, CalibrationError> {
    if !(p.z > 0.0) {
        return Err(CalibrationError::BehindCamera(p.z));
    }
    Ok(Point2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// The camera-frame point at `depth` that projects to `px`.
pub fn unproject(px: &Point2<f64>, depth: f64, k: &CameraIntrinsics) -> Point3<f64> {
    Point3::new((px.x - k.cx) / k.fx * depth, (px.y - k.cy) / k.fy * depth, depth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        PnpOptions {
            max_iterations: 100,
            gradient_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpSolution {
    /// Tracker to camera.
    pub transform: RigidTransform,
    /// `sqrt(mean |residual_i|^2)` over correspondences, px.
    pub rms: f64,
    pub iterations: usize,
}

pub const MIN_CORRESPONDENCES: usize = 6;

/// Reprojection RMS of `x` over `corrs`; points behind the camera count as
/// infinitely far off.
pub fn reprojection_rms(x: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> f64 {
    if corrs.is_empty() {
        return 0.0;
    }
    let sum: f64 = corrs
        .iter()
        .map(|c| match project(&x.apply_point(&c.tracker_point), k) {
            Ok(px) => (px - c.pixel).norm_squared(),
            Err(_) => f64::INFINITY,
        })
        .sum();
    (sum / corrs.len() as f64).sqrt()
}

fn point_rank(corrs: &[Correspondence]) -> usize {
    let n = corrs.len() as f64;
    let c = corrs.iter().fold(Vector3::zeros(), |a, p| a + p.tracker_point.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in corrs {
        let d = p.tracker_point.coords - c;
        cov += d * d.transpose();
    }
    let ev = cov.symmetric_eigenvalues();
    let mut s = [ev[0].abs(), ev[1].abs(), ev[2].abs()];
    s.sort_by(|a, b| b.total_cmp(a));
    if s[0] <= 0.0 {
        return 0;
    }
    // eigenvalues of the scatter are squared spreads
    s.iter().take_while(|v| **v > 1e-12 * s[0]).count()
}

/// Linear pose from normalized image coordinates and centred, scaled points.
fn dlt_init(corrs: &[Correspondence], k: &CameraIntrinsics) -> Option<RigidTransform> {
    let n = corrs.len();
    let centroid = corrs.iter().fold(Vector3::zeros(), |a, p| a + p.tracker_point.coords) / n as f64;
    let mean_dist = corrs
        .iter()
        .map(|p| (p.tracker_point.coords - centroid).norm())
        .sum::<f64>()
        / n as f64;
    if !(mean_dist > 0.0) {
        return None;
    }
    let s = 3f64.sqrt() / mean_dist;
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, c) in corrs.iter().enumerate() {
        let x = (c.tracker_point.coords - centroid) * s;
        let u = (c.pixel.x - k.cx) / k.fx;
        let v = (c.pixel.y - k.cy) / k.fy;
        let xh = [x.x, x.y, x.z, 1.0];
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -u * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -v * xh[j];
        }
    }
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1))?;
    let p = eig.eigenvectors.column(imin);
    let m = Matrix3::new(p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]);
    let p4 = Vector3::new(p[3], p[7], p[11]);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let scale = svd.singular_values.mean();
    if !(scale > 0.0) {
        return None;
    }
    let mut r = u * vt;
    let mut sign = 1.0;
    if r.determinant() < 0.0 {
        r = -r;
        sign = -1.0;
    }
    // normalized points are s (X - c), so t = t_n / s - R c
    let t_norm = p4 * sign / scale;
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let x = RigidTransform::new(rot, t_norm / s - (rot * centroid));
    Some(x)
}

struct Linearization {
    jtj: Matrix6<f64>,
    jtr: Vector6<f64>,
}

fn linearize(x: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> Option<Linearization> {
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for c in corrs {
        let rp = x.rotation * c.tracker_point.coords;
        let pc = rp + x.translation;
        if !(pc.z > 0.0) {
            return None;
        }
        let iz = 1.0 / pc.z;
        let r = Vector3::new(
            k.fx * pc.x * iz + k.cx - c.pixel.x,
            k.fy * pc.y * iz + k.cy - c.pixel.y,
            0.0,
        );
        // d(pixel)/d(pc)
        let dp = nalgebra::Matrix2x3::new(
            k.fx * iz,
            0.0,
            -k.fx * pc.x * iz * iz,
            0.0,
            k.fy * iz,
            -k.fy * pc.y * iz * iz,
        );
        // d(pc)/d(omega) = -[R X]x, d(pc)/d(t) = I
        let skew = -rp.cross_matrix();
        let mut j = nalgebra::Matrix2x6::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dp * skew));
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dp);
        let r2 = nalgebra::Vector2::new(r.x, r.y);
        jtj += j.transpose() * j;
        jtr += j.transpose() * r2;
    }
    Some(Linearization { jtj, jtr })
}

fn cost_of(x: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> f64 {
    let rms = reprojection_rms(x, corrs, k);
    rms * rms * corrs.len() as f64
}

fn retract(x: &RigidTransform, delta: &Vector6<f64>) -> RigidTransform {
    let dw = Vector3::new(delta[0], delta[1], delta[2]);
    let dt = Vector3::new(delta[3], delta[4], delta[5]);
    let dr = UnitQuaternion::from_scaled_axis(dw);
    // rotation perturbed on the left about the rotated point: pc = exp(w) R X + t + dt
    RigidTransform::new(dr * x.rotation, x.translation + dt)
}

/// Estimates the tracker-to-camera transform from `corrs`.
pub fn solve_pnp(corrs: &[Correspondence], k: &CameraIntrinsics) -> Result<PnpSolution, CalibrationError> {
    solve_pnp_with(corrs, k, &PnpOptions::default())
}

pub fn solve_pnp_with(
    corrs: &[Correspondence],
    k: &CameraIntrinsics,
    opts: &PnpOptions,
) -> Result<PnpSolution, CalibrationError> {
    k.validate()?;
    if corrs.len() < MIN_CORRESPONDENCES {
        return Err(CalibrationError::TooFewCorrespondences {
            needed: MIN_CORRESPONDENCES,
            got: corrs.len(),
        });
    }
    for (i, c) in corrs.iter().enumerate() {
        if !(c.tracker_point.coords.iter().all(|v| v.is_finite()) && c.pixel.coords.iter().all(|v| v.is_finite())) {
            return Err(CalibrationError::NonFinite(i));
        }
    }
    let rank = point_rank(corrs);
    if rank < 3 {
        return Err(CalibrationError::RankDeficient { rank });
    }
    let mut x = dlt_init(corrs, k).ok_or(CalibrationError::RankDeficient { rank })?;
    let mut cost = cost_of(&x, corrs, k);
    let mut lambda = 1e-3;
    for iter in 0..opts.max_iterations {
        let Some(lin) = linearize(&x, corrs, k) else {
            return Err(CalibrationError::NotConverged {
                iterations: iter,
                rms: (cost / corrs.len() as f64).sqrt(),
                best: x,
            });
        };
        if lin.jtr.amax() <= opts.gradient_tolerance {
            return Ok(done(x, corrs, k, iter));
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut h = lin.jtj;
            for i in 0..6 {
                h[(i, i)] += lambda * lin.jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = h.cholesky().map(|c| c.solve(&(-lin.jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = retract(&x, &delta);
            let c_cost = cost_of(&candidate, corrs, k);
            if c_cost < cost {
                let small_step = delta.norm() <= 1e-15 * (1.0 + x.translation.norm());
                let tiny_gain = cost - c_cost <= 1e-30 + 1e-15 * cost;
                x = candidate;
                cost = c_cost;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if small_step || tiny_gain {
                    return Ok(done(x, corrs, k, iter + 1));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return Ok(done(x, corrs, k, iter + 1));
        }
    }
    Err(CalibrationError::NotConverged {
        iterations: opts.max_iterations,
        rms: (cost / corrs.len() as f64).sqrt(),
        best: x,
    })
}

fn done(x: RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics, iterations: usize) -> PnpSolution {
    let transform = x.canonical();
    PnpSolution {
        rms: reprojection_rms(&transform, corrs, k),
        transform,
        iterations,
    }
}

/// Maps a tracker-frame skeleton into the camera frame.
pub fn apply_calibration(skel: &Skeleton, x: &RigidTransform) -> Result<Skeleton, CalibrationError> {
    if skel.frame != Frame::Tracker {
        return Err(CalibrationError::FrameMismatch {
            expected: Frame::Tracker,
            found: skel.frame,
        });
    }
    Ok(skel.transformed(x, Frame::Camera))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let k = CameraIntrinsics::default();
        assert_eq!(
            project(&Point3::new(0.0, 0.0, 500.0), &k).unwrap(),
            Point2::new(320.0, 240.0)
        );
        assert_eq!(
            project(&Point3::new(100.0, 0.0, 500.0), &k).unwrap(),
            Point2::new(415.0, 240.0)
        );
        let p = project(&Point3::new(50.0, 50.0, 600.0), &k).unwrap();
        let off = 475.0 * 50.0 / 600.0;
        assert!((p.x - (320.0 + off)).abs() < 1e-12 && (p.y - (240.0 + off)).abs() < 1e-12);
        assert!((p.x - 359.583_333_333).abs() < 1e-6);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let k = CameraIntrinsics::default();
        assert!(matches!(
            project(&Point3::new(0.0, 0.0, 0.0), &k),
            Err(CalibrationError::BehindCamera(_))
        ));
        assert!(project(&Point3::new(1.0, 0.0, -5.0), &k).is_err());
    }

    #[test]
    fn unproject_inverts_project() {
        let k = CameraIntrinsics::default();
        let p = Point3::new(-37.5, 81.25, 432.0);
        let px = project(&p, &k).unwrap();
        let back = unproject(&px, p.z, &k);
        assert!((project(&back, &k).unwrap() - px).norm() < 1e-9);
        assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn intrinsics_validation() {
        let mut k = CameraIntrinsics::default();
        assert!(k.validate().is_ok());
        k.fx = 0.0;
        assert!(k.validate().is_err());
        let k = CameraIntrinsics {
            cx: 700.0,
            ..Default::default()
        };
        assert!(k.validate().is_err());
    }

    fn grid_corrs(x: &RigidTransform, k: &CameraIntrinsics) -> Vec<Correspondence> {
        let inv = x.inverse();
        let mut out = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                let depth = 350.0 + 70.0 * ((i + j) % 4) as f64;
                let px = Point2::new(100.0 + 140.0 * i as f64, 90.0 + 130.0 * j as f64);
                let pc = unproject(&px, depth, k);
                out.push(Correspondence {
                    tracker_point: inv.apply_point(&pc),
                    pixel: px,
                });
            }
        }
        out
    }

    #[test]
    fn identity_fixture() {
        let k = CameraIntrinsics::default();
        let corrs = grid_corrs(&RigidTransform::identity(), &k);
        let sol = solve_pnp(&corrs, &k).unwrap();
        assert!(sol.transform.rotation.angle() < 1e-6);
        assert!(sol.transform.translation.norm() < 1e-3);
        assert!(sol.rms < 1e-6);
    }

    #[test]
    fn collinear_points_are_rank_deficient() {
        let k = CameraIntrinsics::default();
        let corrs: Vec<_> = (0..8)
            .map(|i| {
                let p = Point3::new(10.0 * i as f64, 0.0, 500.0);
                Correspondence {
                    tracker_point: p,
                    pixel: project(&p, &k).unwrap(),
                }
            })
            .collect();
        assert!(matches!(
            solve_pnp(&corrs, &k),
            Err(CalibrationError::RankDeficient { rank: 1 })
        ));
    }

    #[test]
    fn too_few_points() {
        let k = CameraIntrinsics::default();
        let corrs = grid_corrs(&RigidTransform::identity(), &k);
        assert!(matches!(
            solve_pnp(&corrs[..5], &k),
            Err(CalibrationError::TooFewCorrespondences { got: 5, .. })
        ));
    }

    #[test]
    fn wrong_frame_is_rejected() {
        let skel = Skeleton::new(Frame::Camera, [Point3::origin(); 21]);
        assert!(matches!(
            apply_calibration(&skel, &RigidTransform::identity()),
            Err(CalibrationError::FrameMismatch { .. })
        ));
    }
}
