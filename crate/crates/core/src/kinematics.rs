//! Forward kinematics and the magnetic-sensor simulator.
//!
//! Together they produce the ground truth the annotator is checked against:
//! pose -> skeleton -> six 6D sensor readings.
//!
//! Nail sensor axes: `V1` runs along the distal bone toward the tip, `V2`
//! points from the nail surface inward to the bone axis, and `V3 = V1 × V2`
//! is the finger's lateral axis (normal of the finger plane). With this
//! convention the tip and DIP are `T = L(S) + l1 V1 + r V2` and
//! `D = L(S) - l2 V1 + r V2`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{fit_rigid, reject, rotation_from_axes, RigidTransform};
use crate::hand::{
    skeleton_consistency, validate_pose, validate_shape, ConsistencyTolerance, Finger, Frame, HandPose, HandShape,
    JointId, JointLimits, Skeleton, ValidationReport, JOINT_COUNT,
};

pub const SENSOR_COUNT: usize = 6;

/// Nail sensors `S1..S5` (thumb to little) and the palm sensor `S6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SensorId(u8);

impl SensorId {
    pub const PALM: SensorId = SensorId(5);

    pub fn all() -> impl Iterator<Item = SensorId> {
        (0..SENSOR_COUNT as u8).map(SensorId)
    }

    pub fn nail(finger: Finger) -> SensorId {
        SensorId(finger.index() as u8)
    }

    pub fn from_index(i: usize) -> Option<SensorId> {
        (i < SENSOR_COUNT).then_some(SensorId(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn finger(self) -> Option<Finger> {
        Finger::from_index(self.index())
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0 + 1)
    }
}

impl FromStr for SensorId {
    type Err = KinematicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        t.strip_prefix(['S', 's'])
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|n| (1..=SENSOR_COUNT).contains(n))
            .map(|n| SensorId((n - 1) as u8))
            .ok_or_else(|| KinematicsError::UnknownSensor(s.to_string()))
    }
}

/// Position (mm) and orientation of one sensor. The orientation's rotation
/// matrix has columns `V1, V2, V3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub id: SensorId,
    pub position: Point3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl SensorReading {
    pub fn new(id: SensorId, position: Point3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        SensorReading {
            id,
            position,
            orientation,
        }
    }

    /// `(V1, V2, V3)`.
    pub fn axes(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let m = self.orientation.to_rotation_matrix().into_inner();
        (m.column(0).into(), m.column(1).into(), m.column(2).into())
    }

    /// Sensor-local to tracker transform.
    pub fn pose(&self) -> RigidTransform {
        RigidTransform::new(self.orientation, self.position.coords)
    }

    pub fn transformed(&self, x: &RigidTransform) -> SensorReading {
        SensorReading::new(self.id, x.apply_point(&self.position), x.rotation * self.orientation)
    }
}

/// All readings sampled at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub timestamp_us: u64,
    pub readings: Vec<SensorReading>,
}

impl SensorFrame {
    pub fn reading(&self, id: SensorId) -> Option<&SensorReading> {
        self.readings.iter().find(|r| r.id == id)
    }

    /// Each of the six sensors present exactly once.
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for id in SensorId::all() {
            let n = self.readings.iter().filter(|r| r.id == id).count();
            if n != 1 {
                return Err(KinematicsError::MalformedFrame {
                    timestamp_us: self.timestamp_us,
                    sensor: id,
                    count: n,
                });
            }
        }
        if self.readings.len() != SENSOR_COUNT {
            return Err(KinematicsError::MalformedFrame {
                timestamp_us: self.timestamp_us,
                sensor: SensorId::PALM,
                count: self.readings.len(),
            });
        }
        Ok(())
    }

    pub fn transformed(&self, x: &RigidTransform) -> SensorFrame {
        SensorFrame {
            timestamp_us: self.timestamp_us,
            readings: self.readings.iter().map(|r| r.transformed(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("invalid hand shape: {0}")]
    InvalidShape(ValidationReport),
    #[error("invalid hand pose: {0}")]
    InvalidPose(ValidationReport),
    #[error("inconsistent skeleton: {0}")]
    InconsistentSkeleton(ValidationReport),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("unknown sensor id `{0}`")]
    UnknownSensor(String),
    #[error("malformed frame at {timestamp_us} us: sensor {sensor} appears {count} times")]
    MalformedFrame {
        timestamp_us: u64,
        sensor: SensorId,
        count: usize,
    },
}

fn rot_y(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), a)
}

/// Forward kinematics under the default joint limits.
pub fn forward_kinematics(shape: &HandShape, pose: &HandPose) -> Result<Skeleton, KinematicsError> {
    forward_kinematics_with_limits(shape, pose, &JointLimits::default())
}

/// Builds the 21-joint skeleton of `pose` in the pose's output frame
/// (tracker).
///
/// At each MCP the finger's rest frame is rotated by abduction about its
/// z-axis, then flexion about the resulting y-axis, then twist about the
/// bone; PIP and DIP flex about the same (twisted) y-axis, which keeps the
/// whole chain in one plane.
pub fn forward_kinematics_with_limits(
    shape: &HandShape,
    pose: &HandPose,
    limits: &JointLimits,
) -> Result<Skeleton, KinematicsError> {
    let report = validate_shape(shape);
    if !report.is_ok() {
        return Err(KinematicsError::InvalidShape(report));
    }
    let report = validate_pose(pose, limits);
    if !report.is_ok() {
        return Err(KinematicsError::InvalidPose(report));
    }
    let local = palm_local_skeleton(shape, pose)?;
    Ok(local.transformed(&pose.global(), Frame::Tracker))
}

/// Skeleton in the palm-local frame, ignoring the global placement.
fn palm_local_skeleton(shape: &HandShape, pose: &HandPose) -> Result<Skeleton, KinematicsError> {
    let mut joints = [Point3::origin(); JOINT_COUNT];
    joints[JointId::WRIST.index()] = shape.wrist();
    for f in Finger::ALL {
        let base = shape
            .finger_base(f)
            .ok_or_else(|| KinematicsError::DegenerateGeometry(format!("{f} rest direction")))?;
        let a = pose.fingers[f.index()];
        let b = shape.bones[f.index()];
        let mcp_frame = base
            * Rotation3::from_axis_angle(&Vector3::z_axis(), a.abduction)
            * rot_y(a.flexion)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), a.twist);
        let pip_frame = mcp_frame * rot_y(a.pip);
        let dip_frame = pip_frame * rot_y(a.dip);
        let m = shape.mcp(f);
        let p = m + mcp_frame * Vector3::x() * b.proximal;
        let d = p + pip_frame * Vector3::x() * b.middle;
        let t = d + dip_frame * Vector3::x() * b.distal;
        joints[JointId::mcp(f).index()] = m;
        joints[JointId::pip(f).index()] = p;
        joints[JointId::dip(f).index()] = d;
        joints[JointId::tip(f).index()] = t;
    }
    Ok(Skeleton::new(Frame::PalmLocal, joints))
}

/// Palm-local to skeleton-frame transform fitted to the skeleton's palm points.
pub(crate) fn palm_transform(shape: &HandShape, skel: &Skeleton) -> Result<RigidTransform, KinematicsError> {
    fit_rigid(&shape.palm_points, &skel.palm_points())
        .ok_or_else(|| KinematicsError::DegenerateGeometry("collinear palm points".into()))
}

/// Unit normal of a finger's plane, oriented to agree with `reference`.
/// Falls back to `reference` made orthogonal to the chain's main direction
/// when the four points are collinear.
pub(crate) fn finger_plane_normal(chain: &[Point3<f64>; 4], reference: &Vector3<f64>) -> Option<Vector3<f64>> {
    let [m, p, d, t] = *chain;
    let candidates = [
        (p - m).cross(&(d - m)),
        (p - m).cross(&(t - m)),
        (d - m).cross(&(t - m)),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()?;
    let scale = (t - m).norm().max((d - m).norm());
    if best.norm() > 1e-9 * scale * scale {
        let n = best.normalize();
        return Some(if n.dot(reference) < 0.0 { -n } else { n });
    }
    let axis = (t - m).try_normalize(1e-12)?;
    reject(reference, &axis).try_normalize(1e-9)
}

/// Readings the six sensors would report for `skeleton`.
///
/// The nail sensor of each finger sits `l1` behind the tip along the distal
/// bone and `r` out from the bone axis on the nail side. `S6` reads the
/// palm transform composed with `shape.s6_offset`.
pub fn simulate_sensors(
    shape: &HandShape,
    skeleton: &Skeleton,
    timestamp_us: u64,
) -> Result<SensorFrame, KinematicsError> {
    let report = validate_shape(shape);
    if !report.is_ok() {
        return Err(KinematicsError::InvalidShape(report));
    }
    let report = skeleton_consistency(skeleton, shape, &ConsistencyTolerance::default());
    if !report.is_ok() {
        return Err(KinematicsError::InconsistentSkeleton(report));
    }
    let palm = palm_transform(shape, skeleton)?;
    let mut readings = Vec::with_capacity(SENSOR_COUNT);
    for f in Finger::ALL {
        let chain = skeleton.chain(f);
        let [_, _, d, t] = chain;
        let v1 = (t - d)
            .try_normalize(1e-6)
            .filter(|_| (t - d).norm() >= 1e-6)
            .ok_or_else(|| KinematicsError::DegenerateGeometry(format!("{f} distal bone")))?;
        let base = shape.finger_base(f).expect("validated shape");
        let reference = palm.apply_vector(&(base * Vector3::y()));
        let lateral = finger_plane_normal(&chain, &reference)
            .and_then(|n| reject(&n, &v1).try_normalize(1e-9))
            .ok_or_else(|| KinematicsError::DegenerateGeometry(format!("{f} finger plane")))?;
        let v2 = lateral.cross(&v1);
        let v3 = v1.cross(&v2);
        let nail = shape.nail(f);
        let position = t - v1 * nail.tip_offset() - v2 * nail.half_thickness;
        readings.push(SensorReading::new(
            SensorId::nail(f),
            position,
            rotation_from_axes(&v1, &v2, &v3),
        ));
    }
    let s6 = palm.compose(&shape.s6_offset);
    readings.push(SensorReading::new(
        SensorId::PALM,
        Point3::from(s6.translation),
        s6.rotation,
    ));
    Ok(SensorFrame { timestamp_us, readings })
}

/// Additive Gaussian sensor noise: `sigma_pos_mm` per position axis and a
/// rotation vector with `sigma_rot_rad` per axis, applied on the left.
pub fn perturb_frame<R: Rng + ?Sized>(
    frame: &SensorFrame,
    sigma_pos_mm: f64,
    sigma_rot_rad: f64,
    rng: &mut R,
) -> SensorFrame {
    let readings = frame
        .readings
        .iter()
        .map(|r| perturb_reading(r, sigma_pos_mm, sigma_rot_rad, rng))
        .collect();
    SensorFrame {
        timestamp_us: frame.timestamp_us,
        readings,
    }
}

pub fn perturb_reading<R: Rng + ?Sized>(
    r: &SensorReading,
    sigma_pos_mm: f64,
    sigma_rot_rad: f64,
    rng: &mut R,
) -> SensorReading {
    let mut draw = |sigma: f64| -> Vector3<f64> {
        if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("finite sigma");
            Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
        } else {
            Vector3::zeros()
        }
    };
    let dp = draw(sigma_pos_mm);
    let dw = draw(sigma_rot_rad);
    SensorReading::new(
        r.id,
        r.position + dp,
        UnitQuaternion::from_scaled_axis(dw) * r.orientation,
    )
}

/// Largest deviation of `(V1, V2, V3)` from an orthonormal right-handed frame.
pub fn axes_orthonormality_error(r: &SensorReading) -> f64 {
    let (a, b, c) = r.axes();
    let m = Matrix3::from_columns(&[a, b, c]);
    let e = (m.transpose() * m - Matrix3::identity()).abs().max();
    e.max((a.cross(&b) - c).abs().max())
}
