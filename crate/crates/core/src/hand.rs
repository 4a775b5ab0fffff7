//! Hand model: joint ids, per-subject shape, the 31-DOF pose and the checks
//! that keep them physically meaningful.
//!
//! Lengths are millimeters and angles radians throughout. The palm-local
//! frame has its origin at the wrist `W`, its x-axis pointing at the middle
//! MCP `M3` and its z-axis along the palm normal out of the back of the hand;
//! `y = z × x`.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use nalgebra::{Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::geometry::{fit_residual, fit_rigid, RigidTransform};

pub const JOINT_COUNT: usize = 21;
pub const FINGER_COUNT: usize = 5;

/// Fingers, thumb first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; FINGER_COUNT] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Little,
    ];

    /// Zero-based position, thumb = 0.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based number used in joint and sensor names, thumb = 1.
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(i: usize) -> Option<Finger> {
        Finger::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Landmark along a finger chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainJoint {
    Mcp,
    Pip,
    Dip,
    Tip,
}

impl ChainJoint {
    const ALL: [ChainJoint; 4] = [ChainJoint::Mcp, ChainJoint::Pip, ChainJoint::Dip, ChainJoint::Tip];

    fn letter(self) -> char {
        match self {
            ChainJoint::Mcp => 'M',
            ChainJoint::Pip => 'P',
            ChainJoint::Dip => 'D',
            ChainJoint::Tip => 'T',
        }
    }
}

/// One of the 21 skeleton joints.
///
/// The derived ordering is the serialization order: `W`, then `M, P, D, T`
/// for each finger from thumb to little.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointId(u8);

impl JointId {
    pub const WRIST: JointId = JointId(0);

    pub fn all() -> impl Iterator<Item = JointId> {
        (0..JOINT_COUNT as u8).map(JointId)
    }

    pub fn from_index(i: usize) -> Option<JointId> {
        (i < JOINT_COUNT).then_some(JointId(i as u8))
    }

    pub fn finger_joint(finger: Finger, joint: ChainJoint) -> JointId {
        let k = ChainJoint::ALL.iter().position(|j| *j == joint).unwrap_or(0);
        JointId((1 + finger.index() * 4 + k) as u8)
    }

    pub fn mcp(finger: Finger) -> JointId {
        Self::finger_joint(finger, ChainJoint::Mcp)
    }
    pub fn pip(finger: Finger) -> JointId {
        Self::finger_joint(finger, ChainJoint::Pip)
    }
    pub fn dip(finger: Finger) -> JointId {
        Self::finger_joint(finger, ChainJoint::Dip)
    }
    pub fn tip(finger: Finger) -> JointId {
        Self::finger_joint(finger, ChainJoint::Tip)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// `None` for the wrist.
    pub fn finger(self) -> Option<Finger> {
        if self.0 == 0 {
            None
        } else {
            Finger::from_index((self.0 as usize - 1) / 4)
        }
    }

    pub fn chain_joint(self) -> Option<ChainJoint> {
        if self.0 == 0 {
            None
        } else {
            Some(ChainJoint::ALL[(self.0 as usize - 1) % 4])
        }
    }

    /// `W`, `M1` .. `T5`.
    pub fn name(self) -> String {
        match (self.finger(), self.chain_joint()) {
            (Some(f), Some(j)) => format!("{}{}", j.letter(), f.number()),
            _ => "W".to_string(),
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown joint id `{0}`")]
pub struct UnknownJoint(pub String);

impl FromStr for JointId {
    type Err = UnknownJoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("W") {
            return Ok(JointId::WRIST);
        }
        let mut chars = t.chars();
        let joint = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('M') => ChainJoint::Mcp,
            Some('P') => ChainJoint::Pip,
            Some('D') => ChainJoint::Dip,
            Some('T') => ChainJoint::Tip,
            _ => return Err(UnknownJoint(s.to_string())),
        };
        let finger = chars
            .as_str()
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=FINGER_COUNT).contains(n))
            .and_then(|n| Finger::from_index(n - 1))
            .ok_or_else(|| UnknownJoint(s.to_string()))?;
        Ok(JointId::finger_joint(finger, joint))
    }
}

/// Bone lengths of one finger, mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerBones {
    /// `|M - P|`
    pub proximal: f64,
    /// `|P - D|`
    pub middle: f64,
    /// `|D - T|`, the bone the nail sensor rides on
    pub distal: f64,
}

impl FingerBones {
    pub fn new(proximal: f64, middle: f64, distal: f64) -> Self {
        Self {
            proximal,
            middle,
            distal,
        }
    }

    pub fn total(&self) -> f64 {
        self.proximal + self.middle + self.distal
    }
}

/// How a nail sensor sits on the distal bone of its finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NailGeometry {
    /// Distal bone length `b`.
    pub distal: f64,
    /// Half the finger thickness `r`.
    pub half_thickness: f64,
    /// `λ`, with `l1 = λ b` from the sensor to the tip and `l2 = (1 - λ) b` to the DIP.
    pub nail_fraction: f64,
}

impl NailGeometry {
    pub fn tip_offset(&self) -> f64 {
        self.nail_fraction * self.distal
    }

    pub fn dip_offset(&self) -> f64 {
        (1.0 - self.nail_fraction) * self.distal
    }
}

/// Per-subject hand geometry, measured once and constant across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct HandShape {
    /// `W, M1..M5` in the palm-local frame.
    pub palm_points: [Point3<f64>; 6],
    pub bones: [FingerBones; FINGER_COUNT],
    pub half_thickness: [f64; FINGER_COUNT],
    pub nail_fraction: [f64; FINGER_COUNT],
    /// Maps S6-local coordinates into the palm-local frame.
    pub s6_offset: RigidTransform,
}

impl Default for HandShape {
    fn default() -> Self {
        Self::reference()
    }
}

impl HandShape {
    /// An adult reference hand, used when no measured shape file is given.
    pub fn reference() -> Self {
        HandShape {
            palm_points: [
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(30.0, 28.0, -8.0),
                Point3::new(88.0, 22.0, 0.0),
                Point3::new(92.0, 0.0, 0.0),
                Point3::new(86.0, -19.0, 0.0),
                Point3::new(78.0, -36.0, -2.0),
            ],
            bones: [
                FingerBones::new(35.0, 31.0, 24.0),
                FingerBones::new(45.0, 25.0, 21.0),
                FingerBones::new(49.0, 29.0, 22.0),
                FingerBones::new(45.0, 28.0, 22.0),
                FingerBones::new(36.0, 21.0, 19.0),
            ],
            half_thickness: [7.5, 6.5, 6.5, 6.0, 5.5],
            nail_fraction: [0.5; FINGER_COUNT],
            s6_offset: RigidTransform::from_translation(Vector3::new(50.0, 0.0, 12.0)),
        }
    }

    pub fn wrist(&self) -> Point3<f64> {
        self.palm_points[0]
    }

    pub fn mcp(&self, finger: Finger) -> Point3<f64> {
        self.palm_points[finger.number()]
    }

    pub fn nail(&self, finger: Finger) -> NailGeometry {
        let i = finger.index();
        NailGeometry {
            distal: self.bones[i].distal,
            half_thickness: self.half_thickness[i],
            nail_fraction: self.nail_fraction[i],
        }
    }

    /// Rest frame of a finger's MCP in palm-local coordinates: x along
    /// `W -> M`, y the flexion axis (palm normal × x), z toward the back of
    /// the finger. `None` if `M` coincides with `W` or lies on the palm normal.
    pub fn finger_base(&self, finger: Finger) -> Option<Rotation3<f64>> {
        let x = self.mcp(finger) - self.wrist();
        let xn = x.norm();
        if !(xn > 1e-9) {
            return None;
        }
        let x = x / xn;
        let y = Vector3::z().cross(&x);
        let yn = y.norm();
        if yn < 1e-9 {
            return None;
        }
        let y = y / yn;
        let z = x.cross(&y);
        Some(Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[
            x, y, z,
        ])))
    }

    /// Distance from `W` to the extended middle fingertip along the palm x-axis
    /// halved: a point near the middle of the hand's extent.
    pub fn center_offset(&self) -> f64 {
        0.5 * (self.mcp(Finger::Middle).coords.norm() + self.bones[Finger::Middle.index()].total())
    }
}

/// Twist, flexion and abduction at the MCP plus the PIP and DIP flexions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FingerAngles {
    pub twist: f64,
    pub flexion: f64,
    pub abduction: f64,
    pub pip: f64,
    pub dip: f64,
}

impl FingerAngles {
    pub const COUNT: usize = 5;
    pub const NAMES: [&'static str; 5] = [
        "mcp_twist",
        "mcp_flexion",
        "mcp_abduction",
        "pip_flexion",
        "dip_flexion",
    ];

    pub fn to_array(self) -> [f64; 5] {
        [self.twist, self.flexion, self.abduction, self.pip, self.dip]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        FingerAngles {
            twist: a[0],
            flexion: a[1],
            abduction: a[2],
            pip: a[3],
            dip: a[4],
        }
    }
}

/// 31-DOF hand pose: global rigid placement of the palm-local frame plus
/// five angles per finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    /// Not forced to unit norm so that malformed input can be reported.
    pub rotation: Quaternion<f64>,
    pub translation: Vector3<f64>,
    pub fingers: [FingerAngles; FINGER_COUNT],
}

impl Default for HandPose {
    fn default() -> Self {
        Self::rest()
    }
}

impl HandPose {
    pub const DOF: usize = 6 + FINGER_COUNT * FingerAngles::COUNT;

    /// All angles zero, identity placement.
    pub fn rest() -> Self {
        HandPose {
            rotation: Quaternion::identity(),
            translation: Vector3::zeros(),
            fingers: [FingerAngles::default(); FINGER_COUNT],
        }
    }

    pub fn with_global(mut self, global: &RigidTransform) -> Self {
        self.rotation = global.rotation.into_inner();
        self.translation = global.translation;
        self
    }

    pub fn unit_rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_quaternion(self.rotation)
    }

    /// Palm-local to output frame.
    pub fn global(&self) -> RigidTransform {
        RigidTransform::new(self.unit_rotation(), self.translation)
    }

    /// The 25 articulation angles, finger-major.
    pub fn articulation(&self) -> [f64; 25] {
        let mut out = [0.0; 25];
        for (f, a) in self.fingers.iter().enumerate() {
            out[f * 5..f * 5 + 5].copy_from_slice(&a.to_array());
        }
        out
    }

    pub fn set_articulation(&mut self, values: &[f64; 25]) {
        for f in 0..FINGER_COUNT {
            let mut a = [0.0; 5];
            a.copy_from_slice(&values[f * 5..f * 5 + 5]);
            self.fingers[f] = FingerAngles::from_array(a);
        }
    }
}

/// Closed interval of allowed angles, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub min: f64,
    pub max: f64,
}

impl AngleRange {
    pub fn degrees(min: f64, max: f64) -> Self {
        AngleRange {
            min: min.to_radians(),
            max: max.to_radians(),
        }
    }

    pub fn contains(&self, a: f64) -> bool {
        a >= self.min && a <= self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// Per-angle limits applied to every finger. Used to generate poses and to
/// validate them; annotation itself never consults them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub twist: AngleRange,
    pub flexion: AngleRange,
    pub abduction: AngleRange,
    pub pip: AngleRange,
    pub dip: AngleRange,
}

impl Default for JointLimits {
    fn default() -> Self {
        JointLimits {
            twist: AngleRange::degrees(-15.0, 15.0),
            flexion: AngleRange::degrees(-30.0, 100.0),
            abduction: AngleRange::degrees(-25.0, 25.0),
            pip: AngleRange::degrees(0.0, 110.0),
            dip: AngleRange::degrees(-10.0, 90.0),
        }
    }
}

impl JointLimits {
    /// Ranges in `FingerAngles` order.
    pub fn ranges(&self) -> [AngleRange; 5] {
        [self.twist, self.flexion, self.abduction, self.pip, self.dip]
    }

    pub fn is_well_formed(&self) -> bool {
        self.ranges()
            .iter()
            .all(|r| r.min.is_finite() && r.max.is_finite() && r.min <= r.max)
    }
}

/// Coordinate frame a skeleton is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Tracker,
    Camera,
    PalmLocal,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Tracker => "tracker",
            Frame::Camera => "camera",
            Frame::PalmLocal => "palm-local",
        })
    }
}

/// 21 joint positions in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skeleton {
    pub frame: Frame,
    pub joints: [Point3<f64>; JOINT_COUNT],
}

impl Skeleton {
    pub fn new(frame: Frame, joints: [Point3<f64>; JOINT_COUNT]) -> Self {
        Skeleton { frame, joints }
    }

    pub fn palm_points(&self) -> [Point3<f64>; 6] {
        let mut out = [self[JointId::WRIST]; 6];
        for f in Finger::ALL {
            out[f.number()] = self[JointId::mcp(f)];
        }
        out
    }

    /// `[M, P, D, T]` of one finger.
    pub fn chain(&self, finger: Finger) -> [Point3<f64>; 4] {
        [
            self[JointId::mcp(finger)],
            self[JointId::pip(finger)],
            self[JointId::dip(finger)],
            self[JointId::tip(finger)],
        ]
    }

    pub fn transformed(&self, x: &RigidTransform, frame: Frame) -> Skeleton {
        let mut joints = self.joints;
        for p in joints.iter_mut() {
            *p = x.apply_point(p);
        }
        Skeleton { frame, joints }
    }

    pub fn max_distance(&self, other: &Skeleton) -> f64 {
        self.joints
            .iter()
            .zip(other.joints.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<JointId> for Skeleton {
    type Output = Point3<f64>;

    fn index(&self, id: JointId) -> &Point3<f64> {
        &self.joints[id.index()]
    }
}

impl IndexMut<JointId> for Skeleton {
    fn index_mut(&mut self, id: JointId) -> &mut Point3<f64> {
        &mut self.joints[id.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bone {
    Proximal,
    Middle,
    Distal,
}

impl fmt::Display for Bone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bone::Proximal => "proximal",
            Bone::Middle => "middle",
            Bone::Distal => "distal",
        })
    }
}

/// A single broken invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("nonpositive bone length: {finger} {bone} = {value}")]
    NonPositiveBoneLength { finger: Finger, bone: Bone, value: f64 },
    #[error("nonpositive half thickness: {finger} = {value}")]
    NonPositiveThickness { finger: Finger, value: f64 },
    #[error("nail fraction out of range: {finger} = {value}")]
    NailFractionOutOfRange { finger: Finger, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("palm points {a} and {b} coincide")]
    CoincidentPalmPoints { a: JointId, b: JointId },
    #[error("palm points are collinear")]
    CollinearPalm,
    #[error("{0} has no usable rest direction")]
    DegenerateFingerBase(Finger),
    #[error("rotation quaternion norm {0} is not unit")]
    NonUnitQuaternion(f64),
    #[error("joint limit table is malformed")]
    MalformedLimits,
    #[error("{finger} {angle} = {value:.6} rad outside [{min:.6}, {max:.6}]")]
    AngleOutOfRange {
        finger: Finger,
        angle: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{finger} joints off-plane by {deviation:.3e} mm")]
    NonPlanarFinger { finger: Finger, deviation: f64 },
    #[error("{finger} {bone} bone length {actual:.9} mm, expected {expected:.9} mm")]
    BoneLengthMismatch {
        finger: Finger,
        bone: Bone,
        expected: f64,
        actual: f64,
    },
    #[error("palm points deviate from the rigid palm by {0:.3e} mm")]
    PalmNotRigid(f64),
}

/// Outcome of a validation pass: empty means every invariant held.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_shape(shape: &HandShape) -> ValidationReport {
    let mut report = ValidationReport::default();
    let finite = shape.palm_points.iter().all(|p| p.coords.iter().all(|c| c.is_finite()))
        && shape
            .bones
            .iter()
            .all(|b| b.proximal.is_finite() && b.middle.is_finite() && b.distal.is_finite())
        && shape.half_thickness.iter().all(|r| r.is_finite())
        && shape.nail_fraction.iter().all(|l| l.is_finite())
        && shape.s6_offset.translation.iter().all(|c| c.is_finite());
    if !finite {
        report.push(Violation::NonFinite("hand shape"));
        return report;
    }
    for f in Finger::ALL {
        let b = shape.bones[f.index()];
        for (bone, value) in [
            (Bone::Proximal, b.proximal),
            (Bone::Middle, b.middle),
            (Bone::Distal, b.distal),
        ] {
            if value <= 0.0 {
                report.push(Violation::NonPositiveBoneLength { finger: f, bone, value });
            }
        }
        let r = shape.half_thickness[f.index()];
        if r <= 0.0 {
            report.push(Violation::NonPositiveThickness { finger: f, value: r });
        }
        let l = shape.nail_fraction[f.index()];
        if !(l > 0.0 && l < 1.0) {
            report.push(Violation::NailFractionOutOfRange { finger: f, value: l });
        }
    }
    let palm_ids: Vec<JointId> = std::iter::once(JointId::WRIST)
        .chain(Finger::ALL.iter().map(|f| JointId::mcp(*f)))
        .collect();
    let mut coincident = false;
    for i in 0..6 {
        for j in i + 1..6 {
            if (shape.palm_points[i] - shape.palm_points[j]).norm() <= 1e-9 {
                coincident = true;
                report.push(Violation::CoincidentPalmPoints {
                    a: palm_ids[i],
                    b: palm_ids[j],
                });
            }
        }
    }
    if !coincident {
        if fit_rigid(&shape.palm_points, &shape.palm_points).is_none() {
            report.push(Violation::CollinearPalm);
        }
        for f in Finger::ALL {
            if shape.finger_base(f).is_none() {
                report.push(Violation::DegenerateFingerBase(f));
            }
        }
    }
    report
}

pub fn validate_pose(pose: &HandPose, limits: &JointLimits) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !limits.is_well_formed() {
        report.push(Violation::MalformedLimits);
        return report;
    }
    let norm = pose.rotation.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        report.push(Violation::NonUnitQuaternion(norm));
    }
    if !pose.translation.iter().all(|c| c.is_finite()) {
        report.push(Violation::NonFinite("global translation"));
    }
    let ranges = limits.ranges();
    for f in Finger::ALL {
        let values = pose.fingers[f.index()].to_array();
        for k in 0..5 {
            if !ranges[k].contains(values[k]) {
                report.push(Violation::AngleOutOfRange {
                    finger: f,
                    angle: FingerAngles::NAMES[k],
                    value: values[k],
                    min: ranges[k].min,
                    max: ranges[k].max,
                });
            }
        }
    }
    report
}

/// Tolerances for [`skeleton_consistency`], mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyTolerance {
    pub plane: f64,
    pub length: f64,
}

impl Default for ConsistencyTolerance {
    fn default() -> Self {
        ConsistencyTolerance {
            plane: 1e-6,
            length: 1e-6,
        }
    }
}

/// Largest distance of the four chain points from their common plane; zero
/// for collinear chains.
pub fn chain_planarity(chain: &[Point3<f64>; 4]) -> f64 {
    let [m, p, d, t] = *chain;
    let candidates = [
        (p - m).cross(&(d - m)),
        (p - m).cross(&(t - m)),
        (d - m).cross(&(t - m)),
    ];
    let normal = candidates
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .unwrap_or_else(Vector3::zeros);
    let scale = [(p - m).norm(), (d - m).norm(), (t - m).norm()]
        .into_iter()
        .fold(0.0, f64::max);
    if normal.norm() <= 1e-12 * scale * scale {
        return 0.0;
    }
    let n = normal.normalize();
    chain.iter().map(|q| (q - m).dot(&n).abs()).fold(0.0, f64::max)
}

/// Checks the per-subject constraints on a full skeleton: rigid palm,
/// constant bone lengths, and coplanar finger chains.
pub fn skeleton_consistency(skel: &Skeleton, shape: &HandShape, tol: &ConsistencyTolerance) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !skel.joints.iter().all(|p| p.coords.iter().all(|c| c.is_finite())) {
        report.push(Violation::NonFinite("skeleton"));
        return report;
    }
    let palm = skel.palm_points();
    match fit_rigid(&shape.palm_points, &palm) {
        Some(x) => {
            let r = fit_residual(&x, &shape.palm_points, &palm);
            if r > tol.length {
                report.push(Violation::PalmNotRigid(r));
            }
        }
        None => report.push(Violation::CollinearPalm),
    }
    for f in Finger::ALL {
        let chain = skel.chain(f);
        let b = shape.bones[f.index()];
        let segments = [
            (Bone::Proximal, b.proximal, 0),
            (Bone::Middle, b.middle, 1),
            (Bone::Distal, b.distal, 2),
        ];
        for (bone, expected, k) in segments {
            let actual = (chain[k + 1] - chain[k]).norm();
            if (actual - expected).abs() > tol.length {
                report.push(Violation::BoneLengthMismatch {
                    finger: f,
                    bone,
                    expected,
                    actual,
                });
            }
        }
        let deviation = chain_planarity(&chain);
        if deviation > tol.plane {
            report.push(Violation::NonPlanarFinger { finger: f, deviation });
        }
    }
    report
}
