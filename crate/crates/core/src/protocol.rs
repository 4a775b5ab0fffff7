//! Capture protocol: extremal poses, transitions between them, viewpoint
//! regions and capture schedules, plus a coverage audit of pose logs.
//!
//! Viewpoints are directions from the hand toward the camera, expressed in
//! the palm-local frame. The viewing hemisphere is centred on the palm
//! `+x` axis (the direction the fingers point). Azimuth is measured in the
//! palm `y`–`z` plane from `+y` toward `+z`, elevation from that plane toward
//! `+x`. Both are split into 4 uniform half-open bins,
//! `az ∈ [0, 2π)` and `el ∈ [0, π/2)`, and the region id is
//! `4 * elevation_bin + azimuth_bin`. The zenith (`+x` itself) belongs to
//! the top band with azimuth bin 0, i.e. region 12.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{UnitQuaternion, Vector3};

use crate::geometry::{rotation_from_axes, RigidTransform};
use crate::hand::{validate_pose, FingerAngles, HandPose, JointLimits, ValidationReport, FINGER_COUNT};

pub const EXTREMAL_COUNT: usize = 1 << FINGER_COUNT;
pub const PAIR_COUNT: usize = EXTREMAL_COUNT * (EXTREMAL_COUNT - 1) / 2;
pub const REGION_COUNT: usize = 16;
const BINS: usize = 4;

/// Frames per transition giving 1.534 M schemed frames over all pairs.
pub const DEFAULT_FRAMES_PER_TRANSITION: usize = 3093;
const SCHEMED_FRAMES: f64 = 1534.0;
const RANDOM_FRAMES: f64 = 375.0;
const EGOCENTRIC_FRAMES: f64 = 290.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("direction {0:?} is not a unit vector")]
    NotUnit([f64; 3]),
    #[error("direction {0:?} lies outside the viewing hemisphere")]
    OutOfHemisphere([f64; 3]),
    #[error("transition needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid {which} endpoint: {report}")]
    InvalidEndpoint {
        which: &'static str,
        report: ValidationReport,
    },
    #[error("invalid joint limits")]
    InvalidLimits,
    #[error("region id {0} out of range")]
    BadRegion(usize),
}

/// Five bits, bit `i` set when finger `i` is maximally bent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtremalPose(pub u8);

impl ExtremalPose {
    pub fn is_bent(self, finger: usize) -> bool {
        self.0 >> finger & 1 == 1
    }

    /// Flexion angles at their limits, twist and abduction zero, identity
    /// global placement.
    pub fn to_pose(self, limits: &JointLimits) -> HandPose {
        let mut pose = HandPose::rest();
        for f in 0..FINGER_COUNT {
            let pick = |r: crate::hand::AngleRange| if self.is_bent(f) { r.max } else { r.min };
            pose.fingers[f] = FingerAngles {
                twist: 0.0,
                flexion: pick(limits.flexion),
                abduction: 0.0,
                pip: pick(limits.pip),
                dip: pick(limits.dip),
            };
        }
        pose
    }
}

pub fn enumerate_extremal(limits: &JointLimits) -> Vec<HandPose> {
    (0..EXTREMAL_COUNT as u8)
        .map(|i| ExtremalPose(i).to_pose(limits))
        .collect()
}

/// All unordered pairs `(a, b)` with `a < b`, lexicographic.
pub fn enumerate_pairs() -> Vec<(ExtremalPose, ExtremalPose)> {
    let mut out = Vec::with_capacity(PAIR_COUNT);
    for a in 0..EXTREMAL_COUNT as u8 {
        for b in a + 1..EXTREMAL_COUNT as u8 {
            out.push((ExtremalPose(a), ExtremalPose(b)));
        }
    }
    out
}

/// Position of `(a, b)` in [`enumerate_pairs`] order.
pub fn pair_index(a: ExtremalPose, b: ExtremalPose) -> Option<usize> {
    let (a, b) = if a.0 < b.0 {
        (a.0 as usize, b.0 as usize)
    } else {
        (b.0 as usize, a.0 as usize)
    };
    if a == b || b >= EXTREMAL_COUNT {
        return None;
    }
    let n = EXTREMAL_COUNT;
    Some(a * (2 * n - a - 1) / 2 + (b - a - 1))
}

/// `n` poses from `a` to `b`: articulation and translation linear, rotation
/// along the shorter slerp arc. Endpoints are returned unchanged.
pub fn interpolate_transition(
    a: &HandPose,
    b: &HandPose,
    n: usize,
    limits: &JointLimits,
) -> Result<Vec<HandPose>, ProtocolError> {
    if n < 2 {
        return Err(ProtocolError::TooFewFrames(n));
    }
    for (which, p) in [("start", a), ("end", b)] {
        let report = validate_pose(p, limits);
        if !report.is_ok() {
            return Err(ProtocolError::InvalidEndpoint { which, report });
        }
    }
    let (aa, ba) = (a.articulation(), b.articulation());
    let (qa, qb) = (a.unit_rotation(), b.unit_rotation());
    let mut out = Vec::with_capacity(n);
    out.push(*a);
    for k in 1..n - 1 {
        let t = k as f64 / (n - 1) as f64;
        let mut values = [0.0; 25];
        for i in 0..25 {
            values[i] = aa[i] + (ba[i] - aa[i]) * t;
        }
        let mut p = HandPose::rest();
        p.set_articulation(&values);
        let q = qa.try_slerp(&qb, t, 1e-12).unwrap_or(qa);
        // slerp takes the shorter arc between q and -q already
        p.rotation = q.into_inner();
        p.translation = a.translation.lerp(&b.translation, t);
        out.push(p);
    }
    out.push(*b);
    Ok(out)
}

fn bin(value: f64, width: f64) -> usize {
    ((value / width).floor() as usize).min(BINS - 1)
}

/// Region id of a palm-local view direction.
pub fn viewpoint_region(d: &Vector3<f64>) -> Result<usize, ProtocolError> {
    let arr = [d.x, d.y, d.z];
    let n = d.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(ProtocolError::NotUnit(arr));
    }
    if d.x < 0.0 {
        return Err(ProtocolError::OutOfHemisphere(arr));
    }
    let el = d.x.min(1.0).asin();
    let mut az = d.z.atan2(d.y);
    if az < 0.0 {
        az += TAU;
    }
    if az >= TAU {
        az = 0.0;
    }
    let el_bin = bin(el, FRAC_PI_2 / BINS as f64);
    let az_bin = bin(az, TAU / BINS as f64);
    Ok(el_bin * BINS + az_bin)
}

/// Angular bounds `[az_lo, az_hi) × [el_lo, el_hi)` of a region, radians.
pub fn region_bounds(region: usize) -> Result<([f64; 2], [f64; 2]), ProtocolError> {
    if region >= REGION_COUNT {
        return Err(ProtocolError::BadRegion(region));
    }
    let (el, az) = ((region / BINS) as f64, (region % BINS) as f64);
    let (wa, we) = (TAU / BINS as f64, FRAC_PI_2 / BINS as f64);
    Ok(([az * wa, (az + 1.0) * wa], [el * we, (el + 1.0) * we]))
}

/// Palm-local unit direction at azimuth `az` and elevation `el`.
pub fn direction(az: f64, el: f64) -> Vector3<f64> {
    Vector3::new(el.sin(), el.cos() * az.cos(), el.cos() * az.sin())
}

/// A direction inside `region`, with `u`, `v` in `[0, 1)` picking the
/// position uniformly over the region's area.
pub fn direction_in_region(region: usize, u: f64, v: f64) -> Result<Vector3<f64>, ProtocolError> {
    let (az, el) = region_bounds(region)?;
    let a = az[0] + u * (az[1] - az[0]);
    let (s0, s1) = (el[0].sin(), el[1].sin());
    let e = (s0 + v * (s1 - s0)).asin();
    Ok(direction(a, e))
}

/// View direction of a pose seen by a camera at the origin looking down its
/// `+z` axis (orthographic approximation).
pub fn view_direction(pose: &HandPose) -> Vector3<f64> {
    pose.unit_rotation().inverse() * Vector3::new(0.0, 0.0, -1.0)
}

/// A global rotation under which the camera sees the hand from palm-local
/// direction `d`, rolled by `roll` about the viewing axis.
pub fn rotation_for_view(d: &Vector3<f64>, roll: f64) -> UnitQuaternion<f64> {
    let d = d.normalize();
    // palm-local basis whose third axis points away from the camera
    let z = -d;
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    // R maps this basis onto the camera axes
    let basis = rotation_from_axes(&x, &y, &z);
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), roll) * basis.inverse()
}

/// Global placement putting the palm-local point `center` at `target`
/// under rotation `rotation`.
pub fn placement(rotation: UnitQuaternion<f64>, center: &Vector3<f64>, target: &Vector3<f64>) -> RigidTransform {
    RigidTransform::new(rotation, target - rotation * center)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Schemed { a: ExtremalPose, b: ExtremalPose },
    Random,
    Egocentric,
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Schemed { .. } => "schemed",
            SegmentKind::Random => "random",
            SegmentKind::Egocentric => "egocentric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub frames: usize,
    /// `None` for egocentric segments, which lie outside the hemisphere.
    pub region: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CaptureSchedule {
    pub segments: Vec<Segment>,
}

impl CaptureSchedule {
    pub fn builder() -> ScheduleBuilder {
        ScheduleBuilder::default()
    }

    pub fn total_frames(&self) -> usize {
        self.segments.iter().map(|s| s.frames).sum()
    }

    pub fn schemed(&self) -> impl Iterator<Item = &Segment> {
        self.segments
            .iter()
            .filter(|s| matches!(s.kind, SegmentKind::Schemed { .. }))
    }

    /// Per pair index, how many schemed segments cover it.
    pub fn pair_multiplicity(&self) -> Vec<usize> {
        let mut counts = vec![0; PAIR_COUNT];
        for s in self.schemed() {
            if let SegmentKind::Schemed { a, b } = s.kind {
                if let Some(i) = pair_index(a, b) {
                    counts[i] += 1;
                }
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleBuilder {
    frames_per_transition: usize,
    random: bool,
    egocentric: bool,
}

impl Default for ScheduleBuilder {
    fn default() -> Self {
        ScheduleBuilder {
            frames_per_transition: DEFAULT_FRAMES_PER_TRANSITION,
            random: true,
            egocentric: true,
        }
    }
}

impl ScheduleBuilder {
    pub fn frames_per_transition(mut self, n: usize) -> Self {
        self.frames_per_transition = n;
        self
    }

    pub fn random(mut self, on: bool) -> Self {
        self.random = on;
        self
    }

    pub fn egocentric(mut self, on: bool) -> Self {
        self.egocentric = on;
        self
    }

    /// One schemed segment per pair (region `pair_index % 16`), then 16
    /// random segments, one per region, then one egocentric segment. Random
    /// and egocentric budgets keep the 1534 : 375 : 290 proportions.
    pub fn build(self) -> Result<CaptureSchedule, ProtocolError> {
        if self.frames_per_transition < 2 {
            return Err(ProtocolError::TooFewFrames(self.frames_per_transition));
        }
        let mut segments: Vec<Segment> = enumerate_pairs()
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| Segment {
                kind: SegmentKind::Schemed { a, b },
                frames: self.frames_per_transition,
                region: Some(i % REGION_COUNT),
            })
            .collect();
        let schemed_total = (PAIR_COUNT * self.frames_per_transition) as f64;
        if self.random {
            let total = (schemed_total * RANDOM_FRAMES / SCHEMED_FRAMES).round() as usize;
            for r in 0..REGION_COUNT {
                let frames = total / REGION_COUNT + usize::from(r < total % REGION_COUNT);
                if frames > 0 {
                    segments.push(Segment {
                        kind: SegmentKind::Random,
                        frames,
                        region: Some(r),
                    });
                }
            }
        }
        if self.egocentric {
            let frames = (schemed_total * EGOCENTRIC_FRAMES / SCHEMED_FRAMES).round() as usize;
            if frames > 0 {
                segments.push(Segment {
                    kind: SegmentKind::Egocentric,
                    frames,
                    region: None,
                });
            }
        }
        Ok(CaptureSchedule { segments })
    }
}

/// Counts of a pose log per viewpoint region and per nearest extremal pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub regions: [usize; REGION_COUNT],
    /// Poses viewed from outside the hemisphere.
    pub outside: usize,
    pub pairs: Vec<usize>,
}

impl CoverageReport {
    pub fn uncovered_pairs(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per finger, mean of the flexion, PIP and DIP angles normalized to their
/// limit ranges: extremal poses map to the corners of the unit 5-cube.
pub fn flexion_signature(pose: &HandPose, limits: &JointLimits) -> [f64; FINGER_COUNT] {
    let norm = |v: f64, r: crate::hand::AngleRange| if r.span() > 0.0 { (v - r.min) / r.span() } else { 0.0 };
    let mut out = [0.0; FINGER_COUNT];
    for (f, a) in pose.fingers.iter().enumerate() {
        out[f] = (norm(a.flexion, limits.flexion) + norm(a.pip, limits.pip) + norm(a.dip, limits.dip)) / 3.0;
    }
    out
}

fn segment_distance_sq(p: &[f64; FINGER_COUNT], a: ExtremalPose, b: ExtremalPose) -> f64 {
    let corner = |e: ExtremalPose, f: usize| if e.is_bent(f) { 1.0 } else { 0.0 };
    let (mut dot, mut len) = (0.0, 0.0);
    for (f, pf) in p.iter().enumerate() {
        let d = corner(b, f) - corner(a, f);
        dot += (pf - corner(a, f)) * d;
        len += d * d;
    }
    let t = (dot / len).clamp(0.0, 1.0);
    (0..FINGER_COUNT)
        .map(|f| {
            let q = corner(a, f) + t * (corner(b, f) - corner(a, f));
            (p[f] - q) * (p[f] - q)
        })
        .sum()
}

fn nearest_in(sig: &[f64; FINGER_COUNT], pairs: &[(ExtremalPose, ExtremalPose)]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, (a, b)) in pairs.iter().enumerate() {
        let d = segment_distance_sq(sig, *a, *b);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Pair whose corner-to-corner segment in signature space is closest to the
/// pose; ties go to the lower pair index.
pub fn nearest_pair(pose: &HandPose, limits: &JointLimits) -> usize {
    nearest_in(&flexion_signature(pose, limits), &enumerate_pairs())
}

pub fn coverage_report(poses: &[HandPose], limits: &JointLimits) -> CoverageReport {
    let mut report = CoverageReport {
        regions: [0; REGION_COUNT],
        outside: 0,
        pairs: vec![0; PAIR_COUNT],
    };
    let pairs = enumerate_pairs();
    for pose in poses {
        match viewpoint_region(&view_direction(pose)) {
            Ok(r) => report.regions[r] += 1,
            Err(_) => report.outside += 1,
        }
        report.pairs[nearest_in(&flexion_signature(pose, limits), &pairs)] += 1;
    }
    report
}

/// Inverse of [`direction`]: `(azimuth in [0, 2π), elevation)`.
pub fn azimuth_elevation(d: &Vector3<f64>) -> (f64, f64) {
    let mut az = d.z.atan2(d.y);
    if az < 0.0 {
        az += TAU;
    }
    (az % TAU, d.x.clamp(-1.0, 1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let limits = JointLimits::default();
        let poses = enumerate_extremal(&limits);
        assert_eq!(poses.len(), 32);
        assert!(poses.iter().all(|p| validate_pose(p, &limits).is_ok()));
        assert!(poses[0]
            .fingers
            .iter()
            .all(|f| f.flexion == limits.flexion.min && f.pip == limits.pip.min));
        let pairs = enumerate_pairs();
        assert_eq!(pairs.len(), 496);
        for (i, (a, b)) in pairs.iter().enumerate() {
            assert!(a.0 < b.0);
            assert_eq!(pair_index(*a, *b), Some(i));
            assert_eq!(pair_index(*b, *a), Some(i));
        }
        for e in 0..32u8 {
            assert_eq!(pairs.iter().filter(|(a, b)| a.0 == e || b.0 == e).count(), 31);
        }
    }

    #[test]
    fn transitions() {
        let limits = JointLimits::default();
        let ext = enumerate_extremal(&limits);
        let seq = interpolate_transition(&ext[0], &ext[31], 2, &limits).unwrap();
        assert_eq!(seq, vec![ext[0], ext[31]]);
        let seq = interpolate_transition(&ext[0], &ext[31], 3, &limits).unwrap();
        for f in seq[1].fingers {
            assert!((f.flexion - limits.flexion.mid()).abs() < 1e-12);
            assert!((f.pip - limits.pip.mid()).abs() < 1e-12);
        }
        let same = interpolate_transition(&ext[5], &ext[5], 6, &limits).unwrap();
        assert!(same.iter().all(|p| *p == ext[5]));
        assert!(matches!(
            interpolate_transition(&ext[0], &ext[1], 1, &limits),
            Err(ProtocolError::TooFewFrames(1))
        ));
        let mut bad = ext[0];
        bad.fingers[0].pip = -1.0;
        assert!(interpolate_transition(&bad, &ext[1], 4, &limits).is_err());
    }

    #[test]
    fn zenith_and_boundaries() {
        assert_eq!(viewpoint_region(&Vector3::x()).unwrap(), 12);
        assert_eq!(viewpoint_region(&Vector3::y()).unwrap(), 0);
        assert_eq!(viewpoint_region(&Vector3::z()).unwrap(), 1);
        assert_eq!(viewpoint_region(&-Vector3::y()).unwrap(), 2);
        assert!(matches!(
            viewpoint_region(&-Vector3::x()),
            Err(ProtocolError::OutOfHemisphere(_))
        ));
        assert!(matches!(
            viewpoint_region(&Vector3::new(2.0, 0.0, 0.0)),
            Err(ProtocolError::NotUnit(_))
        ));
    }

    #[test]
    fn region_sampling_round_trips() {
        for r in 0..REGION_COUNT {
            for &(u, v) in &[(0.1, 0.1), (0.5, 0.5), (0.9, 0.9)] {
                let d = direction_in_region(r, u, v).unwrap();
                assert_eq!(viewpoint_region(&d).unwrap(), r);
                let q = rotation_for_view(&d, 0.7);
                let pose = HandPose::rest().with_global(&RigidTransform::from_rotation(q));
                assert!((view_direction(&pose) - d).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn schedule_shape() {
        let s = CaptureSchedule::builder().frames_per_transition(4).build().unwrap();
        assert_eq!(s.schemed().count(), 496);
        assert!(s.pair_multiplicity().iter().all(|&c| c == 1));
        assert_eq!(s.segments.iter().filter(|x| x.kind == SegmentKind::Random).count(), 16);
        let random: usize = s
            .segments
            .iter()
            .filter(|x| x.kind == SegmentKind::Random)
            .map(|x| x.frames)
            .sum();
        assert_eq!(random, (496.0 * 4.0 * 375.0 / 1534.0f64).round() as usize);
    }

    #[test]
    fn coverage_basics() {
        let limits = JointLimits::default();
        let empty = coverage_report(&[], &limits);
        assert!(empty.regions.iter().all(|&c| c == 0));
        assert!(empty.pairs.iter().all(|&c| c == 0));
        let ext = enumerate_extremal(&limits);
        // midpoints are avoided: several corner diagonals cross there
        let seq = interpolate_transition(&ext[3], &ext[12], 4, &limits).unwrap();
        let rep = coverage_report(&seq[1..3], &limits);
        assert_eq!(rep.pairs[pair_index(ExtremalPose(3), ExtremalPose(12)).unwrap()], 2);
        assert_eq!(rep.regions.iter().filter(|&&c| c > 0).count(), 1);
    }
}
